#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace stochint {

/// Monte Carlo fan-out settings shared by every statistical operation.
struct MonteCarlo {
    std::size_t n_paths = 1000;
    std::uint64_t seed = 1;
    std::size_t workers = 1;
};

/// Per-path metric samples, metric-major: column(m)[p] is metric m on path p.
class SampleTable {
public:
    SampleTable(std::size_t n_metrics, std::size_t n_paths)
        : n_metrics_(n_metrics), n_paths_(n_paths), data_(n_metrics * n_paths, 0.0) {}

    std::size_t metrics() const noexcept { return n_metrics_; }
    std::size_t paths() const noexcept { return n_paths_; }
    std::span<const double> column(std::size_t m) const noexcept {
        return std::span<const double>(data_).subspan(m * n_paths_, n_paths_);
    }
    double& at(std::size_t m, std::size_t p) noexcept { return data_[m * n_paths_ + p]; }

private:
    std::size_t n_metrics_;
    std::size_t n_paths_;
    std::vector<double> data_;
};

/// Fills `out` (one slot per metric) for a single path.
using PathTask = std::function<void(std::size_t path, std::span<double> out)>;

/// Runs `task` for every path on a bounded pool of `workers` threads. Each
/// path's results land in its own slot, so the table does not depend on the
/// schedule. The first exception thrown by any worker is rethrown here.
SampleTable run_paths(std::size_t n_paths, std::size_t n_metrics, std::size_t workers,
                      const PathTask& task);

}  // namespace stochint
