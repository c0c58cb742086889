#pragma once

#include "stochint/integrate.hpp"
#include "stochint/stats.hpp"

#include <cstddef>
#include <span>
#include <vector>

namespace stochint {

/// Grid-aligned partition 0 = t_0 < t_1 < … < t_m = horizon.
class Partition {
public:
    Partition(const TimeGrid& grid, std::vector<std::size_t> indices);

    /// Every `stride`-th grid point on [0, t]; stride must divide index_of(t).
    static Partition uniform(const TimeGrid& grid, std::size_t stride, double t);
    /// 2^level equal intervals on [0, t].
    static Partition dyadic(const TimeGrid& grid, unsigned level, double t);
    static Partition from_times(const TimeGrid& grid, std::span<const double> times);

    const std::vector<std::size_t>& indices() const noexcept { return indices_; }
    std::size_t intervals() const noexcept { return indices_.size() - 1; }
    double mesh() const noexcept { return mesh_; }
    double horizon() const noexcept { return dt_ * static_cast<double>(indices_.back()); }

private:
    std::vector<std::size_t> indices_;
    double dt_;
    double mesh_;
};

/// Σ_j ‖X_{t_{j+1}} − X_{t_j}‖²_space.
double quadratic_variation(const PathValues& x, const Partition& partition, const SpaceScale& scale,
                           Space space = Space::H);
/// Scalar path version, Euclidean.
double quadratic_variation(std::span<const double> x, const Partition& partition);

/// Σ_j (X_{t_{j+1}} − X_{t_j})·(y_{t_{j+1}} − y_{t_j}), coordinatewise.
Vec cross_variation(const PathValues& x, std::span<const double> y, const Partition& partition);

struct VariationReport {
    double estimate;    // mean partition QV
    double reference;   // mean ∫‖Ψ‖² ds
    double abs_err;     // mean |QV − ∫‖Ψ‖² ds|, the L¹ partition error
    double mesh;
    std::size_t n_paths;
    StatSummary error;  // bootstrap summary of the per-path L¹ error
};

struct QvLadder {
    std::vector<VariationReport> rungs;
    /// Every rung's error CI lies strictly below the previous rung's.
    bool decreasing_beyond_ci;
};

/// Compares the partition QV of ∫Ψ dW (or ∫B d𝓦) with ∫‖Ψ‖² ds along a
/// sequence of partitions of [0, t] given by grid strides, coarsest first.
QvLadder qv_identity_check(const ProcessSampler& sampler, const SpaceScale& scale, Space space,
                           const TimeGrid& grid, double t, std::span<const std::size_t> strides,
                           const MonteCarlo& mc);

struct BdgResult {
    double ratio;            // E sup‖∫B d𝓦‖ / E(∫‖B‖²_HS ds)^{1/2}; 0 when B ≡ 0
    StatSummary running_max;
    StatSummary root_energy;
};

BdgResult bdg_ratio(const ProcessSampler& sampler, const SpaceScale& scale, Space space,
                    const TimeGrid& grid, double t, const MonteCarlo& mc);

}  // namespace stochint
