#pragma once

#include "stochint/rng.hpp"
#include "stochint/spaces.hpp"

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

namespace stochint {

/// Uniform grid t_k = k·dt, k = 0..steps, starting at 0.
struct TimeGrid {
    double dt;
    std::size_t steps;

    TimeGrid(double dt, std::size_t steps);
    /// Grid with the largest step count whose spacing does not exceed dt.
    static TimeGrid over(double horizon, double dt);

    double horizon() const noexcept { return dt * static_cast<double>(steps); }
    double time(std::size_t k) const noexcept { return dt * static_cast<double>(k); }
    /// Index of a grid time. Throws for times off the grid or past the horizon.
    std::size_t index_of(double t) const;
    /// Every `factor`-th point; steps must be divisible by factor.
    TimeGrid coarsened(std::size_t factor) const;
};

/// Cumulative Brownian path W_0 = 0, W_k = Σ_{j<k} ΔW_j with ΔW_j ~ N(0, dt).
std::vector<double> sample_brownian(const TimeGrid& grid, const RngSpec& rng);

/// K independent Brownian components sharing one grid: the truncation of
/// 𝓦 = Σ e_i W^i to its first K modes. Stores increments and cumulative values.
class CylindricalNoise {
public:
    /// `increments` is row-major (component, step), K × steps.
    CylindricalNoise(TimeGrid grid, std::size_t k, std::vector<double> increments);

    const TimeGrid& grid() const noexcept { return grid_; }
    std::size_t k() const noexcept { return k_; }
    std::size_t steps() const noexcept { return grid_.steps; }

    /// ΔW^i over (t_step, t_{step+1}].
    double increment(std::size_t component, std::size_t step) const noexcept {
        return increments_[component * grid_.steps + step];
    }
    /// W^i at t_index.
    double value(std::size_t component, std::size_t index) const noexcept {
        return values_[component * (grid_.steps + 1) + index];
    }
    std::span<const double> increments(std::size_t component) const noexcept {
        return std::span<const double>(increments_).subspan(component * grid_.steps, grid_.steps);
    }
    std::span<const double> path(std::size_t component) const noexcept {
        return std::span<const double>(values_).subspan(component * (grid_.steps + 1), grid_.steps + 1);
    }
    std::span<const double> raw_increments() const noexcept { return increments_; }

    /// Same Brownian paths observed on a grid `factor` times coarser.
    CylindricalNoise coarsened(std::size_t factor) const;
    /// First `k` components only.
    CylindricalNoise truncated(std::size_t k) const;

private:
    TimeGrid grid_;
    std::size_t k_;
    std::vector<double> increments_;
    std::vector<double> values_;
};

/// Component i of path `path_index` uses stream (master_seed, path_index, i);
/// component 0 therefore coincides with sample_brownian on that stream.
CylindricalNoise sample_cylindrical(const TimeGrid& grid, std::size_t k, std::uint64_t master_seed,
                                    std::uint64_t path_index = 0);

/// Eigenvalues of a diagonal trace-class covariance Q in the basis (e_i).
struct QSpec {
    std::vector<double> eigenvalues;

    explicit QSpec(std::vector<double> lambda);
    std::size_t size() const noexcept { return eigenvalues.size(); }
    double trace() const noexcept;
};

/// Σ_{i≤K} sqrt(λ_i)·e_i·W^i_t as coordinates of length `dim` (K ≤ dim).
Vec regular_representation(const QSpec& q, const CylindricalNoise& noise, double t, std::size_t dim);

struct CovarianceEstimate {
    double estimate;
    double std_err;
    double reference;  // ⟨Qg,h⟩·min(t,s)
};

/// Monte Carlo estimate of E[X_g(t)·X_h(s)] for X_g(t) = ⟨X̃(t), g⟩ over
/// `n_paths` independent realisations of the regular representation.
CovarianceEstimate covariance_estimate(const QSpec& q, const TimeGrid& grid, std::size_t n_paths,
                                       std::uint64_t seed, std::span<const double> g,
                                       std::span<const double> h, double t, double s);

/// Binary increment dump: 24-byte header ("CYLN", uint32 K, uint64 steps,
/// float64 dt) then K×steps little-endian float64, row-major (component, step).
void write_noise(std::ostream& out, const CylindricalNoise& noise);
CylindricalNoise read_noise(std::istream& in);

}  // namespace stochint
