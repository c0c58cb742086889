#pragma once

#include "stochint/noise.hpp"
#include "stochint/parallel.hpp"
#include "stochint/spaces.hpp"
#include "stochint/stats.hpp"

#include <cstddef>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <vector>

namespace stochint {

/// Grid-sampled states of an H-valued process, (points) × dim row-major.
class PathValues {
public:
    PathValues(std::size_t dim, std::size_t points) : dim_(dim), points_(points), data_(dim * points, 0.0) {}
    PathValues(std::size_t dim, std::vector<double> flat);

    std::size_t dim() const noexcept { return dim_; }
    std::size_t points() const noexcept { return points_; }
    std::span<const double> at(std::size_t k) const noexcept {
        return std::span<const double>(data_).subspan(k * dim_, dim_);
    }
    std::span<double> at(std::size_t k) noexcept { return std::span<double>(data_).subspan(k * dim_, dim_); }
    std::span<const double> flat() const noexcept { return data_; }

private:
    std::size_t dim_;
    std::size_t points_;
    std::vector<double> data_;
};

/// Information available to an integrand at grid index `now`: the noise up to
/// t_now and, when integrating along a solved path, the states up to t_now.
/// Reading anything later throws, so a rule cannot anticipate.
class PathView {
public:
    PathView(const CylindricalNoise& noise, std::size_t now, const PathValues* states = nullptr)
        : noise_(&noise), states_(states), now_(now) {}

    std::size_t now() const noexcept { return now_; }
    double time() const noexcept { return noise_->grid().time(now_); }
    double dt() const noexcept { return noise_->grid().dt; }
    std::size_t k() const noexcept { return noise_->k(); }

    /// W^component at t_index, index ≤ now.
    double value(std::size_t component, std::size_t index) const;
    double value(std::size_t component = 0) const { return value(component, now_); }
    /// ΔW^component over (t_index, t_index+1], index < now.
    double increment(std::size_t component, std::size_t index) const;
    /// Solution state at t_index, index ≤ now.
    std::span<const double> state(std::size_t index) const;
    std::span<const double> state() const { return state(now_); }
    bool has_states() const noexcept { return states_ != nullptr; }

private:
    const CylindricalNoise* noise_;
    const PathValues* states_;
    std::size_t now_;
};

enum class Integrability { square_integrable, locally_square_integrable };
enum class Adaptedness { left_point, anticipating };

/// τ_n = n ∧ inf{t : ∫_0^t f(Ψ_s) ds ≥ n}, f = ‖Ψ‖²_space (HS norm for
/// operator-valued Ψ). Resolved at grid granularity by first passage of the
/// left-point running sum.
struct StoppingRule {
    double level = std::numeric_limits<double>::infinity();
    std::shared_ptr<const SpaceScale> scale;
    Space space = Space::H;

    bool unbounded() const noexcept { return level == std::numeric_limits<double>::infinity(); }
};

/// An adapted integrand evaluable on the grid.
///
/// The rule writes `columns` blocks of length `dim`: one block for an H-valued
/// integrand against a scalar driver, K blocks B(e_1)..B(e_K) for an
/// operator-valued integrand against cylindrical noise.
class ProcessSampler {
public:
    using Rule = std::function<void(const PathView&, std::span<double>)>;

    ProcessSampler(std::size_t dim, std::size_t columns, Rule rule,
                   Integrability integrability = Integrability::square_integrable,
                   Adaptedness adaptedness = Adaptedness::left_point);

    static ProcessSampler constant(Vec a);
    /// Deterministic operator with the given images of the basis vectors.
    static ProcessSampler constant_columns(std::size_t dim, std::vector<Vec> columns);

    std::size_t dim() const noexcept { return dim_; }
    std::size_t columns() const noexcept { return columns_; }
    std::size_t width() const noexcept { return dim_ * columns_; }
    Integrability integrability() const noexcept { return integrability_; }
    Adaptedness adaptedness() const noexcept { return adaptedness_; }
    bool localized() const noexcept { return !stops_.empty(); }

    /// Raw rule evaluation, ignoring any localization.
    void evaluate(const PathView& view, std::span<double> out) const { rule_(view, out); }

    /// Linear combinations, for linearity checks. `plus` rejects localized
    /// operands: the sum of two stopped integrands is not a stopped sum.
    ProcessSampler scaled(double alpha) const;
    ProcessSampler plus(const ProcessSampler& other) const;
    /// Applies T to every column. Stopping times stay those of the original.
    ProcessSampler mapped(const LinearOp& op) const;
    /// ⟨Ψ, φ⟩_H per column, as a dim-1 sampler.
    ProcessSampler paired(const SpaceScale& scale, std::span<const double> phi) const;

private:
    friend ProcessSampler localize(const ProcessSampler&, const StoppingRule&);
    friend class SamplerCursor;

    // A stopping rule together with the sampler whose running functional it
    // monitors; a null monitor means the sampler itself.
    struct Stop {
        StoppingRule rule;
        std::shared_ptr<const ProcessSampler> monitor;
    };
    ProcessSampler with_rule(std::size_t dim, std::size_t columns, Rule rule) const;

    std::size_t dim_;
    std::size_t columns_;
    Rule rule_;
    Integrability integrability_;
    Adaptedness adaptedness_;
    std::vector<Stop> stops_;
};

/// Returns Ψ·1_{t ≤ τ_n}. A localized sampler is square-integrable. Level
/// +∞ leaves the sampler unchanged.
ProcessSampler localize(const ProcessSampler& sampler, const StoppingRule& rule);

/// Evaluates a sampler along one path at nondecreasing grid indices, carrying
/// the running functionals of its stopping rules.
class SamplerCursor {
public:
    SamplerCursor(const ProcessSampler& sampler, const CylindricalNoise& noise,
                  const PathValues* states = nullptr);

    /// Value at grid index k; returns a view into internal storage valid until
    /// the next call.
    std::span<const double> at(std::size_t k);
    /// Grid time at which the localization stopped (nullopt while running).
    std::optional<double> stopped_at() const noexcept { return stopped_at_; }

private:
    void reset();
    void advance();

    const ProcessSampler* sampler_;
    const CylindricalNoise* noise_;
    const PathValues* states_;
    std::size_t next_ = 0;
    std::vector<double> raw_;
    std::vector<double> value_;
    std::vector<double> running_;
    std::vector<double> monitor_raw_;
    std::optional<double> stopped_at_;
    bool stopped_ = false;
};

/// Ψ = Σ a_i 1_{(t_i, t_{i+1}]} with a_m holding on (t_m, ∞). Each a_i may
/// only depend on the noise up to its breakpoint.
class SimpleProcess {
public:
    using ValueRule = std::function<void(const PathView&, std::size_t block, std::span<double>)>;

    SimpleProcess(std::vector<double> breakpoints, std::size_t dim, ValueRule values);
    /// Deterministic block values, one per breakpoint.
    SimpleProcess(std::vector<double> breakpoints, std::vector<Vec> values);

    const std::vector<double>& breakpoints() const noexcept { return breakpoints_; }
    std::size_t dim() const noexcept { return dim_; }
    void value(const PathView& at_breakpoint, std::size_t block, std::span<double> out) const {
        values_(at_breakpoint, block, out);
    }

private:
    std::vector<double> breakpoints_;
    std::size_t dim_;
    ValueRule values_;
};

/// Σ_i a_i (W_{t_{i+1}∧t} − W_{t_i∧t}) exactly, against component `component`.
Vec integrate_simple(const SimpleProcess& proc, const CylindricalNoise& noise, double t,
                     std::size_t component = 0);

/// Left-point Itô sum Σ_{k<n} Ψ(t_k)·ΔW_k up to t = t_n, scalar driver.
Vec integrate_ito(const ProcessSampler& sampler, const CylindricalNoise& noise, double t,
                  std::size_t component = 0);

/// Σ_{i≤K} ∫ B(e_i) dW^i with left-point sums; the sampler must have K columns.
Vec integrate_cylindrical(const ProcessSampler& sampler, const CylindricalNoise& noise, double t);

/// Running integral at every grid point 0..index_of(t). A one-column sampler
/// integrates against component 0; a K-column sampler against all K.
PathValues ito_path(const ProcessSampler& sampler, const CylindricalNoise& noise, double t,
                    const PathValues* states = nullptr);

/// Left-point ∫_0^t ‖Ψ_s‖² ds (HS norm for operator-valued samplers).
double running_square_integral(const ProcessSampler& sampler, const CylindricalNoise& noise,
                               double t, const SpaceScale& scale, Space space);

struct IsometryRecord {
    double lhs;       // E‖∫Ψ dW‖²
    double rhs;       // E∫‖Ψ‖² ds
    double rel_err;   // |lhs − rhs| / |rhs|
    double ci;        // 95% half-width of lhs − rhs
    double lhs_std_err;
    double rhs_std_err;
    StatSummary lhs_summary;  // bootstrap summaries of the per-path samples
    StatSummary rhs_summary;
};

/// Monte Carlo comparison of both sides of the Itô isometry. Operator-valued
/// samplers use the cylindrical integral and the HS norm. Requires N ≥ 100
/// and a square-integrable (or localized) sampler.
IsometryRecord isometry_check(const ProcessSampler& sampler, const SpaceScale& scale, Space space,
                              const TimeGrid& grid, double t, const MonteCarlo& mc);

struct DualityRecord {
    double lhs;           // ⟨∫Ψ dW, φ⟩ on the last path
    double rhs;           // ∫⟨Ψ, φ⟩ dW on the last path
    double max_abs_diff;  // over all paths
    double max_rel_diff;  // max_abs_diff relative to the term scale of each path
};

/// Pathwise comparison of ⟨∫Ψ dW, φ⟩_H and ∫⟨Ψ, φ⟩_H dW on identical noise.
DualityRecord duality_check(const ProcessSampler& sampler, const SpaceScale& scale,
                            std::span<const double> phi, const TimeGrid& grid, double t,
                            const MonteCarlo& mc);

struct PushthroughRecord {
    double max_abs_diff;
    double max_rel_diff;
};

/// Pathwise comparison of T(∫Ψ dW) and ∫TΨ dW on identical noise.
PushthroughRecord operator_pushthrough_check(const LinearOp& op, const ProcessSampler& sampler,
                                             const TimeGrid& grid, double t, const MonteCarlo& mc);

}  // namespace stochint
