#pragma once

#include "stochint/coefficients.hpp"
#include "stochint/integrate.hpp"
#include "stochint/stats.hpp"

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

namespace stochint {

enum class Scheme { ito, stratonovich_converted, stratonovich_midpoint };

std::string_view to_string(Scheme s);

/// Solver output: Ψ_k at every grid point of the noise it was driven by.
class SolutionPath {
public:
    SolutionPath(std::shared_ptr<const CylindricalNoise> noise, PathValues states, Scheme scheme,
                 std::size_t truncation);

    const TimeGrid& grid() const noexcept { return noise_->grid(); }
    const CylindricalNoise& noise() const noexcept { return *noise_; }
    const std::shared_ptr<const CylindricalNoise>& shared_noise() const noexcept { return noise_; }
    const PathValues& states() const noexcept { return states_; }
    std::span<const double> state(std::size_t k) const noexcept { return states_.at(k); }
    std::size_t dim() const noexcept { return states_.dim(); }
    Scheme scheme() const noexcept { return scheme_; }
    /// Number of noise modes the diffusion used.
    std::size_t truncation() const noexcept { return truncation_; }

private:
    std::shared_ptr<const CylindricalNoise> noise_;
    PathValues states_;
    Scheme scheme_;
    std::size_t truncation_;
};

/// Raised when a state stops being finite.
class SolverDivergence : public std::runtime_error {
public:
    SolverDivergence(std::size_t step, const std::string& what) : std::runtime_error(what), step_(step) {}
    std::size_t step() const noexcept { return step_; }

private:
    std::size_t step_;
};

struct SolveOptions {
    /// Accumulate Σ_i 𝒢_iΨ ΔW^i from i = K−1 down to 0.
    bool reverse_noise_sum = false;
};

/// Euler–Maruyama: Ψ_{k+1} = Ψ_k + 𝒜(t_k, Ψ_k)dt + Σ_i 𝒢_iΨ_k ΔW^i_k, over
/// the whole noise grid. Requires G.k() ≤ noise K.
SolutionPath solve_em(const DriftOp& a, const DiffusionFamily& g, std::span<const double> psi0,
                      std::shared_ptr<const CylindricalNoise> noise, const SolveOptions& options = {});

/// dΨ = 𝒜dt + 𝒢Ψ∘d𝓦 solved as its Itô form with drift 𝒜 + ½Σ𝒢_i².
SolutionPath solve_strat(const DriftOp& a, const DiffusionFamily& g, std::span<const double> psi0,
                         std::shared_ptr<const CylindricalNoise> noise);

/// dΨ = 𝒜dt + 𝒢Ψ∘d𝓦 solved directly by the explicit midpoint scheme
/// Ψ̄ = Ψ_k + ½(𝒜dt + Σ𝒢_iΨ_kΔW^i), Ψ_{k+1} = Ψ_k + 𝒜(t_k + dt/2, Ψ̄)dt + Σ𝒢_iΨ̄ΔW^i.
/// No correction term appears: the midpoint evaluation produces it.
SolutionPath solve_strat_midpoint(const DriftOp& a, const DiffusionFamily& g, std::span<const double> psi0,
                                  std::shared_ptr<const CylindricalNoise> noise);

/// CSV with header `step,time,coord_0..coord_{d-1}`, 17 significant digits.
void write_solution_csv(std::ostream& out, const SolutionPath& path);

/// η_k = 𝒜(t_k, Ψ_k) read from the solution states.
ProcessSampler drift_sampler(const DriftOp& a);
/// B_k = 𝒢(Ψ_k) as K columns, read from the solution states.
ProcessSampler diffusion_sampler(const DiffusionFamily& g);

struct TruncationRow {
    std::size_t k;
    std::size_t j;
    StatSummary error;  // E sup_{r≤t}‖Φ^k_r − Φ^j_r‖²_H
    double tail;        // Σ_{j ≤ i < k} c_i²
};

struct TruncationTable {
    std::vector<TruncationRow> rows;
    /// False when, for some k, the error at a larger j exceeds the error at a
    /// smaller j beyond both CIs.
    bool monotone;
};

/// Couples Φ^k (first k operators) for all requested truncations on shared
/// noise and tabulates the sup-distance for every (k, j) pair, j ≤ k.
TruncationTable truncation_convergence(const DriftOp& a, const DiffusionFamily& g, std::span<const double> psi0,
                                       std::span<const std::pair<std::size_t, std::size_t>> pairs,
                                       const TimeGrid& grid, const MonteCarlo& mc);

struct UniquenessReport {
    bool bit_identical;
    std::optional<std::size_t> first_divergent_step;
    double reorder_max_divergence;  // forward vs reversed Σ_i order
    bool seeds_differ;              // a different seed gives a different path
};

UniquenessReport uniqueness_check(const DriftOp& a, const DiffusionFamily& g, std::span<const double> psi0,
                                  std::uint64_t seed, const TimeGrid& grid, std::uint64_t path_index = 0);

/// ‖Ψ_t‖² − ‖Ψ_0‖² − Σ_k(2⟨η_k, Ψ_k⟩ + ‖B_k‖²_HS)dt − 2Σ_kΣ_i⟨B_k e_i, Ψ_k⟩ΔW^i_k,
/// all norms in H.
double energy_residual(const SolutionPath& sol, const ProcessSampler& eta, const ProcessSampler& b,
                       const SpaceScale& scale, double t);

/// A functional F(t, x) with its derivatives; F_x and F_xx are H-Riesz
/// representatives, F_xx given as the action h ↦ F_xx(t, x)h.
class ItoFunctional {
public:
    using Value = std::function<double(double t, std::span<const double> x)>;
    using Gradient = std::function<void(double t, std::span<const double> x, std::span<double> out)>;
    using Hessian =
        std::function<void(double t, std::span<const double> x, std::span<const double> h, std::span<double> out)>;

    inline static constexpr std::size_t kCheckPoints = 10;
    inline static constexpr double kCheckStep = 1e-5;
    inline static constexpr double kCheckTolerance = 1e-4;

    /// Checks F_t, F_x and F_xx against central differences of F at
    /// kCheckPoints random (t, x, h); throws std::invalid_argument on mismatch.
    ItoFunctional(const SpaceScale& scale, Value f, Value f_t, Gradient f_x, Hessian f_xx,
                  std::uint64_t check_seed = 0xF00D);

    /// F(x) = ‖x‖²_H.
    static ItoFunctional squared_norm(const SpaceScale& scale);
    /// F(x) = ⟨x, v⟩_H.
    static ItoFunctional linear(const SpaceScale& scale, Vec v);
    static ItoFunctional constant(const SpaceScale& scale, double c);

    const SpaceScale& scale() const noexcept { return scale_; }
    double f(double t, std::span<const double> x) const { return f_(t, x); }
    double f_t(double t, std::span<const double> x) const { return f_t_(t, x); }
    void f_x(double t, std::span<const double> x, std::span<double> out) const { f_x_(t, x, out); }
    void f_xx(double t, std::span<const double> x, std::span<const double> h, std::span<double> out) const {
        f_xx_(t, x, h, out);
    }

private:
    SpaceScale scale_;
    Value f_;
    Value f_t_;
    Gradient f_x_;
    Hessian f_xx_;
};

/// F(t, Ψ_t) − F(0, Ψ_0) − Σ_k[F_t + ⟨F_x, η_k⟩ + ½Σ_i⟨F_xx B_k e_i, B_k e_i⟩]dt
/// − Σ_kΣ_i⟨F_x, B_k e_i⟩ΔW^i_k, all inner products in H.
double ito_formula_residual(const ItoFunctional& f, const SolutionPath& sol, const ProcessSampler& eta,
                            const ProcessSampler& b, double t);

/// c(E‖Ψ_0‖² + 1) with c = 3·exp(βt), β = 3(t·C_A + 4·C_G): C_A the drift
/// growth constant, C_G the H-growth of Σ‖𝒢_iφ‖². Bounds E sup_{r≤t}‖Ψ_r‖²_H
/// for the Euler scheme via Cauchy–Schwarz, Doob's L² inequality and discrete
/// Grönwall.
double gronwall_envelope(const DriftOp& a, const DiffusionFamily& g, double mean_sq_initial, double t);

}  // namespace stochint
