#pragma once

#include "stochint/coefficients.hpp"
#include "stochint/integrate.hpp"

#include <cstddef>
#include <optional>
#include <span>

namespace stochint {

/// Decomposition X_t = X_0 + ∫ drift ds + Σ_j ∫ diffusion_j dW^j of an
/// integrand, flattened over all its columns. `drift` has dim = integrand
/// width and one column; `diffusion` has dim = integrand width and one
/// column per driving component.
struct SemimartingaleWitness {
    Vec initial;
    ProcessSampler drift;
    ProcessSampler diffusion;
};

/// An integrand for Stratonovich integration. Integration rejects integrands
/// without a witness.
class StratIntegrand {
public:
    explicit StratIntegrand(ProcessSampler sampler, std::optional<SemimartingaleWitness> witness = std::nullopt);

    const ProcessSampler& sampler() const noexcept { return sampler_; }
    const std::optional<SemimartingaleWitness>& witness() const noexcept { return witness_; }

    /// Ψ_s = W^component_s (dim 1): witness drift 0, diffusion e_component.
    static StratIntegrand brownian(std::size_t component = 0, std::size_t drivers = 1);
    /// Deterministic integrand Ψ(t) with time derivative dΨ/dt.
    static StratIntegrand deterministic(std::size_t dim, std::function<void(double, std::span<double>)> value,
                                        std::function<void(double, std::span<double>)> derivative);

private:
    ProcessSampler sampler_;
    std::optional<SemimartingaleWitness> witness_;
};

/// max_k ‖X_k − X̂_k‖_∞ between the sampler path and the left-point
/// reconstruction from its witness, on [0, t].
double witness_gap(const StratIntegrand& integrand, const CylindricalNoise& noise, double t,
                   const PathValues* states = nullptr);

/// ∫_0^t Ψ ∘ dW^component = Itô sum + ½ partition cross-variation, on the
/// partition of every `stride`-th grid point.
Vec integrate_stratonovich_1d(const StratIntegrand& integrand, const CylindricalNoise& noise, double t,
                              std::size_t component = 0, const PathValues* states = nullptr,
                              std::size_t stride = 1);

/// Midpoint Riemann sum Σ_j Ψ(t_{2j+1})·(W_{t_{2j+2}} − W_{t_{2j}}) on the
/// partition of even grid points; index_of(t) must be even.
Vec stratonovich_midpoint_sum(const ProcessSampler& sampler, const CylindricalNoise& noise, double t,
                              std::size_t component = 0, const PathValues* states = nullptr);

/// Σ_{i<K} (∫ B(e_i) dW^i + ½[B(e_i), W^i]_t) for a K-column integrand.
Vec strat_cylindrical(const StratIntegrand& integrand, const CylindricalNoise& noise, double t,
                      const PathValues* states = nullptr);

/// ½ Σ_i 𝒢_i(𝒢_i φ).
Vec ito_correction(const DiffusionFamily& g, std::span<const double> phi);
/// The matrix of φ ↦ ½ Σ_i 𝒢_i².
LinearOp ito_correction_operator(const DiffusionFamily& g);

/// σ = (Σ λ_i²)^{1/2}, the scale of the Brownian motion Σ λ_i W^i / σ.
double collapse_constant_noise(std::span<const double> lambda);

}  // namespace stochint
