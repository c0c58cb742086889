#pragma once

#include "stochint/spaces.hpp"

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace stochint {

/// Drift 𝒜(t, φ) with certified linear growth ‖𝒜(t,φ)‖²_H ≤ C(1 + ‖φ‖²_H)
/// and Lipschitz bound ‖𝒜(t,φ) − 𝒜(t,ψ)‖_H ≤ L‖φ − ψ‖_H.
class DriftOp {
public:
    using Rule = std::function<void(double t, std::span<const double> phi, std::span<double> out)>;

    inline static constexpr std::size_t kProbes = 1000;

    /// Certifies the claimed constants on kProbes random points with times in
    /// [0, probe_horizon]; throws std::invalid_argument naming the first
    /// violated bound.
    DriftOp(const SpaceScale& scale, Rule rule, double growth, double lipschitz,
            double probe_horizon = 1.0, std::uint64_t probe_seed = 0x5eed);

    /// φ ↦ Aφ with exact constants C = ‖A‖², L = ‖A‖ (H → H).
    static DriftOp linear(const SpaceScale& scale, const LinearOp& a);
    static DriftOp zero(const SpaceScale& scale);

    std::size_t dim() const noexcept { return scale_.dim(); }
    const SpaceScale& scale() const noexcept { return scale_; }
    double growth() const noexcept { return growth_; }
    double lipschitz() const noexcept { return lipschitz_; }

    void apply(double t, std::span<const double> phi, std::span<double> out) const { rule_(t, phi, out); }
    Vec apply(double t, std::span<const double> phi) const;

    /// 𝒜 + M for a fixed linear M, with constants updated from ‖M‖.
    DriftOp plus_linear(const LinearOp& m) const;

private:
    struct Trusted {};
    DriftOp(Trusted, const SpaceScale& scale, Rule rule, double growth, double lipschitz);

    SpaceScale scale_;
    Rule rule_;
    double growth_;
    double lipschitz_;
};

/// Linear diffusion family 𝒢_i, i < K, with constants c_i bounding every
/// link of the chain: ‖𝒢_i φ‖_H ≤ c_i‖φ‖_V, ‖𝒢_i φ‖_U ≤ c_i‖φ‖_H,
/// ‖𝒢_i φ‖_X ≤ c_i‖φ‖_U.
class DiffusionFamily {
public:
    /// Constants default to the exact chain bounds. Supplied constants smaller
    /// than the exact bounds are rejected.
    DiffusionFamily(const SpaceScale& scale, std::vector<LinearOp> ops, std::vector<double> constants = {});

    std::size_t k() const noexcept { return ops_.size(); }
    std::size_t dim() const noexcept { return scale_.dim(); }
    const SpaceScale& scale() const noexcept { return scale_; }
    const LinearOp& op(std::size_t i) const { return ops_.at(i); }
    double constant(std::size_t i) const { return constants_.at(i); }
    const std::vector<double>& constants() const noexcept { return constants_; }

    /// Σ_i c_i².
    double sum_sq_constants() const noexcept;
    /// Σ_{j ≤ i < K} c_i², the tail beyond the first j operators.
    double tail_sum(std::size_t j) const;
    /// C_G with Σ_i ‖𝒢_i φ‖²_H ≤ C_G‖φ‖²_H, from exact H → H norms.
    double h_growth() const;

    /// The first k operators, constants unchanged.
    DiffusionFamily truncated(std::size_t k) const;

    /// Writes 𝒢_0φ, …, 𝒢_{K−1}φ as K consecutive blocks.
    void columns(std::span<const double> phi, std::span<double> out) const;

private:
    struct Trusted {};
    DiffusionFamily(Trusted, const SpaceScale& scale, std::vector<LinearOp> ops, std::vector<double> constants);

    SpaceScale scale_;
    std::vector<LinearOp> ops_;
    std::vector<double> constants_;
};

/// Exact max over the chain links of ‖T‖, as certified by DiffusionFamily.
double chain_bound(const SpaceScale& scale, const LinearOp& op);

}  // namespace stochint
