#include "stochint/coefficients.hpp"
#include "stochint/rng.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace stochint {

namespace {

constexpr double kSlack = 1e-9;

Vec probe_point(SplitMix64& rng, std::size_t dim) {
    const double magnitude = std::pow(10.0, 4.0 * rng.uniform() - 2.0);
    Vec x(dim);
    for (double& v : x) v = magnitude * rng.normal();
    return x;
}

}  // namespace

DriftOp::DriftOp(Trusted, const SpaceScale& scale, Rule rule, double growth, double lipschitz)
    : scale_(scale), rule_(std::move(rule)), growth_(growth), lipschitz_(lipschitz) {}

DriftOp::DriftOp(const SpaceScale& scale, Rule rule, double growth, double lipschitz,
                 double probe_horizon, std::uint64_t probe_seed)
    : DriftOp(Trusted{}, scale, std::move(rule), growth, lipschitz) {
    if (!rule_) throw std::invalid_argument("DriftOp: empty rule");
    if (!(growth_ >= 0.0) || !std::isfinite(growth_) || !(lipschitz_ >= 0.0) || !std::isfinite(lipschitz_)) {
        throw std::invalid_argument("DriftOp: constants must be finite and non-negative");
    }
    const std::size_t d = dim();
    SplitMix64 rng(probe_seed);
    Vec a(d), b(d), diff(d);
    for (std::size_t p = 0; p < kProbes; ++p) {
        const double t = probe_horizon * rng.uniform();
        const Vec phi = probe_point(rng, d);
        Vec psi = probe_point(rng, d);
        for (std::size_t i = 0; i < d; ++i) psi[i] += phi[i];
        rule_(t, phi, a);
        rule_(t, psi, b);
        const double na = norm(scale_, Space::H, a);
        const double nphi = norm(scale_, Space::H, phi);
        if (!std::isfinite(na) || na * na > growth_ * (1.0 + nphi * nphi) * (1.0 + kSlack)) {
            throw std::invalid_argument("DriftOp: growth bound violated at probe " + std::to_string(p));
        }
        for (std::size_t i = 0; i < d; ++i) diff[i] = a[i] - b[i];
        const double lhs = norm(scale_, Space::H, diff);
        for (std::size_t i = 0; i < d; ++i) diff[i] = phi[i] - psi[i];
        const double rhs = lipschitz_ * norm(scale_, Space::H, diff);
        // Absolute floor covers cancellation in a − b for large arguments.
        const double floor = 1e-12 * std::max({1.0, na, norm(scale_, Space::H, b)});
        if (lhs > rhs * (1.0 + kSlack) + floor) {
            throw std::invalid_argument("DriftOp: Lipschitz bound violated at probe " + std::to_string(p));
        }
    }
}

DriftOp DriftOp::linear(const SpaceScale& scale, const LinearOp& a) {
    if (a.dim() != scale.dim()) throw std::invalid_argument("DriftOp::linear: dimension mismatch");
    const double n = a.operator_norm(scale, Space::H, Space::H);
    return DriftOp(Trusted{}, scale,
                   [a](double, std::span<const double> phi, std::span<double> out) { a.apply(phi, out); },
                   n * n, n);
}

DriftOp DriftOp::zero(const SpaceScale& scale) {
    return DriftOp(Trusted{}, scale,
                   [](double, std::span<const double>, std::span<double> out) {
                       std::fill(out.begin(), out.end(), 0.0);
                   },
                   0.0, 0.0);
}

Vec DriftOp::apply(double t, std::span<const double> phi) const {
    Vec out(dim());
    rule_(t, phi, out);
    return out;
}

DriftOp DriftOp::plus_linear(const LinearOp& m) const {
    if (m.dim() != dim()) throw std::invalid_argument("DriftOp::plus_linear: dimension mismatch");
    const double nm = m.operator_norm(scale_, Space::H, Space::H);
    // ‖𝒜φ + Mφ‖ ≤ (√C + ‖M‖)(1 + ‖φ‖²)^{1/2}.
    const double root = std::sqrt(growth_) + nm;
    Rule base = rule_;
    return DriftOp(Trusted{}, scale_,
                   [base, m](double t, std::span<const double> phi, std::span<double> out) {
                       base(t, phi, out);
                       Vec extra = m.apply(phi);
                       for (std::size_t i = 0; i < out.size(); ++i) out[i] += extra[i];
                   },
                   root * root, lipschitz_ + nm);
}

double chain_bound(const SpaceScale& scale, const LinearOp& op) {
    return std::max({op.operator_norm(scale, Space::V, Space::H), op.operator_norm(scale, Space::H, Space::U),
                     op.operator_norm(scale, Space::U, Space::X)});
}

DiffusionFamily::DiffusionFamily(Trusted, const SpaceScale& scale, std::vector<LinearOp> ops,
                                 std::vector<double> constants)
    : scale_(scale), ops_(std::move(ops)), constants_(std::move(constants)) {}

DiffusionFamily::DiffusionFamily(const SpaceScale& scale, std::vector<LinearOp> ops, std::vector<double> constants)
    : scale_(scale), ops_(std::move(ops)), constants_(std::move(constants)) {
    if (!constants_.empty() && constants_.size() != ops_.size()) {
        throw std::invalid_argument("DiffusionFamily: one constant per operator");
    }
    const bool supplied = !constants_.empty();
    constants_.resize(ops_.size());
    for (std::size_t i = 0; i < ops_.size(); ++i) {
        if (ops_[i].dim() != scale_.dim()) throw std::invalid_argument("DiffusionFamily: dimension mismatch");
        const double exact = chain_bound(scale_, ops_[i]);
        if (!supplied) {
            constants_[i] = exact;
        } else if (!(constants_[i] >= exact * (1.0 - 1e-12)) || !std::isfinite(constants_[i])) {
            throw std::invalid_argument("DiffusionFamily: constant c_" + std::to_string(i) +
                                        " is below the operator bound " + std::to_string(exact));
        }
    }
}

double DiffusionFamily::sum_sq_constants() const noexcept { return tail_sum(0); }

double DiffusionFamily::tail_sum(std::size_t j) const {
    double s = 0.0;
    for (std::size_t i = std::min(j, ops_.size()); i < ops_.size(); ++i) s += constants_[i] * constants_[i];
    return s;
}

double DiffusionFamily::h_growth() const {
    double s = 0.0;
    for (const auto& op : ops_) {
        const double n = op.operator_norm(scale_, Space::H, Space::H);
        s += n * n;
    }
    return s;
}

DiffusionFamily DiffusionFamily::truncated(std::size_t k) const {
    if (k > ops_.size()) throw std::invalid_argument("DiffusionFamily::truncated: k exceeds K");
    return DiffusionFamily(Trusted{}, scale_, std::vector<LinearOp>(ops_.begin(), ops_.begin() + k),
                           std::vector<double>(constants_.begin(), constants_.begin() + k));
}

void DiffusionFamily::columns(std::span<const double> phi, std::span<double> out) const {
    const std::size_t d = dim();
    for (std::size_t i = 0; i < ops_.size(); ++i) ops_[i].apply(phi, out.subspan(i * d, d));
}

}  // namespace stochint
