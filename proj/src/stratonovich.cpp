#include "stochint/stratonovich.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace stochint {

StratIntegrand::StratIntegrand(ProcessSampler sampler, std::optional<SemimartingaleWitness> witness)
    : sampler_(std::move(sampler)), witness_(std::move(witness)) {
    if (sampler_.adaptedness() != Adaptedness::left_point) {
        throw std::invalid_argument("StratIntegrand: integrand must be adapted");
    }
    if (witness_) {
        const std::size_t w = sampler_.width();
        if (witness_->initial.size() != w || witness_->drift.dim() != w || witness_->drift.columns() != 1 ||
            witness_->diffusion.dim() != w) {
            throw std::invalid_argument("StratIntegrand: witness shape does not match the integrand");
        }
    }
}

StratIntegrand StratIntegrand::brownian(std::size_t component, std::size_t drivers) {
    if (component >= drivers) throw std::invalid_argument("StratIntegrand::brownian: component out of range");
    ProcessSampler path(1, 1, [component](const PathView& v, std::span<double> out) { out[0] = v.value(component); });
    Vec unit(drivers, 0.0);
    unit[component] = 1.0;
    std::vector<Vec> cols;
    for (double u : unit) cols.push_back(Vec{u});
    return StratIntegrand(std::move(path), SemimartingaleWitness{Vec{0.0}, ProcessSampler::constant(Vec{0.0}),
                                                                 ProcessSampler::constant_columns(1, cols)});
}

StratIntegrand StratIntegrand::deterministic(std::size_t dim, std::function<void(double, std::span<double>)> value,
                                             std::function<void(double, std::span<double>)> derivative) {
    Vec x0(dim);
    value(0.0, x0);
    ProcessSampler path(dim, 1, [value](const PathView& v, std::span<double> out) { value(v.time(), out); });
    ProcessSampler drift(dim, 1, [derivative](const PathView& v, std::span<double> out) { derivative(v.time(), out); });
    return StratIntegrand(std::move(path),
                          SemimartingaleWitness{std::move(x0), std::move(drift),
                                                ProcessSampler::constant_columns(dim, {Vec(dim, 0.0)})});
}

double witness_gap(const StratIntegrand& integrand, const CylindricalNoise& noise, double t,
                   const PathValues* states) {
    if (!integrand.witness()) throw std::invalid_argument("witness_gap: integrand has no semimartingale witness");
    const auto& w = *integrand.witness();
    if (w.diffusion.columns() > noise.k()) throw std::invalid_argument("witness_gap: witness needs more drivers");
    const std::size_t n = noise.grid().index_of(t);
    const std::size_t width = integrand.sampler().width();
    const double dt = noise.grid().dt;
    SamplerCursor path(integrand.sampler(), noise, states);
    SamplerCursor drift(w.drift, noise, states);
    SamplerCursor diffusion(w.diffusion, noise, states);
    Vec x = w.initial;
    double gap = 0.0;
    for (std::size_t k = 0;; ++k) {
        const auto actual = path.at(k);
        for (std::size_t i = 0; i < width; ++i) gap = std::max(gap, std::abs(actual[i] - x[i]));
        if (k == n) break;
        const auto a = drift.at(k);
        const auto b = diffusion.at(k);
        for (std::size_t i = 0; i < width; ++i) x[i] += a[i] * dt;
        for (std::size_t j = 0; j < w.diffusion.columns(); ++j) {
            const double dw = noise.increment(j, k);
            for (std::size_t i = 0; i < width; ++i) x[i] += b[j * width + i] * dw;
        }
    }
    return gap;
}

namespace {

// Σ_col Σ_j [X_col(t_j)·ΔW + ½(X_col(t_{j+1}) − X_col(t_j))·ΔW] on a stride partition,
// column c driven by component drivers[c].
Vec strat_sum(const StratIntegrand& integrand, const CylindricalNoise& noise, double t,
              std::span<const std::size_t> drivers, const PathValues* states, std::size_t stride) {
    if (!integrand.witness()) {
        throw std::invalid_argument("Stratonovich integration needs a semimartingale witness");
    }
    const auto& sampler = integrand.sampler();
    const std::size_t n = noise.grid().index_of(t);
    if (stride == 0 || n % stride != 0) throw std::invalid_argument("Stratonovich: stride must divide the step count");
    const std::size_t d = sampler.dim();
    SamplerCursor cursor(sampler, noise, states);
    Vec ito(d, 0.0), cross(d, 0.0);
    Vec left(cursor.at(0).begin(), cursor.at(0).end());
    for (std::size_t k = 0; k < n; k += stride) {
        const auto right = cursor.at(k + stride);
        for (std::size_t c = 0; c < drivers.size(); ++c) {
            const double dw = noise.value(drivers[c], k + stride) - noise.value(drivers[c], k);
            for (std::size_t i = 0; i < d; ++i) {
                ito[i] += left[c * d + i] * dw;
                cross[i] += (right[c * d + i] - left[c * d + i]) * dw;
            }
        }
        std::copy(right.begin(), right.end(), left.begin());
    }
    for (std::size_t i = 0; i < d; ++i) ito[i] += 0.5 * cross[i];
    return ito;
}

}  // namespace

Vec integrate_stratonovich_1d(const StratIntegrand& integrand, const CylindricalNoise& noise, double t,
                              std::size_t component, const PathValues* states, std::size_t stride) {
    if (integrand.sampler().columns() != 1) {
        throw std::invalid_argument("integrate_stratonovich_1d: integrand must have one column");
    }
    if (component >= noise.k()) throw std::invalid_argument("integrate_stratonovich_1d: component out of range");
    const std::size_t drivers[] = {component};
    return strat_sum(integrand, noise, t, drivers, states, stride);
}

Vec stratonovich_midpoint_sum(const ProcessSampler& sampler, const CylindricalNoise& noise, double t,
                              std::size_t component, const PathValues* states) {
    if (sampler.columns() != 1) throw std::invalid_argument("stratonovich_midpoint_sum: one column required");
    if (component >= noise.k()) throw std::invalid_argument("stratonovich_midpoint_sum: component out of range");
    const std::size_t n = noise.grid().index_of(t);
    if (n % 2 != 0) throw std::invalid_argument("stratonovich_midpoint_sum: needs an even number of steps");
    const std::size_t d = sampler.dim();
    SamplerCursor cursor(sampler, noise, states);
    Vec out(d, 0.0);
    for (std::size_t k = 0; k < n; k += 2) {
        const auto mid = cursor.at(k + 1);
        const double dw = noise.value(component, k + 2) - noise.value(component, k);
        for (std::size_t i = 0; i < d; ++i) out[i] += mid[i] * dw;
    }
    return out;
}

Vec strat_cylindrical(const StratIntegrand& integrand, const CylindricalNoise& noise, double t,
                      const PathValues* states) {
    const std::size_t k = integrand.sampler().columns();
    if (k != noise.k()) throw std::invalid_argument("strat_cylindrical: integrand columns differ from K");
    std::vector<std::size_t> drivers(k);
    for (std::size_t i = 0; i < k; ++i) drivers[i] = i;
    return strat_sum(integrand, noise, t, drivers, states, 1);
}

Vec ito_correction(const DiffusionFamily& g, std::span<const double> phi) {
    if (phi.size() != g.dim()) throw std::invalid_argument("ito_correction: dimension mismatch");
    Vec out(g.dim(), 0.0), once(g.dim()), twice(g.dim());
    for (std::size_t i = 0; i < g.k(); ++i) {
        g.op(i).apply(phi, once);
        g.op(i).apply(once, twice);
        for (std::size_t r = 0; r < out.size(); ++r) out[r] += twice[r];
    }
    for (double& v : out) v *= 0.5;
    return out;
}

LinearOp ito_correction_operator(const DiffusionFamily& g) {
    const std::size_t d = g.dim();
    std::vector<double> m(d * d, 0.0);
    for (std::size_t i = 0; i < g.k(); ++i) {
        const LinearOp sq = g.op(i).compose(g.op(i));
        for (std::size_t e = 0; e < d * d; ++e) m[e] += sq.entries()[e];
    }
    for (double& v : m) v *= 0.5;
    return LinearOp(d, std::move(m));
}

double collapse_constant_noise(std::span<const double> lambda) {
    double s = 0.0;
    for (double l : lambda) {
        if (!std::isfinite(l)) throw std::invalid_argument("collapse_constant_noise: non-finite coefficient");
        s += l * l;
    }
    return std::sqrt(s);
}

}  // namespace stochint
