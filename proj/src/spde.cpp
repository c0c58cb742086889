#include "stochint/spde.hpp"
#include "stochint/csv.hpp"
#include "stochint/rng.hpp"
#include "stochint/stratonovich.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <map>
#include <ostream>
#include <string>

namespace stochint {

std::string_view to_string(Scheme s) {
    switch (s) {
        case Scheme::ito: return "ito";
        case Scheme::stratonovich_converted: return "stratonovich-converted";
        case Scheme::stratonovich_midpoint: return "stratonovich-midpoint";
    }
    return "unknown";
}

SolutionPath::SolutionPath(std::shared_ptr<const CylindricalNoise> noise, PathValues states, Scheme scheme,
                           std::size_t truncation)
    : noise_(std::move(noise)), states_(std::move(states)), scheme_(scheme), truncation_(truncation) {
    if (!noise_) throw std::invalid_argument("SolutionPath: missing noise");
    if (states_.points() != noise_->steps() + 1) throw std::invalid_argument("SolutionPath: states do not fit the grid");
}

namespace {

void check_inputs(const DriftOp& a, const DiffusionFamily& g, std::span<const double> psi0,
                  const std::shared_ptr<const CylindricalNoise>& noise) {
    if (!noise) throw std::invalid_argument("solver: missing noise");
    if (a.dim() != g.dim() || psi0.size() != a.dim()) throw std::invalid_argument("solver: dimension mismatch");
    if (g.k() > noise->k()) throw std::invalid_argument("solver: diffusion needs more noise modes than supplied");
    for (double v : psi0)
        if (!std::isfinite(v)) throw std::invalid_argument("solver: initial condition is not finite");
}

void check_finite(std::span<const double> x, std::size_t step) {
    for (double v : x) {
        if (!std::isfinite(v)) {
            throw SolverDivergence(step, "solver: non-finite state at step " + std::to_string(step) +
                                             " (growth certification violated)");
        }
    }
}

// out += Σ_i 𝒢_i x ΔW^i_k
void add_noise(const DiffusionFamily& g, const CylindricalNoise& noise, std::size_t k, std::span<const double> x,
               std::span<double> scratch, std::span<double> out, bool reverse) {
    const std::size_t kk = g.k();
    for (std::size_t s = 0; s < kk; ++s) {
        const std::size_t i = reverse ? kk - 1 - s : s;
        g.op(i).apply(x, scratch);
        const double dw = noise.increment(i, k);
        for (std::size_t r = 0; r < out.size(); ++r) out[r] += scratch[r] * dw;
    }
}

}  // namespace

SolutionPath solve_em(const DriftOp& a, const DiffusionFamily& g, std::span<const double> psi0,
                      std::shared_ptr<const CylindricalNoise> noise, const SolveOptions& options) {
    check_inputs(a, g, psi0, noise);
    const std::size_t d = a.dim();
    const std::size_t n = noise->steps();
    const double dt = noise->grid().dt;
    PathValues states(d, n + 1);
    std::copy(psi0.begin(), psi0.end(), states.at(0).begin());
    Vec drift(d), scratch(d);
    for (std::size_t k = 0; k < n; ++k) {
        const auto x = states.at(k);
        const auto next = states.at(k + 1);
        a.apply(noise->grid().time(k), x, drift);
        for (std::size_t r = 0; r < d; ++r) next[r] = x[r] + drift[r] * dt;
        add_noise(g, *noise, k, x, scratch, next, options.reverse_noise_sum);
        check_finite(next, k + 1);
    }
    return SolutionPath(std::move(noise), std::move(states), Scheme::ito, g.k());
}

SolutionPath solve_strat(const DriftOp& a, const DiffusionFamily& g, std::span<const double> psi0,
                         std::shared_ptr<const CylindricalNoise> noise) {
    const DriftOp converted = g.k() == 0 ? a : a.plus_linear(ito_correction_operator(g));
    SolutionPath p = solve_em(converted, g, psi0, std::move(noise));
    return SolutionPath(p.shared_noise(), p.states(), Scheme::stratonovich_converted, g.k());
}

SolutionPath solve_strat_midpoint(const DriftOp& a, const DiffusionFamily& g, std::span<const double> psi0,
                                  std::shared_ptr<const CylindricalNoise> noise) {
    check_inputs(a, g, psi0, noise);
    const std::size_t d = a.dim();
    const std::size_t n = noise->steps();
    const double dt = noise->grid().dt;
    PathValues states(d, n + 1);
    std::copy(psi0.begin(), psi0.end(), states.at(0).begin());
    Vec drift(d), scratch(d), step(d), mid(d);
    for (std::size_t k = 0; k < n; ++k) {
        const auto x = states.at(k);
        const auto next = states.at(k + 1);
        const double tk = noise->grid().time(k);
        a.apply(tk, x, drift);
        for (std::size_t r = 0; r < d; ++r) step[r] = drift[r] * dt;
        add_noise(g, *noise, k, x, scratch, step, false);
        for (std::size_t r = 0; r < d; ++r) mid[r] = x[r] + 0.5 * step[r];
        a.apply(tk + 0.5 * dt, mid, drift);
        for (std::size_t r = 0; r < d; ++r) next[r] = x[r] + drift[r] * dt;
        add_noise(g, *noise, k, mid, scratch, next, false);
        check_finite(next, k + 1);
    }
    return SolutionPath(std::move(noise), std::move(states), Scheme::stratonovich_midpoint, g.k());
}

void write_solution_csv(std::ostream& out, const SolutionPath& path) {
    out << "step,time";
    for (std::size_t i = 0; i < path.dim(); ++i) out << ",coord_" << i;
    out << '\n';
    for (std::size_t k = 0; k < path.states().points(); ++k) {
        out << k << ',' << format_double(path.grid().time(k));
        for (double v : path.state(k)) out << ',' << format_double(v);
        out << '\n';
    }
}

ProcessSampler drift_sampler(const DriftOp& a) {
    return ProcessSampler(a.dim(), 1, [a](const PathView& v, std::span<double> out) {
        a.apply(v.time(), v.state(), out);
    });
}

ProcessSampler diffusion_sampler(const DiffusionFamily& g) {
    if (g.k() == 0) throw std::invalid_argument("diffusion_sampler: empty family");
    return ProcessSampler(g.dim(), g.k(), [g](const PathView& v, std::span<double> out) {
        g.columns(v.state(), out);
    });
}

TruncationTable truncation_convergence(const DriftOp& a, const DiffusionFamily& g, std::span<const double> psi0,
                                       std::span<const std::pair<std::size_t, std::size_t>> pairs,
                                       const TimeGrid& grid, const MonteCarlo& mc) {
    if (pairs.empty()) throw std::invalid_argument("truncation_convergence: no (k, j) pairs");
    std::vector<std::size_t> levels;
    for (const auto& [k, j] : pairs) {
        if (j > k || k > g.k()) throw std::invalid_argument("truncation_convergence: need j <= k <= K");
        levels.push_back(k);
        levels.push_back(j);
    }
    std::sort(levels.begin(), levels.end());
    levels.erase(std::unique(levels.begin(), levels.end()), levels.end());
    std::map<std::size_t, std::size_t> slot;
    std::vector<DiffusionFamily> families;
    for (std::size_t l : levels) {
        slot[l] = families.size();
        families.push_back(g.truncated(l));
    }
    const std::size_t modes = std::max<std::size_t>(1, levels.back());
    const std::size_t d = a.dim();

    auto table = run_paths(mc.n_paths, pairs.size(), mc.workers, [&](std::size_t p, std::span<double> out) {
        auto noise = std::make_shared<const CylindricalNoise>(sample_cylindrical(grid, modes, mc.seed, p));
        std::vector<SolutionPath> paths;
        paths.reserve(families.size());
        for (const auto& f : families) paths.push_back(solve_em(a, f, psi0, noise));
        for (std::size_t q = 0; q < pairs.size(); ++q) {
            const auto& x = paths[slot[pairs[q].first]];
            const auto& y = paths[slot[pairs[q].second]];
            double peak = 0.0;
            Vec diff(d);
            for (std::size_t k = 0; k <= grid.steps; ++k) {
                for (std::size_t r = 0; r < d; ++r) diff[r] = x.state(k)[r] - y.state(k)[r];
                const double n2 = inner(g.scale(), Space::H, diff, diff);
                peak = std::max(peak, n2);
            }
            out[q] = peak;
        }
    });

    TruncationTable result{{}, true};
    for (std::size_t q = 0; q < pairs.size(); ++q) {
        const auto [k, j] = pairs[q];
        result.rows.push_back({k, j, summarize(table.column(q), mc.seed ^ (0x7A11ull + q)), g.tail_sum(j) - g.tail_sum(k)});
    }
    for (const auto& lo : result.rows) {
        for (const auto& hi : result.rows) {
            if (lo.k == hi.k && lo.j < hi.j && hi.error.ci_low > lo.error.ci_high) result.monotone = false;
        }
    }
    return result;
}

UniquenessReport uniqueness_check(const DriftOp& a, const DiffusionFamily& g, std::span<const double> psi0,
                                  std::uint64_t seed, const TimeGrid& grid, std::uint64_t path_index) {
    const std::size_t modes = std::max<std::size_t>(1, g.k());
    auto make = [&](std::uint64_t s) {
        return std::make_shared<const CylindricalNoise>(sample_cylindrical(grid, modes, s, path_index));
    };
    const SolutionPath first = solve_em(a, g, psi0, make(seed));
    const SolutionPath second = solve_em(a, g, psi0, make(seed));
    UniquenessReport rep{true, std::nullopt, 0.0, false};
    for (std::size_t k = 0; k < first.states().points(); ++k) {
        if (std::memcmp(first.state(k).data(), second.state(k).data(), sizeof(double) * first.dim()) != 0) {
            rep.bit_identical = false;
            rep.first_divergent_step = k;
            break;
        }
    }
    const SolutionPath reversed = solve_em(a, g, psi0, first.shared_noise(), SolveOptions{true});
    for (std::size_t e = 0; e < first.states().flat().size(); ++e) {
        rep.reorder_max_divergence =
            std::max(rep.reorder_max_divergence, std::abs(first.states().flat()[e] - reversed.states().flat()[e]));
    }
    const SolutionPath other = solve_em(a, g, psi0, make(seed + 1));
    rep.seeds_differ = g.k() == 0 ||
                       std::memcmp(first.states().flat().data(), other.states().flat().data(),
                                   sizeof(double) * first.states().flat().size()) != 0;
    return rep;
}

namespace {

struct ResidualInputs {
    std::size_t n;
    std::size_t modes;
};

ResidualInputs check_residual_inputs(const SolutionPath& sol, const ProcessSampler& eta, const ProcessSampler& b,
                                     std::size_t dim, double t) {
    if (eta.dim() != sol.dim() || eta.columns() != 1 || b.dim() != sol.dim() || dim != sol.dim()) {
        throw std::invalid_argument("residual: samplers do not match the solution dimension");
    }
    if (b.columns() > sol.noise().k()) throw std::invalid_argument("residual: diffusion has more columns than noise modes");
    return {sol.grid().index_of(t), b.columns()};
}

}  // namespace

double energy_residual(const SolutionPath& sol, const ProcessSampler& eta, const ProcessSampler& b,
                       const SpaceScale& scale, double t) {
    const auto [n, modes] = check_residual_inputs(sol, eta, b, scale.dim(), t);
    const std::size_t d = sol.dim();
    const double dt = sol.grid().dt;
    SamplerCursor ce(eta, sol.noise(), &sol.states());
    SamplerCursor cb(b, sol.noise(), &sol.states());
    double drift = 0.0;
    double stoch = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        const auto x = sol.state(k);
        const auto e = ce.at(k);
        const auto bb = cb.at(k);
        double hs = 0.0;
        for (std::size_t i = 0; i < modes; ++i) {
            const auto col = bb.subspan(i * d, d);
            hs += inner(scale, Space::H, col, col);
        }
        drift += (inner(scale, Space::H, x, e) * 2.0 + hs) * dt;
        for (std::size_t i = 0; i < modes; ++i) {
            stoch += inner(scale, Space::H, x, bb.subspan(i * d, d)) * sol.noise().increment(i, k);
        }
    }
    const auto xn = sol.state(n);
    const auto x0 = sol.state(0);
    return inner(scale, Space::H, xn, xn) - inner(scale, Space::H, x0, x0) - drift - 2.0 * stoch;
}

ItoFunctional::ItoFunctional(const SpaceScale& scale, Value f, Value f_t, Gradient f_x, Hessian f_xx,
                             std::uint64_t check_seed)
    : scale_(scale), f_(std::move(f)), f_t_(std::move(f_t)), f_x_(std::move(f_x)), f_xx_(std::move(f_xx)) {
    if (!f_ || !f_t_ || !f_x_ || !f_xx_) throw std::invalid_argument("ItoFunctional: missing derivative rule");
    const std::size_t d = scale_.dim();
    const double eps = kCheckStep;
    SplitMix64 rng(check_seed);
    Vec x(d), h(d), plus(d), minus(d), grad(d), hess(d);
    auto rel = [](double approx, double exact) { return std::abs(approx - exact) / std::max(std::abs(exact), 1.0); };
    for (std::size_t p = 0; p < kCheckPoints; ++p) {
        const double t = rng.uniform();
        for (std::size_t i = 0; i < d; ++i) {
            x[i] = rng.normal();
            h[i] = rng.normal();
        }
        for (std::size_t i = 0; i < d; ++i) {
            plus[i] = x[i] + eps * h[i];
            minus[i] = x[i] - eps * h[i];
        }
        const double fx = f_(t, x);
        const double fp = f_(t, plus);
        const double fm = f_(t, minus);
        const double time_fd = (f_(t + eps, x) - f_(t - eps, x)) / (2.0 * eps);
        if (rel(time_fd, f_t_(t, x)) > kCheckTolerance) {
            throw std::invalid_argument("ItoFunctional: F_t disagrees with finite differences at point " + std::to_string(p));
        }
        f_x_(t, x, grad);
        if (rel((fp - fm) / (2.0 * eps), inner(scale_, Space::H, grad, h)) > kCheckTolerance) {
            throw std::invalid_argument("ItoFunctional: F_x disagrees with finite differences at point " + std::to_string(p));
        }
        f_xx_(t, x, h, hess);
        if (rel((fp - 2.0 * fx + fm) / (eps * eps), inner(scale_, Space::H, hess, h)) > kCheckTolerance) {
            throw std::invalid_argument("ItoFunctional: F_xx disagrees with finite differences at point " + std::to_string(p));
        }
    }
}

ItoFunctional ItoFunctional::squared_norm(const SpaceScale& scale) {
    return ItoFunctional(
        scale, [scale](double, std::span<const double> x) { return inner(scale, Space::H, x, x); },
        [](double, std::span<const double>) { return 0.0; },
        [](double, std::span<const double> x, std::span<double> out) {
            for (std::size_t i = 0; i < x.size(); ++i) out[i] = 2.0 * x[i];
        },
        [](double, std::span<const double>, std::span<const double> h, std::span<double> out) {
            for (std::size_t i = 0; i < h.size(); ++i) out[i] = 2.0 * h[i];
        });
}

ItoFunctional ItoFunctional::linear(const SpaceScale& scale, Vec v) {
    if (v.size() != scale.dim()) throw std::invalid_argument("ItoFunctional::linear: dimension mismatch");
    return ItoFunctional(
        scale, [scale, v](double, std::span<const double> x) { return inner(scale, Space::H, x, v); },
        [](double, std::span<const double>) { return 0.0; },
        [v](double, std::span<const double>, std::span<double> out) { std::copy(v.begin(), v.end(), out.begin()); },
        [](double, std::span<const double>, std::span<const double>, std::span<double> out) {
            std::fill(out.begin(), out.end(), 0.0);
        });
}

ItoFunctional ItoFunctional::constant(const SpaceScale& scale, double c) {
    return ItoFunctional(
        scale, [c](double, std::span<const double>) { return c; }, [](double, std::span<const double>) { return 0.0; },
        [](double, std::span<const double>, std::span<double> out) { std::fill(out.begin(), out.end(), 0.0); },
        [](double, std::span<const double>, std::span<const double>, std::span<double> out) {
            std::fill(out.begin(), out.end(), 0.0);
        });
}

double ito_formula_residual(const ItoFunctional& f, const SolutionPath& sol, const ProcessSampler& eta,
                            const ProcessSampler& b, double t) {
    const SpaceScale& scale = f.scale();
    const auto [n, modes] = check_residual_inputs(sol, eta, b, scale.dim(), t);
    const std::size_t d = sol.dim();
    const double dt = sol.grid().dt;
    SamplerCursor ce(eta, sol.noise(), &sol.states());
    SamplerCursor cb(b, sol.noise(), &sol.states());
    Vec grad(d), hess(d);
    double drift = 0.0;
    double stoch = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        const double tk = sol.grid().time(k);
        const auto x = sol.state(k);
        const auto e = ce.at(k);
        const auto bb = cb.at(k);
        f.f_x(tk, x, grad);
        double trace = 0.0;
        for (std::size_t i = 0; i < modes; ++i) {
            const auto col = bb.subspan(i * d, d);
            f.f_xx(tk, x, col, hess);
            trace += inner(scale, Space::H, hess, col);
        }
        drift += (f.f_t(tk, x) + inner(scale, Space::H, grad, e) + 0.5 * trace) * dt;
        for (std::size_t i = 0; i < modes; ++i) {
            stoch += inner(scale, Space::H, grad, bb.subspan(i * d, d)) * sol.noise().increment(i, k);
        }
    }
    return f.f(t, sol.state(n)) - f.f(0.0, sol.state(0)) - drift - stoch;
}

double gronwall_envelope(const DriftOp& a, const DiffusionFamily& g, double mean_sq_initial, double t) {
    if (!(t >= 0.0) || !(mean_sq_initial >= 0.0)) throw std::invalid_argument("gronwall_envelope: negative input");
    const double beta = 3.0 * (t * a.growth() + 4.0 * g.h_growth());
    return 3.0 * std::exp(beta * t) * (mean_sq_initial + 1.0);
}

}  // namespace stochint
