#include "stochint/experiment.hpp"
#include "stochint/csv.hpp"
#include "stochint/integrate.hpp"
#include "stochint/rng.hpp"
#include "stochint/spde.hpp"
#include "stochint/stratonovich.hpp"
#include "stochint/variation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <ostream>
#include <stdexcept>

namespace stochint {

// ---------------------------------------------------------------------------
// Names, validation, metrics
// ---------------------------------------------------------------------------

namespace {

constexpr std::pair<Kind, std::string_view> kKindNames[] = {
    {Kind::isometry, "isometry"},       {Kind::duality, "duality"},   {Kind::pushthrough, "pushthrough"},
    {Kind::qv, "qv"},                   {Kind::cross, "cross"},       {Kind::bdg, "bdg"},
    {Kind::strat_convert, "strat_convert"}, {Kind::collapse, "collapse"}, {Kind::solve, "solve"},
    {Kind::truncation, "truncation"},   {Kind::energy, "energy"},     {Kind::ito_formula, "ito_formula"},
};

}  // namespace

std::string_view to_string(Kind k) {
    for (const auto& [kind, name] : kKindNames)
        if (kind == k) return name;
    return "unknown";
}

std::optional<Kind> parse_kind(std::string_view name) {
    if (name == "strat-convert") return Kind::strat_convert;
    if (name == "truncate") return Kind::truncation;
    if (name == "ito-formula") return Kind::ito_formula;
    for (const auto& [kind, n] : kKindNames)
        if (n == name) return kind;
    return std::nullopt;
}

bool is_statistical(Kind k) {
    return k != Kind::duality && k != Kind::pushthrough && k != Kind::ito_formula;
}

void Experiment::validate() const {
    auto fail = [](const std::string& msg) { throw std::invalid_argument(msg); };
    if (n_paths == 0) fail("n_paths must be positive");
    if (is_statistical(kind) && n_paths < kMinStatisticalPaths) {
        fail(std::string(to_string(kind)) + " is statistical and needs n_paths >= " +
             std::to_string(kMinStatisticalPaths) + " (got " + std::to_string(n_paths) + ")");
    }
    if (!(dt > 0.0) || !std::isfinite(dt)) fail("dt must be positive");
    if (!(t_final > 0.0) || !std::isfinite(t_final)) fail("t_final must be positive");
    if (dt > t_final) fail("dt must not exceed t_final");
    if (!(tolerance > 0.0) || !std::isfinite(tolerance)) fail("tolerance must be positive");
    if (workers == 0) fail("workers must be positive");
    for (double l : lambda)
        if (!std::isfinite(l)) fail("lambda entries must be finite");
    if (!std::isfinite(theta) || !std::isfinite(sigma)) fail("theta and sigma must be finite");
    switch (kind) {
        case Kind::isometry:
        case Kind::duality:
        case Kind::pushthrough:
            if (integrand != "constant" && integrand != "brownian" && integrand != "cylindrical") {
                fail("integrand must be constant, brownian or cylindrical");
            }
            break;
        case Kind::qv:
            if (integrand != "constant" && integrand != "brownian" && integrand != "cylindrical" &&
                integrand != "smooth") {
                fail("integrand must be constant, brownian, cylindrical or smooth");
            }
            if (TimeGrid::over(t_final, dt).steps % 2 != 0) fail("qv needs an even number of steps");
            break;
        case Kind::truncation:
            if (j_max == 0) fail("j_max must be positive");
            if (k_modes != 0 && k_modes <= j_max) fail("k_modes must exceed j_max");
            break;
        default: break;
    }
    if (kind == Kind::strat_convert && !lambda.empty() && lambda.size() > 64) fail("too many modes");
}

StatSummary exact_value(double value, std::size_t n) { return StatSummary{value, 0.0, value, value, n}; }

Metric make_metric(std::string name, StatSummary stat, double reference, double tolerance, Check check) {
    Metric m{std::move(name), stat, reference, tolerance, check, true};
    const double x = stat.mean;
    switch (check) {
        case Check::relative: m.pass = std::abs(x - reference) <= tolerance * std::abs(reference); break;
        case Check::absolute: m.pass = std::abs(x - reference) <= tolerance; break;
        case Check::at_most: m.pass = x <= tolerance; break;
        case Check::at_least: m.pass = x >= tolerance; break;
        case Check::covers:
            m.pass = std::abs(x - reference) <= std::max(tolerance * stat.std_err, 1e-300);
            break;
        case Check::within_factor: m.pass = x >= reference / tolerance && x <= reference * tolerance; break;
        case Check::flag: m.pass = x == 1.0; break;
        case Check::info: m.pass = true; break;
    }
    if (check != Check::info && !std::isfinite(x)) m.pass = false;
    return m;
}

const Metric* Report::find(std::string_view name) const {
    for (const auto& m : metrics)
        if (m.name == name) return &m;
    return nullptr;
}

// ---------------------------------------------------------------------------
// Shared fixtures
// ---------------------------------------------------------------------------

namespace {

constexpr double kCoversZ = 3.0;

TimeGrid grid_for(const Experiment& e) { return TimeGrid::over(e.t_final, e.dt); }
MonteCarlo mc_for(const Experiment& e) { return MonteCarlo{e.n_paths, e.seed, e.workers}; }

std::vector<double> lambda_or(const Experiment& e, std::vector<double> fallback) {
    return e.lambda.empty() ? fallback : e.lambda;
}

const Vec kConstantIntegrand{1.0, 2.0};

struct IntegrandCase {
    ProcessSampler sampler;
    double reference;  // E∫_0^t ‖Ψ‖² ds
};

IntegrandCase integrand_case(const Experiment& e) {
    const double t = e.t_final;
    if (e.integrand == "constant") {
        return {ProcessSampler::constant(kConstantIntegrand), t * inner(SpaceScale::uniform(2), Space::H,
                                                                        kConstantIntegrand, kConstantIntegrand)};
    }
    if (e.integrand == "brownian") {
        return {ProcessSampler(1, 1, [](const PathView& v, std::span<double> out) { out[0] = v.value(0); }),
                0.5 * t * t};
    }
    const auto lambda = lambda_or(e, {1.0, 1.0});
    std::vector<Vec> cols;
    double sum = 0.0;
    for (std::size_t i = 0; i < lambda.size(); ++i) {
        Vec c(lambda.size(), 0.0);
        c[i] = lambda[i];
        cols.push_back(c);
        sum += lambda[i] * lambda[i];
    }
    return {ProcessSampler::constant_columns(lambda.size(), cols), t * sum};
}

StatSummary summary_of(std::span<const double> samples, std::uint64_t seed, std::uint64_t tag) {
    return summarize(samples, seed ^ (tag * 0x9E3779B97F4A7C15ull));
}

/// sqrt of a summary of squared errors (RMS), CI mapped through sqrt.
StatSummary root_of(const StatSummary& s) {
    const double m = std::sqrt(std::max(s.mean, 0.0));
    return StatSummary{m, m > 0.0 ? s.std_err / (2.0 * m) : 0.0, std::sqrt(std::max(s.ci_low, 0.0)),
                       std::sqrt(std::max(s.ci_high, 0.0)), s.n};
}

std::string tag_value(double v) { return format_double(v); }

// Additive-noise Ornstein–Uhlenbeck process dX = −θX dt + σ dW, written as a
// linear system on (X, c) with c ≡ 1 so the diffusion stays linear:
// A = diag(−θ, 0), 𝒢 = [[0, σ], [0, 0]].
struct OuSystem {
    SpaceScale scale = SpaceScale::uniform(2);
    DriftOp drift;
    DiffusionFamily diffusion;
    Vec psi0{0.0, 1.0};
};

OuSystem ou_system(double theta, double sigma) {
    const SpaceScale s = SpaceScale::uniform(2);
    return OuSystem{s, DriftOp::linear(s, LinearOp(2, {-theta, 0.0, 0.0, 0.0})),
                    DiffusionFamily(s, {LinearOp(2, {0.0, sigma, 0.0, 0.0})}), Vec{0.0, 1.0}};
}

LinearOp rotation(double angle, double factor) {
    const double c = std::cos(angle), s = std::sin(angle);
    return LinearOp(2, {factor * c, -factor * s, factor * s, factor * c});
}

// c_i = σ·2^{-i}, i = 1..K, each 𝒢_i a scaled rotation so ‖𝒢_i‖ = c_i exactly.
DiffusionFamily geometric_family(const SpaceScale& s, std::size_t k, double sigma) {
    std::vector<LinearOp> ops;
    for (std::size_t i = 1; i <= k; ++i) ops.push_back(rotation(static_cast<double>(i), sigma * std::ldexp(1.0, -static_cast<int>(i))));
    return DiffusionFamily(s, std::move(ops));
}

DiffusionFamily diagonal_family(const SpaceScale& s, std::span<const double> lambda) {
    std::vector<LinearOp> ops;
    for (double l : lambda) ops.push_back(LinearOp::scaled_identity(s.dim(), l));
    return DiffusionFamily(s, std::move(ops));
}

// ---------------------------------------------------------------------------
// Kinds
// ---------------------------------------------------------------------------

void run_isometry(const Experiment& e, std::vector<Metric>& out) {
    const auto c = integrand_case(e);
    const auto scale = SpaceScale::uniform(c.sampler.dim());
    const auto r = isometry_check(c.sampler, scale, Space::H, grid_for(e), e.t_final, mc_for(e));
    out.push_back(make_metric("lhs", r.lhs_summary, c.reference, e.tolerance, Check::relative));
    out.push_back(make_metric("rhs", r.rhs_summary, c.reference, e.tolerance, Check::relative));
    out.push_back(make_metric("rel_err", exact_value(r.rel_err, e.n_paths), 0.0, e.tolerance, Check::at_most));
}

void run_duality(const Experiment& e, std::vector<Metric>& out) {
    const auto c = integrand_case(e);
    const auto scale = SpaceScale::uniform(c.sampler.dim());
    Vec phi(c.sampler.dim());
    for (std::size_t i = 0; i < phi.size(); ++i) phi[i] = 0.7 - 0.3 * static_cast<double>(i);
    const auto r = duality_check(c.sampler, scale, phi, grid_for(e), e.t_final, mc_for(e));
    out.push_back(make_metric("max_abs_diff", exact_value(r.max_abs_diff, e.n_paths), 0.0, 0.0, Check::info));
    out.push_back(make_metric("max_rel_diff", exact_value(r.max_rel_diff, e.n_paths), 0.0, 1e-10, Check::at_most));
}

void run_pushthrough(const Experiment& e, std::vector<Metric>& out) {
    const auto c = integrand_case(e);
    const std::size_t d = c.sampler.dim();
    SplitMix64 rng(0x0E5 + d);
    std::vector<double> entries(d * d);
    for (double& v : entries) v = rng.normal();
    const auto r = operator_pushthrough_check(LinearOp(d, entries), c.sampler, grid_for(e), e.t_final, mc_for(e));
    out.push_back(make_metric("max_abs_diff", exact_value(r.max_abs_diff, e.n_paths), 0.0, 0.0, Check::info));
    out.push_back(make_metric("max_rel_diff", exact_value(r.max_rel_diff, e.n_paths), 0.0, 1e-10, Check::at_most));
}

constexpr std::size_t kQvStrides[] = {8, 4, 2, 1};

/// Ladder rungs: the strides in kQvStrides that divide the step count.
std::vector<std::size_t> qv_strides(const TimeGrid& grid) {
    std::vector<std::size_t> out;
    for (std::size_t s : kQvStrides)
        if (grid.steps % s == 0) out.push_back(s);
    return out;
}

void run_qv(const Experiment& e, std::vector<Metric>& out) {
    const TimeGrid grid = grid_for(e);
    if (e.integrand == "smooth") {
        // X_t = t·v is of finite variation: its QV vanishes as the mesh shrinks.
        const Vec v{1.0, 2.0};
        const auto scale = SpaceScale::uniform(2);
        PathValues x(2, grid.steps + 1);
        for (std::size_t k = 0; k <= grid.steps; ++k)
            for (std::size_t i = 0; i < 2; ++i) x.at(k)[i] = grid.time(k) * v[i];
        double previous = std::numeric_limits<double>::infinity();
        bool decreasing = true;
        double finest = 0.0;
        for (std::size_t s : qv_strides(grid)) {
            const Partition part = Partition::uniform(grid, s, e.t_final);
            finest = quadratic_variation(x, part, scale);
            out.push_back(make_metric("l1_error_mesh_" + tag_value(part.mesh()), exact_value(finest), 0.0, 0.0,
                                      Check::info));
            decreasing = decreasing && finest < previous;
            previous = finest;
        }
        out.push_back(make_metric("qv_estimate", exact_value(finest), 0.0, e.tolerance, Check::absolute));
        out.push_back(make_metric("decreasing_beyond_ci", exact_value(decreasing ? 1.0 : 0.0), 1.0, 0.0, Check::flag));
        return;
    }
    const auto c = integrand_case(e);
    const auto scale = SpaceScale::uniform(c.sampler.dim());
    const auto ladder = qv_identity_check(c.sampler, scale, Space::H, grid, e.t_final, qv_strides(grid), mc_for(e));
    for (const auto& r : ladder.rungs) {
        out.push_back(make_metric("l1_error_mesh_" + tag_value(r.mesh), r.error, 0.0, 0.0, Check::info));
    }
    const auto& fine = ladder.rungs.back();
    out.push_back(make_metric("qv_estimate", exact_value(fine.estimate, e.n_paths), c.reference, e.tolerance,
                              Check::relative));
    out.push_back(make_metric("reference_integral", exact_value(fine.reference, e.n_paths), c.reference,
                              e.tolerance, Check::relative));
    out.push_back(make_metric("decreasing_beyond_ci", exact_value(ladder.decreasing_beyond_ci ? 1.0 : 0.0), 1.0, 0.0,
                              Check::flag));
}

void run_cross(const Experiment& e, std::vector<Metric>& out) {
    const TimeGrid grid = grid_for(e);
    const double t = e.t_final;
    const Partition part = Partition::uniform(grid, 1, t);
    const ProcessSampler one = ProcessSampler::constant(Vec{1.0});
    auto table = run_paths(e.n_paths, 4, e.workers, [&](std::size_t p, std::span<double> o) {
        const auto noise = sample_cylindrical(grid, 2, e.seed, p);
        const PathValues x = ito_path(one, noise, t);  // ∫1 dW^0 = W^0
        const auto w0 = noise.path(0);
        const auto w1 = noise.path(1);
        o[0] = cross_variation(x, w0, part)[0];
        o[1] = cross_variation(x, w1, part)[0];
        PathValues smooth(1, grid.steps + 1);
        for (std::size_t k = 0; k <= grid.steps; ++k) smooth.at(k)[0] = grid.time(k);
        o[2] = cross_variation(smooth, w0, part)[0];
        // Bilinearity: [2X + 3S, W] = 2[X, W] + 3[S, W].
        PathValues mix(1, grid.steps + 1);
        for (std::size_t k = 0; k <= grid.steps; ++k) mix.at(k)[0] = 2.0 * x.at(k)[0] + 3.0 * smooth.at(k)[0];
        const double lhs = cross_variation(mix, w0, part)[0];
        const double rhs = 2.0 * o[0] + 3.0 * o[2];
        o[3] = std::abs(lhs - rhs) / std::max({std::abs(lhs), std::abs(rhs), 1e-300});
    });
    out.push_back(make_metric("same_driver", summary_of(table.column(0), e.seed, 1), t, kCoversZ, Check::covers));
    out.push_back(make_metric("independent_driver", summary_of(table.column(1), e.seed, 2), 0.0, kCoversZ,
                              Check::covers));
    out.push_back(make_metric("smooth_integrand", summary_of(table.column(2), e.seed, 3), 0.0, kCoversZ,
                              Check::covers));
    const auto bil = table.column(3);
    out.push_back(make_metric("bilinearity_max", exact_value(*std::max_element(bil.begin(), bil.end()), e.n_paths),
                              0.0, 1e-12, Check::at_most));
}

constexpr std::size_t kBdgCases = 10;
constexpr std::uint64_t kBdgSuiteSeed = 0xBD65'EED5ull;

std::vector<ProcessSampler> bdg_suite() {
    std::vector<ProcessSampler> suite;
    suite.push_back(ProcessSampler::constant(Vec{1.0}));
    SplitMix64 rng(kBdgSuiteSeed);
    while (suite.size() < kBdgCases) {
        const std::size_t d = 1 + rng.below(3);
        const std::size_t k = 1 + rng.below(3);
        std::vector<Vec> cols(k, Vec(d));
        for (auto& c : cols)
            for (double& v : c) v = rng.normal();
        suite.push_back(ProcessSampler::constant_columns(d, cols));
    }
    return suite;
}

void run_bdg(const Experiment& e, std::vector<Metric>& out) {
    const auto suite = bdg_suite();
    const TimeGrid grid = grid_for(e);
    double max_first = 0.0, max_second = 0.0;
    MonteCarlo second = mc_for(e);
    second.seed = e.seed ^ 0xA5A5'A5A5'A5A5'A5A5ull;
    for (std::size_t c = 0; c < suite.size(); ++c) {
        const auto scale = SpaceScale::uniform(suite[c].dim());
        const auto r1 = bdg_ratio(suite[c], scale, Space::H, grid, e.t_final, mc_for(e));
        const auto r2 = bdg_ratio(suite[c], scale, Space::H, grid, e.t_final, second);
        max_first = std::max(max_first, r1.ratio);
        max_second = std::max(max_second, r2.ratio);
        if (c == 0) {
            // B = 1: E sup_{r≤t}|W_r| / √t = E sup_{[0,1]}|W| = √(π/2).
            out.push_back(make_metric("unit_ratio", exact_value(r1.ratio, e.n_paths), std::sqrt(std::numbers::pi / 2.0),
                                      e.tolerance, Check::relative));
        }
        out.push_back(make_metric("ratio_case_" + std::to_string(c), exact_value(r1.ratio, e.n_paths), 0.0, 0.0,
                                  Check::info));
    }
    // Doob's L² inequality caps the ratio at 2 for deterministic B.
    out.push_back(make_metric("max_ratio", exact_value(max_first, e.n_paths), 0.0, 2.0, Check::at_most));
    out.push_back(make_metric("max_ratio_second_seed", exact_value(max_second, e.n_paths), 0.0, 2.0, Check::at_most));
    out.push_back(make_metric("seed_stability", exact_value(std::abs(max_first - max_second) / max_first), 0.0, 0.1,
                              Check::at_most));
}

constexpr std::size_t kGapPaths = 2000;

void run_strat_convert(const Experiment& e, std::vector<Metric>& out) {
    const auto lambda = lambda_or(e, {0.3, 0.4});
    const double sigma2 = std::pow(collapse_constant_noise(lambda), 2);
    const auto scale = SpaceScale::uniform(2);
    const DriftOp a = DriftOp::zero(scale);
    const DiffusionFamily g = diagonal_family(scale, lambda);
    const Vec psi0{1.0, 1.0};
    const TimeGrid grid = grid_for(e);
    const double t = e.t_final;
    const std::size_t k = lambda.size();

    auto growth = run_paths(e.n_paths, 2, e.workers, [&](std::size_t p, std::span<double> o) {
        auto noise = std::make_shared<const CylindricalNoise>(sample_cylindrical(grid, k, e.seed, p));
        const auto sol = solve_strat(a, g, psi0, noise);
        o[0] = sol.state(grid.steps)[0] / psi0[0];
        double peak = 0.0;
        for (std::size_t s = 0; s <= grid.steps; ++s) peak = std::max(peak, inner(scale, Space::H, sol.state(s), sol.state(s)));
        o[1] = peak;
    });
    out.push_back(make_metric("mean_growth", summary_of(growth.column(0), e.seed, 1), std::exp(0.5 * sigma2 * t),
                              e.tolerance, Check::relative));
    const DriftOp converted = a.plus_linear(ito_correction_operator(g));
    out.push_back(make_metric("sup_norm_sq", summary_of(growth.column(1), e.seed, 2), 0.0,
                              gronwall_envelope(converted, g, inner(scale, Space::H, psi0, psi0), t), Check::at_most));

    // Direct midpoint scheme vs Itô form with correction, on shared noise, at dt·4, dt·2, dt.
    const std::size_t gap_paths = std::min(e.n_paths, kGapPaths);
    if (grid.steps % 4 != 0) throw std::invalid_argument("strat_convert: step count must be divisible by 4");
    const std::size_t factors[] = {4, 2, 1};
    // Column 3: strat_cylindrical − Itô part − ½Σλ_i²∫Ψ ds along the converted solution.
    auto gaps = run_paths(gap_paths, 4, e.workers, [&](std::size_t p, std::span<double> o) {
        const auto fine = sample_cylindrical(grid, k, e.seed, p);
        for (std::size_t r = 0; r < 3; ++r) {
            auto noise = std::make_shared<const CylindricalNoise>(fine.coarsened(factors[r]));
            const auto mid = solve_strat_midpoint(a, g, psi0, noise);
            const auto conv = solve_strat(a, g, psi0, noise);
            const std::size_t n = noise->steps();
            double sq = 0.0;
            for (std::size_t i = 0; i < 2; ++i) sq += std::pow(mid.state(n)[i] - conv.state(n)[i], 2);
            o[r] = sq;
        }
        auto noise = std::make_shared<const CylindricalNoise>(fine);
        const auto sol = solve_strat(a, g, psi0, noise);
        // B e_i = λ_iΨ (first coordinate), dΨ = ½σ²Ψ dt + Σ_jλ_jΨ dW^j.
        ProcessSampler b(1, k, [&](const PathView& v, std::span<double> col) {
            for (std::size_t i = 0; i < k; ++i) col[i] = lambda[i] * v.state()[0];
        });
        ProcessSampler drift(k, 1, [&](const PathView& v, std::span<double> col) {
            for (std::size_t i = 0; i < k; ++i) col[i] = lambda[i] * 0.5 * sigma2 * v.state()[0];
        });
        ProcessSampler diffusion(k, k, [&](const PathView& v, std::span<double> col) {
            for (std::size_t j = 0; j < k; ++j)
                for (std::size_t i = 0; i < k; ++i) col[j * k + i] = lambda[i] * lambda[j] * v.state()[0];
        });
        Vec x0(k);
        for (std::size_t i = 0; i < k; ++i) x0[i] = lambda[i] * psi0[0];
        const StratIntegrand integrand(b, SemimartingaleWitness{x0, drift, diffusion});
        const double strat = strat_cylindrical(integrand, sol.noise(), t, &sol.states())[0];
        double ito_part = 0.0, integral = 0.0;
        for (std::size_t s = 0; s < grid.steps; ++s) {
            const double psi = sol.state(s)[0];
            for (std::size_t i = 0; i < k; ++i) ito_part += lambda[i] * psi * sol.noise().increment(i, s);
            integral += psi * grid.dt;
        }
        o[3] = strat - ito_part - 0.5 * sigma2 * integral;
    });
    std::vector<double> dts, rms;
    for (std::size_t r = 0; r < 3; ++r) {
        const StatSummary s = root_of(summary_of(gaps.column(r), e.seed, 10 + r));
        const double h = grid.dt * static_cast<double>(factors[r]);
        dts.push_back(h);
        rms.push_back(s.mean);
        out.push_back(make_metric("rms_gap_dt_" + tag_value(h), s, 0.0, 0.0, Check::info));
    }
    out.push_back(make_metric("gap_slope", exact_value(loglog_slope(dts, rms), gap_paths), 0.0, 0.4, Check::at_least));
    out.push_back(make_metric("correction_identity", summary_of(gaps.column(3), e.seed, 20), 0.0, kCoversZ,
                              Check::covers));
}

void run_collapse(const Experiment& e, std::vector<Metric>& out) {
    const std::size_t k = e.k_modes == 0 ? 10 : e.k_modes;
    std::vector<double> lambda(k);
    for (std::size_t i = 0; i < k; ++i) lambda[i] = std::ldexp(1.0, -static_cast<int>(i + 1));
    const double sigma = collapse_constant_noise(lambda);
    const double s2 = sigma * sigma;
    const TimeGrid grid = grid_for(e);
    const double t = e.t_final;
    const Partition part = Partition::uniform(grid, 1, t);

    // Columns: QV of Σλ_iW^i; X = Σ_iλ_i∫Ψ dW^i; Z = σ∫Ψ' dW' on an independent
    // driver; pathwise |X − σ∫Ψ dW̃| relative to its term scale; X − Z; X² − Z².
    auto table = run_paths(e.n_paths, 6, e.workers, [&](std::size_t p, std::span<double> o) {
        const auto noise = sample_cylindrical(grid, k + 1, e.seed, p);
        std::vector<double> y(grid.steps + 1, 0.0);
        for (std::size_t s = 0; s <= grid.steps; ++s) {
            double acc = 0.0;
            for (std::size_t i = 0; i < k; ++i) acc += lambda[i] * noise.value(i, s);
            y[s] = acc;
        }
        o[0] = quadratic_variation(y, part);
        double x = 0.0, collapsed = 0.0, scale_terms = 0.0, z = 0.0;
        for (std::size_t s = 0; s < grid.steps; ++s) {
            const double psi = std::exp(y[s] - 0.5 * s2 * grid.time(s));
            double col = 0.0;
            for (std::size_t i = 0; i < k; ++i) col += lambda[i] * noise.increment(i, s);
            x += psi * col;
            // σ·(W̃_{s+1} − W̃_s) with W̃ = Y/σ.
            const double dwt = (y[s + 1] - y[s]) / sigma;
            collapsed += psi * sigma * dwt;
            scale_terms += std::abs(psi * sigma * dwt);
            const double wp = noise.value(k, s);
            z += sigma * std::exp(sigma * wp - 0.5 * s2 * grid.time(s)) * noise.increment(k, s);
        }
        o[1] = x;
        o[2] = std::abs(x - collapsed) / std::max(scale_terms, 1e-300);
        o[3] = x - z;
        o[4] = x * x - z * z;
        o[5] = x * x;
    });
    double second_ref = 0.0;
    for (std::size_t s = 0; s < grid.steps; ++s) second_ref += s2 * std::exp(s2 * grid.time(s)) * grid.dt;
    out.push_back(make_metric("qv_collapsed", summary_of(table.column(0), e.seed, 1), s2 * t, e.tolerance,
                              Check::relative));
    out.push_back(make_metric("sigma", exact_value(sigma), std::sqrt((1.0 - std::ldexp(1.0, -2 * static_cast<int>(k))) / 3.0),
                              1e-12, Check::relative));
    const auto pw = table.column(2);
    out.push_back(make_metric("pathwise_identity", exact_value(*std::max_element(pw.begin(), pw.end()), e.n_paths), 0.0,
                              1e-10, Check::at_most));
    out.push_back(make_metric("first_moment_gap", summary_of(table.column(3), e.seed, 4), 0.0, kCoversZ, Check::covers));
    out.push_back(make_metric("second_moment_gap", summary_of(table.column(4), e.seed, 5), 0.0, kCoversZ,
                              Check::covers));
    out.push_back(make_metric("second_moment", summary_of(table.column(5), e.seed, 6), second_ref, kCoversZ,
                              Check::covers));
}

void run_solve(const Experiment& e, std::vector<Metric>& out) {
    const OuSystem ou = ou_system(e.theta, e.sigma);
    const TimeGrid grid = grid_for(e);
    const double t = e.t_final;
    auto table = run_paths(e.n_paths, 2, e.workers, [&](std::size_t p, std::span<double> o) {
        auto noise = std::make_shared<const CylindricalNoise>(sample_cylindrical(grid, 1, e.seed, p));
        const auto sol = solve_em(ou.drift, ou.diffusion, ou.psi0, noise);
        o[0] = sol.state(grid.steps)[0];
        double peak = 0.0;
        for (std::size_t s = 0; s <= grid.steps; ++s) peak = std::max(peak, inner(ou.scale, Space::H, sol.state(s), sol.state(s)));
        o[1] = peak;
    });
    const auto x = table.column(0);
    const double mean = sample_mean(x);
    std::vector<double> centered(x.size());
    const double bessel = static_cast<double>(x.size()) / static_cast<double>(x.size() - 1);
    for (std::size_t i = 0; i < x.size(); ++i) centered[i] = (x[i] - mean) * (x[i] - mean) * bessel;
    const double var_ref = e.theta != 0.0
                               ? e.sigma * e.sigma * (1.0 - std::exp(-2.0 * e.theta * t)) / (2.0 * e.theta)
                               : e.sigma * e.sigma * t;
    out.push_back(make_metric("variance", summary_of(centered, e.seed, 1), var_ref, e.tolerance, Check::relative));
    out.push_back(make_metric("mean", summary_of(x, e.seed, 2), 0.0, kCoversZ, Check::covers));
    out.push_back(make_metric("sup_norm_sq", summary_of(table.column(1), e.seed, 3), 0.0,
                              gronwall_envelope(ou.drift, ou.diffusion, inner(ou.scale, Space::H, ou.psi0, ou.psi0), t),
                              Check::at_most));
    const auto u = uniqueness_check(ou.drift, ou.diffusion, ou.psi0, e.seed, grid);
    out.push_back(make_metric("bit_identical", exact_value(u.bit_identical ? 1.0 : 0.0), 1.0, 0.0, Check::flag));
    out.push_back(make_metric("reorder_divergence", exact_value(u.reorder_max_divergence), 0.0, 1e-10, Check::at_most));
    out.push_back(make_metric("seeds_differ", exact_value(u.seeds_differ ? 1.0 : 0.0), 1.0, 0.0, Check::flag));
    if (!e.path_out.empty()) {
        auto noise = std::make_shared<const CylindricalNoise>(sample_cylindrical(grid, 1, e.seed, 0));
        std::ofstream f(e.path_out, std::ios::binary);
        if (!f) throw std::runtime_error("cannot open " + e.path_out);
        write_solution_csv(f, solve_em(ou.drift, ou.diffusion, ou.psi0, noise));
    }
}

void run_truncation(const Experiment& e, std::vector<Metric>& out) {
    const std::size_t k = e.k_modes == 0 ? std::max<std::size_t>(8, e.j_max + 1) : e.k_modes;
    const auto scale = SpaceScale::uniform(2);
    const DriftOp a = DriftOp::linear(scale, LinearOp::scaled_identity(2, -e.theta));
    const DiffusionFamily g = geometric_family(scale, k, e.sigma);
    const Vec psi0{1.0, 0.0};
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    pairs.emplace_back(k, k);
    for (std::size_t j = 1; j <= e.j_max; ++j) pairs.emplace_back(k, j);
    const auto table = truncation_convergence(a, g, psi0, pairs, grid_for(e), mc_for(e));
    out.push_back(make_metric("error_k_equals_j", table.rows[0].error, 0.0, 1e-300, Check::absolute));
    double largest = 0.0;
    for (std::size_t r = 1; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        largest = std::max(largest, row.error.mean);
        out.push_back(make_metric("error_j_" + std::to_string(row.j), row.error, row.tail, 0.0, Check::info));
    }
    if (largest == 0.0) {
        out.push_back(make_metric("max_error", exact_value(0.0), 0.0, 1e-300, Check::absolute));
    } else {
        for (std::size_t r = 1; r + 1 < table.rows.size(); ++r) {
            const auto& lo = table.rows[r];
            const auto& hi = table.rows[r + 1];
            // Successive tail sums fall by 4 for c_i = 2^{-i}; accept the error ratio within a factor 2.
            const double tail_ratio = lo.tail / hi.tail;
            out.push_back(make_metric("ratio_j_" + std::to_string(lo.j) + "_to_" + std::to_string(hi.j),
                                      exact_value(lo.error.mean / hi.error.mean, e.n_paths), tail_ratio, 2.0,
                                      Check::within_factor));
        }
    }
    out.push_back(make_metric("monotone", exact_value(table.monotone ? 1.0 : 0.0), 1.0, 0.0, Check::flag));
}

void run_energy(const Experiment& e, std::vector<Metric>& out) {
    const OuSystem ou = ou_system(e.theta, e.sigma);
    const OuSystem free = ou_system(0.0, e.sigma);
    const TimeGrid coarse_grid = grid_for(e);
    const TimeGrid fine_grid(coarse_grid.dt / 2.0, coarse_grid.steps * 2);
    const double t = e.t_final;
    const ProcessSampler eta = drift_sampler(ou.drift);
    const ProcessSampler b = diffusion_sampler(ou.diffusion);
    const ProcessSampler eta0 = drift_sampler(free.drift);
    const ProcessSampler b0 = diffusion_sampler(free.diffusion);
    const ItoFunctional f = ItoFunctional::squared_norm(ou.scale);

    // Columns: residual² at dt, residual² at dt/2, residual at dt, residual at dt/2,
    // residual with A = 0, |Itô-formula(‖·‖²) − energy residual|.
    auto table = run_paths(e.n_paths, 6, e.workers, [&](std::size_t p, std::span<double> o) {
        const auto fine = std::make_shared<const CylindricalNoise>(sample_cylindrical(fine_grid, 1, e.seed, p));
        const auto coarse = std::make_shared<const CylindricalNoise>(fine->coarsened(2));
        const auto sol_c = solve_em(ou.drift, ou.diffusion, ou.psi0, coarse);
        const auto sol_f = solve_em(ou.drift, ou.diffusion, ou.psi0, fine);
        const double rc = energy_residual(sol_c, eta, b, ou.scale, t);
        const double rf = energy_residual(sol_f, eta, b, ou.scale, t);
        o[0] = rc * rc;
        o[1] = rf * rf;
        o[2] = rc;
        o[3] = rf;
        const auto sol0 = solve_em(free.drift, free.diffusion, free.psi0, coarse);
        o[4] = energy_residual(sol0, eta0, b0, free.scale, t);
        o[5] = std::abs(ito_formula_residual(f, sol_c, eta, b, t) - rc);
    });
    const StatSummary rms_c = root_of(summary_of(table.column(0), e.seed, 1));
    const StatSummary rms_f = root_of(summary_of(table.column(1), e.seed, 2));
    out.push_back(make_metric("rms_residual_dt", rms_c, 0.0, 0.0, Check::info));
    out.push_back(make_metric("rms_residual_half_dt", rms_f, 0.0, 0.0, Check::info));
    // Halving within ±30%: ratio in [0.35, 0.65].
    out.push_back(make_metric("rms_ratio", exact_value(rms_f.mean / rms_c.mean, e.n_paths), 0.5, 0.3, Check::relative));
    const StatSummary mean_c = summary_of(table.column(2), e.seed, 3);
    const StatSummary mean_f = summary_of(table.column(3), e.seed, 4);
    out.push_back(make_metric("mean_residual_dt", mean_c, 0.0, 0.0, Check::info));
    out.push_back(make_metric("mean_residual_half_dt", mean_f, 0.0, 0.0, Check::info));
    out.push_back(make_metric("zero_drift_mean", summary_of(table.column(4), e.seed, 5), 0.0, kCoversZ, Check::covers));
    const auto diff = table.column(5);
    out.push_back(make_metric("ito_formula_match", exact_value(*std::max_element(diff.begin(), diff.end()), e.n_paths),
                              0.0, 1e-12, Check::at_most));
}

void run_ito_formula(const Experiment& e, std::vector<Metric>& out) {
    const OuSystem ou = ou_system(e.theta, e.sigma);
    const TimeGrid grid = grid_for(e);
    const double t = e.t_final;
    const ProcessSampler eta = drift_sampler(ou.drift);
    const ProcessSampler b = diffusion_sampler(ou.diffusion);
    const ItoFunctional constant = ItoFunctional::constant(ou.scale, 3.0);
    const ItoFunctional linear = ItoFunctional::linear(ou.scale, Vec{1.0, 0.5});
    const ItoFunctional square = ItoFunctional::squared_norm(ou.scale);
    auto table = run_paths(e.n_paths, 3, e.workers, [&](std::size_t p, std::span<double> o) {
        auto noise = std::make_shared<const CylindricalNoise>(sample_cylindrical(grid, 1, e.seed, p));
        const auto sol = solve_em(ou.drift, ou.diffusion, ou.psi0, noise);
        o[0] = std::abs(ito_formula_residual(constant, sol, eta, b, t));
        o[1] = std::abs(ito_formula_residual(linear, sol, eta, b, t));
        o[2] = std::abs(ito_formula_residual(square, sol, eta, b, t) - energy_residual(sol, eta, b, ou.scale, t));
    });
    auto peak = [&](std::size_t c) {
        const auto col = table.column(c);
        return exact_value(*std::max_element(col.begin(), col.end()), e.n_paths);
    };
    out.push_back(make_metric("constant_residual_max", peak(0), 0.0, 1e-300, Check::absolute));
    out.push_back(make_metric("linear_residual_max", peak(1), 0.0, 1e-10, Check::at_most));
    out.push_back(make_metric("energy_match_max", peak(2), 0.0, 1e-12, Check::at_most));
}

double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

}  // namespace

Report run(const Experiment& exp) {
    exp.validate();
    const auto start = std::chrono::steady_clock::now();
    Report rep;
    rep.experiment = exp;
    switch (exp.kind) {
        case Kind::isometry: run_isometry(exp, rep.metrics); break;
        case Kind::duality: run_duality(exp, rep.metrics); break;
        case Kind::pushthrough: run_pushthrough(exp, rep.metrics); break;
        case Kind::qv: run_qv(exp, rep.metrics); break;
        case Kind::cross: run_cross(exp, rep.metrics); break;
        case Kind::bdg: run_bdg(exp, rep.metrics); break;
        case Kind::strat_convert: run_strat_convert(exp, rep.metrics); break;
        case Kind::collapse: run_collapse(exp, rep.metrics); break;
        case Kind::solve: run_solve(exp, rep.metrics); break;
        case Kind::truncation: run_truncation(exp, rep.metrics); break;
        case Kind::energy: run_energy(exp, rep.metrics); break;
        case Kind::ito_formula: run_ito_formula(exp, rep.metrics); break;
    }
    rep.pass = std::all_of(rep.metrics.begin(), rep.metrics.end(), [](const Metric& m) { return m.pass; });
    rep.runtime_seconds = seconds_since(start);
    return rep;
}

// ---------------------------------------------------------------------------
// Refinement ladders
// ---------------------------------------------------------------------------

namespace {

StatSummary refine_rung(const Experiment& e, double h) {
    Experiment x = e;
    switch (e.kind) {
        case Kind::isometry: {
            x.dt = h;
            if (e.integrand != "brownian") {
                // Deterministic integrands have exact Itô sums: only the MC floor remains.
                const auto r = run(x);
                return r.find("rel_err")->stat;
            }
            const TimeGrid grid = grid_for(x);
            const double t = x.t_final;
            const ProcessSampler w(1, 1, [](const PathView& v, std::span<double> out) { out[0] = v.value(0); });
            auto table = run_paths(x.n_paths, 1, x.workers, [&](std::size_t p, std::span<double> o) {
                const auto noise = sample_cylindrical(grid, 1, x.seed, p);
                const double ito = integrate_ito(w, noise, t)[0];
                const double wt = noise.value(0, grid.steps);
                o[0] = std::pow(ito - 0.5 * (wt * wt - t), 2);
            });
            return root_of(summary_of(table.column(0), x.seed, 1));
        }
        case Kind::qv: {
            const double ratio = h / e.dt;
            const auto stride = static_cast<std::size_t>(std::llround(ratio));
            if (stride == 0 || std::abs(ratio - static_cast<double>(stride)) > 1e-9 * ratio) {
                throw std::invalid_argument("refine qv: mesh " + tag_value(h) + " is not a multiple of dt");
            }
            const TimeGrid grid = grid_for(e);
            if (e.integrand == "smooth") {
                const Vec v{1.0, 2.0};
                PathValues path(2, grid.steps + 1);
                for (std::size_t k = 0; k <= grid.steps; ++k)
                    for (std::size_t i = 0; i < 2; ++i) path.at(k)[i] = grid.time(k) * v[i];
                return exact_value(quadratic_variation(path, Partition::uniform(grid, stride, e.t_final),
                                                       SpaceScale::uniform(2)));
            }
            const auto c = integrand_case(e);
            const std::size_t strides[] = {stride};
            const auto ladder = qv_identity_check(c.sampler, SpaceScale::uniform(c.sampler.dim()), Space::H, grid,
                                                  e.t_final, strides, mc_for(e));
            return ladder.rungs.front().error;
        }
        case Kind::solve: {
            x.dt = h;
            const OuSystem ou = ou_system(e.theta, e.sigma);
            const TimeGrid grid = grid_for(x);
            const TimeGrid fine_grid(grid.dt / 2.0, grid.steps * 2);
            auto table = run_paths(x.n_paths, 1, x.workers, [&](std::size_t p, std::span<double> o) {
                auto fine = std::make_shared<const CylindricalNoise>(sample_cylindrical(fine_grid, 1, x.seed, p));
                auto coarse = std::make_shared<const CylindricalNoise>(fine->coarsened(2));
                const auto a = solve_em(ou.drift, ou.diffusion, ou.psi0, coarse);
                const auto b = solve_em(ou.drift, ou.diffusion, ou.psi0, fine);
                double sq = 0.0;
                for (std::size_t i = 0; i < 2; ++i) sq += std::pow(a.state(grid.steps)[i] - b.state(fine_grid.steps)[i], 2);
                o[0] = sq;
            });
            return root_of(summary_of(table.column(0), x.seed, 1));
        }
        case Kind::strat_convert: {
            x.dt = h;
            const auto lambda = lambda_or(e, {0.3, 0.4});
            const auto scale = SpaceScale::uniform(2);
            const DriftOp a = DriftOp::zero(scale);
            const DiffusionFamily g = diagonal_family(scale, lambda);
            const TimeGrid grid = grid_for(x);
            const Vec psi0{1.0, 1.0};
            auto table = run_paths(x.n_paths, 1, x.workers, [&](std::size_t p, std::span<double> o) {
                auto noise = std::make_shared<const CylindricalNoise>(sample_cylindrical(grid, lambda.size(), x.seed, p));
                const auto mid = solve_strat_midpoint(a, g, psi0, noise);
                const auto conv = solve_strat(a, g, psi0, noise);
                double sq = 0.0;
                for (std::size_t i = 0; i < 2; ++i) sq += std::pow(mid.state(grid.steps)[i] - conv.state(grid.steps)[i], 2);
                o[0] = sq;
            });
            return root_of(summary_of(table.column(0), x.seed, 1));
        }
        case Kind::energy: {
            x.dt = h;
            const OuSystem ou = ou_system(e.theta, e.sigma);
            const TimeGrid grid = grid_for(x);
            const ProcessSampler eta = drift_sampler(ou.drift);
            const ProcessSampler b = diffusion_sampler(ou.diffusion);
            auto table = run_paths(x.n_paths, 1, x.workers, [&](std::size_t p, std::span<double> o) {
                auto noise = std::make_shared<const CylindricalNoise>(sample_cylindrical(grid, 1, x.seed, p));
                const auto sol = solve_em(ou.drift, ou.diffusion, ou.psi0, noise);
                o[0] = std::pow(energy_residual(sol, eta, b, ou.scale, x.t_final), 2);
            });
            return root_of(summary_of(table.column(0), x.seed, 1));
        }
        default:
            throw std::invalid_argument("refine does not support kind " + std::string(to_string(e.kind)));
    }
}

}  // namespace

RefineReport refine(const Experiment& exp, std::span<const double> ladder) {
    exp.validate();
    if (ladder.size() < 3) throw std::invalid_argument("refine: ladder needs at least 3 rungs");
    for (std::size_t i = 0; i < ladder.size(); ++i) {
        if (!(ladder[i] > 0.0) || (i > 0 && !(ladder[i] < ladder[i - 1]))) {
            throw std::invalid_argument("refine: ladder must be positive and strictly decreasing");
        }
    }
    const auto start = std::chrono::steady_clock::now();
    RefineReport rep;
    rep.experiment = exp;
    rep.ladder.assign(ladder.begin(), ladder.end());
    switch (exp.kind) {
        case Kind::isometry:
            rep.expected_slope = exp.integrand == "brownian" ? 0.5 : 0.0;
            rep.slope_tolerance = 0.15;
            break;
        case Kind::qv:
            rep.expected_slope = exp.integrand == "smooth" ? 1.0 : 0.5;
            rep.slope_tolerance = exp.integrand == "smooth" ? 0.3 : 0.15;
            break;
        case Kind::solve:
            // Strong Euler order lies between 1/2 (multiplicative) and 1 (additive noise).
            rep.expected_slope = 0.75;
            rep.slope_tolerance = 0.35;
            break;
        case Kind::strat_convert:
            rep.expected_slope = 0.4;
            rep.lower_bound_only = true;
            break;
        case Kind::energy:
            // Halving per halved dt, ±30%: ratio 0.35..0.65, slope ≈ 0.62..1.51.
            rep.expected_slope = 1.0;
            rep.slope_tolerance = 0.5;
            break;
        default:
            throw std::invalid_argument("refine does not support kind " + std::string(to_string(exp.kind)));
    }
    std::vector<double> means;
    for (double h : ladder) {
        rep.errors.push_back(refine_rung(exp, h));
        means.push_back(rep.errors.back().mean);
    }
    const bool all_zero = std::all_of(means.begin(), means.end(), [](double m) { return m <= 1e-300; });
    // No significant change between the coarsest and finest rung: the MC floor.
    rep.floor = all_zero || rep.errors.front().ci_low <= rep.errors.back().ci_high;
    rep.slope = all_zero ? 0.0 : loglog_slope(rep.ladder, means);
    if (rep.floor) {
        rep.pass = true;
    } else if (rep.lower_bound_only) {
        rep.pass = rep.slope >= rep.expected_slope;
    } else {
        rep.pass = std::abs(rep.slope - rep.expected_slope) <= rep.slope_tolerance;
    }
    rep.runtime_seconds = seconds_since(start);
    return rep;
}

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

namespace {

std::string field(double v) { return std::isnan(v) ? std::string() : format_double(v); }

void write_row(std::ostream& out, const std::string& name, const StatSummary& s, double reference, double tolerance,
               bool pass) {
    out << name << ',' << format_double(s.mean) << ',' << format_double(s.std_err) << ','
        << format_double(s.ci_low) << ',' << format_double(s.ci_high) << ',' << s.n << ',' << field(reference)
        << ',' << field(tolerance) << ',' << (pass ? "true" : "false") << '\n';
}

constexpr const char* kHeader = "metric,mean,std_err,ci_low,ci_high,n,reference,tolerance,pass\n";

}  // namespace

void write_metrics_csv(std::ostream& out, std::span<const Metric> metrics, std::uint64_t seed, double dt,
                       std::size_t n) {
    out << kHeader;
    for (const auto& m : metrics) {
        const bool shown = m.check != Check::info;
        write_row(out, m.name, m.stat, shown ? m.reference : std::numeric_limits<double>::quiet_NaN(),
                  shown ? m.tolerance : std::numeric_limits<double>::quiet_NaN(), m.pass);
    }
    out << "# seed=" << seed << ", dt=" << format_double(dt) << ", n=" << n << '\n';
}

void write_report_csv(std::ostream& out, const Report& report) {
    write_metrics_csv(out, report.metrics, report.experiment.seed, report.experiment.dt, report.experiment.n_paths);
}

void write_refine_csv(std::ostream& out, const RefineReport& report) {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    out << kHeader;
    for (std::size_t i = 0; i < report.ladder.size(); ++i) {
        write_row(out, "error_at_" + format_double(report.ladder[i]), report.errors[i], nan, nan, true);
    }
    write_row(out, "slope", exact_value(report.slope, report.ladder.size()), report.expected_slope,
              report.lower_bound_only ? nan : report.slope_tolerance, report.pass);
    write_row(out, "floor", exact_value(report.floor ? 1.0 : 0.0), nan, nan, true);
    out << "# seed=" << report.experiment.seed << ", dt=" << format_double(report.ladder.back())
        << ", n=" << report.experiment.n_paths << '\n';
}

}  // namespace stochint
