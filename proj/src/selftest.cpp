#include "stochint/config.hpp"
#include "stochint/experiment.hpp"
#include "stochint/integrate.hpp"
#include "stochint/rng.hpp"
#include "stochint/spde.hpp"
#include "stochint/stratonovich.hpp"
#include "stochint/variation.hpp"

#include <cmath>
#include <cstring>
#include <functional>
#include <memory>

namespace stochint {

namespace {

using Check_fn = std::function<bool()>;

bool close(double a, double b, double tol = 1e-12) { return std::abs(a - b) <= tol * std::max(1.0, std::abs(b)); }

bool passes(Experiment e) { return run(e).pass; }

}  // namespace

std::vector<Metric> selftest_suite(std::size_t workers) {
    const auto s2 = SpaceScale::uniform(2);
    const TimeGrid grid(0.01, 100);

    const std::vector<std::pair<std::string, Check_fn>> checks = {
        {"philox_known_answer",
         [] {
             const auto r = Philox4x32::generate({0, 0, 0, 0}, {0, 0});
             return r[0] == 0x6627e8d5u && r[1] == 0xe169c58du && r[2] == 0xbc57ac4cu && r[3] == 0x9b00dbd8u;
         }},
        {"embedding_constant_identity", [&] { return embedding_constant(s2, Space::V, Space::X) == 1.0; }},
        {"hs_norm_empty_operator", [&] { return hs_norm(s2, Space::H, {}, 0) == 0.0; }},
        {"isometry_constant_integrand",
         [&] {
             Experiment e;
             e.kind = Kind::isometry;
             e.integrand = "constant";
             e.n_paths = 20000;
             e.dt = 0.1;
             e.seed = 7;
             e.workers = workers;
             return passes(e);
         }},
        {"duality_exact",
         [&] {
             Experiment e;
             e.kind = Kind::duality;
             e.n_paths = 100;
             e.dt = 0.01;
             e.workers = workers;
             return passes(e);
         }},
        {"pushthrough_exact",
         [&] {
             Experiment e;
             e.kind = Kind::pushthrough;
             e.integrand = "cylindrical";
             e.n_paths = 100;
             e.dt = 0.01;
             e.workers = workers;
             return passes(e);
         }},
        {"truncation_zero_diffusion",
         [&] {
             Experiment e;
             e.kind = Kind::truncation;
             e.sigma = 0.0;
             e.n_paths = 100;
             e.dt = 0.05;
             e.workers = workers;
             return passes(e);
         }},
        {"solve_zero_coefficients_constant_path",
         [&] {
             auto noise = std::make_shared<const CylindricalNoise>(sample_cylindrical(grid, 1, 3));
             const Vec psi0{0.25, -1.5};
             const auto sol = solve_em(DriftOp::zero(s2), DiffusionFamily(s2, {LinearOp::zero(2)}), psi0, noise);
             for (std::size_t k = 0; k <= grid.steps; ++k)
                 if (sol.state(k)[0] != psi0[0] || sol.state(k)[1] != psi0[1]) return false;
             return true;
         }},
        {"solve_strat_nilpotent_equals_solve_em",
         [&] {
             auto noise = std::make_shared<const CylindricalNoise>(sample_cylindrical(grid, 1, 4));
             const DiffusionFamily g(s2, {LinearOp(2, {0.0, 1.0, 0.0, 0.0})});
             const DriftOp a = DriftOp::linear(s2, LinearOp::scaled_identity(2, -0.5));
             const Vec psi0{1.0, 2.0};
             const auto x = solve_em(a, g, psi0, noise);
             const auto y = solve_strat(a, g, psi0, noise);
             return std::memcmp(x.states().flat().data(), y.states().flat().data(),
                                sizeof(double) * x.states().flat().size()) == 0;
         }},
        {"ito_correction_zero_and_nilpotent",
         [&] {
             const DiffusionFamily shift(s2, {LinearOp(2, {0.0, 1.0, 0.0, 0.0})});
             const Vec zero = ito_correction(shift, Vec{0.0, 0.0});
             const Vec nil = ito_correction(shift, Vec{3.0, 4.0});
             return zero[0] == 0.0 && zero[1] == 0.0 && nil[0] == 0.0 && nil[1] == 0.0;
         }},
        {"ito_correction_scaled_identity",
         [&] {
             const DiffusionFamily g(s2, {LinearOp::scaled_identity(2, 0.3), LinearOp::scaled_identity(2, 0.4)});
             const Vec c = ito_correction(g, Vec{1.0, -2.0});
             return close(c[0], 0.125) && close(c[1], -0.25);
         }},
        {"collapse_normalized",
         [] {
             const double one[] = {1.0};
             const double pair[] = {0.6, 0.8};
             return collapse_constant_noise(one) == 1.0 && close(collapse_constant_noise(pair), 1.0);
         }},
        {"bdg_zero_integrand",
         [&] {
             const auto r = bdg_ratio(ProcessSampler::constant(Vec{0.0}), SpaceScale::uniform(1), Space::H, grid, 1.0,
                                      MonteCarlo{100, 1, workers});
             return r.ratio == 0.0;
         }},
        {"stratonovich_deterministic_equals_ito",
         [&] {
             const auto noise = sample_cylindrical(grid, 1, 5);
             const auto c = StratIntegrand::deterministic(
                 1, [](double, std::span<double> o) { o[0] = 2.0; }, [](double, std::span<double> o) { o[0] = 0.0; });
             return integrate_stratonovich_1d(c, noise, 1.0)[0] == integrate_ito(c.sampler(), noise, 1.0)[0];
         }},
        {"energy_residual_zero_coefficients",
         [&] {
             auto noise = std::make_shared<const CylindricalNoise>(sample_cylindrical(grid, 1, 6));
             const DriftOp a = DriftOp::zero(s2);
             const DiffusionFamily g(s2, {LinearOp::zero(2)});
             const auto sol = solve_em(a, g, Vec{1.0, 1.0}, noise);
             return energy_residual(sol, drift_sampler(a), diffusion_sampler(g), s2, 1.0) == 0.0;
         }},
        {"ito_formula_constant_functional",
         [&] {
             auto noise = std::make_shared<const CylindricalNoise>(sample_cylindrical(grid, 1, 8));
             const DriftOp a = DriftOp::linear(s2, LinearOp::scaled_identity(2, -1.0));
             const DiffusionFamily g(s2, {LinearOp::scaled_identity(2, 0.5)});
             const auto sol = solve_em(a, g, Vec{1.0, 1.0}, noise);
             return ito_formula_residual(ItoFunctional::constant(s2, 2.0), sol, drift_sampler(a), diffusion_sampler(g),
                                         1.0) == 0.0;
         }},
        {"qv_smooth_path_vanishes",
         [&] {
             Experiment e;
             e.kind = Kind::qv;
             e.integrand = "smooth";
             e.n_paths = 100;
             return passes(e);
         }},
        {"config_round_trip",
         [] {
             const std::string text = "# isometry\nkind = isometry\nn_paths = 100000\ndt = 1e-3\nintegrand = brownian\n"
                                      "seed = 42\nlambda = [1, 0.5]\n";
             const std::string once = normalize(text);
             return normalize(once) == once;
         }},
    };

    std::vector<Metric> out;
    for (const auto& [name, fn] : checks) {
        bool ok = false;
        try {
            ok = fn();
        } catch (const std::exception&) {
            ok = false;
        }
        out.push_back(make_metric(name, exact_value(ok ? 1.0 : 0.0), 1.0, 0.0, Check::flag));
    }
    return out;
}

}  // namespace stochint
