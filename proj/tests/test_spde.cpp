#include "stochint/coefficients.hpp"
#include "stochint/spde.hpp"
#include "stochint/stratonovich.hpp"

#include <catch_amalgamated.hpp>

#include <cmath>
#include <sstream>

using namespace stochint;
using Catch::Approx;

namespace {

std::shared_ptr<const CylindricalNoise> shared_noise(const TimeGrid& g, std::size_t k, std::uint64_t seed,
                                                     std::uint64_t path = 0) {
    return std::make_shared<const CylindricalNoise>(sample_cylindrical(g, k, seed, path));
}

LinearOp rotation(double angle, double scale) {
    return LinearOp(2, {scale * std::cos(angle), -scale * std::sin(angle), scale * std::sin(angle),
                        scale * std::cos(angle)});
}

}  // namespace

TEST_CASE("drift certification", "[spde]") {
    const auto s = SpaceScale::uniform(2);
    const LinearOp a(2, {1.0, 2.0, 0.0, -1.0});
    const auto lin = DriftOp::linear(s, a);
    const double na = a.operator_norm(s, Space::H, Space::H);
    CHECK(lin.growth() == Approx(na * na));
    CHECK(lin.lipschitz() == Approx(na));
    const auto rule = [](double, std::span<const double> x, std::span<double> out) {
        out[0] = 2.0 * x[0];
        out[1] = 2.0 * x[1] + 1.0;
    };
    CHECK_NOTHROW(DriftOp(s, rule, 8.0, 2.0));
    CHECK_THROWS_WITH(DriftOp(s, rule, 3.0, 2.0), Catch::Matchers::ContainsSubstring("growth"));
    CHECK_THROWS_WITH(DriftOp(s, rule, 8.0, 1.5), Catch::Matchers::ContainsSubstring("Lipschitz"));
    const auto sum = lin.plus_linear(LinearOp::identity(2));
    CHECK(sum.lipschitz() == Approx(na + 1.0));
    CHECK(sum.growth() == Approx((na + 1.0) * (na + 1.0)));
    const Vec y = sum.apply(0.0, Vec{1.0, 1.0});
    CHECK(y[0] == Approx(4.0));
    CHECK(y[1] == Approx(0.0));
}

TEST_CASE("diffusion family constants", "[spde]") {
    const auto s = SpaceScale::uniform(2);
    std::vector<LinearOp> ops;
    for (int i = 0; i < 4; ++i) ops.push_back(rotation(0.3 * i, std::ldexp(1.0, -i)));
    const DiffusionFamily g(s, ops);
    for (int i = 0; i < 4; ++i) CHECK(g.constant(i) == Approx(std::ldexp(1.0, -i)));
    CHECK(g.sum_sq_constants() == Approx(1 + 0.25 + 0.0625 + 0.015625));
    CHECK(g.tail_sum(2) == Approx(0.0625 + 0.015625));
    CHECK(g.tail_sum(4) == 0.0);
    CHECK(g.h_growth() == Approx(g.sum_sq_constants()));
    CHECK(g.truncated(2).k() == 2);
    CHECK_THROWS(DiffusionFamily(s, {rotation(0.0, 2.0)}, {1.0}));
    CHECK_THROWS(DiffusionFamily(s, {rotation(0.0, 1.0)}, {1.0, 1.0}));
    CHECK(chain_bound(s, rotation(0.1, 3.0)) == Approx(3.0));
    const Vec out = [&] {
        Vec o(8);
        g.columns(Vec{1.0, 0.0}, o);
        return o;
    }();
    CHECK(out[0] == Approx(1.0));
    CHECK(out[2] == Approx(0.5 * std::cos(0.3)));
}

TEST_CASE("Euler-Maruyama matches the hand recursion", "[spde]") {
    const auto s = SpaceScale::uniform(1);
    const TimeGrid g(0.01, 100);
    const auto noise = shared_noise(g, 2, 3);
    const auto a = DriftOp::linear(s, LinearOp(1, {-0.7}));
    const DiffusionFamily gg(s, {LinearOp(1, {0.4}), LinearOp(1, {0.2})});
    const auto sol = solve_em(a, gg, Vec{1.5}, noise);
    CHECK(sol.scheme() == Scheme::ito);
    CHECK(sol.truncation() == 2);
    double x = 1.5;
    for (std::size_t k = 0; k < 100; ++k) {
        x = x + (-0.7 * x) * 0.01 + 0.4 * x * noise->increment(0, k) + 0.2 * x * noise->increment(1, k);
        CHECK(sol.state(k + 1)[0] == Approx(x).epsilon(1e-13));
    }
    CHECK_THROWS(solve_em(a, gg, Vec{1.5}, shared_noise(g, 1, 3)));
    CHECK_THROWS(solve_em(a, gg, Vec{1.5, 2.0}, noise));
}

TEST_CASE("Ornstein-Uhlenbeck variance matches the Euler oracle", "[spde]") {
    // State (X, 1): dX = −θX dt + σ dW as a linear system with nilpotent diffusion.
    const double theta = 1.0, sigma = 0.8, dt = 0.01;
    const auto s = SpaceScale::uniform(2);
    const auto a = DriftOp::linear(s, LinearOp(2, {-theta, 0.0, 0.0, 0.0}));
    const DiffusionFamily gg(s, {LinearOp(2, {0.0, sigma, 0.0, 0.0})});
    const TimeGrid g(dt, 100);
    const std::size_t n = 20000;
    double m = 0, m2 = 0;
    for (std::size_t p = 0; p < n; ++p) {
        const auto sol = solve_em(a, gg, Vec{0.0, 1.0}, shared_noise(g, 1, 44, p));
        const double x = sol.state(100)[0];
        CHECK(sol.state(100)[1] == 1.0);
        m += x;
        m2 += x * x;
    }
    double oracle = 0;
    for (int k = 0; k < 100; ++k) oracle += std::pow(1 - theta * dt, 2 * k);
    oracle *= sigma * sigma * dt;
    const double var = m2 / n - (m / n) * (m / n);
    CHECK(var == Approx(oracle).epsilon(4 * std::sqrt(2.0 / n)));
    CHECK(std::abs(m / n) < 4 * std::sqrt(oracle / n));
}

TEST_CASE("geometric Brownian motion mean growth", "[spde]") {
    const auto s = SpaceScale::uniform(1);
    const auto a = DriftOp::linear(s, LinearOp(1, {0.5}));
    const DiffusionFamily gg(s, {LinearOp(1, {0.3})});
    const TimeGrid g(0.01, 100);
    const std::size_t n = 20000;
    double m = 0, m2 = 0;
    for (std::size_t p = 0; p < n; ++p) {
        const double x = solve_em(a, gg, Vec{1.0}, shared_noise(g, 1, 45, p)).state(100)[0];
        m += x;
        m2 += x * x;
    }
    m /= n;
    const double se = std::sqrt((m2 / n - m * m) / n);
    CHECK(std::abs(m - std::pow(1.005, 100)) < 4 * se);
}

TEST_CASE("Stratonovich solvers approach the exact diagonal solution", "[spde]") {
    // dΨ = λΨ∘dW has Ψ_t = Ψ_0·exp(λW_t).
    const auto s = SpaceScale::uniform(1);
    const auto zero = DriftOp::zero(s);
    const DiffusionFamily gg(s, {LinearOp(1, {0.5})});
    const TimeGrid g(1e-3, 1000);
    double e_conv = 0, e_mid = 0;
    const std::size_t n = 200;
    for (std::size_t p = 0; p < n; ++p) {
        const auto noise = shared_noise(g, 1, 46, p);
        const double exact = 2.0 * std::exp(0.5 * noise->value(0, 1000));
        e_conv += std::abs(solve_strat(zero, gg, Vec{2.0}, noise).state(1000)[0] - exact);
        e_mid += std::abs(solve_strat_midpoint(zero, gg, Vec{2.0}, noise).state(1000)[0] - exact);
    }
    CHECK(e_conv / n < 0.02);
    CHECK(e_mid / n < 0.02);
}

TEST_CASE("nilpotent diffusion makes both calculi agree", "[spde]") {
    const auto s = SpaceScale::uniform(2);
    const TimeGrid g(0.01, 100);
    const auto noise = shared_noise(g, 1, 47);
    const auto a = DriftOp::linear(s, LinearOp::scaled_identity(2, -0.5));
    const DiffusionFamily gg(s, {LinearOp(2, {0.0, 1.0, 0.0, 0.0})});
    const auto x = solve_em(a, gg, Vec{1.0, 2.0}, noise);
    const auto y = solve_strat(a, gg, Vec{1.0, 2.0}, noise);
    for (std::size_t k = 0; k <= 100; ++k) {
        CHECK(x.state(k)[0] == y.state(k)[0]);
        CHECK(x.state(k)[1] == y.state(k)[1]);
    }
}

TEST_CASE("solver divergence is reported with its step", "[spde]") {
    const auto s = SpaceScale::uniform(1);
    const auto a = DriftOp::linear(s, LinearOp(1, {1e200}));
    const DiffusionFamily gg(s, {LinearOp::zero(1)});
    try {
        solve_em(a, gg, Vec{1.0}, shared_noise(TimeGrid(1.0, 10), 1, 1));
        FAIL("expected divergence");
    } catch (const SolverDivergence& e) {
        CHECK(e.step() >= 1);
        CHECK(e.step() <= 10);
    }
}

TEST_CASE("solution CSV export", "[spde]") {
    const auto s = SpaceScale::uniform(2);
    const auto sol = solve_em(DriftOp::zero(s), DiffusionFamily(s, {LinearOp::zero(2)}), Vec{0.5, 0.25},
                              shared_noise(TimeGrid(0.25, 4), 1, 1));
    std::ostringstream out;
    write_solution_csv(out, sol);
    CHECK(out.str() ==
          "step,time,coord_0,coord_1\n0,0,0.5,0.25\n1,0.25,0.5,0.25\n2,0.5,0.5,0.25\n3,0.75,0.5,0.25\n4,1,0.5,0.25\n");
}

TEST_CASE("truncation convergence follows the tail of the constants", "[spde]") {
    const auto s = SpaceScale::uniform(2);
    std::vector<LinearOp> ops;
    for (int i = 0; i < 6; ++i) ops.push_back(rotation(0.7 * i, std::ldexp(1.0, -i)));
    const DiffusionFamily gg(s, ops);
    const auto a = DriftOp::linear(s, LinearOp::scaled_identity(2, -1.0));
    const std::vector<std::pair<std::size_t, std::size_t>> pairs{{6, 6}, {6, 2}, {6, 3}, {6, 4}};
    const auto table = truncation_convergence(a, gg, Vec{1.0, 0.0}, pairs, TimeGrid(0.01, 100), MonteCarlo{2000, 8, 1});
    REQUIRE(table.rows.size() == 4);
    CHECK(table.rows[0].error.mean == 0.0);
    CHECK(table.monotone);
    for (std::size_t r = 1; r + 1 < 4; ++r) {
        const double ratio = table.rows[r].error.mean / table.rows[r + 1].error.mean;
        const double tail_ratio = table.rows[r].tail / table.rows[r + 1].tail;
        CHECK(ratio > tail_ratio / 2);
        CHECK(ratio < tail_ratio * 2);
    }
    CHECK(table.rows[1].tail == Approx(gg.tail_sum(2)));
}

TEST_CASE("uniqueness and reproducibility", "[spde]") {
    const auto s = SpaceScale::uniform(2);
    const auto a = DriftOp::linear(s, LinearOp(2, {-1.0, 0.5, 0.0, -0.2}));
    const DiffusionFamily gg(s, {rotation(0.1, 0.5), rotation(1.0, 0.3), rotation(2.0, 0.2)});
    const auto r = uniqueness_check(a, gg, Vec{1.0, -1.0}, 1234, TimeGrid(0.01, 100));
    CHECK(r.bit_identical);
    CHECK(!r.first_divergent_step.has_value());
    CHECK(r.reorder_max_divergence <= 1e-12);
    CHECK(r.seeds_differ);
}

TEST_CASE("energy residual equals the discrete remainder", "[spde]") {
    const auto s = SpaceScale({3.0, 2.0}, {2.0, 1.0}, {1.0, 1.0}, {1.0, 0.5});
    const LinearOp am(2, {-1.0, 0.3, 0.2, -0.5});
    const auto a = DriftOp::linear(s, am);
    const DiffusionFamily gg(s, {LinearOp(2, {0.3, 0.0, 0.1, 0.2}), LinearOp(2, {0.0, -0.2, 0.2, 0.0})});
    const TimeGrid g(0.01, 100);
    for (std::uint64_t p = 0; p < 5; ++p) {
        const auto noise = shared_noise(g, 2, 50, p);
        const auto sol = solve_em(a, gg, Vec{1.0, 1.0}, noise);
        // ‖Ψ_{k+1}‖² − ‖Ψ_k‖² − 2⟨Ψ_k, ΔΨ_k⟩ = ‖ΔΨ_k‖², so the residual is Σ(‖ΔΨ_k‖² − ‖GΨ_k‖²_HS dt).
        double oracle = 0;
        for (std::size_t k = 0; k < 100; ++k) {
            const auto x = sol.state(k);
            Vec d(2, 0.0);
            double hs = 0;
            for (std::size_t i = 0; i < 2; ++i) {
                const Vec gi = gg.op(i).apply(x);
                hs += inner(s, Space::H, gi, gi);
                for (int c = 0; c < 2; ++c) d[c] += gi[c] * noise->increment(i, k);
            }
            const Vec ax = am.apply(x);
            for (int c = 0; c < 2; ++c) d[c] += ax[c] * 0.01;
            oracle += inner(s, Space::H, d, d) - hs * 0.01;
        }
        const double r = energy_residual(sol, drift_sampler(a), diffusion_sampler(gg), s, 1.0);
        CHECK(r == Approx(oracle).margin(1e-12));
        const double f = ito_formula_residual(ItoFunctional::squared_norm(s), sol, drift_sampler(a),
                                              diffusion_sampler(gg), 1.0);
        CHECK(std::abs(f - r) <= 1e-12);
        const double lin = ito_formula_residual(ItoFunctional::linear(s, Vec{0.5, -2.0}), sol, drift_sampler(a),
                                                diffusion_sampler(gg), 1.0);
        CHECK(std::abs(lin) <= 1e-12);
    }
}

TEST_CASE("Itô functional derivatives are checked", "[spde]") {
    const auto s = SpaceScale::uniform(2);
    auto f = [](double t, std::span<const double> x) { return t * x[0] * x[0] + x[1]; };
    auto ft = [](double, std::span<const double> x) { return x[0] * x[0]; };
    auto fx = [](double t, std::span<const double> x, std::span<double> o) {
        o[0] = 2 * t * x[0];
        o[1] = 1.0;
    };
    auto fxx = [](double t, std::span<const double>, std::span<const double> h, std::span<double> o) {
        o[0] = 2 * t * h[0];
        o[1] = 0.0;
    };
    CHECK_NOTHROW(ItoFunctional(s, f, ft, fx, fxx));
    auto bad_fx = [](double t, std::span<const double> x, std::span<double> o) {
        o[0] = t * x[0];
        o[1] = 1.0;
    };
    CHECK_THROWS_AS(ItoFunctional(s, f, ft, bad_fx, fxx), std::invalid_argument);
    auto bad_ft = [](double, std::span<const double>) { return 0.0; };
    CHECK_THROWS_AS(ItoFunctional(s, f, bad_ft, fx, fxx), std::invalid_argument);
}

TEST_CASE("Grönwall envelope formula and validity", "[spde]") {
    const auto s = SpaceScale::uniform(2);
    const auto a = DriftOp::linear(s, LinearOp::scaled_identity(2, -0.5));
    const DiffusionFamily gg(s, {LinearOp::scaled_identity(2, 0.4)});
    const double beta = 3.0 * (1.0 * 0.25 + 4.0 * 0.16);
    CHECK(gronwall_envelope(a, gg, 2.0, 1.0) == Approx(3.0 * std::exp(beta) * 3.0));
    CHECK_THROWS(gronwall_envelope(a, gg, -1.0, 1.0));
    const TimeGrid g(0.01, 100);
    double sup = 0;
    const std::size_t n = 2000;
    for (std::size_t p = 0; p < n; ++p) {
        const auto sol = solve_em(a, gg, Vec{1.0, 1.0}, shared_noise(g, 1, 51, p));
        double peak = 0;
        for (std::size_t k = 0; k <= 100; ++k) peak = std::max(peak, inner(s, Space::H, sol.state(k), sol.state(k)));
        sup += peak;
    }
    CHECK(sup / n <= gronwall_envelope(a, gg, 2.0, 1.0));
}
