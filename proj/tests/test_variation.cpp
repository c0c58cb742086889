#include "stochint/variation.hpp"

#include <catch_amalgamated.hpp>

#include <cmath>
#include <numbers>

using namespace stochint;
using Catch::Approx;

TEST_CASE("partition construction", "[variation]") {
    const TimeGrid g(0.01, 100);
    const auto u = Partition::uniform(g, 4, 1.0);
    CHECK(u.intervals() == 25);
    CHECK(u.mesh() == Approx(0.04));
    CHECK(u.horizon() == Approx(1.0));
    const auto d = Partition::dyadic(g, 2, 1.0);
    CHECK(d.indices() == std::vector<std::size_t>{0, 25, 50, 75, 100});
    const std::vector<double> times{0.0, 0.1, 0.5, 1.0};
    const auto f = Partition::from_times(g, times);
    CHECK(f.mesh() == Approx(0.5));
    CHECK_THROWS(Partition(g, {1, 5}));
    CHECK_THROWS(Partition(g, {0, 5, 5}));
    CHECK_THROWS(Partition(g, {0, 101}));
    CHECK_THROWS(Partition::uniform(g, 3, 1.0));
    CHECK_THROWS(Partition::dyadic(g, 3, 1.0));
}

TEST_CASE("quadratic variation of smooth and piecewise paths", "[variation]") {
    const TimeGrid g(0.01, 100);
    std::vector<double> line(101);
    for (std::size_t k = 0; k <= 100; ++k) line[k] = 3.0 * g.time(k);
    for (std::size_t stride : {1u, 2u, 5u, 10u}) {
        const auto p = Partition::uniform(g, stride, 1.0);
        CHECK(quadratic_variation(line, p) == Approx(9.0 * p.mesh()));
    }
    PathValues v(2, 101);
    for (std::size_t k = 0; k <= 100; ++k) {
        v.at(k)[0] = g.time(k);
        v.at(k)[1] = -2.0 * g.time(k);
    }
    const auto scale = SpaceScale({4.0, 4.0}, {2.0, 1.0}, {1.0, 1.0}, {1.0, 1.0});
    const auto p = Partition::uniform(g, 10, 1.0);
    CHECK(quadratic_variation(v, p, scale, Space::H) == Approx((2.0 * 1 + 1.0 * 4) * 0.1));
}

TEST_CASE("quadratic and cross variation of Brownian paths", "[variation]") {
    const TimeGrid g(1e-3, 1000);
    const auto noise = sample_cylindrical(g, 2, 31);
    const auto w0 = noise.path(0);
    const auto p = Partition::dyadic(g, 3, 1.0);
    double oracle = 0;
    for (std::size_t j = 0; j + 1 < p.indices().size(); ++j) {
        const double d = w0[p.indices()[j + 1]] - w0[p.indices()[j]];
        oracle += d * d;
    }
    CHECK(quadratic_variation(w0, p) == Approx(oracle));

    PathValues x(1, 1001);
    for (std::size_t k = 0; k <= 1000; ++k) x.at(k)[0] = w0[k];
    const auto fine = Partition::uniform(g, 1, 1.0);
    CHECK(cross_variation(x, w0, fine)[0] == Approx(quadratic_variation(w0, fine)));
    CHECK(quadratic_variation(w0, fine) == Approx(1.0).margin(0.15));
    CHECK(std::abs(cross_variation(x, noise.path(1), fine)[0]) < 0.15);

    // Bilinearity: [aX + bY, Z] = a[X, Z] + b[Y, Z].
    PathValues combo(1, 1001);
    const auto w1 = noise.path(1);
    for (std::size_t k = 0; k <= 1000; ++k) combo.at(k)[0] = 2.0 * w0[k] - 3.0 * w1[k];
    PathValues y(1, 1001);
    for (std::size_t k = 0; k <= 1000; ++k) y.at(k)[0] = w1[k];
    const double lhs = cross_variation(combo, w1, fine)[0];
    const double rhs = 2.0 * cross_variation(x, w1, fine)[0] - 3.0 * cross_variation(y, w1, fine)[0];
    CHECK(lhs == Approx(rhs).margin(1e-12));
}

TEST_CASE("QV identity for a constant integrand with a refining ladder", "[variation]") {
    const TimeGrid g(1e-3, 1000);
    const std::vector<std::size_t> strides{8, 4, 2, 1};
    const auto ladder = qv_identity_check(ProcessSampler::constant({2.0}), SpaceScale::uniform(1), Space::H, g, 1.0,
                                          strides, MonteCarlo{4000, 3, 1});
    REQUIRE(ladder.rungs.size() == 4);
    CHECK(ladder.decreasing_beyond_ci);
    for (const auto& r : ladder.rungs) {
        CHECK(r.reference == Approx(4.0));
        CHECK(r.estimate == Approx(4.0).epsilon(0.02));
        // Σ ΔW² − t has variance 2t·mesh; its Gaussian limit gives E|·| = sqrt(2t·mesh)·sqrt(2/π).
        CHECK(r.abs_err == Approx(4.0 * std::sqrt(2.0 * r.mesh) * std::sqrt(2.0 / std::numbers::pi)).epsilon(0.1));
    }
    CHECK_THROWS(qv_identity_check(ProcessSampler::constant({2.0}), SpaceScale::uniform(1), Space::H, g, 1.0, {},
                                   MonteCarlo{100, 3, 1}));
}

TEST_CASE("BDG ratio: Brownian reference, scale invariance and Doob cap", "[variation]") {
    const TimeGrid g(1e-3, 1000);
    const auto s1 = SpaceScale::uniform(1);
    const auto unit = bdg_ratio(ProcessSampler::constant({1.0}), s1, Space::H, g, 1.0, MonteCarlo{4000, 2, 1});
    // E sup|W| on [0,1] is sqrt(π/2); the grid maximum sits slightly below.
    CHECK(unit.ratio == Approx(std::sqrt(std::numbers::pi / 2)).epsilon(0.04));
    CHECK(unit.ratio < std::sqrt(std::numbers::pi / 2) + 0.03);
    const auto scaled = bdg_ratio(ProcessSampler::constant({-7.0}), s1, Space::H, g, 1.0, MonteCarlo{4000, 2, 1});
    CHECK(scaled.ratio == Approx(unit.ratio).epsilon(1e-12));
    const ProcessSampler wild(1, 1, [](const PathView& v, std::span<double> out) {
        out[0] = v.value(0) > 0 ? 3.0 : 0.1;
    });
    const auto w = bdg_ratio(wild, s1, Space::H, g, 1.0, MonteCarlo{2000, 4, 1});
    CHECK(w.ratio > 0.5);
    CHECK(w.ratio <= 2.0);
    CHECK(bdg_ratio(ProcessSampler::constant({0.0}), s1, Space::H, g, 1.0, MonteCarlo{100, 1, 1}).ratio == 0.0);
}
