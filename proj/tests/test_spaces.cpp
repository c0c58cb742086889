#include "stochint/rng.hpp"
#include "stochint/spaces.hpp"

#include <catch_amalgamated.hpp>

#include <cmath>

using namespace stochint;
using Catch::Approx;

namespace {

SpaceScale graded() {
    return SpaceScale({4.0, 9.0, 16.0}, {2.0, 3.0, 4.0}, {1.0, 1.0, 1.0}, {0.5, 0.25, 0.125});
}

// Largest singular value by power iteration on MᵀM, M = W_t^{1/2} A W_s^{-1/2}.
double power_norm(const LinearOp& a, std::span<const double> ws, std::span<const double> wt) {
    const std::size_t d = a.dim();
    std::vector<double> m(d * d);
    for (std::size_t r = 0; r < d; ++r)
        for (std::size_t c = 0; c < d; ++c) m[r * d + c] = std::sqrt(wt[r]) * a(r, c) / std::sqrt(ws[c]);
    std::vector<double> v(d, 1.0), u(d), w(d);
    double lambda = 0;
    for (int it = 0; it < 2000; ++it) {
        for (std::size_t r = 0; r < d; ++r) {
            u[r] = 0;
            for (std::size_t c = 0; c < d; ++c) u[r] += m[r * d + c] * v[c];
        }
        for (std::size_t c = 0; c < d; ++c) {
            w[c] = 0;
            for (std::size_t r = 0; r < d; ++r) w[c] += m[r * d + c] * u[r];
        }
        double n = 0;
        for (double x : w) n += x * x;
        n = std::sqrt(n);
        if (n == 0) return 0;
        for (std::size_t c = 0; c < d; ++c) v[c] = w[c] / n;
        lambda = n;
    }
    return std::sqrt(lambda);
}

}  // namespace

TEST_CASE("weighted inner products and norms", "[spaces]") {
    const auto s = graded();
    const std::vector<double> x{1.0, -2.0, 0.5}, y{3.0, 1.0, 2.0};
    CHECK(inner(s, Space::V, x, y) == Approx(4 * 3 - 9 * 2 + 16 * 1));
    CHECK(inner(s, Space::X, x, y) == Approx(0.5 * 3 - 0.25 * 2 + 0.125 * 1));
    CHECK(norm(s, Space::H, x) == Approx(std::sqrt(2 + 12 + 1.0)));
    CHECK(norm(SpaceScale::uniform(3), Space::U, x) == Approx(std::sqrt(5.25)));
}

TEST_CASE("space chain validation", "[spaces]") {
    CHECK_THROWS(SpaceScale({1.0}, {2.0}, {1.0}, {1.0}));  // H weight above V
    CHECK_THROWS(SpaceScale({1.0}, {1.0}, {1.0}, {0.0}));
    CHECK_THROWS(SpaceScale({1.0, 1.0}, {1.0}, {1.0}, {1.0}));
    CHECK(parse_space("U") == Space::U);
    CHECK(to_string(Space::X) == "X");
    CHECK_THROWS(parse_space("W"));
}

TEST_CASE("embedding constants equal the largest weight ratio", "[spaces]") {
    const auto s = graded();
    for (int f = 0; f < 4; ++f) {
        for (int t = f; t < 4; ++t) {
            const auto wf = s.weights(Space(f));
            const auto wt = s.weights(Space(t));
            double expected = 0;
            for (std::size_t i = 0; i < 3; ++i) expected = std::max(expected, std::sqrt(wt[i] / wf[i]));
            CHECK(embedding_constant(s, Space(f), Space(t)) == Approx(expected));
            CHECK(embedding_constant(s, Space(f), Space(t)) <= 1.0 + 1e-15);
        }
    }
    CHECK_THROWS(embedding_constant(s, Space::X, Space::V));
}

TEST_CASE("Hilbert-Schmidt norm from columns", "[spaces]") {
    const auto s = graded();
    const std::vector<double> cols{1.0, 0.0, 2.0, -1.0, 1.0, 0.0};
    const double expected = std::sqrt(2 * 1 + 4 * 4 + 2 * 1 + 3 * 1);
    CHECK(hs_norm(s, Space::H, cols, 2) == Approx(expected));
    CHECK(hs_norm(s, Space::H, {}, 0) == 0.0);
    // HS norm of the identity on a Euclidean d-space is sqrt(d).
    const auto id = LinearOp::identity(4);
    CHECK(hs_norm(SpaceScale::uniform(4), Space::H, id.entries(), 4) == Approx(2.0));
}

TEST_CASE("operator norm matches power iteration", "[spaces]") {
    const auto s = graded();
    SplitMix64 rng(17);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> a(9);
        for (double& v : a) v = rng.normal();
        const LinearOp op(3, a);
        for (auto [from, to] : {std::pair{Space::H, Space::H}, {Space::V, Space::H}, {Space::U, Space::X}}) {
            const double oracle = power_norm(op, s.weights(from), s.weights(to));
            CHECK(op.operator_norm(s, from, to) == Approx(oracle).epsilon(1e-8));
        }
    }
}

TEST_CASE("linear operator algebra", "[spaces]") {
    const LinearOp a(2, {1.0, 2.0, 3.0, 4.0});
    const LinearOp b(2, {0.0, 1.0, 1.0, 0.0});
    const auto ab = a.compose(b);
    CHECK(ab(0, 0) == 2.0);
    CHECK(ab(0, 1) == 1.0);
    CHECK(ab(1, 0) == 4.0);
    CHECK(ab(1, 1) == 3.0);
    const auto y = a.apply(std::vector<double>{1.0, -1.0});
    CHECK(y[0] == -1.0);
    CHECK(y[1] == -1.0);
    CHECK_THROWS(LinearOp(2, {1.0, 2.0, 3.0}));
    CHECK(LinearOp::diagonal(std::vector<double>{2.0, -3.0}).operator_norm(SpaceScale::uniform(2), Space::H, Space::H) ==
          Approx(3.0));
    CHECK(LinearOp::zero(3).operator_norm(SpaceScale::uniform(3), Space::H, Space::H) == 0.0);
}

TEST_CASE("certified bounds are checked", "[spaces]") {
    const auto s = SpaceScale::uniform(2);
    const LinearOp a(2, {3.0, 0.0, 0.0, 1.0});
    CHECK(a.with_bound(s, 3.0, Space::H, Space::H).bound()->value == 3.0);
    CHECK_THROWS(a.with_bound(s, 2.9, Space::H, Space::H));
    CHECK(!a.bound().has_value());
}
