#include "stochint/experiment.hpp"

#include <catch_amalgamated.hpp>

#include <cmath>
#include <sstream>

using namespace stochint;

namespace {

std::string report_bytes(const Experiment& e) {
    std::ostringstream out;
    write_report_csv(out, run(e));
    return out.str();
}

}  // namespace

TEST_CASE("kind names", "[harness]") {
    for (Kind k : {Kind::isometry, Kind::duality, Kind::pushthrough, Kind::qv, Kind::cross, Kind::bdg,
                   Kind::strat_convert, Kind::collapse, Kind::solve, Kind::truncation, Kind::energy,
                   Kind::ito_formula}) {
        CHECK(parse_kind(to_string(k)) == k);
    }
    CHECK(parse_kind("strat-convert") == Kind::strat_convert);
    CHECK(parse_kind("truncate") == Kind::truncation);
    CHECK(parse_kind("ito-formula") == Kind::ito_formula);
    CHECK(!parse_kind("refine").has_value());
    CHECK(!is_statistical(Kind::duality));
    CHECK(is_statistical(Kind::bdg));
}

TEST_CASE("experiment validation", "[harness]") {
    Experiment e;
    e.kind = Kind::isometry;
    e.n_paths = 99;
    CHECK_THROWS_WITH(e.validate(), Catch::Matchers::ContainsSubstring("n_paths >= 100"));
    e.n_paths = 100;
    CHECK_NOTHROW(e.validate());
    e.dt = 0.0;
    CHECK_THROWS(e.validate());
    e.dt = 2.0;
    CHECK_THROWS(e.validate());
    e.dt = 1e-3;
    e.integrand = "smooth";
    CHECK_THROWS(e.validate());
    e.kind = Kind::duality;
    e.integrand = "constant";
    e.n_paths = 1;
    CHECK_NOTHROW(e.validate());
    e.workers = 0;
    CHECK_THROWS(e.validate());
    CHECK_THROWS_AS(run(e), std::invalid_argument);
}

TEST_CASE("metric checks", "[harness]") {
    const auto s = exact_value(1.04);
    CHECK(make_metric("a", s, 1.0, 0.05, Check::relative).pass);
    CHECK(!make_metric("a", s, 1.0, 0.03, Check::relative).pass);
    CHECK(make_metric("a", s, 1.0, 0.05, Check::absolute).pass);
    CHECK(make_metric("a", s, 0.0, 1.1, Check::at_most).pass);
    CHECK(!make_metric("a", s, 0.0, 1.0, Check::at_most).pass);
    CHECK(make_metric("a", s, 0.0, 1.0, Check::at_least).pass);
    CHECK(make_metric("a", s, 2.0, 2.0, Check::within_factor).pass);
    CHECK(!make_metric("a", s, 3.0, 2.0, Check::within_factor).pass);
    CHECK(!make_metric("a", s, 1.0, 0.0, Check::flag).pass);
    CHECK(make_metric("a", exact_value(1.0), 1.0, 0.0, Check::flag).pass);
    CHECK(make_metric("a", s, 100.0, 0.0, Check::info).pass);
    StatSummary noisy{0.1, 0.05, 0.0, 0.2, 100};
    CHECK(make_metric("a", noisy, 0.0, 3.0, Check::covers).pass);
    CHECK(!make_metric("a", noisy, 0.0, 1.5, Check::covers).pass);
}

TEST_CASE("reports do not depend on the worker count", "[harness]") {
    for (Kind k : {Kind::isometry, Kind::qv, Kind::solve, Kind::bdg}) {
        Experiment e;
        e.kind = k;
        e.n_paths = 300;
        e.dt = 0.01;
        e.seed = 77;
        e.workers = 1;
        const std::string one = report_bytes(e);
        e.workers = 4;
        CHECK(report_bytes(e) == one);
        e.workers = 16;
        CHECK(report_bytes(e) == one);
    }
}

TEST_CASE("report CSV layout", "[harness]") {
    Experiment e;
    e.kind = Kind::isometry;
    e.integrand = "constant";
    e.n_paths = 200;
    e.dt = 0.1;
    e.seed = 5;
    const std::string csv = report_bytes(e);
    CHECK(csv.rfind("metric,mean,std_err,ci_low,ci_high,n,reference,tolerance,pass\n", 0) == 0);
    CHECK(csv.find("\nlhs,") != std::string::npos);
    CHECK(csv.find("\nrhs,5,") != std::string::npos);
    CHECK(csv.find("# seed=5, dt=0.10000000000000001, n=200\n") != std::string::npos);
}

TEST_CASE("different seeds give different reports", "[harness]") {
    Experiment e;
    e.kind = Kind::isometry;
    e.n_paths = 200;
    e.dt = 0.01;
    e.seed = 1;
    const auto a = report_bytes(e);
    e.seed = 2;
    CHECK(report_bytes(e) != a);
}

TEST_CASE("refine ladders", "[harness]") {
    Experiment e;
    e.kind = Kind::isometry;
    e.n_paths = 2000;
    e.seed = 3;
    const std::vector<double> ladder{0.02, 0.01, 0.005};
    const auto r = refine(e, ladder);
    REQUIRE(r.errors.size() == 3);
    CHECK(std::abs(r.slope - 0.5) < 0.15);
    CHECK(r.pass);
    CHECK_THROWS(refine(e, std::vector<double>{0.01, 0.02, 0.005}));
    CHECK_THROWS(refine(e, std::vector<double>{0.01, 0.005}));
    std::ostringstream out;
    write_refine_csv(out, r);
    CHECK(out.str().find("slope") != std::string::npos);
}

TEST_CASE("selftest suite passes", "[harness]") {
    const auto metrics = selftest_suite(2);
    CHECK(metrics.size() >= 15);
    for (const auto& m : metrics) {
        INFO(m.name);
        CHECK(m.pass);
    }
}
