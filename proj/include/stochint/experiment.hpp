#pragma once

#include "stochint/stats.hpp"

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace stochint {

enum class Kind {
    isometry,
    duality,
    pushthrough,
    qv,
    cross,
    bdg,
    strat_convert,
    collapse,
    solve,
    truncation,
    energy,
    ito_formula,
};

std::string_view to_string(Kind k);
/// Accepts the canonical names and the CLI spellings (strat-convert, truncate, ito-formula).
std::optional<Kind> parse_kind(std::string_view name);
/// Kinds whose metrics are Monte Carlo estimates and need n_paths ≥ kMinStatisticalPaths.
bool is_statistical(Kind k);

inline constexpr std::size_t kMinStatisticalPaths = 100;

/// A flat experiment record. Fields a kind does not use are ignored.
struct Experiment {
    Kind kind = Kind::isometry;
    std::size_t n_paths = 10000;
    std::uint64_t seed = 1;
    double dt = 1e-3;
    double t_final = 1.0;
    std::size_t workers = 1;
    double tolerance = 0.05;

    /// isometry/duality/pushthrough/qv: constant | brownian | cylindrical
    /// (qv also accepts smooth).
    std::string integrand = "brownian";
    /// Mode coefficients: cylindrical integrands (B e_i = λ_i e_i), the
    /// Stratonovich diagonal SPDE (𝒢_i = λ_i Id); empty means the kind default.
    std::vector<double> lambda;
    /// Number of modes for collapse (λ_i = 2^{-i}) and truncation (c_i = 2^{-i}).
    std::size_t k_modes = 0;
    /// truncation: j runs over 1..j_max.
    std::size_t j_max = 5;
    double theta = 1.0;
    double sigma = 1.0;
    /// solve: export the first path here when non-empty.
    std::string path_out;

    /// Throws std::invalid_argument on an inconsistent record.
    void validate() const;
};

/// How a metric's mean is judged against its reference.
enum class Check {
    relative,     // |mean − ref| ≤ tol·|ref|
    absolute,     // |mean − ref| ≤ tol
    at_most,      // mean ≤ tol
    at_least,     // mean ≥ tol
    covers,       // |mean − ref| ≤ max(tol·std_err, tiny): tol is a z-score
    within_factor,// ref/tol ≤ mean ≤ ref·tol
    flag,         // mean == 1
    info,         // recorded, never fails
};

struct Metric {
    std::string name;
    StatSummary stat;
    double reference = std::numeric_limits<double>::quiet_NaN();
    double tolerance = std::numeric_limits<double>::quiet_NaN();
    Check check = Check::info;
    bool pass = true;
};

/// Builds a metric and evaluates its check.
Metric make_metric(std::string name, StatSummary stat, double reference, double tolerance, Check check);
/// A deterministic value as a degenerate summary.
StatSummary exact_value(double value, std::size_t n = 1);

struct Report {
    Experiment experiment;
    std::vector<Metric> metrics;
    bool pass = true;
    double runtime_seconds = 0.0;

    const Metric* find(std::string_view name) const;
};

/// Runs an experiment. Throws std::invalid_argument for invalid experiments;
/// failures inside the computation propagate as other exceptions.
Report run(const Experiment& exp);

struct RefineReport {
    Experiment experiment;
    std::vector<double> ladder;
    std::vector<StatSummary> errors;
    double slope = 0.0;
    double expected_slope = 0.0;
    double slope_tolerance = 0.0;
    bool lower_bound_only = false;  // pass iff slope ≥ expected
    bool floor = false;             // errors indistinguishable across rungs
    bool pass = false;
    double runtime_seconds = 0.0;
};

/// Error versus dt (or partition mesh, for qv) along a strictly decreasing
/// ladder of at least 3 rungs, with the least-squares log-log slope.
RefineReport refine(const Experiment& exp, std::span<const double> ladder);

/// Fast checks of exact, hand-checkable identities across all modules; one
/// flag metric per check.
std::vector<Metric> selftest_suite(std::size_t workers = 1);

/// CSV: header `metric,mean,std_err,ci_low,ci_high,n,reference,tolerance,pass`,
/// one row per metric, then `# seed=…, dt=…, n=…`.
void write_report_csv(std::ostream& out, const Report& report);
void write_refine_csv(std::ostream& out, const RefineReport& report);
void write_metrics_csv(std::ostream& out, std::span<const Metric> metrics, std::uint64_t seed, double dt,
                       std::size_t n);

}  // namespace stochint
