// Acceptance suite: one PASS/FAIL line per criterion, full-size runs.

#include "stochint/csv.hpp"
#include "stochint/experiment.hpp"

#include <chrono>
#include <cstdio>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

using namespace stochint;

namespace {

constexpr std::uint64_t kSeed = 42;
constexpr double kCaseSeconds = 30.0;

struct Verdict {
    bool pass = true;
    std::vector<std::string> notes;

    void require(bool ok, const std::string& note) {
        pass = pass && ok;
        notes.push_back(std::string(ok ? "ok   " : "FAIL ") + note);
    }
};

Experiment make(Kind k, std::size_t n, const std::string& integrand = "") {
    Experiment e;
    e.kind = k;
    e.n_paths = n;
    e.seed = kSeed;
    e.dt = 1e-3;
    e.t_final = 1.0;
    if (!integrand.empty()) e.integrand = integrand;
    return e;
}

std::string describe(const Metric& m) {
    std::string s = m.name + " = " + format_double(m.stat.mean);
    if (m.stat.std_err > 0) s += " ± " + format_double(m.stat.std_err);
    if (m.check != Check::info && m.check != Check::flag) {
        s += " (reference " + format_double(m.reference) + ", tolerance " + format_double(m.tolerance) + ")";
    }
    return s;
}

void require_metric(Verdict& v, const Report& r, const std::string& name, const std::string& label) {
    const Metric* m = r.find(name);
    if (!m) {
        v.require(false, label + ": metric " + name + " missing");
        return;
    }
    v.require(m->pass, label + ": " + describe(*m));
}

void require_report(Verdict& v, const Report& r, const std::string& label) {
    for (const auto& m : r.metrics)
        if (m.check != Check::info) require_metric(v, r, m.name, label);
}

void require_runtime(Verdict& v, const Report& r, const std::string& label) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.2f s", r.runtime_seconds);
    v.require(r.runtime_seconds <= kCaseSeconds, label + " runtime " + buf + " (limit 30 s)");
}

std::string csv_of(const Report& r) {
    std::ostringstream out;
    write_report_csv(out, r);
    return out.str();
}

Verdict isometry() {
    Verdict v;
    for (const char* integrand : {"constant", "brownian", "cylindrical"}) {
        const Report r = run(make(Kind::isometry, 100000, integrand));
        const std::string label = std::string("isometry/") + integrand;
        require_metric(v, r, "rel_err", label);
        v.notes.push_back("     " + label + ": " + describe(*r.find("lhs")) + ", " + describe(*r.find("rhs")));
        require_runtime(v, r, label);
    }
    return v;
}

Verdict duality_pushthrough() {
    Verdict v;
    for (const char* integrand : {"constant", "brownian", "cylindrical"}) {
        for (Kind k : {Kind::duality, Kind::pushthrough}) {
            const Report r = run(make(k, 1000, integrand));
            require_metric(v, r, "max_rel_diff", std::string(to_string(k)) + "/" + integrand);
        }
    }
    return v;
}

Verdict quadratic_variation() {
    Verdict v;
    for (const char* integrand : {"constant", "brownian", "cylindrical"}) {
        const Report r = run(make(Kind::qv, 10000, integrand));
        const std::string label = std::string("qv/") + integrand;
        const Metric* est = r.find("qv_estimate");
        const Metric* ref = r.find("reference_integral");
        const double rel = std::abs(est->stat.mean - ref->stat.mean) / std::abs(ref->stat.mean);
        v.require(rel <= 0.05, label + ": |QV − ∫‖Ψ‖²ds| / ∫‖Ψ‖²ds = " + format_double(rel) + " (tolerance 0.05)");
        require_metric(v, r, "decreasing_beyond_ci", label);
        for (const auto& m : r.metrics)
            if (m.name.rfind("l1_error_mesh_", 0) == 0) v.notes.push_back("     " + label + ": " + describe(m));
    }
    return v;
}

Verdict stratonovich() {
    Verdict v;
    Experiment e = make(Kind::strat_convert, 100000);
    e.lambda = {0.3, 0.4};
    const Report r = run(e);
    require_metric(v, r, "mean_growth", "strat_convert");
    require_metric(v, r, "gap_slope", "strat_convert");
    for (const auto& m : r.metrics)
        if (m.name.rfind("rms_gap_dt_", 0) == 0) v.notes.push_back("     strat_convert: " + describe(m));
    return v;
}

Verdict collapse() {
    Verdict v;
    const Report r = run(make(Kind::collapse, 10000));
    require_report(v, r, "collapse");
    return v;
}

Verdict existence_uniqueness() {
    Verdict v;
    const Report solve = run(make(Kind::solve, 100000));
    require_report(v, solve, "solve");
    const Report trunc = run(make(Kind::truncation, 10000));
    require_report(v, trunc, "truncation");
    // The envelope on a second, stiffer OU parameter set.
    Experiment ou = make(Kind::solve, 10000);
    ou.theta = 3.0;
    ou.sigma = 2.0;
    require_metric(v, run(ou), "sup_norm_sq", "solve/theta=3,sigma=2");
    return v;
}

Verdict energy() {
    Verdict v;
    const Report r = run(make(Kind::energy, 10000));
    require_metric(v, r, "rms_ratio", "energy");
    require_metric(v, r, "ito_formula_match", "energy");
    for (const char* name : {"rms_residual_dt", "rms_residual_half_dt", "mean_residual_dt", "mean_residual_half_dt"})
        v.notes.push_back("     energy: " + describe(*r.find(name)));
    const Report f = run(make(Kind::ito_formula, 1000));
    require_report(v, f, "ito_formula");
    return v;
}

Verdict bdg() {
    Verdict v;
    const Report r = run(make(Kind::bdg, 10000));
    require_report(v, r, "bdg");
    return v;
}

Verdict infrastructure() {
    Verdict v;
    const auto start = std::chrono::steady_clock::now();
    const auto metrics = selftest_suite(1);
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    bool all = true;
    for (const auto& m : metrics) all = all && m.pass;
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.2f s", seconds);
    v.require(all, "selftest: " + std::to_string(metrics.size()) + " checks");
    v.require(seconds <= 5.0, std::string("selftest runtime ") + buf + " (limit 5 s)");
    for (Kind k : {Kind::isometry, Kind::qv, Kind::cross, Kind::bdg, Kind::strat_convert, Kind::collapse, Kind::solve,
                   Kind::truncation, Kind::energy}) {
        Experiment e = make(k, 2000);
        e.dt = 0.01;
        std::string first;
        bool same = true;
        for (std::size_t w : {1u, 4u, 16u}) {
            e.workers = w;
            const std::string csv = csv_of(run(e));
            if (first.empty()) first = csv;
            same = same && csv == first;
        }
        v.require(same, std::string(to_string(k)) + ": identical reports with 1, 4 and 16 workers");
    }
    return v;
}

}  // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria = {
        {"Itô isometry (constant, Brownian, cylindrical; N=1e5)", isometry},
        {"duality and operator push-through (1e3 paths, 1e-10)", duality_pushthrough},
        {"quadratic variation identity and refining ladder", quadratic_variation},
        {"Stratonovich conversion (mean growth, midpoint gap slope)", stratonovich},
        {"constant-noise collapse", collapse},
        {"existence and uniqueness (OU variance, reproducibility, truncation, envelope)", existence_uniqueness},
        {"energy equality and Itô formula residual", energy},
        {"BDG ratio uniform over the suite and seed-stable", bdg},
        {"selftest and worker-count invariance", infrastructure},
    };
    int failures = 0;
    std::vector<std::string> summary;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const auto start = std::chrono::steady_clock::now();
        Verdict v;
        try {
            v = criteria[i].second();
        } catch (const std::exception& e) {
            v.require(false, std::string("aborted: ") + e.what());
        }
        const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        for (const auto& n : v.notes) std::printf("    %s\n", n.c_str());
        char line[256];
        std::snprintf(line, sizeof line, "AC%zu %s  %s (%.1f s)", i + 1, v.pass ? "PASS" : "FAIL",
                      criteria[i].first.c_str(), seconds);
        std::printf("%s\n", line);
        std::fflush(stdout);
        summary.push_back(line);
        failures += v.pass ? 0 : 1;
    }
    std::printf("\nSummary\n");
    for (const auto& s : summary) std::printf("%s\n", s.c_str());
    std::printf("%d of %zu criteria failed\n", failures, criteria.size());
    return failures == 0 ? 0 : 1;
}
