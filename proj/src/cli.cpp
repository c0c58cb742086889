#include "stochint/cli.hpp"
#include "stochint/config.hpp"
#include "stochint/csv.hpp"
#include "stochint/experiment.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <fstream>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace stochint {

namespace {

struct Flags {
    std::string config_path;
    std::uint64_t seed = 0;
    std::size_t n_paths = 0;
    double dt = 0.0;
    double t_final = 0.0;
    std::size_t k_modes = 0;
    std::size_t workers = 0;
    std::string out_path;
    bool ci = false;
};

struct Options {
    CLI::Option* seed = nullptr;
    CLI::Option* n_paths = nullptr;
    CLI::Option* dt = nullptr;
    CLI::Option* t_final = nullptr;
    CLI::Option* k_modes = nullptr;
    CLI::Option* workers = nullptr;
};

constexpr const char* kSubcommands[] = {"isometry", "duality",  "pushthrough", "qv",     "cross",
                                        "bdg",      "strat-convert", "collapse", "solve", "truncate",
                                        "energy",   "ito-formula",   "refine",   "selftest"};

Options add_flags(CLI::App& sub, Flags& f) {
    Options o;
    sub.add_option("--config", f.config_path, "experiment config file (key = value lines)");
    o.seed = sub.add_option("--seed", f.seed, "master seed (U64)");
    o.n_paths = sub.add_option("--n-paths", f.n_paths, "number of Monte Carlo paths");
    o.dt = sub.add_option("--dt", f.dt, "time step");
    o.t_final = sub.add_option("--t-final", f.t_final, "horizon");
    o.k_modes = sub.add_option("--k-modes", f.k_modes, "number of noise modes");
    o.workers = sub.add_option("--workers", f.workers, "worker threads");
    sub.add_option("--out", f.out_path, "report CSV path (default: standard output)");
    sub.add_flag("--ci", f.ci, "CI mode: the seed must be given explicitly");
    return o;
}

class UsageError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

Config load_config(const std::string& path) {
    if (path.empty()) return Config{};
    std::ifstream in(path, std::ios::binary);
    if (!in) throw UsageError("cannot read config '" + path + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    try {
        return parse_config(buf.str());
    } catch (const ConfigError& e) {
        throw UsageError(path + ": " + e.what());
    }
}

std::uint64_t time_seed() {
    return static_cast<std::uint64_t>(std::chrono::system_clock::now().time_since_epoch().count());
}

// Applies flags over config values; returns the output path.
std::string apply_flags(Experiment& e, const Config& cfg, const Flags& f, const Options& o, std::ostream& err) {
    const bool seeded = o.seed->count() > 0 || cfg.has("seed");
    if (o.seed->count()) e.seed = f.seed;
    if (!seeded) {
        if (f.ci) throw UsageError("--ci requires an explicit seed (--seed or seed = … in the config)");
        e.seed = time_seed();
        err << "no seed given; using time-derived seed " << e.seed << '\n';
    }
    if (o.n_paths->count()) e.n_paths = f.n_paths;
    if (o.dt->count()) e.dt = f.dt;
    if (o.t_final->count()) e.t_final = f.t_final;
    if (o.k_modes->count()) e.k_modes = f.k_modes;
    if (o.workers->count()) e.workers = f.workers;
    if (!f.out_path.empty()) return f.out_path;
    return cfg.get_string("out").value_or("");
}

template <typename Writer>
void emit(const std::string& path, std::ostream& out, Writer&& write) {
    if (path.empty()) {
        write(out);
        return;
    }
    std::ofstream f(path, std::ios::binary);
    if (!f) throw UsageError("cannot write '" + path + "'");
    write(f);
}

std::string failing(const std::vector<Metric>& metrics) {
    std::string names;
    for (const auto& m : metrics) {
        if (m.pass) continue;
        if (!names.empty()) names += ' ';
        names += m.name;
    }
    return names;
}

void summary(std::ostream& out, bool pass, std::string_view label, const std::vector<Metric>& metrics,
             std::uint64_t seed, std::size_t n, double dt, double seconds) {
    std::size_t ok = 0;
    for (const auto& m : metrics) ok += m.pass ? 1 : 0;
    out << (pass ? "PASS " : "FAIL ") << label << ": " << ok << '/' << metrics.size() << " metrics within tolerance"
        << " (seed=" << seed << ", n=" << n << ", dt=" << format_double(dt) << ", " << std::fixed
        << std::setprecision(2) << seconds << " s)";
    out.unsetf(std::ios::fixed);
    if (!pass) out << " failing: " << failing(metrics);
    out << '\n';
}

int run_selftest(const Flags& f, const Options& o, std::ostream& out) {
    const auto start = std::chrono::steady_clock::now();
    const auto metrics = selftest_suite(o.workers->count() ? f.workers : 1);
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    bool pass = true;
    for (const auto& m : metrics) pass = pass && m.pass;
    if (!f.out_path.empty()) {
        emit(f.out_path, out, [&](std::ostream& s) { write_metrics_csv(s, metrics, 0, 0.0, metrics.size()); });
    } else {
        for (const auto& m : metrics) out << (m.pass ? "ok   " : "FAIL ") << m.name << '\n';
    }
    summary(out, pass, "selftest", metrics, 0, metrics.size(), 0.0, seconds);
    return pass ? kExitPass : kExitFailure;
}

}  // namespace

int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Monte Carlo checks of stochastic integration and SPDE solving in emulated Hilbert spaces",
                 "stochint"};
    app.require_subcommand(1);
    Flags flags;
    std::vector<std::pair<CLI::App*, Options>> subs;
    for (const char* name : kSubcommands) {
        CLI::App* sub = app.add_subcommand(name, std::string("run the ") + name + " experiment");
        subs.emplace_back(sub, add_flags(*sub, flags));
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        app.exit(e, out, err);
        return kExitPass;
    } catch (const CLI::ParseError& e) {
        app.exit(e, out, err);
        return kExitUsage;
    }

    CLI::App* chosen = nullptr;
    Options opts;
    for (auto& [sub, o] : subs) {
        if (sub->parsed()) {
            chosen = sub;
            opts = o;
        }
    }
    const std::string name = chosen->get_name();

    try {
        if (name == "selftest") return run_selftest(flags, opts, out);

        const Config cfg = load_config(flags.config_path);
        std::optional<Kind> kind;
        if (name != "refine") kind = parse_kind(name);
        Experiment e;
        std::vector<double> ladder;
        try {
            e = to_experiment(cfg, kind);
            if (name == "refine") ladder = ladder_of(cfg);
        } catch (const ConfigError& ce) {
            throw UsageError((flags.config_path.empty() ? std::string("config") : flags.config_path) + ": " + ce.what());
        }
        const std::string out_path = apply_flags(e, cfg, flags, opts, err);
        try {
            e.validate();
        } catch (const std::invalid_argument& ia) {
            throw UsageError(ia.what());
        }

        if (name == "refine") {
            RefineReport rep;
            try {
                rep = refine(e, ladder);
            } catch (const std::invalid_argument& ia) {
                throw UsageError(ia.what());
            }
            emit(out_path, out, [&](std::ostream& s) { write_refine_csv(s, rep); });
            std::vector<Metric> metrics{make_metric("slope", exact_value(rep.slope), rep.expected_slope,
                                                    rep.slope_tolerance, Check::info)};
            metrics.back().pass = rep.pass;
            summary(out, rep.pass, "refine " + std::string(to_string(e.kind)) + (rep.floor ? " (floor)" : ""), metrics,
                    e.seed, e.n_paths, ladder.back(), rep.runtime_seconds);
            return rep.pass ? kExitPass : kExitFailure;
        }

        Report rep;
        try {
            rep = run(e);
        } catch (const std::invalid_argument& ia) {
            throw UsageError(ia.what());
        } catch (const std::exception& ex) {
            err << "experiment " << to_string(e.kind) << " aborted: " << ex.what() << '\n';
            out << "FAIL " << to_string(e.kind) << ": aborted\n";
            return kExitFailure;
        }
        emit(out_path, out, [&](std::ostream& s) { write_report_csv(s, rep); });
        summary(out, rep.pass, to_string(e.kind), rep.metrics, e.seed, e.n_paths, e.dt, rep.runtime_seconds);
        return rep.pass ? kExitPass : kExitFailure;
    } catch (const UsageError& ue) {
        err << "stochint " << name << ": " << ue.what() << '\n';
        return kExitUsage;
    } catch (const std::exception& ex) {
        err << "stochint " << name << ": " << ex.what() << '\n';
        return kExitFailure;
    }
}

}  // namespace stochint
