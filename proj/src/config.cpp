#include "stochint/config.hpp"
#include "stochint/csv.hpp"

#include <algorithm>
#include <cctype>
#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <set>

namespace stochint {

ConfigError::ConfigError(std::size_t line, std::size_t column, const std::string& message)
    : std::runtime_error(line == 0 ? message
                                   : "line " + std::to_string(line) + ", column " + std::to_string(column) + ": " +
                                         message),
      line_(line),
      column_(column) {}

namespace {

enum class Type { uint, real, string, list };

const std::map<std::string, Type, std::less<>>& schema() {
    static const std::map<std::string, Type, std::less<>> s = {
        {"kind", Type::string},     {"n_paths", Type::uint},     {"seed", Type::uint},
        {"dt", Type::real},         {"t_final", Type::real},     {"workers", Type::uint},
        {"tolerance", Type::real},  {"out", Type::string},       {"verbosity", Type::uint},
        {"ladder", Type::list},     {"integrand", Type::string}, {"lambda", Type::list},
        {"k_modes", Type::uint},    {"j_max", Type::uint},       {"theta", Type::real},
        {"sigma", Type::real},      {"path_out", Type::string},
    };
    return s;
}

const char* type_name(Type t) {
    switch (t) {
        case Type::uint: return "a non-negative integer";
        case Type::real: return "a finite real number";
        case Type::string: return "a string";
        case Type::list: return "a comma-separated list of reals";
    }
    return "?";
}

bool matches(Type t, const ConfigValue& v) {
    switch (t) {
        case Type::uint: return std::holds_alternative<std::uint64_t>(v);
        case Type::real: return std::holds_alternative<double>(v) || std::holds_alternative<std::uint64_t>(v);
        case Type::string: return std::holds_alternative<std::string>(v);
        case Type::list: return std::holds_alternative<std::vector<double>>(v);
    }
    return false;
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

std::optional<double> parse_real(std::string_view s) {
    const std::string text(trim(s));
    if (text.empty()) return std::nullopt;
    char* end = nullptr;
    errno = 0;
    const double v = std::strtod(text.c_str(), &end);
    if (end != text.c_str() + text.size() || errno == ERANGE || !std::isfinite(v)) return std::nullopt;
    return v;
}

std::optional<std::uint64_t> parse_uint(std::string_view s) {
    if (s.empty() || s.size() > 20) return std::nullopt;
    for (char c : s)
        if (!std::isdigit(static_cast<unsigned char>(c))) return std::nullopt;
    const std::string text(s);
    errno = 0;
    const unsigned long long v = std::strtoull(text.c_str(), nullptr, 10);
    if (errno == ERANGE) return std::nullopt;
    return static_cast<std::uint64_t>(v);
}

ConfigValue parse_value(Type t, std::string_view raw, std::size_t line, std::size_t column, std::string_view key) {
    auto bad = [&]() {
        return ConfigError(line, column, "value for '" + std::string(key) + "' must be " + type_name(t) + ", got '" +
                                             std::string(raw) + "'");
    };
    switch (t) {
        case Type::uint: {
            auto v = parse_uint(raw);
            if (!v) throw bad();
            return *v;
        }
        case Type::real: {
            auto v = parse_real(raw);
            if (!v) throw bad();
            return *v;
        }
        case Type::string: {
            std::string_view s = raw;
            if (s.size() >= 2 && s.front() == '"' && s.back() == '"') {
                s = s.substr(1, s.size() - 2);
                if (s.find('"') != std::string_view::npos) throw bad();
                return std::string(s);
            }
            if (s.empty() || s.find_first_of(" \t\"#") != std::string_view::npos) throw bad();
            return std::string(s);
        }
        case Type::list: {
            std::string_view s = raw;
            if (!s.empty() && s.front() == '[') {
                if (s.back() != ']') throw bad();
                s = s.substr(1, s.size() - 2);
            }
            std::vector<double> out;
            if (trim(s).empty()) return out;
            std::size_t pos = 0;
            while (true) {
                const std::size_t comma = s.find(',', pos);
                auto v = parse_real(s.substr(pos, comma == std::string_view::npos ? std::string_view::npos : comma - pos));
                if (!v) throw bad();
                out.push_back(*v);
                if (comma == std::string_view::npos) break;
                pos = comma + 1;
            }
            return out;
        }
    }
    throw bad();
}

// First '#' outside double quotes.
std::size_t comment_start(std::string_view line) {
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        if (line[i] == '"') quoted = !quoted;
        if (line[i] == '#' && !quoted) return i;
    }
    return std::string_view::npos;
}

bool needs_quotes(std::string_view s) { return s.empty() || s.find_first_of(" \t#") != std::string_view::npos; }

Type type_of(std::string_view key, std::size_t line, std::size_t column) {
    const auto it = schema().find(key);
    if (it == schema().end()) throw ConfigError(line, column, "unknown key '" + std::string(key) + "'");
    return it->second;
}

}  // namespace

std::optional<std::uint64_t> Config::get_uint(std::string_view key) const {
    const auto it = entries_.find(std::string(key));
    if (it == entries_.end()) return std::nullopt;
    return std::get<std::uint64_t>(it->second.value);
}

std::optional<double> Config::get_real(std::string_view key) const {
    const auto it = entries_.find(std::string(key));
    if (it == entries_.end()) return std::nullopt;
    if (const auto* u = std::get_if<std::uint64_t>(&it->second.value)) return static_cast<double>(*u);
    return std::get<double>(it->second.value);
}

std::optional<std::string> Config::get_string(std::string_view key) const {
    const auto it = entries_.find(std::string(key));
    if (it == entries_.end()) return std::nullopt;
    return std::get<std::string>(it->second.value);
}

std::optional<std::vector<double>> Config::get_list(std::string_view key) const {
    const auto it = entries_.find(std::string(key));
    if (it == entries_.end()) return std::nullopt;
    return std::get<std::vector<double>>(it->second.value);
}

void Config::set(std::string_view key, ConfigValue value, std::size_t line) {
    const Type t = type_of(key, line, 1);
    if (!matches(t, value)) throw ConfigError(line, 1, "value for '" + std::string(key) + "' must be " + type_name(t));
    if (t == Type::real)
        if (const auto* u = std::get_if<std::uint64_t>(&value)) value = static_cast<double>(*u);
    entries_[std::string(key)] = Entry{std::move(value), line};
}

Config parse_config(std::string_view text) {
    Config cfg;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const std::size_t eol = text.find('\n', pos);
        std::string_view line = text.substr(pos, eol == std::string_view::npos ? std::string_view::npos : eol - pos);
        pos = eol == std::string_view::npos ? text.size() + 1 : eol + 1;
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        const std::size_t hash = comment_start(line);
        const std::string_view body = line.substr(0, hash);
        if (trim(body).empty()) continue;
        const std::size_t eq = body.find('=');
        const std::size_t first = body.find_first_not_of(" \t");
        if (eq == std::string_view::npos) throw ConfigError(line_no, first + 1, "expected 'key = value'");
        const std::string_view key = trim(body.substr(0, eq));
        if (key.empty()) throw ConfigError(line_no, first + 1, "missing key before '='");
        for (char c : key) {
            if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_') {
                throw ConfigError(line_no, first + 1, "malformed key '" + std::string(key) + "'");
            }
        }
        const Type t = type_of(key, line_no, first + 1);
        if (cfg.has(key)) {
            throw ConfigError(line_no, first + 1,
                              "duplicate key '" + std::string(key) + "' (first set on line " +
                                  std::to_string(cfg.entries().at(std::string(key)).line) + ")");
        }
        const std::string_view rest = body.substr(eq + 1);
        const std::size_t vstart = rest.find_first_not_of(" \t");
        const std::size_t column = eq + 2 + (vstart == std::string_view::npos ? 0 : vstart);
        const std::string_view raw = trim(rest);
        if (raw.empty()) throw ConfigError(line_no, column, "missing value for '" + std::string(key) + "'");
        cfg.set(key, parse_value(t, raw, line_no, column, key), line_no);
    }
    return cfg;
}

std::string serialize(const Config& config) {
    std::string out;
    for (const auto& [key, entry] : config.entries()) {
        out += key;
        out += " = ";
        std::visit(
            [&](const auto& v) {
                using T = std::decay_t<decltype(v)>;
                if constexpr (std::is_same_v<T, std::uint64_t>) {
                    out += std::to_string(v);
                } else if constexpr (std::is_same_v<T, double>) {
                    out += format_double(v);
                } else if constexpr (std::is_same_v<T, std::string>) {
                    out += needs_quotes(v) ? '"' + v + '"' : v;
                } else {
                    out += '[';
                    for (std::size_t i = 0; i < v.size(); ++i) {
                        if (i) out += ", ";
                        out += format_double(v[i]);
                    }
                    out += ']';
                }
            },
            entry.value);
        out += '\n';
    }
    return out;
}

std::string normalize(std::string_view text) { return serialize(parse_config(text)); }

namespace {

const std::set<std::string, std::less<>>& common_keys() {
    static const std::set<std::string, std::less<>> s = {"kind",      "n_paths", "seed",      "dt",    "t_final",
                                                         "workers",   "tolerance", "out",     "verbosity", "ladder"};
    return s;
}

std::set<std::string, std::less<>> kind_keys(Kind k) {
    switch (k) {
        case Kind::isometry:
        case Kind::duality:
        case Kind::pushthrough:
        case Kind::qv: return {"integrand", "lambda"};
        case Kind::strat_convert: return {"lambda"};
        case Kind::collapse: return {"k_modes"};
        case Kind::solve: return {"theta", "sigma", "path_out"};
        case Kind::truncation: return {"k_modes", "j_max", "theta", "sigma"};
        case Kind::energy:
        case Kind::ito_formula: return {"theta", "sigma"};
        case Kind::cross:
        case Kind::bdg: return {};
    }
    return {};
}

}  // namespace

Experiment to_experiment(const Config& config, std::optional<Kind> kind) {
    if (const auto named = config.get_string("kind")) {
        const auto parsed = parse_kind(*named);
        const std::size_t line = config.entries().at("kind").line;
        if (!parsed) throw ConfigError(line, 1, "unknown experiment kind '" + *named + "'");
        if (kind && *kind != *parsed) {
            throw ConfigError(line, 1, "config kind '" + *named + "' does not match subcommand '" +
                                           std::string(to_string(*kind)) + "'");
        }
        kind = parsed;
    }
    if (!kind) throw ConfigError(0, 0, "missing required key 'kind'");
    const auto allowed = kind_keys(*kind);
    for (const auto& [key, entry] : config.entries()) {
        if (!common_keys().count(key) && !allowed.count(key)) {
            throw ConfigError(entry.line, 1,
                              "key '" + key + "' does not apply to experiment kind '" + std::string(to_string(*kind)) +
                                  "'");
        }
    }
    Experiment e;
    e.kind = *kind;
    if (auto v = config.get_uint("n_paths")) e.n_paths = *v;
    if (auto v = config.get_uint("seed")) e.seed = *v;
    if (auto v = config.get_real("dt")) e.dt = *v;
    if (auto v = config.get_real("t_final")) e.t_final = *v;
    if (auto v = config.get_uint("workers")) e.workers = *v;
    if (auto v = config.get_real("tolerance")) e.tolerance = *v;
    if (auto v = config.get_string("integrand")) e.integrand = *v;
    else if (*kind == Kind::isometry || *kind == Kind::duality || *kind == Kind::pushthrough || *kind == Kind::qv)
        e.integrand = "brownian";
    if (auto v = config.get_list("lambda")) e.lambda = *v;
    if (auto v = config.get_uint("k_modes")) e.k_modes = *v;
    if (auto v = config.get_uint("j_max")) e.j_max = *v;
    if (auto v = config.get_real("theta")) e.theta = *v;
    if (auto v = config.get_real("sigma")) e.sigma = *v;
    if (auto v = config.get_string("path_out")) e.path_out = *v;
    return e;
}

std::vector<double> ladder_of(const Config& config) {
    auto v = config.get_list("ladder");
    if (!v) throw ConfigError(0, 0, "missing required key 'ladder'");
    return *v;
}

}  // namespace stochint
