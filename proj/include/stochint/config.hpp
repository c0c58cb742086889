#pragma once

#include "stochint/experiment.hpp"

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace stochint {

/// Parse or validation error at a 1-based line and column (0 when not tied to a position).
class ConfigError : public std::runtime_error {
public:
    ConfigError(std::size_t line, std::size_t column, const std::string& message);
    std::size_t line() const noexcept { return line_; }
    std::size_t column() const noexcept { return column_; }

private:
    std::size_t line_;
    std::size_t column_;
};

using ConfigValue = std::variant<std::uint64_t, double, std::string, std::vector<double>>;

/// Typed `key = value` settings. Every key has a fixed type: unsigned
/// integers, reals, strings (bare or double-quoted) and comma-separated real
/// lists (optionally in brackets).
class Config {
public:
    struct Entry {
        ConfigValue value;
        std::size_t line = 0;
    };

    bool has(std::string_view key) const { return entries_.find(std::string(key)) != entries_.end(); }
    const std::map<std::string, Entry>& entries() const noexcept { return entries_; }

    std::optional<std::uint64_t> get_uint(std::string_view key) const;
    std::optional<double> get_real(std::string_view key) const;
    std::optional<std::string> get_string(std::string_view key) const;
    std::optional<std::vector<double>> get_list(std::string_view key) const;

    /// Sets a key, checking it against the schema.
    void set(std::string_view key, ConfigValue value, std::size_t line = 0);

private:
    std::map<std::string, Entry> entries_;
};

/// One `key = value` per line, `#` starts a comment. Rejects unknown keys,
/// duplicates and values of the wrong type, reporting line and column.
Config parse_config(std::string_view text);

/// Canonical text: keys sorted, one `key = value` per line, reals with 17
/// significant digits, lists in brackets, strings quoted when they contain
/// blanks or '#', no comments.
std::string serialize(const Config& config);

/// serialize(parse_config(text)).
std::string normalize(std::string_view text);

/// Builds an experiment. `kind` comes from the subcommand; when absent the
/// config must name it. Keys that do not apply to the kind are rejected.
Experiment to_experiment(const Config& config, std::optional<Kind> kind);

/// The refinement ladder of a config, required for refine.
std::vector<double> ladder_of(const Config& config);

}  // namespace stochint
