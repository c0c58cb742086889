#include "stochint/config.hpp"
#include "stochint/rng.hpp"

#include <catch_amalgamated.hpp>

#include <cmath>
#include <string>

using namespace stochint;

namespace {

std::string random_real(SplitMix64& rng) {
    const double v = (rng.uniform() - 0.5) * std::pow(10.0, static_cast<int>(rng.below(12)) - 6);
    char buf[64];
    std::snprintf(buf, sizeof buf, rng.below(2) ? "%.17g" : "%.4e", v);
    return buf;
}

// A random valid config: random subset of keys in random order, with
// comments, blank lines and assorted spacing.
std::string random_config(SplitMix64& rng) {
    const char* uints[] = {"n_paths", "seed", "workers", "verbosity", "k_modes", "j_max"};
    const char* reals[] = {"dt", "t_final", "tolerance", "theta", "sigma"};
    const char* strings[] = {"kind", "out", "integrand", "path_out"};
    const char* lists[] = {"ladder", "lambda"};
    std::vector<std::string> lines;
    for (const char* k : uints)
        if (rng.below(2)) lines.push_back(std::string(k) + " = " + std::to_string(rng.next() >> rng.below(64)));
    for (const char* k : reals)
        if (rng.below(2)) lines.push_back(std::string(k) + "=" + random_real(rng));
    for (const char* k : strings) {
        if (!rng.below(2)) continue;
        const std::string word = "v_" + std::to_string(rng.below(1000));
        lines.push_back(std::string(k) + " =  " + (rng.below(2) ? "\"" + word + " #" + word + "\"" : word));
    }
    for (const char* k : lists) {
        if (!rng.below(2)) continue;
        std::string v;
        const std::size_t n = rng.below(5);
        for (std::size_t i = 0; i < n; ++i) v += (i ? ", " : "") + random_real(rng);
        lines.push_back(std::string(k) + " = " + (rng.below(2) ? "[" + v + "]" : (n ? v : "[]")));
    }
    for (std::size_t i = lines.size(); i > 1; --i) std::swap(lines[i - 1], lines[rng.below(i)]);
    std::string text = "# generated\n";
    for (const auto& l : lines) {
        if (rng.below(3) == 0) text += "\n";
        text += "  " + l + (rng.below(2) ? "   # note" : "") + "\n";
    }
    return text;
}

}  // namespace

TEST_CASE("config parses typed values", "[config]") {
    const auto c = parse_config("kind = qv\nn_paths = 100000\ndt = 1e-3  # step\nladder = [0.004, 0.002, 0.001]\n"
                                "out = \"report file.csv\"\nt_final = 2\n");
    CHECK(c.get_string("kind") == "qv");
    CHECK(c.get_uint("n_paths") == 100000u);
    CHECK(c.get_real("dt") == 1e-3);
    CHECK(c.get_real("t_final") == 2.0);
    CHECK(c.get_list("ladder") == std::vector<double>{0.004, 0.002, 0.001});
    CHECK(c.get_string("out") == "report file.csv");
    CHECK(!c.get_real("theta").has_value());
    CHECK(c.entries().at("dt").line == 3);
}

TEST_CASE("config errors cite line and column", "[config]") {
    try {
        parse_config("kind = isometry\n\nn_paths = -5\n");
        FAIL("expected a ConfigError");
    } catch (const ConfigError& e) {
        CHECK(e.line() == 3);
        CHECK(e.column() == 11);
        CHECK_THAT(e.what(), Catch::Matchers::StartsWith("line 3, column 11:"));
        CHECK_THAT(e.what(), Catch::Matchers::ContainsSubstring("n_paths"));
    }
    CHECK_THROWS_WITH(parse_config("seed = 1\nseed = 2\n"), Catch::Matchers::ContainsSubstring("first set on line 1"));
    CHECK_THROWS_WITH(parse_config("colour = red\n"), Catch::Matchers::ContainsSubstring("unknown key 'colour'"));
    CHECK_THROWS_WITH(parse_config("dt = fast\n"), Catch::Matchers::ContainsSubstring("finite real"));
    CHECK_THROWS_WITH(parse_config("dt = inf\n"), Catch::Matchers::ContainsSubstring("finite real"));
    CHECK_THROWS_WITH(parse_config("n_paths = 1.5\n"), Catch::Matchers::ContainsSubstring("non-negative integer"));
    CHECK_THROWS_WITH(parse_config("n_paths = 99999999999999999999999\n"), Catch::Matchers::ContainsSubstring("integer"));
    CHECK_THROWS_WITH(parse_config("ladder = [1, x]\n"), Catch::Matchers::ContainsSubstring("list"));
    CHECK_THROWS_WITH(parse_config("just words\n"), Catch::Matchers::ContainsSubstring("key = value"));
    CHECK_THROWS_WITH(parse_config("seed =\n"), Catch::Matchers::ContainsSubstring("missing value"));
    CHECK_THROWS_WITH(parse_config("out = two words\n"), Catch::Matchers::ContainsSubstring("string"));
}

TEST_CASE("config normalization is a fixed point and preserves values", "[config]") {
    SplitMix64 rng(0xC0F1C);
    for (int trial = 0; trial < 500; ++trial) {
        const std::string text = random_config(rng);
        INFO(text);
        const Config original = parse_config(text);
        const std::string once = normalize(text);
        CHECK(normalize(once) == once);
        const Config reparsed = parse_config(once);
        REQUIRE(reparsed.entries().size() == original.entries().size());
        for (const auto& [key, entry] : original.entries()) CHECK(reparsed.entries().at(key).value == entry.value);
    }
}

TEST_CASE("experiments from configs", "[config]") {
    const auto e = to_experiment(parse_config("kind = solve\ntheta = 2\nsigma = 0.5\nseed = 9\n"), std::nullopt);
    CHECK(e.kind == Kind::solve);
    CHECK(e.theta == 2.0);
    CHECK(e.sigma == 0.5);
    CHECK(e.seed == 9);
    CHECK(to_experiment(Config{}, Kind::qv).kind == Kind::qv);
    CHECK(to_experiment(parse_config("kind = strat-convert\n"), Kind::strat_convert).kind == Kind::strat_convert);
    CHECK_THROWS_WITH(to_experiment(Config{}, std::nullopt), Catch::Matchers::ContainsSubstring("missing required key 'kind'"));
    CHECK_THROWS_WITH(to_experiment(parse_config("kind = qv\n"), Kind::solve), Catch::Matchers::ContainsSubstring("does not match"));
    CHECK_THROWS_WITH(to_experiment(parse_config("kind = nope\n"), std::nullopt), Catch::Matchers::ContainsSubstring("unknown experiment kind"));
    CHECK_THROWS_WITH(to_experiment(parse_config("kind = bdg\ntheta = 1\n"), std::nullopt),
                      Catch::Matchers::ContainsSubstring("line 2"));
    CHECK_THROWS_WITH(ladder_of(Config{}), Catch::Matchers::ContainsSubstring("missing required key 'ladder'"));
}
