#pragma once

#include <cstddef>
#include <cstdint>
#include <span>

namespace stochint {

/// Fixed-tree pairwise summation. The tree depends only on the length of the
/// input, so the result is identical however the samples were produced.
double pairwise_sum(std::span<const double> values) noexcept;

double sample_mean(std::span<const double> values) noexcept;
/// Unbiased sample variance; 0 for fewer than two samples.
double sample_variance(std::span<const double> values) noexcept;

struct StatSummary {
    double mean = 0.0;
    double std_err = 0.0;
    double ci_low = 0.0;   // 95% percentile bootstrap interval of the mean
    double ci_high = 0.0;
    std::size_t n = 0;

    double half_width() const noexcept { return 0.5 * (ci_high - ci_low); }
    bool contains(double x) const noexcept { return ci_low <= x && x <= ci_high; }
};

inline constexpr std::size_t kBootstrapResamples = 1000;

/// Mean, standard error and a seeded percentile-bootstrap 95% CI.
StatSummary summarize(std::span<const double> samples, std::uint64_t bootstrap_seed,
                      std::size_t resamples = kBootstrapResamples);

/// Least-squares slope of log(y) against log(x).
double loglog_slope(std::span<const double> x, std::span<const double> y);

}  // namespace stochint
