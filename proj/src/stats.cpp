#include "stochint/stats.hpp"
#include "stochint/rng.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace stochint {

double pairwise_sum(std::span<const double> values) noexcept {
    constexpr std::size_t leaf = 32;
    if (values.size() <= leaf) {
        double s = 0.0;
        for (double v : values) s += v;
        return s;
    }
    const std::size_t half = values.size() / 2;
    return pairwise_sum(values.first(half)) + pairwise_sum(values.subspan(half));
}

double sample_mean(std::span<const double> values) noexcept {
    if (values.empty()) return 0.0;
    return pairwise_sum(values) / static_cast<double>(values.size());
}

double sample_variance(std::span<const double> values) noexcept {
    const std::size_t n = values.size();
    if (n < 2) return 0.0;
    const double m = sample_mean(values);
    std::vector<double> sq(n);
    for (std::size_t i = 0; i < n; ++i) sq[i] = (values[i] - m) * (values[i] - m);
    return pairwise_sum(sq) / static_cast<double>(n - 1);
}

StatSummary summarize(std::span<const double> samples, std::uint64_t bootstrap_seed,
                      std::size_t resamples) {
    StatSummary s;
    s.n = samples.size();
    if (s.n == 0) return s;
    s.mean = sample_mean(samples);
    s.std_err = std::sqrt(sample_variance(samples) / static_cast<double>(s.n));
    s.ci_low = s.ci_high = s.mean;
    if (s.n < 2 || resamples == 0) return s;

    SplitMix64 rng(bootstrap_seed);
    std::vector<double> means(resamples);
    for (std::size_t r = 0; r < resamples; ++r) {
        double acc = 0.0;
        for (std::size_t i = 0; i < s.n; ++i) acc += samples[rng.below(s.n)];
        means[r] = acc / static_cast<double>(s.n);
    }
    std::sort(means.begin(), means.end());
    const auto pick = [&](double q) {
        const double pos = q * static_cast<double>(resamples - 1);
        const auto lo = static_cast<std::size_t>(std::floor(pos));
        const auto hi = std::min(lo + 1, resamples - 1);
        return means[lo] + (pos - static_cast<double>(lo)) * (means[hi] - means[lo]);
    };
    s.ci_low = std::min(pick(0.025), s.mean);
    s.ci_high = std::max(pick(0.975), s.mean);
    return s;
}

double loglog_slope(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.size() < 2) {
        throw std::invalid_argument("loglog_slope: need at least two matching points");
    }
    const std::size_t n = x.size();
    double mx = 0, my = 0;
    std::vector<double> lx(n), ly(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (!(x[i] > 0.0) || !(y[i] > 0.0)) throw std::invalid_argument("loglog_slope: non-positive value");
        lx[i] = std::log(x[i]);
        ly[i] = std::log(y[i]);
        mx += lx[i];
        my += ly[i];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sxy = 0, sxx = 0;
    for (std::size_t i = 0; i < n; ++i) {
        sxy += (lx[i] - mx) * (ly[i] - my);
        sxx += (lx[i] - mx) * (lx[i] - mx);
    }
    return sxy / sxx;
}

}  // namespace stochint
