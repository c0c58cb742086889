#include "stochint/variation.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace stochint {

Partition::Partition(const TimeGrid& grid, std::vector<std::size_t> indices)
    : indices_(std::move(indices)), dt_(grid.dt), mesh_(0.0) {
    if (indices_.size() < 2) throw std::invalid_argument("Partition: need at least one interval");
    if (indices_.front() != 0) throw std::invalid_argument("Partition: must start at 0");
    if (indices_.back() > grid.steps) throw std::invalid_argument("Partition: extends past the grid");
    std::size_t widest = 0;
    for (std::size_t j = 1; j < indices_.size(); ++j) {
        if (indices_[j] <= indices_[j - 1]) throw std::invalid_argument("Partition: points must increase strictly");
        widest = std::max(widest, indices_[j] - indices_[j - 1]);
    }
    mesh_ = dt_ * static_cast<double>(widest);
}

Partition Partition::uniform(const TimeGrid& grid, std::size_t stride, double t) {
    const std::size_t n = grid.index_of(t);
    if (stride == 0 || n == 0 || n % stride != 0) {
        throw std::invalid_argument("Partition::uniform: stride " + std::to_string(stride) +
                                    " does not divide " + std::to_string(n) + " steps");
    }
    std::vector<std::size_t> idx;
    for (std::size_t k = 0; k <= n; k += stride) idx.push_back(k);
    return Partition(grid, std::move(idx));
}

Partition Partition::dyadic(const TimeGrid& grid, unsigned level, double t) {
    const std::size_t n = grid.index_of(t);
    const std::size_t parts = std::size_t{1} << level;
    if (n % parts != 0) throw std::invalid_argument("Partition::dyadic: grid is not fine enough");
    return uniform(grid, n / parts, t);
}

Partition Partition::from_times(const TimeGrid& grid, std::span<const double> times) {
    std::vector<std::size_t> idx;
    idx.reserve(times.size());
    for (double t : times) idx.push_back(grid.index_of(t));
    return Partition(grid, std::move(idx));
}

double quadratic_variation(const PathValues& x, const Partition& partition, const SpaceScale& scale,
                           Space space) {
    const auto& idx = partition.indices();
    if (idx.back() >= x.points()) throw std::invalid_argument("quadratic_variation: partition outruns the path");
    if (x.dim() != scale.dim()) throw std::invalid_argument("quadratic_variation: dimension mismatch");
    const auto w = scale.weights(space);
    double s = 0.0;
    for (std::size_t j = 0; j + 1 < idx.size(); ++j) {
        const auto a = x.at(idx[j]);
        const auto b = x.at(idx[j + 1]);
        for (std::size_t i = 0; i < x.dim(); ++i) s += w[i] * (b[i] - a[i]) * (b[i] - a[i]);
    }
    return s;
}

double quadratic_variation(std::span<const double> x, const Partition& partition) {
    const auto& idx = partition.indices();
    if (idx.back() >= x.size()) throw std::invalid_argument("quadratic_variation: partition outruns the path");
    double s = 0.0;
    for (std::size_t j = 0; j + 1 < idx.size(); ++j) {
        const double d = x[idx[j + 1]] - x[idx[j]];
        s += d * d;
    }
    return s;
}

Vec cross_variation(const PathValues& x, std::span<const double> y, const Partition& partition) {
    if (x.points() != y.size()) throw std::invalid_argument("cross_variation: path lengths differ");
    const auto& idx = partition.indices();
    if (idx.back() >= y.size()) throw std::invalid_argument("cross_variation: partition outruns the path");
    Vec out(x.dim(), 0.0);
    for (std::size_t j = 0; j + 1 < idx.size(); ++j) {
        const double dy = y[idx[j + 1]] - y[idx[j]];
        const auto a = x.at(idx[j]);
        const auto b = x.at(idx[j + 1]);
        for (std::size_t i = 0; i < x.dim(); ++i) out[i] += (b[i] - a[i]) * dy;
    }
    return out;
}

QvLadder qv_identity_check(const ProcessSampler& sampler, const SpaceScale& scale, Space space,
                           const TimeGrid& grid, double t, std::span<const std::size_t> strides,
                           const MonteCarlo& mc) {
    if (strides.empty()) throw std::invalid_argument("qv_identity_check: empty mesh sequence");
    if (sampler.integrability() != Integrability::square_integrable) {
        throw std::invalid_argument("qv_identity_check: sampler must be square-integrable");
    }
    const std::size_t n = grid.index_of(t);
    const TimeGrid g(grid.dt, n);
    std::vector<Partition> parts;
    for (std::size_t s : strides) parts.push_back(Partition::uniform(g, s, t));
    const std::size_t r = parts.size();
    const std::size_t modes = sampler.columns();

    // Per path: reference, then (estimate, |error|) per rung.
    auto table = run_paths(mc.n_paths, 1 + 2 * r, mc.workers, [&](std::size_t p, std::span<double> out) {
        const auto noise = sample_cylindrical(g, modes, mc.seed, p);
        const PathValues x = ito_path(sampler, noise, t);
        out[0] = running_square_integral(sampler, noise, t, scale, space);
        for (std::size_t i = 0; i < r; ++i) {
            out[1 + 2 * i] = quadratic_variation(x, parts[i], scale, space);
            out[2 + 2 * i] = std::abs(out[1 + 2 * i] - out[0]);
        }
    });

    QvLadder ladder{{}, true};
    const double reference = sample_mean(table.column(0));
    for (std::size_t i = 0; i < r; ++i) {
        VariationReport rep{};
        rep.estimate = sample_mean(table.column(1 + 2 * i));
        rep.reference = reference;
        rep.error = summarize(table.column(2 + 2 * i), mc.seed ^ (0xB007ull + i));
        rep.abs_err = rep.error.mean;
        rep.mesh = parts[i].mesh();
        rep.n_paths = mc.n_paths;
        if (!ladder.rungs.empty() && !(rep.error.ci_high < ladder.rungs.back().error.ci_low)) {
            ladder.decreasing_beyond_ci = false;
        }
        ladder.rungs.push_back(rep);
    }
    return ladder;
}

BdgResult bdg_ratio(const ProcessSampler& sampler, const SpaceScale& scale, Space space,
                    const TimeGrid& grid, double t, const MonteCarlo& mc) {
    const std::size_t n = grid.index_of(t);
    const TimeGrid g(grid.dt, n);
    const std::size_t modes = sampler.columns();
    auto table = run_paths(mc.n_paths, 2, mc.workers, [&](std::size_t p, std::span<double> out) {
        const auto noise = sample_cylindrical(g, modes, mc.seed, p);
        const PathValues x = ito_path(sampler, noise, t);
        double peak = 0.0;
        for (std::size_t k = 0; k < x.points(); ++k) peak = std::max(peak, norm(scale, space, x.at(k)));
        out[0] = peak;
        out[1] = std::sqrt(running_square_integral(sampler, noise, t, scale, space));
    });
    BdgResult res{};
    res.running_max = summarize(table.column(0), mc.seed ^ 0xBD61ull);
    res.root_energy = summarize(table.column(1), mc.seed ^ 0xBD62ull);
    res.ratio = res.root_energy.mean > 0.0 ? res.running_max.mean / res.root_energy.mean : 0.0;
    return res;
}

}  // namespace stochint
