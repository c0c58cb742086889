#include "stochint/noise.hpp"
#include "stochint/parallel.hpp"
#include "stochint/stats.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <istream>
#include <numbers>
#include <ostream>
#include <stdexcept>
#include <string>

namespace stochint {

// ---------------------------------------------------------------------------
// RNG
// ---------------------------------------------------------------------------

NormalStream::NormalStream(const RngSpec& spec) noexcept
    : key_{static_cast<std::uint32_t>(spec.master_seed),
           static_cast<std::uint32_t>(spec.master_seed >> 32)},
      component_(static_cast<std::uint32_t>(spec.component)),
      path_lo_(static_cast<std::uint32_t>(spec.path)),
      path_hi_(static_cast<std::uint32_t>(spec.path >> 32)) {}

namespace {

std::array<double, 2> box_muller(std::uint32_t r0, std::uint32_t r1, std::uint32_t r2, std::uint32_t r3) noexcept {
    const std::uint64_t a = (static_cast<std::uint64_t>(r0) << 32) | r1;
    const std::uint64_t b = (static_cast<std::uint64_t>(r2) << 32) | r3;
    const double u1 = (static_cast<double>(a >> 11) + 0.5) * 0x1.0p-53;
    const double u2 = (static_cast<double>(b >> 11) + 0.5) * 0x1.0p-53;
    const double radius = std::sqrt(-2.0 * std::log(u1));
    // Angle θ = qπ/2 + r with quadrant q = ⌊4u2⌋ and |r| ≤ π/4, uniform over a
    // full turn; the small reduced argument keeps sin/cos on their fast path.
    const double x = 4.0 * u2;
    const double q = std::floor(x);
    const double r = (x - q - 0.5) * (0.5 * std::numbers::pi);
    const double c = std::cos(r), s = std::sin(r);
    switch (static_cast<int>(q)) {
        case 0: return {radius * c, radius * s};
        case 1: return {-radius * s, radius * c};
        case 2: return {-radius * c, -radius * s};
        default: return {radius * s, -radius * c};
    }
}

constexpr std::size_t kLanes = 16;

// Philox4x32-10 on kLanes consecutive blocks at once; lane-major so the
// rounds vectorize. Same values as Philox4x32::generate per block.
void philox_lanes(std::uint32_t first_block, std::uint32_t c1, std::uint32_t c2, std::uint32_t c3,
                  Philox4x32::Key key, std::uint32_t (&out)[4][kLanes]) noexcept {
    constexpr std::uint32_t m0 = 0xD2511F53u, m1 = 0xCD9E8D57u;
    constexpr std::uint32_t w0 = 0x9E3779B9u, w1 = 0xBB67AE85u;
    for (std::size_t l = 0; l < kLanes; ++l) {
        out[0][l] = first_block + static_cast<std::uint32_t>(l);
        out[1][l] = c1;
        out[2][l] = c2;
        out[3][l] = c3;
    }
    for (int round = 0; round < 10; ++round) {
        if (round > 0) {
            key[0] += w0;
            key[1] += w1;
        }
        for (std::size_t l = 0; l < kLanes; ++l) {
            const std::uint64_t p0 = static_cast<std::uint64_t>(m0) * out[0][l];
            const std::uint64_t p1 = static_cast<std::uint64_t>(m1) * out[2][l];
            const std::uint32_t x1 = out[1][l], x3 = out[3][l];
            out[0][l] = static_cast<std::uint32_t>(p1 >> 32) ^ x1 ^ key[0];
            out[1][l] = static_cast<std::uint32_t>(p1);
            out[2][l] = static_cast<std::uint32_t>(p0 >> 32) ^ x3 ^ key[1];
            out[3][l] = static_cast<std::uint32_t>(p0);
        }
    }
}

}  // namespace

std::array<double, 2> NormalStream::pair(std::uint32_t block) const noexcept {
    const auto r = Philox4x32::generate({block, component_, path_lo_, path_hi_}, key_);
    return box_muller(r[0], r[1], r[2], r[3]);
}

void NormalStream::fill(std::uint64_t first, double* out, std::size_t count) const noexcept {
    std::size_t i = 0;
    std::uint64_t n = first;
    if (n % 2 == 1 && count > 0) {
        out[i++] = pair(static_cast<std::uint32_t>(n / 2))[1];
        ++n;
    }
    std::uint32_t r[4][kLanes];
    while (i + 2 * kLanes <= count) {
        philox_lanes(static_cast<std::uint32_t>(n / 2), component_, path_lo_, path_hi_, key_, r);
        for (std::size_t l = 0; l < kLanes; ++l) {
            const auto p = box_muller(r[0][l], r[1][l], r[2][l], r[3][l]);
            out[i + 2 * l] = p[0];
            out[i + 2 * l + 1] = p[1];
        }
        i += 2 * kLanes;
        n += 2 * kLanes;
    }
    for (; i + 1 < count; i += 2, n += 2) {
        const auto p = pair(static_cast<std::uint32_t>(n / 2));
        out[i] = p[0];
        out[i + 1] = p[1];
    }
    if (i < count) out[i] = pair(static_cast<std::uint32_t>(n / 2))[0];
}

double NormalStream::at(std::uint64_t index) const noexcept {
    return pair(static_cast<std::uint32_t>(index / 2))[index % 2];
}

double SplitMix64::normal() noexcept {
    const double u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

// ---------------------------------------------------------------------------
// Grid
// ---------------------------------------------------------------------------

TimeGrid::TimeGrid(double dt_, std::size_t steps_) : dt(dt_), steps(steps_) {
    if (!(dt > 0.0) || !std::isfinite(dt)) throw std::invalid_argument("TimeGrid: dt must be positive");
    if (steps == 0) throw std::invalid_argument("TimeGrid: steps must be positive");
}

TimeGrid TimeGrid::over(double horizon, double dt) {
    if (!(horizon > 0.0) || !(dt > 0.0)) throw std::invalid_argument("TimeGrid::over: non-positive input");
    const auto steps = static_cast<std::size_t>(std::ceil(horizon / dt - 1e-9));
    return TimeGrid(horizon / static_cast<double>(steps), steps);
}

std::size_t TimeGrid::index_of(double t) const {
    const double pos = t / dt;
    const double k = std::round(pos);
    if (t < 0.0 || std::abs(pos - k) > 1e-9 * std::max(1.0, k) ||
        k > static_cast<double>(steps)) {
        throw std::out_of_range("TimeGrid: time " + std::to_string(t) + " is not a grid point");
    }
    return static_cast<std::size_t>(k);
}

TimeGrid TimeGrid::coarsened(std::size_t factor) const {
    if (factor == 0 || steps % factor != 0) {
        throw std::invalid_argument("TimeGrid::coarsened: factor must divide the step count");
    }
    return TimeGrid(dt * static_cast<double>(factor), steps / factor);
}

// ---------------------------------------------------------------------------
// Brownian and cylindrical sampling
// ---------------------------------------------------------------------------

std::vector<double> sample_brownian(const TimeGrid& grid, const RngSpec& rng) {
    std::vector<double> w(grid.steps + 1, 0.0);
    NormalStream stream(rng);
    stream.fill(0, w.data() + 1, grid.steps);
    const double sd = std::sqrt(grid.dt);
    double acc = 0.0;
    for (std::size_t k = 1; k <= grid.steps; ++k) {
        acc += sd * w[k];
        w[k] = acc;
    }
    return w;
}

CylindricalNoise::CylindricalNoise(TimeGrid grid, std::size_t k, std::vector<double> increments)
    : grid_(grid), k_(k), increments_(std::move(increments)) {
    if (k_ == 0) throw std::invalid_argument("CylindricalNoise: K must be at least 1");
    if (increments_.size() != k_ * grid_.steps) {
        throw std::invalid_argument("CylindricalNoise: expected K*steps increments");
    }
    values_.assign(k_ * (grid_.steps + 1), 0.0);
    for (std::size_t i = 0; i < k_; ++i) {
        double acc = 0.0;
        double* v = &values_[i * (grid_.steps + 1)];
        const double* d = &increments_[i * grid_.steps];
        for (std::size_t s = 0; s < grid_.steps; ++s) {
            acc += d[s];
            v[s + 1] = acc;
        }
    }
}

CylindricalNoise CylindricalNoise::coarsened(std::size_t factor) const {
    const TimeGrid coarse = grid_.coarsened(factor);
    std::vector<double> inc(k_ * coarse.steps);
    for (std::size_t i = 0; i < k_; ++i)
        for (std::size_t s = 0; s < coarse.steps; ++s)
            inc[i * coarse.steps + s] = value(i, (s + 1) * factor) - value(i, s * factor);
    return CylindricalNoise(coarse, k_, std::move(inc));
}

CylindricalNoise CylindricalNoise::truncated(std::size_t k) const {
    if (k == 0 || k > k_) throw std::invalid_argument("CylindricalNoise::truncated: bad K");
    return CylindricalNoise(grid_, k,
                            std::vector<double>(increments_.begin(), increments_.begin() + k * grid_.steps));
}

CylindricalNoise sample_cylindrical(const TimeGrid& grid, std::size_t k, std::uint64_t master_seed,
                                    std::uint64_t path_index) {
    if (k == 0) throw std::invalid_argument("sample_cylindrical: K must be at least 1");
    std::vector<double> inc(k * grid.steps);
    const double sd = std::sqrt(grid.dt);
    for (std::size_t i = 0; i < k; ++i) {
        NormalStream stream(RngSpec{master_seed, path_index, i});
        double* row = &inc[i * grid.steps];
        stream.fill(0, row, grid.steps);
        for (std::size_t s = 0; s < grid.steps; ++s) row[s] *= sd;
    }
    return CylindricalNoise(grid, k, std::move(inc));
}

// ---------------------------------------------------------------------------
// Q-cylindrical processes
// ---------------------------------------------------------------------------

QSpec::QSpec(std::vector<double> lambda) : eigenvalues(std::move(lambda)) {
    if (eigenvalues.empty()) throw std::invalid_argument("QSpec: need at least one eigenvalue");
    for (double l : eigenvalues) {
        if (!(l >= 0.0) || !std::isfinite(l)) throw std::invalid_argument("QSpec: eigenvalues must be finite and >= 0");
    }
}

double QSpec::trace() const noexcept { return pairwise_sum(eigenvalues); }

Vec regular_representation(const QSpec& q, const CylindricalNoise& noise, double t, std::size_t dim) {
    if (q.size() != noise.k()) throw std::invalid_argument("regular_representation: Q length differs from K");
    if (noise.k() > dim) throw std::invalid_argument("regular_representation: K exceeds dim");
    const std::size_t idx = noise.grid().index_of(t);
    Vec x(dim, 0.0);
    for (std::size_t i = 0; i < noise.k(); ++i) x[i] = std::sqrt(q.eigenvalues[i]) * noise.value(i, idx);
    return x;
}

CovarianceEstimate covariance_estimate(const QSpec& q, const TimeGrid& grid, std::size_t n_paths,
                                       std::uint64_t seed, std::span<const double> g,
                                       std::span<const double> h, double t, double s) {
    if (n_paths == 0) throw std::invalid_argument("covariance_estimate: N must be positive");
    const std::size_t k = q.size();
    if (g.size() < k || h.size() != g.size()) {
        throw std::invalid_argument("covariance_estimate: g and h must conform and cover K modes");
    }
    const std::size_t it = grid.index_of(t);
    const std::size_t is = grid.index_of(s);
    const std::size_t last = std::max(it, is);
    const TimeGrid partial(grid.dt, std::max<std::size_t>(last, 1));
    const std::size_t dim = g.size();

    auto table = run_paths(n_paths, 1, 1, [&](std::size_t p, std::span<double> out) {
        const auto noise = sample_cylindrical(partial, k, seed, p);
        const Vec xt = regular_representation(q, noise, partial.time(it), dim);
        const Vec xs = regular_representation(q, noise, partial.time(is), dim);
        double xg = 0.0, xh = 0.0;
        for (std::size_t i = 0; i < dim; ++i) {
            xg += xt[i] * g[i];
            xh += xs[i] * h[i];
        }
        out[0] = xg * xh;
    });
    const auto col = table.column(0);
    double qgh = 0.0;
    for (std::size_t i = 0; i < k; ++i) qgh += q.eigenvalues[i] * g[i] * h[i];
    return {sample_mean(col), std::sqrt(sample_variance(col) / static_cast<double>(n_paths)),
            qgh * std::min(t, s)};
}

// ---------------------------------------------------------------------------
// Binary dump
// ---------------------------------------------------------------------------

namespace {

template <typename T>
void put_le(std::ostream& out, T value) {
    static_assert(std::endian::native == std::endian::little, "little-endian host required");
    char bytes[sizeof(T)];
    std::memcpy(bytes, &value, sizeof(T));
    out.write(bytes, sizeof(T));
}

template <typename T>
T get_le(std::istream& in) {
    char bytes[sizeof(T)];
    if (!in.read(bytes, sizeof(T))) throw std::runtime_error("read_noise: truncated input");
    T value;
    std::memcpy(&value, bytes, sizeof(T));
    return value;
}

}  // namespace

void write_noise(std::ostream& out, const CylindricalNoise& noise) {
    out.write("CYLN", 4);
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(noise.k()));
    put_le<std::uint64_t>(out, noise.steps());
    put_le<double>(out, noise.grid().dt);
    for (double v : noise.raw_increments()) put_le<double>(out, v);
}

CylindricalNoise read_noise(std::istream& in) {
    char magic[4];
    if (!in.read(magic, 4) || std::memcmp(magic, "CYLN", 4) != 0) {
        throw std::runtime_error("read_noise: bad magic");
    }
    const auto k = get_le<std::uint32_t>(in);
    const auto steps = get_le<std::uint64_t>(in);
    const auto dt = get_le<double>(in);
    TimeGrid grid(dt, steps);
    std::vector<double> inc(static_cast<std::size_t>(k) * steps);
    for (double& v : inc) v = get_le<double>(in);
    return CylindricalNoise(grid, k, std::move(inc));
}

}  // namespace stochint
