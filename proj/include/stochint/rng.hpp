#pragma once

#include <array>
#include <cstdint>

namespace stochint {

/// Philox4x32-10 counter-based generator (Salmon et al., SC'11).
///
/// A pure function of (counter, key): any block of any stream can be produced
/// in isolation, which is what makes per-path sampling schedule-independent.
struct Philox4x32 {
    using Counter = std::array<std::uint32_t, 4>;
    using Key = std::array<std::uint32_t, 2>;

    static constexpr Counter generate(Counter ctr, Key key) noexcept {
        constexpr std::uint32_t m0 = 0xD2511F53u, m1 = 0xCD9E8D57u;
        constexpr std::uint32_t w0 = 0x9E3779B9u, w1 = 0xBB67AE85u;
        for (int round = 0; round < 10; ++round) {
            if (round > 0) {
                key[0] += w0;
                key[1] += w1;
            }
            const std::uint64_t p0 = static_cast<std::uint64_t>(m0) * ctr[0];
            const std::uint64_t p1 = static_cast<std::uint64_t>(m1) * ctr[2];
            ctr = {static_cast<std::uint32_t>(p1 >> 32) ^ ctr[1] ^ key[0],
                   static_cast<std::uint32_t>(p1),
                   static_cast<std::uint32_t>(p0 >> 32) ^ ctr[3] ^ key[1],
                   static_cast<std::uint32_t>(p0)};
        }
        return ctr;
    }
};

/// Identifies one independent stream: (master seed, path, component).
struct RngSpec {
    std::uint64_t master_seed = 0;
    std::uint64_t path = 0;
    std::uint64_t component = 0;
};

/// Random-access standard normal sequence for one stream.
///
/// Draw n comes from Philox block n/2 through Box–Muller; the pair shares a
/// block. Counter layout: {block, component, path_lo, path_hi}, key = seed.
class NormalStream {
public:
    explicit NormalStream(const RngSpec& spec) noexcept;

    /// Fills draws [first, first + out.size()).
    void fill(std::uint64_t first, double* out, std::size_t count) const noexcept;
    double at(std::uint64_t index) const noexcept;

private:
    std::array<double, 2> pair(std::uint32_t block) const noexcept;

    Philox4x32::Key key_;
    std::uint32_t component_;
    std::uint32_t path_lo_;
    std::uint32_t path_hi_;
};

/// Small sequential generator for resampling indices (bootstrap, random test
/// inputs). splitmix64; deterministic across platforms.
class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t seed) noexcept : state_(seed) {}
    std::uint64_t next() noexcept {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }
    /// Uniform in [0, bound) via Lemire's multiply-shift.
    std::uint64_t below(std::uint64_t bound) noexcept {
        __extension__ using wide = unsigned __int128;
        return static_cast<std::uint64_t>((static_cast<wide>(next()) * bound) >> 64);
    }
    /// Uniform in (0, 1).
    double uniform() noexcept { return (static_cast<double>(next() >> 11) + 0.5) * 0x1.0p-53; }
    double normal() noexcept;

private:
    std::uint64_t state_;
};

}  // namespace stochint
