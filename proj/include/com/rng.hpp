#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace com {

/// Counter-based generator built on the SplitMix64 finalizer.
///
/// The i-th output (i = 1, 2, ...) of a stream with seed `s` is
///
///     mix64(s + i * 0x9E3779B97F4A7C15)
///
/// where mix64 is the SplitMix64 output function (Steele, Lea, Flood 2014):
///
///     z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
///     z = (z ^ (z >> 27)) * 0x94D049BB133111EB
///     z =  z ^ (z >> 31)
///
/// All arithmetic is modulo 2^64, so the sequence is reproducible in any
/// language. Derived quantities:
///   - uniform():  (u64 >> 11) * 2^-53, in [0, 1)
///   - index(n):   min(floor(uniform() * n), n - 1)
///   - normal():   Box-Muller cosine branch on two fresh uniforms
///                 sqrt(-2 ln(1 - u1)) * cos(2 pi u2), no caching
///
/// Independent streams come from derive_seed(seed, stream), see below.
class CounterRng {
public:
    static constexpr std::uint64_t golden = 0x9E3779B97F4A7C15ULL;

    explicit CounterRng(std::uint64_t seed = 0, std::uint64_t counter = 0) noexcept
        : seed_(seed), counter_(counter) {}

    static constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    std::uint64_t next_u64() noexcept {
        ++counter_;
        return mix64(seed_ + counter_ * golden);
    }

    double uniform() noexcept { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

    std::uint64_t index(std::uint64_t n) noexcept {
        if (n == 0) return 0;
        auto i = static_cast<std::uint64_t>(uniform() * static_cast<double>(n));
        return i < n ? i : n - 1;
    }

    double normal() noexcept {
        const double u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log1p(-u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    std::uint64_t seed() const noexcept { return seed_; }
    std::uint64_t counter() const noexcept { return counter_; }

private:
    std::uint64_t seed_;
    std::uint64_t counter_;
};

/// Seed of sub-stream `stream` of `seed`: mix64(seed ^ mix64(stream + golden)).
/// Streams are keyed by work item (frame index, epoch), never by worker id, so
/// results do not depend on how work is split across threads.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) noexcept {
    return CounterRng::mix64(seed ^ CounterRng::mix64(stream + CounterRng::golden));
}

}  // namespace com
