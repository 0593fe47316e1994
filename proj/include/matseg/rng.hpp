// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the matseg Project.

#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>

namespace matseg {

/// SplitMix64 generator.
///
/// This is the only source of randomness in the library. It is small enough
/// to re-implement bit-exactly in any language, and `stream()` derives
/// independent per-pixel (or per-image) generators from one user seed so
/// that parallel loops produce identical results for any partitioning.
///
///   next():   state += 0x9E3779B97F4A7C15
///             z = state
///             z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
///             z = (z ^ (z >> 27)) * 0x94D049BB133111EB
///             return z ^ (z >> 31)
///   stream(seed, id): SplitMix64(mix(seed ^ mix(id + 0x9E3779B97F4A7C15)))
///   uniform(): (next() >> 11) * 2^-53                    in [0, 1)
///   normal():  Box-Muller, u1 = ((next() >> 11) + 1) * 2^-53, u2 = uniform(),
///              sqrt(-2 ln u1) * cos(2 pi u2)             (one normal per two draws)
class SplitMix64 {
public:
    using result_type = std::uint64_t;

    explicit constexpr SplitMix64(std::uint64_t seed) noexcept : state_(seed) {}

    static constexpr std::uint64_t mix(std::uint64_t z) noexcept {
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    static constexpr SplitMix64 stream(std::uint64_t seed, std::uint64_t id) noexcept {
        return SplitMix64(mix(seed ^ mix(id + kGolden)));
    }

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

    constexpr result_type operator()() noexcept { return next(); }

    constexpr std::uint64_t next() noexcept {
        state_ += kGolden;
        return mix(state_);
    }

    double uniform() noexcept { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    double normal() noexcept {
        const double u1 = static_cast<double>((next() >> 11) + 1) * 0x1.0p-53;
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    /// Uniform integer in [0, n) by rejection; n must be > 0.
    std::uint64_t below(std::uint64_t n) noexcept {
        const std::uint64_t limit = max() - max() % n;
        std::uint64_t x = next();
        while (x >= limit) x = next();
        return x % n;
    }

private:
    static constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;
    std::uint64_t state_;
};

}  // namespace matseg
