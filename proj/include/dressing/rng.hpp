#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

namespace dressing {

// All randomness in the project flows through these helpers so that runs are
// reproducible from a single base seed, independent of library internals.

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Derives an independent stream seed from a base seed and a string tag.
inline std::uint64_t derive_seed(std::uint64_t base, std::string_view tag) {
    std::uint64_t h = 0xcbf29ce484222325ULL ^ base;
    for (char c : tag) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return splitmix64(h);
}

inline std::uint64_t derive_seed(std::uint64_t base, std::string_view tag, std::uint64_t index) {
    return splitmix64(derive_seed(base, tag) ^ (0x9e3779b97f4a7c15ULL * (index + 1)));
}

// Uniform in [0,1), 53-bit resolution. Hand-rolled so output is identical
// across standard library implementations.
inline double uniform01(Rng& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double uniform_range(Rng& rng, double lo, double hi) {
    return lo + (hi - lo) * uniform01(rng);
}

// Standard normal via Box-Muller (second value discarded for statelessness).
inline double normal01(Rng& rng) {
    double u1 = uniform01(rng);
    double u2 = uniform01(rng);
    while (u1 <= 0.0) u1 = uniform01(rng);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

// Uniform integer in [0, n).
inline std::size_t uniform_index(Rng& rng, std::size_t n) {
    return static_cast<std::size_t>(uniform01(rng) * static_cast<double>(n)) % n;
}

}  // namespace dressing
