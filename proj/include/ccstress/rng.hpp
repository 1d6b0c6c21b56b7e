#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace ccstress {

/// Deterministic generator used everywhere in the library. Each worker owns
/// its own instance; handles are never shared between threads.
using Rng = std::mt19937_64;

/// Mixes a base seed with a list of tags into an independent stream seed.
/// Used to derive per-island, per-generation and per-purpose streams so that
/// any stream can be recreated from (campaign seed, tags) alone.
inline std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> tags)
{
    auto mix = [](std::uint64_t z) {
        z += 0x9e3779b97f4a7c15ULL;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    };
    std::uint64_t h = mix(base);
    for (auto t : tags) {
        h = mix(h ^ mix(t));
    }
    return h;
}

inline Rng make_rng(std::uint64_t seed) { return Rng(seed); }

/// Uniform integer in the closed range [lo, hi].
inline std::int64_t uniform_int(Rng& rng, std::int64_t lo, std::int64_t hi)
{
    return std::uniform_int_distribution<std::int64_t>(lo, hi)(rng);
}

/// Uniform real in [0, 1).
inline double uniform01(Rng& rng)
{
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline bool coin(Rng& rng) { return (rng() >> 63) != 0; }

}  // namespace ccstress
