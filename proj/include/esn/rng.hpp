#pragma once

// Seed derivation and random engine helpers. All randomness in the toolkit
// flows from explicit 64-bit seeds through these functions; there is no
// global mutable RNG state.

#include <cstdint>
#include <initializer_list>
#include <random>

namespace esn {

using prng = std::mt19937_64;

/// One round of the splitmix64 mixer.
constexpr std::uint64_t splitmix64(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Derive a child seed from a base seed and a path of stream indices.
///
/// Counter-based: the same (base, path) always yields the same seed and
/// distinct paths yield distinct seeds for all practical purposes, so
/// evaluations can be parallelized without the thread schedule leaking
/// into the random streams.
inline std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> path)
{
    std::uint64_t h = splitmix64(base);
    for (std::uint64_t p : path) h = splitmix64(h ^ splitmix64(p + 0x632be59bd9b4e019ULL));
    return h;
}

inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a)
{
    return derive_seed(base, {a});
}

}  // namespace esn
