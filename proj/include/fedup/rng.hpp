#pragma once

#include <cstdint>
#include <random>

namespace fedup {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Derives an independent stream seed from the experiment seed plus tags.
// Every source of randomness in a run is keyed this way, so one seed
// reproduces the whole experiment.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0,
                              std::uint64_t c = 0) {
    std::uint64_t h = splitmix64(seed ^ 0x5851f42d4c957f2dULL);
    h = splitmix64(h ^ a);
    h = splitmix64(h ^ b);
    h = splitmix64(h ^ c);
    return h;
}

inline std::mt19937_64 make_rng(std::uint64_t seed) { return std::mt19937_64(seed); }

namespace stream {
inline constexpr std::uint64_t dataset = 1;
inline constexpr std::uint64_t split = 2;
inline constexpr std::uint64_t partition = 3;
inline constexpr std::uint64_t attack = 4;
inline constexpr std::uint64_t model_init = 5;
inline constexpr std::uint64_t round = 6;
inline constexpr std::uint64_t retrain = 7;
inline constexpr std::uint64_t mask = 8;
inline constexpr std::uint64_t recovery = 9;
}  // namespace stream

}  // namespace fedup
