// rng.hpp

#ifndef TTFS_RNG_HPP
#define TTFS_RNG_HPP

#include <cstdint>
#include <random>

namespace ttfs {

using Rng = std::mt19937_64;

// splitmix64 finalizer; decorrelates (seed, stream) pairs so each sample or
// job gets an independent generator regardless of scheduling.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

inline Rng make_rng(std::uint64_t seed, std::uint64_t stream) {
    return Rng(derive_seed(seed, stream));
}

}  // namespace ttfs

#endif  // TTFS_RNG_HPP
