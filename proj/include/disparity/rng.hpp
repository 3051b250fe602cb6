#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>

namespace disparity {

/// Derives independent named sub-streams from one master seed so components
/// (ci, bootstrap, mcmc, sim) can be re-seeded without coupling.
inline std::uint64_t derive_seed(std::uint64_t seed, std::string_view stream) {
    std::uint64_t h = seed ^ 0x9e3779b97f4a7c15ull;
    for (char c : stream) {
        h ^= static_cast<std::uint64_t>(static_cast<unsigned char>(c));
        h *= 0x100000001b3ull;
    }
    // splitmix64 finalizer
    h += 0x9e3779b97f4a7c15ull;
    h = (h ^ (h >> 30)) * 0xbf58476d1ce4e5b9ull;
    h = (h ^ (h >> 27)) * 0x94d049bb133111ebull;
    return h ^ (h >> 31);
}

inline std::mt19937_64 make_rng(std::uint64_t seed, std::string_view stream) {
    return std::mt19937_64(derive_seed(seed, stream));
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::string_view stream, std::uint64_t index) {
    return derive_seed(derive_seed(seed, stream), std::to_string(index));
}

}  // namespace disparity
