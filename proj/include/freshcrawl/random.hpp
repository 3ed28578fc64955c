#pragma once

#include <cstdint>
#include <random>

namespace freshcrawl {

using Engine = std::mt19937_64;

/// Sub-stream tags mixed into derived seeds.
enum class Stream : std::uint64_t {
    Change = 1,
    Request = 2,
    Refresh = 3,
    Exploration = 4,
    Observation = 5,
    Ensemble = 6,
};

inline std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Seed splitting: every (root, index, stream) triple maps to an independent
// 64-bit seed by chaining splitmix64 over the three words. Changing any word
// changes the derived stream; the mapping is stable across platforms.
inline std::uint64_t derive_seed(std::uint64_t root, std::uint64_t index, Stream stream) noexcept {
    std::uint64_t h = splitmix64(root);
    h = splitmix64(h ^ index);
    h = splitmix64(h ^ static_cast<std::uint64_t>(stream));
    return h;
}

inline std::uint64_t derive_seed(std::uint64_t root, std::uint64_t index) noexcept {
    return splitmix64(splitmix64(root) ^ index);
}

inline Engine make_engine(std::uint64_t root, std::uint64_t index, Stream stream) {
    return Engine(derive_seed(root, index, stream));
}

/// Uniform draw on the open interval (0, 1).
inline double open_uniform(Engine& engine) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    double u = unit(engine);
    while (u <= 0.0) u = unit(engine);
    return u;
}

}  // namespace freshcrawl
