#pragma once

#include <cstdint>
#include <random>
#include <string_view>

#include "polaron/common.hpp"

namespace polaron {

// Stream derivation is pinned bit-exactly so that any reimplementation can
// reproduce a run from (master seed, replica, stream label):
//
//   fnv1a64(label):  h = 0xcbf29ce484222325; per byte: h ^= byte; h *= 0x100000001b3
//   splitmix64(z):   z += 0x9e3779b97f4a7c15
//                    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9
//                    z = (z ^ (z >> 27)) * 0x94d049bb133111eb
//                    return z ^ (z >> 31)
//   derive_seed(m, r, label) = splitmix64(splitmix64(splitmix64(m) ^ fnv1a64(label)) ^ r)
inline std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

inline std::uint64_t splitmix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t replica, std::string_view stream_label) {
    return splitmix64(splitmix64(splitmix64(master) ^ fnv1a64(stream_label)) ^ replica);
}

using Rng = std::mt19937_64;

inline Rng make_rng(std::uint64_t master, std::uint64_t replica, std::string_view label) {
    return Rng(derive_seed(master, replica, label));
}

inline double normal(Rng& rng) {
    std::normal_distribution<double> d(0.0, 1.0);
    return d(rng);
}

inline Vec3 normal3(Rng& rng) {
    std::normal_distribution<double> d(0.0, 1.0);
    double a = d(rng), b = d(rng), c = d(rng);
    return {a, b, c};
}

inline double uniform(Rng& rng) {
    std::uniform_real_distribution<double> d(0.0, 1.0);
    return d(rng);
}

inline double exponential(Rng& rng, double rate) {
    std::exponential_distribution<double> d(rate);
    return d(rng);
}

inline Vec3 unit_sphere(Rng& rng) {
    // Marsaglia: normalize a 3D normal
    Vec3 v = normal3(rng);
    double n = norm(v);
    while (n < 1e-12) {
        v = normal3(rng);
        n = norm(v);
    }
    return (1.0 / n) * v;
}

}  // namespace polaron
