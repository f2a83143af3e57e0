#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>

#include "pifield/math.hpp"

namespace pifield {

// Deterministic counter-free PRNG (splitmix64 core). The standard library
// distributions are implementation-defined, so everything that must be
// bit-identical across platforms and reruns goes through this.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1) with 53 random bits.
    double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform in [0, n).
    std::uint64_t uniform_index(std::uint64_t n) { return next_u64() % n; }

    // Standard normal via Box-Muller (second value discarded, keeps the
    // stream consumption fixed at two draws per call).
    double normal() {
        double u1 = 1.0 - uniform(); // (0, 1]
        double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    // Uniform direction on the unit sphere.
    Vec3 unit_vector() {
        double z = uniform(-1.0, 1.0);
        double phi = uniform(0.0, 2.0 * kPi);
        double r = std::sqrt(std::max(0.0, 1.0 - z * z));
        return {r * std::cos(phi), r * std::sin(phi), z};
    }

private:
    std::uint64_t state_;
};

// Seed derivation: all randomness in the pipeline flows from one root seed
// through tagged derivations, so independent streams never alias.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t salt) {
    std::uint64_t z = seed ^ (0x9e3779b97f4a7c15ull + (salt << 1));
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    z ^= z >> 31;
    // A second mixing round keeps low-entropy (seed, salt) pairs apart.
    z = (z + 0x165667b19e3779f9ull) * 0xd6e8feb86659fd93ull;
    return z ^ (z >> 32);
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::string_view tag) {
    // FNV-1a over the tag, then mixed with the seed.
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (char c : tag) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ull;
    }
    return derive_seed(seed, h);
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::string_view tag, std::uint64_t salt) {
    return derive_seed(derive_seed(seed, tag), salt);
}

} // namespace pifield
