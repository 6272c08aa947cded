#pragma once
#include <cstdint>
#include <cmath>

namespace auditcopilot {

// SplitMix64 stream. Output sequence depends only on the seed, so results are
// reproducible across platforms and compilers (std distributions are not).
class SplitMix64 {
public:
    explicit SplitMix64(uint64_t seed) : state_(seed) {}

    uint64_t next() {
        uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

private:
    uint64_t state_;
};

// Decorrelated child seed for stream `index` of a master seed.
inline uint64_t derive_seed(uint64_t master, uint64_t index) {
    SplitMix64 g(master ^ (0x9e3779b97f4a7c15ULL * (index + 1)));
    return g.next();
}

// Uniform double in [0, 1), 53 bits of randomness.
inline double uniform_unit(SplitMix64& rng) {
    return static_cast<double>(rng.next() >> 11) * 0x1.0p-53;
}

// Unbiased uniform integer in [0, bound). bound must be > 0.
inline uint64_t uniform_below(SplitMix64& rng, uint64_t bound) {
    const uint64_t limit = UINT64_MAX - (UINT64_MAX % bound);
    for (;;) {
        uint64_t r = rng.next();
        if (r < limit) return r % bound;
    }
}

// Standard normal via Box-Muller (cosine branch; draws two uniforms per call).
inline double gaussian(SplitMix64& rng) {
    double u1 = 1.0 - uniform_unit(rng);  // (0, 1]
    double u2 = uniform_unit(rng);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
}

// FNV-1a 64-bit, used for content-addressed replay keys and label fingerprints.
inline uint64_t fnv1a64(const char* data, size_t len) {
    uint64_t h = 0xcbf29ce484222325ULL;
    for (size_t i = 0; i < len; ++i) {
        h ^= static_cast<unsigned char>(data[i]);
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace auditcopilot
