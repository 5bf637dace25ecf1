#pragma once

#include <cmath>
#include <cstdint>

namespace swinvid {

// Splitmix64 state advance. Used everywhere randomness is needed so that
// streams can be derived per (seed, index) and replayed on any platform.
struct SplitMix64 {
    uint64_t state = 0x9e3779b97f4a7c15ull;

    explicit SplitMix64(uint64_t seed = 0) : state(seed) {}

    uint64_t next() {
        uint64_t z = (state += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    // uniform in [0, 1), exactly k * 2^-53
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // integer in [0, n)
    uint64_t below(uint64_t n) { return n ? next() % n : 0; }

    // Approximate standard normal as sum of 12 uniforms minus 6 (Irwin-Hall).
    // Uses only IEEE add/sub, so the stream is bit-identical across platforms.
    double normal() {
        double s = 0.0;
        for (int i = 0; i < 12; ++i) s += uniform();
        return s - 6.0;
    }

    // normal truncated to [-2*sigma, 2*sigma], rescaled by sigma
    double trunc_normal(double sigma) {
        for (;;) {
            double z = normal();
            if (z >= -2.0 && z <= 2.0) return z * sigma;
        }
    }

    // triangular distribution on [0,1] with the given mode; sqrt is exact per
    // IEEE so this stays platform-identical
    double triangular(double mode) {
        double u = uniform();
        if (u <= mode) return std::sqrt(u * mode);
        return 1.0 - std::sqrt((1.0 - u) * (1.0 - mode));
    }
};

// Derive an independent stream for (seed, index) pairs.
inline uint64_t mix_streams(uint64_t seed, uint64_t index) {
    SplitMix64 m(seed ^ (0x517cc1b727220a95ull * (index + 1)));
    m.next();
    return m.next();
}

}  // namespace swinvid
