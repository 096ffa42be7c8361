#pragma once

#include <cstdint>

namespace colearn {

/// Counter-based generator: every draw is a pure function of (seed, stream,
/// index), so trials can run in any order or thread and still reproduce.
struct CounterRng {
    std::uint64_t seed = 0;
    std::uint64_t stream = 0;

    static std::uint64_t mix(std::uint64_t x) {
        x += 0x9E3779B97F4A7C15ULL;
        x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
        x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
        return x ^ (x >> 31);
    }

    std::uint64_t bits(std::uint64_t index) const {
        return mix(mix(mix(seed) ^ stream) ^ index);
    }

    /// Uniform double in [0, 1).
    double uniform(std::uint64_t index) const {
        return static_cast<double>(bits(index) >> 11) * 0x1.0p-53;
    }

    /// Uniform double in [lo, hi).
    double uniform(std::uint64_t index, double lo, double hi) const {
        return lo + (hi - lo) * uniform(index);
    }

    CounterRng substream(std::uint64_t s) const { return {seed, mix(stream ^ s)}; }
};

}  // namespace colearn
