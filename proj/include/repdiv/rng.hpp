#pragma once

#include <cstdint>
#include <cstddef>

namespace repdiv {

// Deterministic counter-based generator (splitmix64). One 64-bit word of
// state; the output stream is a pure function of (seed, draw index), so
// identical seeds always replay identical streams. Independent streams are
// derived by hashing the base seed with a stream id (fork), which is how
// parallel workers get decorrelated randomness from one experiment seed.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : seed_(seed), state_(seed) {}

    std::uint64_t seed() const { return seed_; }

    std::uint64_t next_u64() {
        state_ += 0x9E3779B97F4A7C15ull;
        std::uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1) with 53 random bits.
    double next_uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    // Box-Muller transform; consumes exactly two uniform draws per call.
    double next_gaussian(double mean = 0.0, double sd = 1.0);

    // Uniform integer in [0, n).
    std::size_t next_index(std::size_t n);

    // Independent stream keyed off the original seed, not the current state.
    Rng fork(std::uint64_t stream) const {
        return Rng(mix(seed_ ^ mix(stream + 0x632BE59BD9B4E019ull)));
    }

    static std::uint64_t mix(std::uint64_t z) {
        z += 0x9E3779B97F4A7C15ull;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

private:
    std::uint64_t seed_;
    std::uint64_t state_;
};

}  // namespace repdiv
