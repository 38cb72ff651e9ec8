#pragma once

#include <cstdint>
#include <random>

namespace twoloc {

using Rng = std::mt19937_64;

/// Independent stream for (seed, index); results never depend on thread count.
inline Rng make_stream(std::uint64_t seed, std::uint64_t index) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32), 0x746c6fu};
    return Rng(seq);
}

inline double uniform01(Rng& rng) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng); }

inline double exponential(Rng& rng, double rate) { return std::exponential_distribution<double>(rate)(rng); }

/// Uniform integer in [0, n).
inline int uniform_index(Rng& rng, int n) { return std::uniform_int_distribution<int>(0, n - 1)(rng); }

/// Random seed from the system entropy source.
inline std::uint64_t fresh_seed() {
    std::random_device rd;
    return (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
}

}  // namespace twoloc
