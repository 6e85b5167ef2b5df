#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace bipedkit {

using Rng = std::mt19937_64;

/// Derives an independent sub-seed for a named stream.
///
/// sub = splitmix64(seed XOR fnv1a64(stream)). Every subcommand derives its
/// streams from the single --seed this way, so two runs with the same seed
/// see identical random numbers regardless of thread scheduling.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view stream);
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index);

/// U[0,1) with 53 random bits; portable across standard libraries.
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double uniform(Rng& rng, double lo, double hi) {
  return lo + (hi - lo) * uniform01(rng);
}

/// Uniform integer in [0, n).
std::size_t uniform_index(Rng& rng, std::size_t n);

/// Standard normal via Box-Muller (portable, unlike std::normal_distribution).
double standard_normal(Rng& rng);

}  // namespace bipedkit
