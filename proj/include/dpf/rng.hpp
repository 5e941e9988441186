#pragma once

#include <cstdint>
#include <random>

namespace dpf {

/// Independent randomness streams derived from one root seed.
enum class SeedPurpose : std::uint64_t {
  kData = 1,
  kPrior = 2,
  kChains = 3,
  kTraining = 4,
  kProbes = 5,
  kPermutation = 6,
  kSimulation = 7,
};

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t root, SeedPurpose purpose, std::uint64_t index = 0) {
  std::uint64_t s = splitmix64(root);
  s = splitmix64(s ^ (static_cast<std::uint64_t>(purpose) * 0xD1B54A32D192ED03ULL));
  return splitmix64(s ^ (index + 0x632BE59BD9B4E019ULL));
}

using Rng = std::mt19937_64;

/// Uniform draw on [0, 1) from the top 53 bits; identical on every platform.
inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

/// Uniform integer in [0, n) by rejection, platform independent.
inline std::uint64_t uniform_index(Rng& rng, std::uint64_t n) {
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return x % n;
}

}  // namespace dpf
