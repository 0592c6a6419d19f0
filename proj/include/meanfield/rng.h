#pragma once

#include <cstdint>

namespace meanfield {

// Counter-based uniforms: the value depends only on (seed, stream, counter),
// so draws for load i at step t are identical however the loads are split
// across workers.
namespace rng {

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t key(std::uint64_t seed, std::uint64_t stream, std::uint64_t counter) {
  std::uint64_t h = splitmix64(seed ^ 0xA0761D6478BD642FULL);
  h = splitmix64(h ^ (stream * 0xE7037ED1A0B428DBULL));
  h = splitmix64(h ^ (counter * 0x8EBC6AF09C88C6E3ULL));
  return h;
}

/// Uniform on (0, 1): 53 random bits, offset by half an ulp so 0 never occurs.
constexpr double uniform(std::uint64_t seed, std::uint64_t stream, std::uint64_t counter) {
  return (static_cast<double>(key(seed, stream, counter) >> 11) + 0.5) * 0x1.0p-53;
}

// Separate purposes draw from disjoint seed domains.
enum Domain : std::uint64_t {
  kTransitions = 1,
  kInitialStates = 2,
  kSampling = 3,
  kTcl = 4,
  kReference = 5,
  kTrials = 6,
};

constexpr std::uint64_t derive(std::uint64_t seed, Domain domain) {
  return splitmix64(seed * 0x2545F4914F6CDD1DULL + static_cast<std::uint64_t>(domain));
}

}  // namespace rng
}  // namespace meanfield
