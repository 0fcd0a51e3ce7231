#pragma once

// Seed derivation for independent per-trial random streams. Trials must be
// reproducible from (master seed, trial index) alone so that results do not
// depend on how trials are scheduled across workers.

#include <cstdint>

namespace consensus {

constexpr std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// Distinct indices map to distinct seeds: the index is folded in through an
// odd multiplier (injective mod 2^64) before the bijective finalizer.
constexpr std::uint64_t derive_trial_seed(std::uint64_t master, std::uint64_t index) {
  return splitmix64(master + (index + 1) * 0x9E3779B97F4A7C15ULL);
}

}  // namespace consensus
