#pragma once

// Brute-force reference implementation of the Bayesian vote rule for finite
// signal spaces. It enumerates every signal vector, groups vectors by the
// history they generate, and computes each posterior by direct summation,
// with no interval bounds anywhere. Exponential in the agent count; exists
// solely to certify the engine on small instances.

#include <cstdint>
#include <iosfwd>
#include <random>
#include <vector>

#include "consensus/engine.hpp"
#include "consensus/signal_model.hpp"

namespace consensus {

// Posteriors closer than this to one half make float vote comparisons
// untrustworthy; fuzzed instances that get this close are regenerated.
inline constexpr double kPosteriorTieBand = 1e-12;

// Cap on m^n, the number of enumerated signal vectors.
inline constexpr std::uint64_t kMaxOracleVectors = 1'000'000;

struct DiscreteInstance {
  SignalModel model;
  std::size_t n_agents = 0;
  int rounds = 0;
  std::uint64_t id = 0;
};

// Exact vote of every agent at every round for every signal vector. Agent i's
// atom index is digit i of the vector index in base m, least significant
// first; votes are packed one bit per agent.
struct VoteFunctionTable {
  std::size_t n_agents = 0;
  int rounds = 0;
  std::uint64_t num_vectors = 0;
  std::vector<std::uint32_t> votes;  // [vector * rounds + (round - 1)]
  double min_posterior_margin = 0.0;

  std::uint32_t round_votes(std::uint64_t vector_index, int round) const {
    return votes[vector_index * static_cast<std::uint64_t>(rounds) + (round - 1)];
  }
  int vote(std::uint64_t vector_index, int round, std::size_t agent) const {
    return static_cast<int>((round_votes(vector_index, round) >> agent) & 1u);
  }
};

// Throws std::invalid_argument when the instance is malformed or m^n exceeds
// the enumeration budget.
VoteFunctionTable enumerate_vote_table(const DiscreteInstance& instance);

struct EquivalenceReport {
  bool match = false;
  std::uint64_t vector_index = 0;  // witness, valid when match is false
  int round = 0;
  std::size_t agent = 0;
  std::uint64_t vectors = 0;
  double min_posterior_margin = 0.0;
};

// Replays the engine on every signal vector and compares its votes with the
// oracle table round by round, before each bound update, so a divergence is
// reported at the first round it occurs. engine_tie mutates only the engine;
// the oracle always resolves ties to 0.
EquivalenceReport check_equivalence(const DiscreteInstance& instance,
                                    TieRule engine_tie = TieRule::vote_zero);

// Random discrete table with 2..max_atoms atoms; every mass is at least 0.01
// after normalization so posteriors stay well away from float underflow.
DiscreteInstance random_instance(std::mt19937_64& rng, std::size_t n_agents,
                                 std::size_t max_atoms, int rounds, std::uint64_t id);

struct VerifySummary {
  std::uint64_t checked = 0;
  std::uint64_t diverged = 0;
  std::uint64_t regenerated = 0;
};

// Checks the built-in hiring instance (id 0) followed by `instances` fuzzed
// ones (n=3, up to 4 atoms, 5 rounds), writing one line per instance:
// `instance=<id> vectors=<v> rounds=<T> result=MATCH|DIVERGE(vec,round,agent)`.
VerifySummary run_verification(std::uint64_t instances, std::uint64_t seed, std::ostream& out);

}  // namespace consensus
