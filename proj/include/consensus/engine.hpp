#pragma once

// The tractable voting engine. Each agent's public state is one half-open
// interval (lower, upper] known to contain its private llr, plus the cached
// llr of that event. One round costs O(n): votes come from a shared running
// cache sum, and each vote moves at most one endpoint of one interval.

#include <cstddef>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "consensus/signal_model.hpp"

namespace consensus {

struct AgentBounds {
  double lower = 0.0;   // strict lower bound on the agent's private llr
  double upper = 0.0;   // inclusive upper bound
  double interval_llr_cache = 0.0;
};

// A tie means a posterior of exactly one half. The model resolves it as a
// vote of 0; the alternative rule exists only to mutation-test the oracle.
enum class TieRule { vote_zero, vote_one };

struct RoundRecord {
  std::vector<int> votes;
  bool unanimous = false;
  bool certified = false;  // certificate held when this round began
};

struct SimulationState {
  int true_state = 0;
  std::vector<double> private_llrs;
  std::vector<AgentBounds> bounds;
  std::vector<RoundRecord> history;
  int round = 0;  // rounds completed; history.size() stays equal to it
  double sum_of_interval_llrs = 0.0;
};

// All agents start with the vacuous interval (-inf, +inf], cache 0.
std::vector<AgentBounds> init_bounds(std::size_t n);

SimulationState init_state(int true_state, std::vector<double> private_llrs);

// Draws the hidden state uniformly (unless forced) and one signal per agent.
SimulationState sample_state(const SignalModel& model, std::size_t n, std::mt19937_64& rng,
                             std::optional<int> forced_state = std::nullopt);

// Vote of one agent given bounds reflecting the history so far: 1 iff the
// agent's posterior log odds, private llr plus the sum of the other agents'
// interval llrs, are positive. The second form takes the precomputed cache
// sum and runs in O(1).
int compute_vote(double private_llr, std::span<const AgentBounds> bounds, std::size_t self_index,
                 TieRule tie = TieRule::vote_zero);
int compute_vote(double private_llr, double sum_of_interval_llrs, double own_cache,
                 TieRule tie = TieRule::vote_zero);

// Synchronized interval update from one completed round of votes. Every
// threshold is computed from the pre-round caches, so the order of agents
// does not matter. Throws InconsistentHistoryError when a replayed vote
// empties an interval; cannot happen for engine-generated votes.
void update_bounds(const SignalModel& model, std::span<AgentBounds> bounds,
                   const std::vector<int>& votes, double& sum_of_interval_llrs);

// Sufficient condition for permanent unanimity: the total interval width is
// below the magnitude of the summed private llrs. Simulator-side only; it
// reads the true llrs, which agents never see. False while any bound is
// still infinite.
bool consensus_certificate(const SimulationState& state);

// Evaluates the certificate, collects all votes, applies the bound update,
// and appends the round record.
const RoundRecord& run_round(const SignalModel& model, SimulationState& state,
                             TieRule tie = TieRule::vote_zero);

struct SimulationResult {
  int true_state = 0;
  std::vector<double> private_llrs;
  std::vector<RoundRecord> rounds;
  int convergence_round = -1;      // first round both unanimous and certified
  int first_unanimous_round = -1;  // may precede certification
  int first_certified_round = -1;
  bool certified = false;
  int consensus_vote = -1;  // common vote of the final round, -1 if split
  bool correct = false;
};

// Runs rounds until the certificate holds at a unanimous round or max_rounds
// is hit, then extra_rounds more. A single agent stops after round one; its
// vote can never change but the certificate stays vacuously false.
SimulationResult run_to_consensus(const SignalModel& model, std::size_t n, int max_rounds,
                                  std::mt19937_64& rng, int extra_rounds = 0,
                                  std::optional<int> forced_state = std::nullopt);

// Recomputes the full vote history for fixed private llrs.
std::vector<RoundRecord> replay_votes(const SignalModel& model,
                                      const std::vector<double>& private_llrs, int rounds,
                                      TieRule tie = TieRule::vote_zero);

// Header line `n=<n> state=<S> llrs=<comma separated>` followed by one line
// per round: `t=<k> votes=<bitstring> unanimous=<0|1> certified=<0|1>`.
// Character i of the bitstring is agent i's vote.
std::string write_transcript(const SimulationResult& result);

}  // namespace consensus
