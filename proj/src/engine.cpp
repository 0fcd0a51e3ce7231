#include "consensus/engine.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>
#include <utility>

namespace consensus {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

bool all_equal(const std::vector<int>& votes) {
  return std::all_of(votes.begin(), votes.end(), [&](int v) { return v == votes.front(); });
}

}  // namespace

std::vector<AgentBounds> init_bounds(std::size_t n) {
  if (n == 0) throw std::invalid_argument("init_bounds: need at least one agent");
  return std::vector<AgentBounds>(n, AgentBounds{-kInf, kInf, 0.0});
}

SimulationState init_state(int true_state, std::vector<double> private_llrs) {
  if (true_state != 0 && true_state != 1) {
    throw std::invalid_argument("init_state: state must be 0 or 1");
  }
  SimulationState s;
  s.true_state = true_state;
  s.bounds = init_bounds(private_llrs.size());
  s.private_llrs = std::move(private_llrs);
  return s;
}

SimulationState sample_state(const SignalModel& model, std::size_t n, std::mt19937_64& rng,
                             std::optional<int> forced_state) {
  if (n == 0) throw std::invalid_argument("sample_state: need at least one agent");
  const int state = forced_state ? *forced_state : static_cast<int>(rng() & 1u);
  std::vector<double> llrs(n);
  for (std::size_t i = 0; i < n; ++i) llrs[i] = llr(model, sample_signal(model, state, rng));
  return init_state(state, std::move(llrs));
}

int compute_vote(double private_llr, double sum_of_interval_llrs, double own_cache, TieRule tie) {
  const double posterior_log_odds = private_llr + (sum_of_interval_llrs - own_cache);
  if (posterior_log_odds > 0.0) return 1;
  if (posterior_log_odds < 0.0) return 0;
  return tie == TieRule::vote_one ? 1 : 0;
}

int compute_vote(double private_llr, std::span<const AgentBounds> bounds, std::size_t self_index,
                 TieRule tie) {
  if (self_index >= bounds.size()) {
    throw std::out_of_range("compute_vote: agent index out of range");
  }
  double sum = 0.0;
  for (const AgentBounds& b : bounds) sum += b.interval_llr_cache;
  return compute_vote(private_llr, sum, bounds[self_index].interval_llr_cache, tie);
}

void update_bounds(const SignalModel& model, std::span<AgentBounds> bounds,
                   const std::vector<int>& votes, double& sum_of_interval_llrs) {
  if (votes.size() != bounds.size()) {
    throw std::invalid_argument("update_bounds: need exactly one vote per agent");
  }
  const double pre_round_sum = sum_of_interval_llrs;
  double delta = 0.0;
  for (std::size_t i = 0; i < bounds.size(); ++i) {
    if (votes[i] != 0 && votes[i] != 1) {
      throw std::invalid_argument("update_bounds: votes must be 0 or 1");
    }
    AgentBounds& b = bounds[i];
    // A vote reveals which side of this threshold the agent's posterior log
    // odds fell on, hence which side its private llr lies on.
    const double threshold = b.interval_llr_cache - pre_round_sum;
    bool moved = false;
    if (votes[i] == 1) {
      if (threshold > b.lower) {
        b.lower = threshold;
        moved = true;
      }
    } else if (threshold < b.upper) {
      b.upper = threshold;
      moved = true;
    }
    if (!moved) continue;
    if (!(b.lower < b.upper)) {
      throw InconsistentHistoryError("update_bounds: vote history empties an agent's interval");
    }
    const double fresh = interval_llr(model, b.lower, b.upper);
    delta += fresh - b.interval_llr_cache;
    b.interval_llr_cache = fresh;
  }
  sum_of_interval_llrs += delta;
}

bool consensus_certificate(const SimulationState& state) {
  double gap = 0.0;
  for (const AgentBounds& b : state.bounds) {
    if (b.lower == -kInf || b.upper == kInf) return false;
    gap += b.upper - b.lower;
  }
  double total = 0.0;
  for (double x : state.private_llrs) total += x;
  return gap < std::abs(total);
}

const RoundRecord& run_round(const SignalModel& model, SimulationState& state, TieRule tie) {
  const std::size_t n = state.bounds.size();
  RoundRecord rec;
  rec.certified = consensus_certificate(state);
  rec.votes.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    rec.votes[i] = compute_vote(state.private_llrs[i], state.sum_of_interval_llrs,
                                state.bounds[i].interval_llr_cache, tie);
  }
  rec.unanimous = all_equal(rec.votes);
  update_bounds(model, state.bounds, rec.votes, state.sum_of_interval_llrs);
  ++state.round;
  state.history.push_back(std::move(rec));
  return state.history.back();
}

SimulationResult run_to_consensus(const SignalModel& model, std::size_t n, int max_rounds,
                                  std::mt19937_64& rng, int extra_rounds,
                                  std::optional<int> forced_state) {
  if (max_rounds < 1) throw std::invalid_argument("run_to_consensus: max_rounds must be positive");
  SimulationState state = sample_state(model, n, rng, forced_state);

  SimulationResult result;
  result.true_state = state.true_state;
  result.private_llrs = state.private_llrs;

  auto note = [&result](const RoundRecord& rec, int t) {
    if (result.first_unanimous_round == -1 && rec.unanimous) result.first_unanimous_round = t;
    if (result.first_certified_round == -1 && rec.certified) result.first_certified_round = t;
  };

  int t = 0;
  while (t < max_rounds) {
    const RoundRecord& rec = run_round(model, state);
    ++t;
    note(rec, t);
    if (rec.unanimous && rec.certified) {
      result.convergence_round = t;
      result.certified = true;
      break;
    }
    if (n == 1) {
      result.convergence_round = 1;
      break;
    }
  }
  for (int e = 0; e < extra_rounds; ++e) {
    const RoundRecord& rec = run_round(model, state);
    ++t;
    note(rec, t);
  }

  result.rounds = std::move(state.history);
  const RoundRecord& last = result.rounds.back();
  if (last.unanimous) result.consensus_vote = last.votes.front();
  result.correct = result.consensus_vote == result.true_state;
  return result;
}

std::vector<RoundRecord> replay_votes(const SignalModel& model,
                                      const std::vector<double>& private_llrs, int rounds,
                                      TieRule tie) {
  SimulationState state = init_state(0, private_llrs);
  for (int t = 0; t < rounds; ++t) run_round(model, state, tie);
  return std::move(state.history);
}

std::string write_transcript(const SimulationResult& result) {
  std::string out = "n=" + std::to_string(result.private_llrs.size()) +
                    " state=" + std::to_string(result.true_state) + " llrs=";
  char buf[40];
  for (std::size_t i = 0; i < result.private_llrs.size(); ++i) {
    if (i > 0) out += ',';
    std::snprintf(buf, sizeof buf, "%.17g", result.private_llrs[i]);
    out += buf;
  }
  out += '\n';
  for (std::size_t k = 0; k < result.rounds.size(); ++k) {
    const RoundRecord& rec = result.rounds[k];
    out += "t=" + std::to_string(k + 1) + " votes=";
    for (int v : rec.votes) out += v ? '1' : '0';
    out += " unanimous=";
    out += rec.unanimous ? '1' : '0';
    out += " certified=";
    out += rec.certified ? '1' : '0';
    out += '\n';
  }
  return out;
}

}  // namespace consensus
