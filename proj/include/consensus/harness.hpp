#pragma once

// Monte Carlo experiment runner. Every trial derives its own random stream
// from (master seed, flat trial index), trials write into preallocated
// result slots, and aggregation walks the slots in index order, so output is
// byte-identical for any worker count.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "consensus/engine.hpp"
#include "consensus/rng.hpp"
#include "consensus/signal_model.hpp"

namespace consensus {

enum class ExperimentKind { consensus, round_accuracy, learning_curve, majority_baseline };

std::string experiment_kind_name(ExperimentKind kind);

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::consensus;
  SignalModel model;
  std::vector<std::size_t> agent_counts;
  std::uint64_t trials = 0;
  int max_rounds = 200;
  std::uint64_t seed = 0;
  unsigned workers = 0;  // 0 picks one per hardware thread; never affects results
};

struct ResultRow {
  std::string experiment;
  std::size_t n = 0;
  int round = 0;
  double estimate = 0.0;
  double std_err = 0.0;  // binomial, sqrt(p(1-p)/trials)
  std::uint64_t trials = 0;
  std::string extra;  // semicolon-separated key=value pairs, comma-free
};

struct ResultTable {
  std::vector<ResultRow> rows;
  // Header `experiment,n,round,estimate,stderr,trials,extra`, %.12g reals.
  std::string to_csv() const;
};

struct LearningRateEstimate {
  double alpha0 = 0.0;  // P(llr > 0 | state 0)
  double alpha1 = 0.0;  // P(llr > 0 | state 1)
  double kl_divergence = 0.0;
  // Fitted d log(failure rate) / dn over grid points with at least 10
  // observed failures. When fewer than two such points exist, all points are
  // used with zero-failure counts clamped to 1, which can only flatten the
  // fit, and the flag marks the magnitude as a lower bound.
  double slope = 0.0;
  bool slope_is_lower_bound = false;
  int points_used = 0;
};

// Per agent count: fraction of runs whose certificate fired, with convergence
// round statistics and unanimity fractions in the extra column.
ResultTable run_consensus_experiment(const ExperimentConfig& config);

// Per (agent count, round <= max_rounds): probability that agent 0's vote at
// that round matches the true state. Agents are exchangeable, so one agent's
// marginal stands for all.
ResultTable run_round_accuracy(const ExperimentConfig& config);

// Per agent count: probability that every agent votes the true state at
// round 2. Needs at least four agent counts; fills the estimate if given.
ResultTable run_learning_curve(const ExperimentConfig& config,
                               LearningRateEstimate* estimate = nullptr);

// Per (agent count, forced state): accuracy of a one-round majority vote and
// of the round-2 all-agents-correct event on the same trials. Odd counts only.
ResultTable run_majority_baseline(const ExperimentConfig& config);

// Dispatches on config.kind; fills the learning-rate estimate when the kind
// produces one.
ResultTable run_experiment(const ExperimentConfig& config,
                           std::optional<LearningRateEstimate>* estimate = nullptr);

// The config echoed in canonical key=value form; itself a loadable config
// file. The run id in summaries is a hash of exactly this text.
std::string canonical_config_echo(const ExperimentConfig& config);

std::string summary_json(const ExperimentConfig& config, const ResultTable& table,
                         const std::optional<LearningRateEstimate>& estimate);

}  // namespace consensus
