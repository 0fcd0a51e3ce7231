#include "consensus/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <exception>
#include <limits>
#include <stdexcept>
#include <thread>

#include <json.hpp>

namespace consensus {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

double binomial_std_err(double p, std::uint64_t trials) {
  return std::sqrt(p * (1.0 - p) / static_cast<double>(trials));
}

unsigned resolve_workers(unsigned workers) {
  if (workers != 0) return workers;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw != 0 ? hw : 1;
}

// Runs body(index) for every index in [0, total), split into contiguous
// chunks across workers. The body may only touch its own index's slot.
template <typename Body>
void for_each_trial(std::uint64_t total, unsigned workers, const Body& body) {
  workers = resolve_workers(workers);
  if (total == 0) return;
  if (workers <= 1 || total == 1) {
    for (std::uint64_t i = 0; i < total; ++i) body(i);
    return;
  }
  if (workers > total) workers = static_cast<unsigned>(total);
  const std::uint64_t chunk = (total + workers - 1) / workers;
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w) {
    const std::uint64_t lo = w * chunk;
    const std::uint64_t hi = std::min(total, lo + chunk);
    pool.emplace_back([&body, &errors, lo, hi, w] {
      try {
        for (std::uint64_t i = lo; i < hi; ++i) body(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (std::thread& th : pool) th.join();
  for (const std::exception_ptr& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

void validate_config(const ExperimentConfig& cfg) {
  if (cfg.agent_counts.empty()) {
    throw std::invalid_argument("experiment: need at least one agent count");
  }
  for (std::size_t n : cfg.agent_counts) {
    if (n == 0) throw std::invalid_argument("experiment: agent counts must be positive");
  }
  if (cfg.trials < 1) throw std::invalid_argument("experiment: trials must be at least 1");
  if (cfg.max_rounds < 1) throw std::invalid_argument("experiment: max_rounds must be positive");
  const ModelDiagnostics diag = validate_model(cfg.model);
  if (!diag.ok) {
    throw std::invalid_argument("experiment: invalid model: " + diag.violations.front());
  }
}

double mean_or_nan(double sum, std::uint64_t count) {
  return count == 0 ? kNaN : sum / static_cast<double>(count);
}

// Nearest-rank quantile of a sorted sample; NaN when empty.
double quantile(const std::vector<int>& sorted, double q) {
  if (sorted.empty()) return kNaN;
  const std::size_t last = sorted.size() - 1;
  const std::size_t rank = std::min(
      last, static_cast<std::size_t>(std::ceil(q * static_cast<double>(sorted.size()))) -
                (q > 0.0 ? 1 : 0));
  return static_cast<double>(sorted[rank]);
}

double bernoulli_kl(double p, double q) {
  if (p == q) return 0.0;
  auto term = [](double a, double b) {
    if (a == 0.0) return 0.0;
    if (b == 0.0) return kInf;
    return a * std::log(a / b);
  };
  return term(p, q) + term(1.0 - p, 1.0 - q);
}

}  // namespace

std::string experiment_kind_name(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::consensus: return "consensus";
    case ExperimentKind::round_accuracy: return "round_accuracy";
    case ExperimentKind::learning_curve: return "learning_curve";
    case ExperimentKind::majority_baseline: return "majority_baseline";
  }
  throw std::logic_error("experiment_kind_name: unknown kind");
}

std::string ResultTable::to_csv() const {
  std::string out = "experiment,n,round,estimate,stderr,trials,extra\n";
  for (const ResultRow& r : rows) {
    out += r.experiment;
    out += ',';
    out += std::to_string(r.n);
    out += ',';
    out += std::to_string(r.round);
    out += ',';
    out += fmt(r.estimate);
    out += ',';
    out += fmt(r.std_err);
    out += ',';
    out += std::to_string(r.trials);
    out += ',';
    out += r.extra;
    out += '\n';
  }
  return out;
}

// ---- consensus ----------------------------------------------------------

namespace {

struct ConsensusOutcome {
  std::int32_t convergence_round = -1;
  std::int32_t first_unanimous = -1;
  bool certified = false;
  bool final_unanimous = false;
  bool correct = false;
};

}  // namespace

ResultTable run_consensus_experiment(const ExperimentConfig& cfg) {
  validate_config(cfg);
  const std::uint64_t trials = cfg.trials;
  std::vector<ConsensusOutcome> outcomes(cfg.agent_counts.size() * trials);

  for_each_trial(outcomes.size(), cfg.workers, [&](std::uint64_t idx) {
    const std::size_t n = cfg.agent_counts[idx / trials];
    std::mt19937_64 rng(derive_trial_seed(cfg.seed, idx));
    const SimulationResult r = run_to_consensus(cfg.model, n, cfg.max_rounds, rng);
    ConsensusOutcome& o = outcomes[idx];
    o.convergence_round = r.convergence_round;
    o.first_unanimous = r.first_unanimous_round;
    o.certified = r.certified;
    o.final_unanimous = r.consensus_vote != -1;
    o.correct = r.correct;
  });

  ResultTable table;
  for (std::size_t k = 0; k < cfg.agent_counts.size(); ++k) {
    std::uint64_t certified = 0;
    std::uint64_t unanimous = 0;
    std::uint64_t correct = 0;
    std::uint64_t unanimous_seen = 0;
    double first_unanimous_sum = 0.0;
    std::vector<int> tu;
    for (std::uint64_t j = 0; j < trials; ++j) {
      const ConsensusOutcome& o = outcomes[k * trials + j];
      if (o.certified) {
        ++certified;
        tu.push_back(o.convergence_round);
      }
      if (o.final_unanimous) ++unanimous;
      if (o.correct) ++correct;
      if (o.first_unanimous != -1) {
        ++unanimous_seen;
        first_unanimous_sum += o.first_unanimous;
      }
    }
    std::sort(tu.begin(), tu.end());
    double tu_sum = 0.0;
    for (int t : tu) tu_sum += t;

    const double p = static_cast<double>(certified) / static_cast<double>(trials);
    ResultRow row;
    row.experiment = experiment_kind_name(ExperimentKind::consensus);
    row.n = cfg.agent_counts[k];
    row.round = 0;
    row.estimate = p;
    row.std_err = binomial_std_err(p, trials);
    row.trials = trials;
    row.extra = "tu_mean=" + fmt(mean_or_nan(tu_sum, tu.size())) +
                ";tu_max=" + fmt(tu.empty() ? kNaN : tu.back()) +
                ";tu_p50=" + fmt(quantile(tu, 0.5)) + ";tu_p90=" + fmt(quantile(tu, 0.9)) +
                ";unanimous_frac=" + fmt(static_cast<double>(unanimous) / trials) +
                ";first_unanimous_mean=" + fmt(mean_or_nan(first_unanimous_sum, unanimous_seen)) +
                ";correct_frac=" + fmt(static_cast<double>(correct) / trials);
    table.rows.push_back(std::move(row));
  }
  return table;
}

// ---- per-round accuracy ---------------------------------------------------

ResultTable run_round_accuracy(const ExperimentConfig& cfg) {
  validate_config(cfg);
  const std::uint64_t trials = cfg.trials;
  const std::size_t rounds = static_cast<std::size_t>(cfg.max_rounds);
  std::vector<std::uint8_t> correct(cfg.agent_counts.size() * trials * rounds);

  for_each_trial(cfg.agent_counts.size() * trials, cfg.workers, [&](std::uint64_t idx) {
    const std::size_t n = cfg.agent_counts[idx / trials];
    std::mt19937_64 rng(derive_trial_seed(cfg.seed, idx));
    SimulationState state = sample_state(cfg.model, n, rng);
    for (std::size_t t = 0; t < rounds; ++t) {
      const RoundRecord& rec = run_round(cfg.model, state);
      correct[idx * rounds + t] = rec.votes.front() == state.true_state ? 1 : 0;
    }
  });

  ResultTable table;
  for (std::size_t k = 0; k < cfg.agent_counts.size(); ++k) {
    for (std::size_t t = 0; t < rounds; ++t) {
      std::uint64_t hits = 0;
      for (std::uint64_t j = 0; j < trials; ++j) {
        hits += correct[(k * trials + j) * rounds + t];
      }
      const double p = static_cast<double>(hits) / static_cast<double>(trials);
      ResultRow row;
      row.experiment = experiment_kind_name(ExperimentKind::round_accuracy);
      row.n = cfg.agent_counts[k];
      row.round = static_cast<int>(t + 1);
      row.estimate = p;
      row.std_err = binomial_std_err(p, trials);
      row.trials = trials;
      table.rows.push_back(std::move(row));
    }
  }
  return table;
}

// ---- learning curve -------------------------------------------------------

ResultTable run_learning_curve(const ExperimentConfig& cfg, LearningRateEstimate* estimate) {
  validate_config(cfg);
  if (cfg.agent_counts.size() < 4) {
    throw std::invalid_argument("learning_curve: need at least four agent counts");
  }
  const std::uint64_t trials = cfg.trials;
  std::vector<std::uint8_t> success(cfg.agent_counts.size() * trials);

  for_each_trial(success.size(), cfg.workers, [&](std::uint64_t idx) {
    const std::size_t n = cfg.agent_counts[idx / trials];
    std::mt19937_64 rng(derive_trial_seed(cfg.seed, idx));
    SimulationState state = sample_state(cfg.model, n, rng);
    run_round(cfg.model, state);
    const RoundRecord& rec = run_round(cfg.model, state);
    bool all_correct = true;
    for (int v : rec.votes) all_correct = all_correct && v == state.true_state;
    success[idx] = all_correct ? 1 : 0;
  });

  ResultTable table;
  std::vector<std::uint64_t> failures(cfg.agent_counts.size());
  for (std::size_t k = 0; k < cfg.agent_counts.size(); ++k) {
    std::uint64_t hits = 0;
    for (std::uint64_t j = 0; j < trials; ++j) hits += success[k * trials + j];
    failures[k] = trials - hits;
    const double p = static_cast<double>(hits) / static_cast<double>(trials);
    ResultRow row;
    row.experiment = experiment_kind_name(ExperimentKind::learning_curve);
    row.n = cfg.agent_counts[k];
    row.round = 2;
    row.estimate = p;
    row.std_err = binomial_std_err(p, trials);
    row.trials = trials;
    row.extra = "failures=" + std::to_string(failures[k]);
    table.rows.push_back(std::move(row));
  }

  if (estimate != nullptr) {
    LearningRateEstimate est;
    const LlrDistributions dist(cfg.model);
    est.alpha0 = dist.interval_mass(0, 0.0, kInf);
    est.alpha1 = dist.interval_mass(1, 0.0, kInf);
    est.kl_divergence = bernoulli_kl(est.alpha1, est.alpha0);

    std::vector<double> xs;
    std::vector<double> ys;
    for (std::size_t k = 0; k < failures.size(); ++k) {
      if (failures[k] >= 10) {
        xs.push_back(static_cast<double>(cfg.agent_counts[k]));
        ys.push_back(std::log(static_cast<double>(failures[k]) / trials));
      }
    }
    if (xs.size() < 2) {
      xs.clear();
      ys.clear();
      est.slope_is_lower_bound = true;
      for (std::size_t k = 0; k < failures.size(); ++k) {
        xs.push_back(static_cast<double>(cfg.agent_counts[k]));
        ys.push_back(std::log(static_cast<double>(std::max<std::uint64_t>(failures[k], 1)) / trials));
      }
    }
    double x_mean = 0.0;
    double y_mean = 0.0;
    for (std::size_t k = 0; k < xs.size(); ++k) {
      x_mean += xs[k];
      y_mean += ys[k];
    }
    x_mean /= static_cast<double>(xs.size());
    y_mean /= static_cast<double>(xs.size());
    double sxy = 0.0;
    double sxx = 0.0;
    for (std::size_t k = 0; k < xs.size(); ++k) {
      sxy += (xs[k] - x_mean) * (ys[k] - y_mean);
      sxx += (xs[k] - x_mean) * (xs[k] - x_mean);
    }
    est.slope = sxx > 0.0 ? sxy / sxx : 0.0;
    est.points_used = static_cast<int>(xs.size());
    *estimate = est;
  }
  return table;
}

// ---- majority baseline ----------------------------------------------------

namespace {

struct MajorityOutcome {
  bool majority_correct = false;
  bool consensus_correct = false;
};

}  // namespace

ResultTable run_majority_baseline(const ExperimentConfig& cfg) {
  validate_config(cfg);
  for (std::size_t n : cfg.agent_counts) {
    if (n % 2 == 0) {
      throw std::invalid_argument("majority_baseline: agent counts must be odd");
    }
  }
  const std::uint64_t trials = cfg.trials;
  std::vector<MajorityOutcome> outcomes(cfg.agent_counts.size() * 2 * trials);

  for_each_trial(outcomes.size(), cfg.workers, [&](std::uint64_t idx) {
    const std::size_t n = cfg.agent_counts[idx / (2 * trials)];
    const int forced_state = static_cast<int>((idx / trials) % 2);
    std::mt19937_64 rng(derive_trial_seed(cfg.seed, idx));
    SimulationState state = sample_state(cfg.model, n, rng, forced_state);

    const RoundRecord& first = run_round(cfg.model, state);
    std::size_t ones = 0;
    for (int v : first.votes) ones += static_cast<std::size_t>(v);
    const int majority_vote = 2 * ones > n ? 1 : 0;

    const RoundRecord& second = run_round(cfg.model, state);
    bool all_correct = true;
    for (int v : second.votes) all_correct = all_correct && v == forced_state;

    MajorityOutcome& o = outcomes[idx];
    o.majority_correct = majority_vote == forced_state;
    o.consensus_correct = all_correct;
  });

  ResultTable table;
  for (std::size_t k = 0; k < cfg.agent_counts.size(); ++k) {
    for (int state = 0; state < 2; ++state) {
      std::uint64_t majority = 0;
      std::uint64_t consensus = 0;
      for (std::uint64_t j = 0; j < trials; ++j) {
        const MajorityOutcome& o = outcomes[(k * 2 + state) * trials + j];
        if (o.majority_correct) ++majority;
        if (o.consensus_correct) ++consensus;
      }
      const std::string tag = ";state=" + std::to_string(state);
      const double p_major = static_cast<double>(majority) / static_cast<double>(trials);
      const double p_cons = static_cast<double>(consensus) / static_cast<double>(trials);

      ResultRow row;
      row.experiment = experiment_kind_name(ExperimentKind::majority_baseline);
      row.n = cfg.agent_counts[k];
      row.round = 1;
      row.estimate = p_major;
      row.std_err = binomial_std_err(p_major, trials);
      row.trials = trials;
      row.extra = "method=majority" + tag;
      table.rows.push_back(row);

      row.round = 2;
      row.estimate = p_cons;
      row.std_err = binomial_std_err(p_cons, trials);
      row.extra = "method=consensus" + tag;
      table.rows.push_back(std::move(row));
    }
  }
  return table;
}

// ---- dispatch and serialization --------------------------------------------

ResultTable run_experiment(const ExperimentConfig& cfg,
                           std::optional<LearningRateEstimate>* estimate) {
  if (estimate != nullptr) estimate->reset();
  switch (cfg.kind) {
    case ExperimentKind::consensus:
      return run_consensus_experiment(cfg);
    case ExperimentKind::round_accuracy:
      return run_round_accuracy(cfg);
    case ExperimentKind::learning_curve: {
      LearningRateEstimate est;
      ResultTable table = run_learning_curve(cfg, &est);
      if (estimate != nullptr) *estimate = est;
      return table;
    }
    case ExperimentKind::majority_baseline:
      return run_majority_baseline(cfg);
  }
  throw std::logic_error("run_experiment: unknown kind");
}

std::string canonical_config_echo(const ExperimentConfig& cfg) {
  std::string ns;
  for (std::size_t k = 0; k < cfg.agent_counts.size(); ++k) {
    if (k > 0) ns += ',';
    ns += std::to_string(cfg.agent_counts[k]);
  }
  return "experiment=" + experiment_kind_name(cfg.kind) + "\nmodel=" + model_to_string(cfg.model) +
         "\nn=" + ns + "\ntrials=" + std::to_string(cfg.trials) +
         "\nmax_rounds=" + std::to_string(cfg.max_rounds) + "\nseed=" + std::to_string(cfg.seed) +
         "\n";
}

namespace {

std::uint64_t fnv1a64(const std::string& text) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace

std::string summary_json(const ExperimentConfig& cfg, const ResultTable& table,
                         const std::optional<LearningRateEstimate>& estimate) {
  const std::string echo = canonical_config_echo(cfg);
  char run_id[24];
  std::snprintf(run_id, sizeof run_id, "%016llx",
                static_cast<unsigned long long>(fnv1a64(echo)));

  nlohmann::ordered_json j;
  j["run_id"] = run_id;
  j["experiment"] = experiment_kind_name(cfg.kind);
  j["config"] = {
      {"experiment", experiment_kind_name(cfg.kind)},
      {"model", model_to_string(cfg.model)},
      {"n", cfg.agent_counts},
      {"trials", cfg.trials},
      {"max_rounds", cfg.max_rounds},
      {"seed", cfg.seed},
  };
  j["rows"] = table.rows.size();
  if (estimate.has_value()) {
    j["learning_rate"] = {
        {"alpha0", estimate->alpha0},
        {"alpha1", estimate->alpha1},
        {"kl_divergence", estimate->kl_divergence},
        {"slope", estimate->slope},
        {"slope_is_lower_bound", estimate->slope_is_lower_bound},
        {"points_used", estimate->points_used},
    };
  }
  return j.dump(2) + "\n";
}

}  // namespace consensus
