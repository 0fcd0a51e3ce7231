#include "consensus/oracle.hpp"

#include <cmath>
#include <ostream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>

namespace consensus {
namespace {

void check_instance(const DiscreteInstance& inst) {
  if (inst.model.kind != ModelKind::discrete) {
    throw std::invalid_argument("oracle: instance model must be discrete");
  }
  if (inst.model.atoms.size() < 2) {
    throw std::invalid_argument("oracle: instance needs at least two atoms");
  }
  if (inst.n_agents < 1 || inst.n_agents > 32) {
    throw std::invalid_argument("oracle: agent count must be in 1..32");
  }
  if (inst.rounds < 1) {
    throw std::invalid_argument("oracle: need at least one round");
  }
}

std::uint64_t vector_count(std::size_t m, std::size_t n) {
  std::uint64_t v = 1;
  for (std::size_t i = 0; i < n; ++i) {
    v *= m;
    if (v > kMaxOracleVectors) {
      throw std::invalid_argument("oracle: m^n exceeds the enumeration budget");
    }
  }
  return v;
}

struct StateMass {
  double s0 = 0.0;
  double s1 = 0.0;
};

}  // namespace

VoteFunctionTable enumerate_vote_table(const DiscreteInstance& inst) {
  check_instance(inst);
  const std::size_t n = inst.n_agents;
  const std::size_t m = inst.model.atoms.size();
  const std::uint64_t num_vectors = vector_count(m, n);

  VoteFunctionTable table;
  table.n_agents = n;
  table.rounds = inst.rounds;
  table.num_vectors = num_vectors;
  table.votes.assign(num_vectors * static_cast<std::uint64_t>(inst.rounds), 0);
  table.min_posterior_margin = 0.5;

  // Likelihood of each full signal vector under each state.
  std::vector<StateMass> weight(num_vectors);
  std::vector<std::size_t> digits(n);
  for (std::uint64_t vec = 0; vec < num_vectors; ++vec) {
    double w0 = 1.0;
    double w1 = 1.0;
    std::uint64_t rem = vec;
    for (std::size_t i = 0; i < n; ++i) {
      const Atom& a = inst.model.atoms[rem % m];
      w0 *= a.p0;
      w1 *= a.p1;
      rem /= m;
    }
    weight[vec] = {w0, w1};
  }

  // history[vec] identifies the vote history the vector has generated so
  // far; all vectors start in the empty history class 0.
  std::vector<std::uint32_t> history(num_vectors, 0);
  std::uint32_t num_histories = 1;

  std::unordered_map<std::uint64_t, StateMass> cells;
  std::unordered_map<std::uint64_t, int> cell_votes;
  std::unordered_map<std::uint64_t, std::uint32_t> interned;

  for (int t = 1; t <= inst.rounds; ++t) {
    // An agent's knowledge is its own atom plus the public history, so the
    // posterior cell is keyed by (history, agent, atom digit).
    cells.clear();
    for (std::uint64_t vec = 0; vec < num_vectors; ++vec) {
      std::uint64_t rem = vec;
      for (std::size_t i = 0; i < n; ++i) {
        const std::uint64_t key = (static_cast<std::uint64_t>(history[vec]) * n + i) * m + rem % m;
        StateMass& cell = cells[key];
        cell.s0 += weight[vec].s0;
        cell.s1 += weight[vec].s1;
        rem /= m;
      }
    }

    cell_votes.clear();
    for (const auto& [key, mass] : cells) {
      cell_votes[key] = mass.s1 > mass.s0 ? 1 : 0;
      const double margin = std::abs(mass.s1 / (mass.s0 + mass.s1) - 0.5);
      if (margin < table.min_posterior_margin) table.min_posterior_margin = margin;
    }

    interned.clear();
    std::uint32_t next_history = 0;
    for (std::uint64_t vec = 0; vec < num_vectors; ++vec) {
      std::uint32_t mask = 0;
      std::uint64_t rem = vec;
      for (std::size_t i = 0; i < n; ++i) {
        const std::uint64_t key = (static_cast<std::uint64_t>(history[vec]) * n + i) * m + rem % m;
        mask |= static_cast<std::uint32_t>(cell_votes[key]) << i;
        rem /= m;
      }
      table.votes[vec * static_cast<std::uint64_t>(inst.rounds) + (t - 1)] = mask;
      const std::uint64_t hist_key = (static_cast<std::uint64_t>(history[vec]) << 32) | mask;
      auto [it, inserted] = interned.emplace(hist_key, next_history);
      if (inserted) ++next_history;
      history[vec] = it->second;
    }
    num_histories = next_history;
  }
  (void)num_histories;

  return table;
}

EquivalenceReport check_equivalence(const DiscreteInstance& inst, TieRule engine_tie) {
  const VoteFunctionTable table = enumerate_vote_table(inst);
  const std::size_t n = inst.n_agents;
  const std::size_t m = inst.model.atoms.size();

  EquivalenceReport rep;
  rep.vectors = table.num_vectors;
  rep.min_posterior_margin = table.min_posterior_margin;

  std::vector<double> llrs(n);
  std::vector<int> votes(n);
  for (std::uint64_t vec = 0; vec < table.num_vectors; ++vec) {
    std::uint64_t rem = vec;
    for (std::size_t i = 0; i < n; ++i) {
      llrs[i] = llr(inst.model, static_cast<double>(rem % m));
      rem /= m;
    }
    SimulationState state = init_state(0, llrs);
    for (int t = 1; t <= inst.rounds; ++t) {
      for (std::size_t i = 0; i < n; ++i) {
        votes[i] = compute_vote(state.private_llrs[i], state.sum_of_interval_llrs,
                                state.bounds[i].interval_llr_cache, engine_tie);
        if (votes[i] != table.vote(vec, t, i)) {
          rep.match = false;
          rep.vector_index = vec;
          rep.round = t;
          rep.agent = i;
          return rep;
        }
      }
      update_bounds(inst.model, state.bounds, votes, state.sum_of_interval_llrs);
    }
  }
  rep.match = true;
  return rep;
}

DiscreteInstance random_instance(std::mt19937_64& rng, std::size_t n_agents,
                                 std::size_t max_atoms, int rounds, std::uint64_t id) {
  if (max_atoms < 2) throw std::invalid_argument("random_instance: need at least two atoms");
  std::uniform_int_distribution<std::size_t> m_dist(2, max_atoms);
  const std::size_t m = m_dist(rng);

  std::uniform_real_distribution<double> mass_dist(0.01, 1.0);
  auto draw_column = [&] {
    std::vector<double> col(m);
    for (;;) {
      double total = 0.0;
      for (double& p : col) {
        p = mass_dist(rng);
        total += p;
      }
      bool floored = true;
      for (double& p : col) {
        p /= total;
        if (p < 0.01) floored = false;
      }
      if (floored) return col;
    }
  };

  const std::vector<double> col0 = draw_column();
  const std::vector<double> col1 = draw_column();
  std::vector<Atom> atoms(m);
  for (std::size_t k = 0; k < m; ++k) {
    atoms[k] = Atom{"a" + std::to_string(k), col0[k], col1[k]};
  }

  DiscreteInstance inst;
  inst.model = make_discrete(std::move(atoms));
  inst.n_agents = n_agents;
  inst.rounds = rounds;
  inst.id = id;
  return inst;
}

VerifySummary run_verification(std::uint64_t instances, std::uint64_t seed, std::ostream& out) {
  VerifySummary summary;
  if (instances == 0) {
    out << "warning: no instances requested; nothing verified\n";
    return summary;
  }

  auto report_line = [&out](const DiscreteInstance& inst, const EquivalenceReport& rep) {
    out << "instance=" << inst.id << " vectors=" << rep.vectors << " rounds=" << inst.rounds
        << " result=";
    if (rep.match) {
      out << "MATCH";
    } else {
      out << "DIVERGE(" << rep.vector_index << ',' << rep.round << ',' << rep.agent << ')';
    }
    out << '\n';
  };

  const DiscreteInstance hiring{hiring_model(), 3, 5, 0};
  EquivalenceReport rep = check_equivalence(hiring);
  ++summary.checked;
  if (!rep.match) ++summary.diverged;
  report_line(hiring, rep);

  std::mt19937_64 rng(seed);
  for (std::uint64_t k = 1; k <= instances; ++k) {
    DiscreteInstance inst;
    int attempts = 0;
    for (;;) {
      inst = random_instance(rng, 3, 4, 5, k);
      rep = check_equivalence(inst);
      if (rep.min_posterior_margin >= kPosteriorTieBand || ++attempts >= 100) break;
      ++summary.regenerated;
    }
    ++summary.checked;
    if (!rep.match) ++summary.diverged;
    report_line(inst, rep);
  }
  return summary;
}

}  // namespace consensus
