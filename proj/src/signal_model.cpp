#include "consensus/signal_model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <numbers>
#include <utility>

namespace consensus {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kMassUnderflow = 1e-300;
// Midpoint fallback clamps infinite endpoints to half of DBL_MAX so the
// average stays finite.
constexpr double kFiniteClamp = 8.988465674311579e307;

double norm_cdf(double z) {
  if (z == -kInf) return 0.0;
  if (z == kInf) return 1.0;
  return 0.5 * std::erfc(-z * kInvSqrt2);
}

double norm_sf(double z) {
  if (z == -kInf) return 1.0;
  if (z == kInf) return 0.0;
  return 0.5 * std::erfc(z * kInvSqrt2);
}

// The llr of a Gaussian shift model is itself Gaussian under either state:
// x(w) = slope * w + icept.
struct GaussianLlr {
  double slope;
  double icept;
  double mean[2];
  double sd;
};

GaussianLlr gaussian_llr_params(const SignalModel& m) {
  GaussianLlr g{};
  const double v = m.sd * m.sd;
  g.slope = (m.mean1 - m.mean0) / v;
  g.icept = (m.mean0 * m.mean0 - m.mean1 * m.mean1) / (2.0 * v);
  g.mean[0] = g.slope * m.mean0 + g.icept;
  g.mean[1] = g.slope * m.mean1 + g.icept;
  g.sd = std::abs(g.slope) * m.sd;
  return g;
}

// P(a < N(mean, sd^2) <= b), evaluated on whichever tail is smaller.
double gaussian_interval_mass(double mean, double sd, double a, double b) {
  const double za = (a == -kInf) ? -kInf : (a - mean) / sd;
  const double zb = (b == kInf) ? kInf : (b - mean) / sd;
  if (za >= 0.0) return norm_sf(za) - norm_sf(zb);
  return norm_cdf(zb) - norm_cdf(za);
}

double atom_llr(const Atom& a) { return std::log(a.p1 / a.p0); }

double clamped_midpoint(double a, double b) {
  const double lo = std::max(a, -kFiniteClamp);
  const double hi = std::min(b, kFiniteClamp);
  return 0.5 * lo + 0.5 * hi;
}

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

// ---- construction -------------------------------------------------------

SignalModel make_gaussian(double mean0, double mean1, double sd) {
  if (!(sd > 0.0) || !std::isfinite(sd)) {
    throw std::invalid_argument("gaussian model: sd must be positive and finite");
  }
  if (!std::isfinite(mean0) || !std::isfinite(mean1)) {
    throw std::invalid_argument("gaussian model: means must be finite");
  }
  SignalModel m;
  m.kind = ModelKind::gaussian;
  m.mean0 = mean0;
  m.mean1 = mean1;
  m.sd = sd;
  return m;
}

SignalModel make_discrete(std::vector<Atom> atoms) {
  if (atoms.empty()) {
    throw std::invalid_argument("discrete model: needs at least one atom");
  }
  double s0 = 0.0;
  double s1 = 0.0;
  for (const Atom& a : atoms) {
    if (!(a.p0 > 0.0) || !(a.p1 > 0.0)) {
      throw std::invalid_argument("discrete model: atom '" + a.label +
                                  "' must have positive mass under both states");
    }
    s0 += a.p0;
    s1 += a.p1;
  }
  if (std::abs(s0 - 1.0) > 1e-12 || std::abs(s1 - 1.0) > 1e-12) {
    throw std::invalid_argument("discrete model: atom masses must sum to 1 under each state");
  }
  SignalModel m;
  m.kind = ModelKind::discrete;
  m.atoms = std::move(atoms);
  return m;
}

SignalModel hiring_model() {
  return make_discrete({{"favorable", 0.6, 0.9}, {"unfavorable", 0.4, 0.1}});
}

std::string model_to_string(const SignalModel& m) {
  if (m.kind == ModelKind::gaussian) {
    return "gaussian mean0=" + fmt_double(m.mean0) + " mean1=" + fmt_double(m.mean1) +
           " sd=" + fmt_double(m.sd);
  }
  std::string out = "discrete atoms=[";
  for (std::size_t k = 0; k < m.atoms.size(); ++k) {
    if (k > 0) out += ',';
    out += '(' + m.atoms[k].label + ',' + fmt_double(m.atoms[k].p0) + ',' +
           fmt_double(m.atoms[k].p1) + ')';
  }
  return out + ']';
}

// ---- llr statistic ------------------------------------------------------

double llr(const SignalModel& m, double signal) {
  if (m.kind == ModelKind::gaussian) {
    const GaussianLlr g = gaussian_llr_params(m);
    return g.slope * signal + g.icept;
  }
  const double idx = std::floor(signal);
  if (idx != signal || idx < 0.0 || idx >= static_cast<double>(m.atoms.size())) {
    throw std::domain_error("llr: signal is not an atom index of the discrete model");
  }
  return atom_llr(m.atoms[static_cast<std::size_t>(idx)]);
}

LlrDistributions::LlrDistributions(const SignalModel& m) : kind_(m.kind) {
  if (kind_ == ModelKind::gaussian) {
    const GaussianLlr g = gaussian_llr_params(m);
    mean_[0] = g.mean[0];
    mean_[1] = g.mean[1];
    sd_ = g.sd;
    return;
  }
  std::map<double, std::pair<double, double>> grouped;
  for (const Atom& a : m.atoms) {
    auto& cell = grouped[atom_llr(a)];
    cell.first += a.p0;
    cell.second += a.p1;
  }
  for (const auto& [x, masses] : grouped) {
    support_.push_back(x);
    mass_[0].push_back(masses.first);
    mass_[1].push_back(masses.second);
  }
}

double LlrDistributions::cdf(int state, double x) const {
  if (kind_ == ModelKind::gaussian) {
    if (sd_ == 0.0) return x >= mean_[state] ? 1.0 : 0.0;
    return norm_cdf((x - mean_[state]) / sd_);
  }
  double total = 0.0;
  for (std::size_t k = 0; k < support_.size() && support_[k] <= x; ++k) {
    total += mass_[state][k];
  }
  return total;
}

double LlrDistributions::interval_mass(int state, double a, double b) const {
  if (kind_ == ModelKind::gaussian) {
    if (sd_ == 0.0) return (a < mean_[state] && mean_[state] <= b) ? 1.0 : 0.0;
    return gaussian_interval_mass(mean_[state], sd_, a, b);
  }
  double total = 0.0;
  for (std::size_t k = 0; k < support_.size(); ++k) {
    if (support_[k] > a && support_[k] <= b) total += mass_[state][k];
  }
  return total;
}

double interval_llr(const SignalModel& m, double a, double b) {
  if (!(a <= b)) {
    throw std::invalid_argument("interval_llr: interval endpoints out of order");
  }
  if (a == -kInf && b == kInf) return 0.0;

  double m0;
  double m1;
  if (m.kind == ModelKind::gaussian) {
    const GaussianLlr g = gaussian_llr_params(m);
    m0 = gaussian_interval_mass(g.mean[0], g.sd, a, b);
    m1 = gaussian_interval_mass(g.mean[1], g.sd, a, b);
    if (m0 < kMassUnderflow && m1 < kMassUnderflow) {
      const double mid = clamped_midpoint(a, b);
      return mid > a ? mid : b;
    }
  } else {
    m0 = 0.0;
    m1 = 0.0;
    for (const Atom& atom : m.atoms) {
      const double x = atom_llr(atom);
      if (x > a && x <= b) {
        m0 += atom.p0;
        m1 += atom.p1;
      }
    }
    if (m0 <= 0.0 || m1 <= 0.0) {
      throw InconsistentHistoryError("interval_llr: conditioning interval has zero mass");
    }
  }

  double x = std::log(m1 / m0);
  if (!(x <= b)) x = b;
  if (x == kInf) x = clamped_midpoint(a, b);
  if (!(x > a)) {
    const double mid = clamped_midpoint(a, b);
    x = mid > a ? mid : b;
  }
  return x;
}

// ---- sampling and diagnostics --------------------------------------------

double sample_signal(const SignalModel& m, int state, std::mt19937_64& rng) {
  if (state != 0 && state != 1) {
    throw std::invalid_argument("sample_signal: state must be 0 or 1");
  }
  if (m.kind == ModelKind::gaussian) {
    std::normal_distribution<double> dist(state == 1 ? m.mean1 : m.mean0, m.sd);
    return dist(rng);
  }
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double u = unit(rng);
  double cum = 0.0;
  for (std::size_t k = 0; k < m.atoms.size(); ++k) {
    cum += state == 1 ? m.atoms[k].p1 : m.atoms[k].p0;
    if (u < cum) return static_cast<double>(k);
  }
  return static_cast<double>(m.atoms.size() - 1);
}

namespace {

// E[exp(-X) | S=1] for X ~ N(mu, s^2) by composite Simpson. The integrand is
// a Gaussian bump centered at mu - s^2.
double exp_neg_llr_gaussian(double mu, double s) {
  if (s == 0.0) return std::exp(-mu);
  const double center = mu - s * s;
  const double lo = center - 14.0 * s;
  const double hi = center + 14.0 * s;
  const int intervals = 4096;
  const double h = (hi - lo) / intervals;
  auto f = [&](double x) {
    const double z = (x - mu) / s;
    return std::exp(-x) * std::exp(-0.5 * z * z) / (s * std::sqrt(2.0 * std::numbers::pi));
  };
  double acc = f(lo) + f(hi);
  for (int k = 1; k < intervals; ++k) {
    acc += f(lo + k * h) * (k % 2 == 1 ? 4.0 : 2.0);
  }
  return acc * h / 3.0;
}

}  // namespace

ModelDiagnostics validate_model(const SignalModel& m) {
  ModelDiagnostics d;
  auto flag = [&](std::string v) { d.violations.push_back(std::move(v)); };

  if (m.kind == ModelKind::gaussian) {
    if (!(m.sd > 0.0) || !std::isfinite(m.sd)) flag("sd must be positive and finite");
    if (m.mean0 == m.mean1) flag("states share one signal distribution; llr is identically zero");
    if (d.violations.empty()) {
      const GaussianLlr g = gaussian_llr_params(m);
      d.exp_neg_llr_given_s1 = exp_neg_llr_gaussian(g.mean[1], g.sd);
      if (std::abs(d.exp_neg_llr_given_s1 - 1.0) > 1e-6) {
        flag("E[exp(-llr) | state 1] deviates from 1: " + fmt_double(d.exp_neg_llr_given_s1));
      }
    }
  } else {
    if (m.atoms.size() < 2) flag("discrete model needs at least two atoms");
    double s0 = 0.0;
    double s1 = 0.0;
    bool positive = true;
    for (const Atom& a : m.atoms) {
      if (!(a.p0 > 0.0) || !(a.p1 > 0.0)) {
        flag("atom '" + a.label + "' has nonpositive mass");
        positive = false;
      }
      s0 += a.p0;
      s1 += a.p1;
    }
    if (std::abs(s0 - 1.0) > 1e-12) flag("state-0 masses sum to " + fmt_double(s0));
    if (std::abs(s1 - 1.0) > 1e-12) flag("state-1 masses sum to " + fmt_double(s1));
    if (positive) {
      double e = 0.0;
      for (const Atom& a : m.atoms) e += a.p1 * std::exp(-atom_llr(a));
      d.exp_neg_llr_given_s1 = e;
      if (std::abs(e - 1.0) > 1e-12) {
        flag("E[exp(-llr) | state 1] deviates from 1: " + fmt_double(e));
      }
      // Grouping atoms by their exact llr value must reproduce that value as
      // the log mass ratio of the group.
      const LlrDistributions dist(m);
      for (std::size_t k = 0; k < dist.support().size(); ++k) {
        const double x = dist.support()[k];
        const double ratio = std::log(dist.support_mass(1, k) / dist.support_mass(0, k));
        if (std::abs(ratio - x) > 1e-9) {
          flag("llr value " + fmt_double(x) + " inconsistent with its mass ratio " +
               fmt_double(ratio));
        }
      }
    }
  }

  d.ok = d.violations.empty();
  return d;
}

}  // namespace consensus
