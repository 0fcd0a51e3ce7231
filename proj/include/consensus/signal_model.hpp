#pragma once

// Conditional signal models for the repeated-voting simulator. A binary world
// state selects one of two signal distributions; every downstream computation
// reduces to the log-likelihood ratio (llr) of what an agent has observed.
// Two families are supported: Gaussian location shifts with a shared sd, and
// finite discrete tables.

#include <cstddef>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace consensus {

// A replayed vote history conditioned the model on an impossible event.
class InconsistentHistoryError : public std::runtime_error {
 public:
  explicit InconsistentHistoryError(const std::string& what)
      : std::runtime_error(what) {}
};

// ---- model ------------------------------------------------------------

enum class ModelKind { gaussian, discrete };

struct Atom {
  std::string label;
  double p0 = 0.0;  // mass under state 0
  double p1 = 0.0;  // mass under state 1
};

// For discrete models a "signal" is the atom index carried in a double;
// Gaussian signals are the raw observation.
struct SignalModel {
  ModelKind kind = ModelKind::gaussian;
  double mean0 = -1.0;
  double mean1 = 1.0;
  double sd = 1.0;
  std::vector<Atom> atoms;
};

SignalModel make_gaussian(double mean0, double mean1, double sd);

// Atom masses must be positive and sum to 1 under each state (tolerance 1e-12).
SignalModel make_discrete(std::vector<Atom> atoms);

// Built-in worked example: a committee screening a candidate. A favorable
// impression has probability 0.9 for a good candidate and 0.6 for a bad one.
SignalModel hiring_model();

// Round-trips through the config parser's model syntax.
std::string model_to_string(const SignalModel& m);

// ---- llr statistic ----------------------------------------------------

// log dmu1/dmu0 at a signal. Throws std::domain_error when a discrete signal
// is not an atom index.
double llr(const SignalModel& m, double signal);

// Distributions of the llr statistic under each state. Gaussian interval
// masses are taken on the smaller tail so deep-tail intervals keep relative
// accuracy.
class LlrDistributions {
 public:
  explicit LlrDistributions(const SignalModel& m);

  // P(X <= x | S=state)
  double cdf(int state, double x) const;
  // P(a < X <= b | S=state)
  double interval_mass(int state, double a, double b) const;

  // Sorted distinct llr values with their masses (discrete models only).
  const std::vector<double>& support() const { return support_; }
  double support_mass(int state, std::size_t k) const { return mass_[state][k]; }

 private:
  ModelKind kind_;
  double mean_[2] = {0.0, 0.0};
  double sd_ = 1.0;
  std::vector<double> support_;
  std::vector<double> mass_[2];
};

// llr of the event {a < X <= b}, i.e. the log ratio of the interval masses.
// The true value always lies in (a, b] and the result is clamped there.
// When both masses underflow (below 1e-300) the midpoint of the interval
// clamped to finite range is returned; Gaussian models never throw here. A
// discrete interval with exactly zero mass is an impossible conditioning
// event and raises InconsistentHistoryError.
double interval_llr(const SignalModel& m, double a, double b);

// ---- sampling and diagnostics ------------------------------------------

double sample_signal(const SignalModel& m, int state, std::mt19937_64& rng);

struct ModelDiagnostics {
  bool ok = true;
  std::vector<std::string> violations;
  // E[exp(-X) | S=1]; equals 1 for any pair of mutually absolutely
  // continuous signal distributions. Quadrature for Gaussian models, exact
  // summation for discrete ones. NaN when violations prevent computing it.
  double exp_neg_llr_given_s1 = std::numeric_limits<double>::quiet_NaN();
};

ModelDiagnostics validate_model(const SignalModel& m);

}  // namespace consensus
