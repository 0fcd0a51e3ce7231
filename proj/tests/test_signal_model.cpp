#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>
#include <set>
#include <vector>

#include "consensus/signal_model.hpp"

using namespace consensus;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kLn15 = 0.4054651081081644;    // log(0.9 / 0.6)
constexpr double kLn025 = -1.3862943611198906;  // log(0.1 / 0.4)
constexpr double kPhi1 = 0.8413447460685429;    // standard normal cdf at 1
constexpr double kHalfLineLlr = 1.668267865986; // x(0, inf) for the unit-shift model

}  // namespace

TEST_SUITE("signal_model") {

TEST_CASE("unit shift gaussian llr is twice the signal") {
  const SignalModel m = make_gaussian(-1.0, 1.0, 1.0);
  CHECK(llr(m, 0.0) == 0.0);
  CHECK(llr(m, 0.5) == doctest::Approx(1.0).epsilon(1e-12));
  for (double w : {-2.3, -0.7, 0.9, 3.1}) {
    const double direct =
        -0.5 * (w - 1.0) * (w - 1.0) + 0.5 * (w + 1.0) * (w + 1.0);
    CHECK(llr(m, w) == doctest::Approx(direct).epsilon(1e-12));
    CHECK(llr(m, w) == doctest::Approx(2.0 * w).epsilon(1e-12));
  }
}

TEST_CASE("asymmetric gaussian llr matches the density ratio") {
  const SignalModel m = make_gaussian(0.3, 2.7, 1.7);
  for (double w : {-3.0, 0.3, 1.6, 4.2}) {
    const double z1 = (w - 2.7) / 1.7;
    const double z0 = (w - 0.3) / 1.7;
    const double direct = -0.5 * z1 * z1 + 0.5 * z0 * z0;
    CHECK(llr(m, w) == doctest::Approx(direct).epsilon(1e-9));
  }
}

TEST_CASE("hiring atoms carry the expected llrs") {
  const SignalModel m = hiring_model();
  CHECK(llr(m, 0.0) == doctest::Approx(kLn15).epsilon(1e-12));
  CHECK(llr(m, 1.0) == doctest::Approx(kLn025).epsilon(1e-12));
  CHECK_THROWS_AS(llr(m, 0.5), std::domain_error);
  CHECK_THROWS_AS(llr(m, 2.0), std::domain_error);
  CHECK_THROWS_AS(llr(m, -1.0), std::domain_error);
}

TEST_CASE("interval llr identities") {
  const SignalModel m = make_gaussian(-1.0, 1.0, 1.0);
  CHECK(interval_llr(m, -kInf, kInf) == 0.0);
  CHECK(interval_llr(m, 0.0, kInf) == doctest::Approx(kHalfLineLlr).epsilon(1e-9));
  CHECK(interval_llr(m, -kInf, 0.0) == doctest::Approx(-kHalfLineLlr).epsilon(1e-9));

  const SignalModel h = hiring_model();
  CHECK(interval_llr(h, -kInf, kInf) == 0.0);
  // intervals isolating one atom collapse to that atom's llr
  CHECK(interval_llr(h, 0.0, kInf) == doctest::Approx(kLn15).epsilon(1e-12));
  CHECK(interval_llr(h, 0.0, 1.0) == doctest::Approx(kLn15).epsilon(1e-12));
  CHECK(interval_llr(h, -kInf, 0.0) == doctest::Approx(kLn025).epsilon(1e-12));

  CHECK_THROWS_AS(interval_llr(h, 2.0, 3.0), InconsistentHistoryError);
  CHECK_THROWS_AS(interval_llr(m, 1.0, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(interval_llr(m, std::nan(""), 1.0), std::invalid_argument);
}

TEST_CASE("deep tail intervals stay contained and finite") {
  const SignalModel m = make_gaussian(-1.0, 1.0, 1.0);

  double x = interval_llr(m, 500.0, 600.0);
  CHECK(x > 500.0);
  CHECK(x <= 600.0);

  x = interval_llr(m, 500.0, kInf);
  CHECK(x > 500.0);
  CHECK(std::isfinite(x));

  x = interval_llr(m, -kInf, -500.0);
  CHECK(x <= -500.0);
  CHECK(std::isfinite(x));

  // state-0 mass underflows to zero here while state-1 mass survives
  x = interval_llr(m, 76.0, kInf);
  CHECK(x > 76.0);
  CHECK(std::isfinite(x));

  x = interval_llr(m, 76.0, 78.0);
  CHECK(x > 76.0);
  CHECK(x <= 78.0);
}

TEST_CASE("interval llr containment and endpoint monotonicity under fuzz") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> point(-30.0, 30.0);
  const SignalModel models[] = {make_gaussian(-1.0, 1.0, 1.0),
                                make_gaussian(0.3, 2.7, 1.7)};
  for (const SignalModel& m : models) {
    for (int k = 0; k < 2000; ++k) {
      double a = point(rng);
      double b = point(rng);
      if (a > b) std::swap(a, b);
      if (a == b) continue;
      const double x = interval_llr(m, a, b);
      CHECK(x > a);
      CHECK(x <= b);
      CHECK(interval_llr(m, a, b + 0.75) >= x - 1e-9);
      CHECK(interval_llr(m, a - 0.75, b) <= x + 1e-9);
    }
  }
}

TEST_CASE("interval llr equals the log conditional expectation of exp(llr)") {
  const SignalModel m = make_gaussian(-1.0, 1.0, 1.0);
  const double a = -0.5;
  const double b = 2.0;
  const double x = interval_llr(m, a, b);

  std::mt19937_64 rng(11);
  double sum = 0.0;
  double sumsq = 0.0;
  long count = 0;
  for (long k = 0; k < 2'000'000; ++k) {
    const double w = llr(m, sample_signal(m, 0, rng));
    if (w > a && w <= b) {
      const double e = std::exp(w);
      sum += e;
      sumsq += e * e;
      ++count;
    }
  }
  REQUIRE(count > 100'000);
  const double mean = sum / static_cast<double>(count);
  const double var =
      (sumsq / static_cast<double>(count) - mean * mean) / static_cast<double>(count);
  CHECK(std::abs(std::exp(x) - mean) <= 3.0 * std::sqrt(var) + 1e-12);
}

TEST_CASE("left tail of the llr under state 1 obeys the exponential bound") {
  const SignalModel m = make_gaussian(-1.0, 1.0, 1.0);
  std::mt19937_64 rng(13);
  const int trials = 1'000'000;
  int below[3] = {0, 0, 0};
  for (int k = 0; k < trials; ++k) {
    const double x = llr(m, sample_signal(m, 1, rng));
    for (int c = 1; c <= 3; ++c) {
      if (x < -c) ++below[c - 1];
    }
  }
  for (int c = 1; c <= 3; ++c) {
    const double rate = below[c - 1] / static_cast<double>(trials);
    CHECK(rate < std::exp(-static_cast<double>(c)));
  }

  // the discrete case is exact: only the unfavorable atom sits below -1
  const LlrDistributions h(hiring_model());
  CHECK(h.cdf(1, -1.0) == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(0.1 < std::exp(-1.0));
  CHECK(h.cdf(1, -2.0) == 0.0);
}

TEST_CASE("swapping the states negates llrs") {
  const SignalModel m = make_gaussian(0.3, 2.7, 1.7);
  const SignalModel swapped = make_gaussian(2.7, 0.3, 1.7);
  std::mt19937_64 rng(15);
  std::uniform_real_distribution<double> point(-20.0, 20.0);
  for (int k = 0; k < 500; ++k) {
    const double w = point(rng);
    CHECK(llr(swapped, w) == doctest::Approx(-llr(m, w)).epsilon(1e-9));
  }
  for (int k = 0; k < 500; ++k) {
    double a = point(rng);
    double b = point(rng);
    if (a > b) std::swap(a, b);
    if (a == b) continue;
    CHECK(interval_llr(swapped, -b, -a) ==
          doctest::Approx(-interval_llr(m, a, b)).epsilon(1e-9));
  }

  const SignalModel hs = make_discrete(
      {{"favorable", 0.9, 0.6}, {"unfavorable", 0.1, 0.4}});
  CHECK(llr(hs, 0.0) == doctest::Approx(-kLn15).epsilon(1e-12));
  CHECK(llr(hs, 1.0) == doctest::Approx(-kLn025).epsilon(1e-12));
}

TEST_CASE("llr distributions expose sorted support and consistent masses") {
  const LlrDistributions d(hiring_model());
  REQUIRE(d.support().size() == 2);
  CHECK(d.support()[0] == doctest::Approx(kLn025).epsilon(1e-12));
  CHECK(d.support()[1] == doctest::Approx(kLn15).epsilon(1e-12));
  CHECK(d.support_mass(0, 0) == doctest::Approx(0.4).epsilon(1e-15));
  CHECK(d.support_mass(1, 0) == doctest::Approx(0.1).epsilon(1e-15));
  CHECK(d.support_mass(0, 1) == doctest::Approx(0.6).epsilon(1e-15));
  CHECK(d.support_mass(1, 1) == doctest::Approx(0.9).epsilon(1e-15));
  CHECK(d.cdf(0, 0.0) == doctest::Approx(0.4).epsilon(1e-15));
  CHECK(d.cdf(0, kInf) == doctest::Approx(1.0).epsilon(1e-15));

  // atoms sharing one llr value are grouped, and each group's mass ratio
  // reproduces that value
  const SignalModel grouped = make_discrete(
      {{"a", 0.2, 0.1}, {"b", 0.4, 0.2}, {"c", 0.4, 0.7}});
  const LlrDistributions g(grouped);
  REQUIRE(g.support().size() == 2);
  for (std::size_t k = 0; k < g.support().size(); ++k) {
    CHECK(std::log(g.support_mass(1, k) / g.support_mass(0, k)) ==
          doctest::Approx(g.support()[k]).epsilon(1e-9));
  }

  const LlrDistributions gauss(make_gaussian(-1.0, 1.0, 1.0));
  CHECK(gauss.cdf(1, 0.0) == doctest::Approx(1.0 - kPhi1).epsilon(1e-12));
  CHECK(gauss.interval_mass(1, 0.0, kInf) == doctest::Approx(kPhi1).epsilon(1e-12));
  CHECK(gauss.interval_mass(0, 0.0, kInf) ==
        doctest::Approx(1.0 - kPhi1).epsilon(1e-12));
}

TEST_CASE("sampling is deterministic and matches the model laws") {
  const SignalModel m = make_gaussian(-1.0, 1.0, 1.0);
  std::mt19937_64 r1(101);
  std::mt19937_64 r2(101);
  for (int k = 0; k < 100; ++k) {
    CHECK(sample_signal(m, 1, r1) == sample_signal(m, 1, r2));
  }

  std::mt19937_64 rng(103);
  const int draws = 1'000'000;
  double sum = 0.0;
  for (int k = 0; k < draws; ++k) sum += sample_signal(m, 1, rng);
  CHECK(std::abs(sum / draws - 1.0) < 0.01);

  const SignalModel h = hiring_model();
  int favorable = 0;
  for (int k = 0; k < draws; ++k) {
    const double s = sample_signal(h, 0, rng);
    REQUIRE((s == 0.0 || s == 1.0));
    if (s == 0.0) ++favorable;
  }
  const double p = favorable / static_cast<double>(draws);
  CHECK(std::abs(p - 0.6) < 3.0 * std::sqrt(0.6 * 0.4 / draws));

  CHECK_THROWS_AS(sample_signal(m, 2, rng), std::invalid_argument);
}

TEST_CASE("factories reject malformed models") {
  CHECK_THROWS_AS(make_gaussian(-1.0, 1.0, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(make_gaussian(-1.0, 1.0, -2.0), std::invalid_argument);
  CHECK_THROWS_AS(make_gaussian(std::nan(""), 1.0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(make_discrete({}), std::invalid_argument);
  CHECK_THROWS_AS(make_discrete({{"a", 0.5, 0.5}, {"b", 0.6, 0.5}}),
                  std::invalid_argument);
  CHECK_THROWS_AS(make_discrete({{"a", 1.0, 0.0}, {"b", 0.0, 1.0}}),
                  std::invalid_argument);
}

TEST_CASE("validate_model confirms the exp(-llr) identity") {
  const ModelDiagnostics g = validate_model(make_gaussian(-1.0, 1.0, 1.0));
  CHECK(g.ok);
  CHECK(g.violations.empty());
  CHECK(std::abs(g.exp_neg_llr_given_s1 - 1.0) <= 1e-6);

  const ModelDiagnostics a = validate_model(make_gaussian(0.3, 2.7, 1.7));
  CHECK(a.ok);
  CHECK(std::abs(a.exp_neg_llr_given_s1 - 1.0) <= 1e-6);

  const ModelDiagnostics h = validate_model(hiring_model());
  CHECK(h.ok);
  CHECK(std::abs(h.exp_neg_llr_given_s1 - 1.0) <= 1e-12);
}

TEST_CASE("validate_model reports violations") {
  SignalModel bad;
  bad.kind = ModelKind::discrete;
  bad.atoms = {{"a", 0.5, 0.5}, {"b", 0.4, 0.5}};  // state-0 masses sum to 0.9
  const ModelDiagnostics d = validate_model(bad);
  CHECK(!d.ok);
  CHECK(!d.violations.empty());

  SignalModel degenerate;
  degenerate.kind = ModelKind::gaussian;
  degenerate.mean0 = 1.0;
  degenerate.mean1 = 1.0;
  degenerate.sd = 1.0;
  CHECK(!validate_model(degenerate).ok);

  SignalModel nonpositive;
  nonpositive.kind = ModelKind::discrete;
  nonpositive.atoms = {{"a", 1.0, 0.0}, {"b", 0.0, 1.0}};
  CHECK(!validate_model(nonpositive).ok);

  SignalModel lone;
  lone.kind = ModelKind::discrete;
  lone.atoms = {{"a", 1.0, 1.0}};
  CHECK(!validate_model(lone).ok);
}

}  // TEST_SUITE("signal_model")
