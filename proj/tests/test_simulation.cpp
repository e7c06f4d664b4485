#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "bctcure/errors.hpp"
#include "bctcure/simulation.hpp"

using namespace bctcure;

namespace {

// Cure rate written out directly: (1 - alpha phi)^(1/alpha), exp(-e^eta) at alpha = 0.
double p0_oracle(double eta, double alpha) {
  if (alpha == 0.0) return std::exp(-std::exp(eta));
  const double phi = std::exp(eta) / (1.0 + alpha * std::exp(eta));
  return std::pow(1.0 - alpha * phi, 1.0 / alpha);
}

}  // namespace

TEST_CASE("true binary parameters match the reference values") {
  struct Row {
    double p01, p00, alpha, b0, b1;
  };
  const Row rows[] = {
      {0.40, 0.20, 0.5, 0.905, -0.755},  {0.40, 0.20, 0.75, 1.139, -0.864},
      {0.65, 0.35, 0.75, 0.468, -1.144}, {0.40, 0.20, 1.0, 1.386, -0.981}, {0.40, 0.20, 0.0, 0.476, -0.563},
      {0.65, 0.35, 0.0, 0.049, -0.891},
  };
  for (const auto& r : rows) {
    const BetaPair b = true_params_binary(r.p01, r.p00, r.alpha);
    CHECK(std::abs(b.beta0 - r.b0) <= 5e-4);
    CHECK(std::abs(b.beta1 - r.b1) <= 5e-4);
  }
  // The (0.65, 0.35, 0.5) row lists beta0 = 0.322; the exact value is
  // log{(1 - sqrt(0.35)) / (0.5 sqrt(0.35))} = 0.32253, so the reference digit
  // sits 5.3e-4 away. Check against the exact value instead.
  const BetaPair b = true_params_binary(0.65, 0.35, 0.5);
  CHECK(b.beta0 == doctest::Approx(std::log((1 - std::sqrt(0.35)) / (0.5 * std::sqrt(0.35)))).epsilon(1e-12));
  CHECK(std::abs(b.beta0 - 0.322) < 6e-4);
  CHECK(std::abs(b.beta1 + 1.055) <= 5e-4);
}

TEST_CASE("true continuous parameters") {
  BetaPair b = true_params_continuous(0.65, 0.05, 0.1, 20.0, 0.5);
  CHECK(std::abs(b.beta0 + 0.746) <= 5e-4);
  CHECK(std::abs(b.beta1 - 0.134) <= 5e-4);
  b = true_params_continuous(0.65, 0.05, 0.1, 20.0, 0.75);
  CHECK(std::abs(b.beta0 + 0.692) <= 5e-4);
  CHECK(std::abs(b.beta1 - 0.156) <= 5e-4);
  b = true_params_continuous(0.65, 0.05, 0.1, 20.0, 0.0);
  CHECK(b.beta1 == doctest::Approx((std::log(-std::log(0.05)) - std::log(-std::log(0.65))) / 19.9).epsilon(1e-12));
  CHECK(b.beta1 == doctest::Approx(0.0975).epsilon(1e-3));
}

TEST_CASE("true parameters round-trip through the cure rate") {
  for (double alpha : {0.0, 0.25, 0.5, 0.75, 1.0}) {
    const BetaPair b = true_params_binary(0.65, 0.35, alpha);
    CHECK(std::abs(p0_oracle(b.beta0 + b.beta1, alpha) - 0.65) < 1e-10);
    CHECK(std::abs(p0_oracle(b.beta0, alpha) - 0.35) < 1e-10);
    const BetaPair c = true_params_continuous(0.65, 0.05, 0.1, 20.0, alpha);
    CHECK(std::abs(p0_oracle(c.beta0 + 0.1 * c.beta1, alpha) - 0.65) < 1e-10);
    CHECK(std::abs(p0_oracle(c.beta0 + 20.0 * c.beta1, alpha) - 0.05) < 1e-10);
  }
  CHECK_THROWS(true_params_binary(1.2, 0.2, 0.5));
  CHECK_THROWS(true_params_binary(0.4, 0.2, 1.5));
}

TEST_CASE("susceptible time") {
  const WeibullParams g{0.316, 0.179};
  const double alpha = 0.5;
  const double eta = 0.905;
  const double phi = std::exp(eta) / (1.0 + alpha * std::exp(eta));
  const double p0 = std::pow(1.0 - alpha * phi, 1.0 / alpha);

  // Long-double oracle: S_p = p0 + (1 - p0) u*, then F = (1 - S_p^alpha) / (alpha phi), t = F^{-1}.
  const long double s = p0 + (1.0L - p0) * 0.5L;
  const long double F = (1.0L - std::pow(s, static_cast<long double>(alpha))) / (alpha * phi);
  const long double t = std::pow(-std::log1p(-F), 0.316L) / 0.179L;
  CHECK(susceptible_time(0.5, p0, phi, alpha, g) == doctest::Approx(static_cast<double>(t)).epsilon(1e-10));

  CHECK(susceptible_time(1.0 - 1e-12, p0, phi, alpha, g) < 1e-3);
  CHECK(susceptible_time(1e-12, p0, phi, alpha, g) > 15.0);
  CHECK(susceptible_time(1e-12, p0, phi, alpha, g) > susceptible_time(1e-6, p0, phi, alpha, g));

  const double p0_zero = std::exp(-std::exp(eta));
  const double F0 = -std::log(p0_zero + (1.0 - p0_zero) * 0.3) / std::exp(eta);
  CHECK(susceptible_time(0.3, p0_zero, std::exp(eta), 0.0, g) == doctest::Approx(weibull_quantile(F0, g)).epsilon(1e-10));
}

TEST_CASE("scenario validation") {
  BinaryScenario s;
  CHECK_NOTHROW(s.validate());
  s.p01 = 1.2;
  CHECK_THROWS(s.validate());
  s = {};
  s.c1 = 0.0;
  CHECK_THROWS(s.validate());
  ContinuousScenario c;
  CHECK_NOTHROW(c.validate());
  c.x_max = c.x_min;
  CHECK_THROWS(c.validate());
}

TEST_CASE("binary generator") {
  BinaryScenario s;
  const Dataset a = generate_binary(s, 42);
  REQUIRE(a.size() == 200);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a.records[i].x[0] == (i < 120 ? 1.0 : 0.0));
    CHECK(a.records[i].y >= 0.0);
  }
  const Dataset b = generate_binary(s, 42);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a.records[i].y == b.records[i].y);
    CHECK(a.records[i].delta == b.records[i].delta);
  }
  const Dataset other = generate_binary(s, 43);
  CHECK(other.records[0].y != a.records[0].y);

  SUBCASE("overwhelming censoring") {
    s.c1 = s.c2 = 1e9;
    const Dataset d = generate_binary(s, 1);
    for (const auto& r : d.records) {
      CHECK(r.delta == 0);
      CHECK(r.y < 1e-6);
    }
  }
}

TEST_CASE("binary generator cure fraction and censoring level") {
  BinaryScenario s;
  s.n1 = s.n2 = 20000;
  const Dataset d = generate_binary(s, 7);
  // Cured subjects are always censored, so P(delta = 0) >= p0 and the
  // expected censoring proportion from quadrature must match the sample.
  const auto [c1, c2] = censoring_rates(s);
  const ParameterVector truth = s.true_theta();
  for (int group = 0; group < 2; ++group) {
    const double x = group == 0 ? 1.0 : 0.0;
    std::size_t censored = 0;
    for (const auto& r : d.records) {
      if (r.x[0] == x && r.delta == 0) ++censored;
    }
    const double eta = truth.beta[0] + truth.beta[1] * x;
    const double phi = covariate_link(truth.alpha, eta);
    const double p0 = group == 0 ? s.p01 : s.p00;
    const double expected = expected_censoring_proportion(group == 0 ? c1 : c2, p0, phi, truth.alpha, truth.gamma);
    const double sd = std::sqrt(expected * (1 - expected) / 20000.0);
    CHECK(std::abs(censored / 20000.0 - expected) < 4 * sd);
    CHECK(expected > p0);
  }
}

TEST_CASE("censoring calibrated to a target proportion") {
  BinaryScenario s;
  s.censoring = CensoringMode::Proportion;
  s.c1 = 0.6;
  s.c2 = 0.5;
  s.n1 = s.n2 = 20000;
  const Dataset d = generate_binary(s, 11);
  double censored1 = 0;
  double censored2 = 0;
  for (const auto& r : d.records) (r.x[0] == 1.0 ? censored1 : censored2) += r.delta == 0;
  CHECK(std::abs(censored1 / 20000.0 - 0.6) < 4 * std::sqrt(0.24 / 20000.0));
  CHECK(std::abs(censored2 / 20000.0 - 0.5) < 4 * std::sqrt(0.25 / 20000.0));

  s.c1 = 0.3;  // below the cure fraction 0.4: unreachable
  CHECK_THROWS(censoring_rates(s));
}

TEST_CASE("continuous generator") {
  ContinuousScenario s;
  const ParameterVector truth = s.true_theta();
  const std::vector<double> xmax{s.x_max};
  CHECK(std::abs(cure_rate(xmax, truth) - s.p_low) < 1e-10);

  s.n = 100000;
  const Dataset d = generate_continuous(s, 5);
  REQUIRE(d.size() == s.n);
  double sum = 0.0;
  double sum_sq = 0.0;
  for (const auto& r : d.records) {
    CHECK(r.x[0] >= s.x_min);
    CHECK(r.x[0] <= s.x_max);
    const double p = cure_rate(r.x, truth);
    sum += p;
    sum_sq += p * p;
  }
  const double mean = sum / s.n;
  const double se = std::sqrt((sum_sq / s.n - mean * mean) / s.n);
  // Simpson quadrature of p0(x) over the covariate range.
  const int m = 2000;
  const double h = (s.x_max - s.x_min) / m;
  double integral = 0.0;
  for (int i = 0; i <= m; ++i) {
    const double w = (i == 0 || i == m) ? 1.0 : (i % 2 ? 4.0 : 2.0);
    integral += w * p0_oracle(truth.beta[0] + truth.beta[1] * (s.x_min + i * h), truth.alpha);
  }
  integral *= h / 3.0 / (s.x_max - s.x_min);
  CHECK(std::abs(mean - integral) < 3 * se);
}

TEST_CASE("flat covariate effect") {
  // Equal cure proportions give beta1 = 0; the continuous scenario requires
  // p_low < p_high, so the generator side is checked on the binary scenario.
  const BetaPair b = true_params_continuous(0.3, 0.3, 0.1, 20.0, 0.5);
  CHECK(std::abs(b.beta1) < 1e-14);
  BinaryScenario s;
  s.p01 = s.p00 = 0.3;
  s.n1 = s.n2 = 20000;
  s.c1 = s.c2 = 1e-12;  // no censoring of susceptibles in practice
  const Dataset d = generate_binary(s, 3);
  CHECK(std::abs(d.censoring_fraction() - 0.3) < 3 * std::sqrt(0.21 / 40000.0));
}

TEST_CASE("Monte-Carlo harness plumbing") {
  const Scenario scenario = BinaryScenario{};
  McOptions options;
  options.replications = 4;
  options.mode = FitMode::Oracle;
  options.survival_targets = {{2.0, {1.0}}};
  const McReport oracle = monte_carlo_study(scenario, options);
  CHECK(oracle.completed == 4);
  for (const auto& q : oracle.parameters) {
    CHECK(q.bias == 0.0);
    CHECK(q.rmse == 0.0);
    CHECK(q.mean_abs_error == 0.0);
  }
  for (const auto& q : oracle.derived) CHECK(q.rmse == 0.0);
  CHECK(oracle.quantity("cure[x=1]").true_value == doctest::Approx(0.40).epsilon(1e-10));
  CHECK(oracle.quantity("S_p[y=2,x=1]").true_value > 0.40);

  options.mode = FitMode::Sqh;
  options.replications = 1;
  const McReport single = monte_carlo_study(scenario, options);
  REQUIRE(single.completed == 1);
  for (const auto& q : single.parameters) {
    CHECK(q.rmse == doctest::Approx(q.bias).epsilon(1e-12));
    CHECK(q.mean_abs_error == doctest::Approx(q.bias).epsilon(1e-12));
  }
}

TEST_CASE("Monte-Carlo determinism across worker counts") {
  const Scenario scenario = BinaryScenario{};
  McOptions options;
  options.replications = 6;
  options.seed = 99;
  options.init = InitStrategy::KaplanMeier;
  options.workers = 1;
  const McReport serial = monte_carlo_study(scenario, options);
  options.workers = 3;
  const McReport parallel = monte_carlo_study(scenario, options);
  CHECK(serial.estimates == parallel.estimates);
  CHECK(serial.completed_indices == parallel.completed_indices);
  const McReport repeat = monte_carlo_study(scenario, options);
  CHECK(repeat.estimates == parallel.estimates);
  for (std::size_t j = 0; j < serial.parameters.size(); ++j) CHECK(serial.parameters[j].rmse == parallel.parameters[j].rmse);
}

TEST_CASE("perturbed-truth starts stay inside the box") {
  const Scenario scenario = ContinuousScenario{};
  McOptions options;
  options.replications = 3;
  options.init = InitStrategy::PerturbedTruth;
  options.perturbation = 0.9;
  const McReport r = monte_carlo_study(scenario, options);
  const AdmissibleBox box = AdmissibleBox::for_bct(2);
  for (const auto& e : r.estimates) CHECK(box.contains(e));
  CHECK(r.quantity("cure[x=0.1]").true_value == doctest::Approx(0.65).epsilon(1e-10));
}
