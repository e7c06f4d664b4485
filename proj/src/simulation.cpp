#include "bctcure/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>
#include <type_traits>

#include "bctcure/errors.hpp"

namespace bctcure {

namespace {

void check_proportion(double p, const char* name) {
  if (!(p > 0.0 && p < 1.0)) throw DomainError(std::string(name) + " must lie strictly inside (0, 1)");
}

void check_alpha(double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw DomainError("alpha must lie in [0, 1]");
}

// E[exp(-rate T)] for a susceptible lifetime T, midpoint rule on its quantile function.
double susceptible_laplace(double rate, double p0, double phi, double alpha, const WeibullParams& gamma,
                           std::size_t points) {
  double s = 0.0;
  for (std::size_t k = 0; k < points; ++k) {
    const double u = (static_cast<double>(k) + 0.5) / static_cast<double>(points);
    s += std::exp(-rate * susceptible_time(u, p0, phi, alpha, gamma));
  }
  return s / static_cast<double>(points);
}

template <typename ProportionAt>
double solve_rate(double target, ProportionAt&& proportion_at) {
  double lo = std::log(1e-10);
  double hi = std::log(1e10);
  if (!(proportion_at(std::exp(lo)) < target && proportion_at(std::exp(hi)) > target)) {
    throw DomainError("censoring proportion target is not attainable with an exponential censoring rate");
  }
  for (int it = 0; it < 200 && hi - lo > 1e-12; ++it) {
    const double mid = 0.5 * (lo + hi);
    (proportion_at(std::exp(mid)) < target ? lo : hi) = mid;
  }
  return std::exp(0.5 * (lo + hi));
}

Observation draw_subject(double p0, double phi, double alpha, const WeibullParams& gamma, double rate,
                         std::vector<double> x, RandomStream& stream) {
  Observation obs;
  obs.x = std::move(x);
  const double u = stream.uniform();
  const double c = stream.exponential(rate);
  if (u <= p0) {
    obs.y = c;
    obs.delta = 0;
    return obs;
  }
  const double t = susceptible_time(stream.uniform(), p0, phi, alpha, gamma);
  obs.y = std::min(t, c);
  obs.delta = t <= c ? 1 : 0;
  return obs;
}

}  // namespace

void BinaryScenario::validate() const {
  if (n1 < 1 || n2 < 1) throw DomainError("binary scenario: group sizes must be at least 1");
  check_proportion(p01, "p01");
  check_proportion(p00, "p00");
  check_alpha(alpha);
  bctcure::validate(gamma);
  if (censoring == CensoringMode::Rate) {
    if (!(c1 > 0.0) || !(c2 > 0.0)) throw DomainError("binary scenario: censoring rates must be positive");
  } else {
    check_proportion(c1, "c1");
    check_proportion(c2, "c2");
  }
}

ParameterVector BinaryScenario::true_theta() const {
  const BetaPair b = true_params_binary(p01, p00, alpha);
  return {{b.beta0, b.beta1}, gamma, alpha};
}

void ContinuousScenario::validate() const {
  if (n < 1) throw DomainError("continuous scenario: n must be at least 1");
  check_proportion(p_high, "p_high");
  check_proportion(p_low, "p_low");
  if (!(p_low < p_high)) throw DomainError("continuous scenario: need p_low < p_high");
  if (!(x_min < x_max)) throw DomainError("continuous scenario: need x_min < x_max");
  check_alpha(alpha);
  bctcure::validate(gamma);
  if (censoring == CensoringMode::Rate) {
    if (!(c > 0.0)) throw DomainError("continuous scenario: censoring rate must be positive");
  } else {
    check_proportion(c, "c");
  }
}

ParameterVector ContinuousScenario::true_theta() const {
  const BetaPair b = true_params_continuous(p_high, p_low, x_min, x_max, alpha);
  return {{b.beta0, b.beta1}, gamma, alpha};
}

BetaPair true_params_binary(double p01, double p00, double alpha) {
  check_proportion(p01, "p01");
  check_proportion(p00, "p00");
  check_alpha(alpha);
  const double beta0 = cure_rate_linear_predictor(p00, alpha);
  return {beta0, cure_rate_linear_predictor(p01, alpha) - beta0};
}

BetaPair true_params_continuous(double p_high, double p_low, double x_min, double x_max, double alpha) {
  check_proportion(p_high, "p_high");
  check_proportion(p_low, "p_low");
  check_alpha(alpha);
  if (!(x_min < x_max)) throw DomainError("need x_min < x_max");
  const double g_low = cure_rate_linear_predictor(p_low, alpha);
  const double g_high = cure_rate_linear_predictor(p_high, alpha);
  const double beta1 = (g_low - g_high) / (x_max - x_min);
  return {g_low - beta1 * x_max, beta1};
}

double susceptible_time(double u_star, double p0, double phi, double alpha, const WeibullParams& gamma) {
  if (!(u_star > 0.0 && u_star < 1.0)) throw DomainError("susceptible_time: u* must lie in (0, 1)");
  check_proportion(p0, "p0");
  check_alpha(alpha);
  if (!(phi > 0.0)) throw DomainError("susceptible_time: phi must be positive");
  const double log_s = std::log(p0 + (1.0 - p0) * u_star);
  double arg = alpha < kAlphaZeroThreshold ? -log_s / phi : -std::expm1(alpha * log_s) / (alpha * phi);
  constexpr double kSlack = 1e-12;
  if (arg < -kSlack || arg >= 1.0 + kSlack) {
    throw DomainError("susceptible_time: F^-1 argument " + std::to_string(arg) +
                      " is outside [0, 1); p0, phi and alpha are inconsistent");
  }
  arg = std::clamp(arg, 0.0, std::nextafter(1.0, 0.0));
  return weibull_quantile(arg, gamma);
}

double expected_censoring_proportion(double rate, double p0, double phi, double alpha, const WeibullParams& gamma) {
  if (!(rate > 0.0)) throw DomainError("censoring rate must be positive");
  return 1.0 - (1.0 - p0) * susceptible_laplace(rate, p0, phi, alpha, gamma, 4000);
}

double censoring_rate_for_proportion(double target, double p0, double phi, double alpha, const WeibullParams& gamma) {
  if (!(target > p0 && target < 1.0)) {
    throw DomainError("censoring proportion target must lie strictly between the cure rate and 1");
  }
  return solve_rate(target, [&](double rate) { return expected_censoring_proportion(rate, p0, phi, alpha, gamma); });
}

std::pair<double, double> censoring_rates(const BinaryScenario& s) {
  s.validate();
  if (s.censoring == CensoringMode::Rate) return {s.c1, s.c2};
  const auto theta = s.true_theta();
  const double eta1 = theta.beta[0] + theta.beta[1];
  const double eta0 = theta.beta[0];
  return {censoring_rate_for_proportion(s.c1, s.p01, covariate_link(s.alpha, eta1), s.alpha, s.gamma),
          censoring_rate_for_proportion(s.c2, s.p00, covariate_link(s.alpha, eta0), s.alpha, s.gamma)};
}

double censoring_rate(const ContinuousScenario& s) {
  s.validate();
  if (s.censoring == CensoringMode::Rate) return s.c;
  const auto theta = s.true_theta();
  constexpr std::size_t kXPoints = 100;
  auto proportion_at = [&](double rate) {
    double total = 0.0;
    for (std::size_t k = 0; k < kXPoints; ++k) {
      const double x = s.x_min + (s.x_max - s.x_min) * (static_cast<double>(k) + 0.5) / kXPoints;
      const double xs[] = {x};
      const double p0 = cure_rate(xs, theta);
      const double phi = covariate_link(s.alpha, theta.beta[0] + theta.beta[1] * x);
      total += 1.0 - (1.0 - p0) * susceptible_laplace(rate, p0, phi, s.alpha, s.gamma, 400);
    }
    return total / kXPoints;
  };
  return solve_rate(s.c, proportion_at);
}

Dataset generate_binary(const BinaryScenario& scenario, RandomStream& stream) {
  const auto [rate1, rate2] = censoring_rates(scenario);
  const auto theta = scenario.true_theta();
  Dataset data;
  data.covariate_names = {"x1"};
  data.records.reserve(scenario.n1 + scenario.n2);
  const struct {
    std::size_t n;
    double x, p0, rate;
  } groups[] = {{scenario.n1, 1.0, scenario.p01, rate1}, {scenario.n2, 0.0, scenario.p00, rate2}};
  for (const auto& g : groups) {
    const double phi = covariate_link(scenario.alpha, theta.beta[0] + theta.beta[1] * g.x);
    for (std::size_t i = 0; i < g.n; ++i) {
      data.records.push_back(draw_subject(g.p0, phi, scenario.alpha, scenario.gamma, g.rate, {g.x}, stream));
    }
  }
  return data;
}

Dataset generate_binary(const BinaryScenario& scenario, std::uint64_t seed) {
  RandomStream stream(seed, 0);
  return generate_binary(scenario, stream);
}

Dataset generate_continuous(const ContinuousScenario& scenario, RandomStream& stream) {
  const double rate = censoring_rate(scenario);
  const auto theta = scenario.true_theta();
  Dataset data;
  data.covariate_names = {"x1"};
  data.records.reserve(scenario.n);
  for (std::size_t i = 0; i < scenario.n; ++i) {
    const double x = stream.uniform(scenario.x_min, scenario.x_max);
    const double eta = theta.beta[0] + theta.beta[1] * x;
    const double xs[] = {x};
    const double p0 = cure_rate(xs, theta);
    data.records.push_back(
        draw_subject(p0, covariate_link(scenario.alpha, eta), scenario.alpha, scenario.gamma, rate, {x}, stream));
  }
  return data;
}

Dataset generate_continuous(const ContinuousScenario& scenario, std::uint64_t seed) {
  RandomStream stream(seed, 0);
  return generate_continuous(scenario, stream);
}

Dataset generate(const Scenario& scenario, RandomStream& stream) {
  return std::visit(
      [&](const auto& s) -> Dataset {
        if constexpr (std::is_same_v<std::decay_t<decltype(s)>, BinaryScenario>) {
          return generate_binary(s, stream);
        } else {
          return generate_continuous(s, stream);
        }
      },
      scenario);
}

ParameterVector true_theta(const Scenario& scenario) {
  return std::visit([](const auto& s) { return s.true_theta(); }, scenario);
}

std::string describe(const Scenario& scenario) {
  std::ostringstream out;
  if (const auto* b = std::get_if<BinaryScenario>(&scenario)) {
    out << "binary n=" << b->n1 + b->n2 << " (p01,p00)=(" << b->p01 << "," << b->p00 << ") alpha=" << b->alpha;
  } else {
    const auto& c = std::get<ContinuousScenario>(scenario);
    out << "continuous n=" << c.n << " (p_high,p_low)=(" << c.p_high << "," << c.p_low << ") alpha=" << c.alpha;
  }
  return out.str();
}

}  // namespace bctcure
