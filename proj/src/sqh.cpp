#include "bctcure/sqh.hpp"

#include <chrono>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>
#include <string>

#include "bctcure/errors.hpp"

namespace bctcure {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double finite_or_neg_inf(double v) { return std::isnan(v) ? kNegInf : v; }

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

// Maximizes g on [a, b] by golden-section search; returns the final midpoint.
template <typename F>
double golden_section_max(F&& g, double a, double b, double tolerance) {
  static const double kInvPhi = (std::sqrt(5.0) - 1.0) / 2.0;
  if (!(b > a)) return a;
  double c = b - kInvPhi * (b - a);
  double d = a + kInvPhi * (b - a);
  double gc = g(c);
  double gd = g(d);
  while (b - a > tolerance) {
    if (gc >= gd) {
      b = d;
      d = c;
      gd = gc;
      c = b - kInvPhi * (b - a);
      gc = g(c);
    } else {
      a = c;
      c = d;
      gc = gd;
      d = a + kInvPhi * (b - a);
      gd = g(d);
    }
    if (c >= d) break;  // bracket collapsed to floating-point resolution
  }
  return 0.5 * (a + b);
}

}  // namespace

bool AdmissibleBox::contains(std::span<const double> theta) const noexcept {
  if (theta.size() != lower.size()) return false;
  for (std::size_t i = 0; i < theta.size(); ++i) {
    if (!(theta[i] >= lower[i] && theta[i] <= upper[i])) return false;
  }
  return true;
}

void AdmissibleBox::validate() const {
  if (lower.size() != upper.size() || lower.empty()) throw DomainError("admissible box: bound vectors must be nonempty and equal length");
  for (std::size_t i = 0; i < lower.size(); ++i) {
    if (!(lower[i] < upper[i])) throw DomainError("admissible box: lower >= upper at coordinate " + std::to_string(i));
  }
}

AdmissibleBox AdmissibleBox::unbounded(std::size_t dimension) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  return {std::vector<double>(dimension, -inf), std::vector<double>(dimension, inf)};
}

AdmissibleBox AdmissibleBox::for_bct(std::size_t num_beta) {
  AdmissibleBox box = unbounded(num_beta + 3);
  box.lower[num_beta] = 1e-10;
  box.lower[num_beta + 1] = 1e-10;
  box.lower[num_beta + 2] = 0.0;
  box.upper[num_beta + 2] = 1.0;
  return box;
}

void SqhConfig::validate() const {
  if (!(epsilon0 > 0.0)) throw DomainError("sqh: epsilon must be positive");
  if (!(lambda > 1.0)) throw DomainError("sqh: lambda must exceed 1");
  if (!(zeta > 0.0 && zeta < 1.0)) throw DomainError("sqh: zeta must lie in (0, 1)");
  if (!(rho > 0.0)) throw DomainError("sqh: rho must be positive");
  if (!(kappa > 0.0)) throw DomainError("sqh: kappa must be positive");
  if (!(inner.window > 0.0)) throw DomainError("sqh: inner window must be positive");
  if (!(inner.tolerance > 0.0)) throw DomainError("sqh: inner tolerance must be positive");
  if (inner.max_step_ups == 0) throw DomainError("sqh: max_step_ups must be at least 1");
}

double augmented_objective(std::span<const double> theta, std::span<const double> theta_tilde, double epsilon,
                           const Objective& objective) {
  if (theta.size() != theta_tilde.size()) throw DomainError("augmented_objective: dimension mismatch");
  const double l = objective(theta);
  if (l == kNegInf) return l;
  return l - epsilon * squared_distance(theta, theta_tilde);
}

std::vector<double> coordinate_candidates(std::span<const double> theta_k, double epsilon, const AdmissibleBox& box,
                                          const Objective& objective, const InnerSearchConfig& inner,
                                          bool gauss_seidel) {
  if (theta_k.size() != box.dimension()) throw DomainError("coordinate_candidates: dimension mismatch");
  if (!(epsilon >= 0.0)) throw DomainError("coordinate_candidates: epsilon must be nonnegative");
  const double anchor_value = objective(theta_k);
  if (std::isnan(anchor_value)) throw EvaluationError("objective is NaN at the current iterate");

  const double half_width = inner.window / std::sqrt(1.0 + epsilon);
  std::vector<double> result(theta_k.begin(), theta_k.end());
  std::vector<double> probe(theta_k.begin(), theta_k.end());
  double base_value = anchor_value;  // l at probe with probe[i] = theta_k[i]

  for (std::size_t i = 0; i < theta_k.size(); ++i) {
    if (gauss_seidel) {
      probe = result;
      if (i > 0) base_value = finite_or_neg_inf(objective(probe));
    }
    const double center = theta_k[i];
    // penalty on the other coordinates is constant in v and drops out
    auto g = [&](double v) {
      probe[i] = v;
      const double l = finite_or_neg_inf(objective(probe));
      const double dv = v - center;
      return l == kNegInf ? l : l - epsilon * dv * dv;
    };
    const double lo = std::max(box.lower[i], center - half_width);
    const double hi = std::min(box.upper[i], center + half_width);

    double best_v = center;
    double best_g = base_value;
    if (hi > lo) {
      const double v_star = golden_section_max(g, lo, hi, inner.tolerance);
      for (double v : {v_star, lo, hi}) {
        const double gv = g(v);
        if (gv > best_g) {
          best_g = gv;
          best_v = v;
        }
      }
    }
    probe[i] = center;
    result[i] = best_v;
  }
  return result;
}

SqhResult sqh_maximize(const Objective& objective, std::span<const double> theta0, const AdmissibleBox& box,
                       const SqhConfig& config) {
  const auto start = std::chrono::steady_clock::now();
  config.validate();
  box.validate();
  if (theta0.size() != box.dimension()) throw DomainError("sqh_maximize: theta0 dimension does not match the box");
  if (!box.contains(theta0)) throw DomainError("sqh_maximize: theta0 lies outside the admissible box");

  SqhResult result;
  const Objective counted = [&](std::span<const double> t) {
    ++result.evaluations;
    return objective(t);
  };

  std::vector<double> theta_k(theta0.begin(), theta0.end());
  double l_k = counted(theta_k);
  if (!std::isfinite(l_k)) throw EvaluationError("sqh_maximize: objective is not finite at the initial point");
  result.theta0 = theta_k;
  result.objective0 = l_k;

  double epsilon = config.epsilon0;
  std::size_t k = 0;
  while (true) {
    std::size_t rejections = 0;
    std::vector<double> candidate;
    double tau = 0.0;
    double l_new = 0.0;
    double used_epsilon = epsilon;
    while (true) {
      candidate = coordinate_candidates(theta_k, epsilon, box, counted, config.inner, config.gauss_seidel);
      tau = squared_distance(candidate, theta_k);
      l_new = counted(candidate);
      used_epsilon = epsilon;
      if (l_new - l_k >= config.rho * tau) break;
      epsilon *= config.lambda;
      if (++rejections >= config.inner.max_step_ups) {
        throw StallError("sqh_maximize: no sufficient increase after " + std::to_string(rejections) +
                         " penalty step-ups at iteration " + std::to_string(k));
      }
    }
    epsilon *= config.zeta;
    theta_k = std::move(candidate);
    l_k = l_new;
    ++k;
    result.trace.push_back({k, theta_k, l_k, used_epsilon, tau, rejections});
    if (tau < config.kappa) {
      result.converged = true;
      break;
    }
    if (k > config.max_iter) break;
  }

  result.theta_hat = std::move(theta_k);
  result.objective = l_k;
  result.iterations = k;
  result.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

void write_trace(std::ostream& out, const SqhTrace& trace, char delimiter) {
  const std::size_t dim = trace.empty() ? 0 : trace.front().theta.size();
  out << "iteration" << delimiter << "objective" << delimiter << "epsilon" << delimiter << "tau" << delimiter
      << "rejections";
  for (std::size_t i = 0; i < dim; ++i) out << delimiter << "theta_" << i;
  out << '\n';
  const auto flags = out.flags();
  const auto precision = out.precision();
  out << std::setprecision(17);
  for (const auto& e : trace) {
    out << e.k << delimiter << e.objective << delimiter << e.epsilon << delimiter << e.tau << delimiter << e.rejections;
    for (double v : e.theta) out << delimiter << v;
    out << '\n';
  }
  out.flags(flags);
  out.precision(precision);
}

}  // namespace bctcure
