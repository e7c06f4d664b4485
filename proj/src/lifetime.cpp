#include "bctcure/lifetime.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "bctcure/errors.hpp"

namespace bctcure {

namespace {

// log of CV^2 + 1 = Gamma(1+2g) / Gamma(1+g)^2
double log_cv2_plus_one(double g) { return std::lgamma(1.0 + 2.0 * g) - 2.0 * std::lgamma(1.0 + g); }

}  // namespace

bool WeibullParams::valid() const noexcept {
  return std::isfinite(gamma1) && std::isfinite(gamma2) && gamma1 > 0.0 && gamma2 > 0.0;
}

void validate(const WeibullParams& params) {
  if (!params.valid()) {
    throw DomainError("Weibull parameters must be positive and finite (gamma1=" +
                      std::to_string(params.gamma1) + ", gamma2=" + std::to_string(params.gamma2) + ")");
  }
}

double weibull_log_survival(double y, const WeibullParams& params) {
  validate(params);
  if (!(y >= 0.0)) throw DomainError("weibull: time must be nonnegative");
  if (y == 0.0) return 0.0;
  return -std::exp(std::log(params.gamma2 * y) / params.gamma1);
}

double weibull_cdf(double y, const WeibullParams& params) {
  if (std::isinf(y) && y > 0.0) return 1.0;
  return -std::expm1(weibull_log_survival(y, params));
}

double weibull_log_pdf(double y, const WeibullParams& params) {
  validate(params);
  if (!(y >= 0.0)) throw DomainError("weibull: time must be nonnegative");
  if (y == 0.0) return -std::numeric_limits<double>::infinity();
  const double log_hy = std::log(params.gamma2 * y) / params.gamma1;
  return -std::log(params.gamma1) - std::log(y) + log_hy - std::exp(log_hy);
}

double weibull_pdf(double y, const WeibullParams& params) {
  if (!(y > 0.0)) throw DomainError("weibull_pdf: time must be positive");
  return std::exp(weibull_log_pdf(y, params));
}

double weibull_quantile(double u, const WeibullParams& params) {
  validate(params);
  if (!(u >= 0.0 && u < 1.0)) throw DomainError("weibull_quantile: probability must lie in [0, 1)");
  if (u == 0.0) return 0.0;
  return std::pow(-std::log1p(-u), params.gamma1) / params.gamma2;
}

double weibull_mean(const WeibullParams& params) {
  validate(params);
  return std::exp(std::lgamma(1.0 + params.gamma1)) / params.gamma2;
}

double weibull_variance(const WeibullParams& params) {
  validate(params);
  const double g = params.gamma1;
  const double a = std::exp(std::lgamma(1.0 + 2.0 * g));
  const double b = std::exp(2.0 * std::lgamma(1.0 + g));
  return (a - b) / (params.gamma2 * params.gamma2);
}

WeibullParams weibull_moment_match(double sample_mean, double sample_var) {
  if (!(sample_mean > 0.0) || !(sample_var > 0.0) || !std::isfinite(sample_mean) || !std::isfinite(sample_var)) {
    throw DomainError("weibull_moment_match: mean and variance must be positive and finite");
  }
  const double target = std::log1p(sample_var / (sample_mean * sample_mean));
  double lo = 1e-6;
  double hi = 50.0;
  if (target < log_cv2_plus_one(lo) || target > log_cv2_plus_one(hi)) {
    throw NoConvergenceError("weibull_moment_match: coefficient of variation " +
                             std::to_string(std::sqrt(sample_var) / sample_mean) +
                             " has no root in gamma1 in [1e-6, 50]");
  }
  while (hi - lo > 1e-12 * std::max(1.0, lo)) {
    const double mid = 0.5 * (lo + hi);
    if (mid == lo || mid == hi) break;
    (log_cv2_plus_one(mid) < target ? lo : hi) = mid;
  }
  const double gamma1 = 0.5 * (lo + hi);
  return {gamma1, std::exp(std::lgamma(1.0 + gamma1)) / sample_mean};
}

}  // namespace bctcure
