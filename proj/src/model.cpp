#include "bctcure/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "bctcure/errors.hpp"

namespace bctcure {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// log(1 + e^z) without overflow
double softplus(double z) {
  if (z > 0.0) return z + std::log1p(std::exp(-z));
  return std::log1p(std::exp(z));
}

struct LogTerms {
  double log_phi;         // log phi(alpha, x)
  double log_base;        // log{1 - alpha phi F(y)}; 0 on the alpha = 0 branch
  double log_survival;    // log S_p(y | x)
};

// Log-space evaluation of the BCT quantities at a given log(1 - F(y)).
LogTerms log_terms(double alpha, double eta, double log_sw) {
  if (alpha < kAlphaZeroThreshold) {
    const double cdf = -std::expm1(log_sw);
    return {eta, 0.0, -std::exp(eta) * cdf};
  }
  const double z = eta + std::log(alpha);
  const double log_alpha_phi = -softplus(-z);
  const double alpha_phi_f = std::exp(log_alpha_phi) * -std::expm1(log_sw);
  // 1 - alpha phi F = (1 + e^{z} S_w) / (1 + e^{z}) when alpha phi F is near 1
  const double log_base =
      alpha_phi_f < 0.5 ? std::log1p(-alpha_phi_f) : softplus(z + log_sw) - softplus(z);
  return {log_alpha_phi - std::log(alpha), log_base, log_base / alpha};
}

void check_time(double y, const char* what) {
  if (std::isnan(y)) throw EvaluationError(std::string(what) + ": time is NaN");
  if (y < 0.0) throw DomainError(std::string(what) + ": time must be nonnegative");
}

}  // namespace

std::vector<double> ParameterVector::to_flat() const {
  std::vector<double> flat(beta);
  flat.push_back(gamma.gamma1);
  flat.push_back(gamma.gamma2);
  flat.push_back(alpha);
  return flat;
}

ParameterVector ParameterVector::from_flat(std::span<const double> flat) {
  if (flat.size() < 4) throw DomainError("parameter vector needs at least intercept, gamma1, gamma2, alpha");
  const std::size_t p = flat.size() - 3;
  ParameterVector theta;
  theta.beta.assign(flat.begin(), flat.begin() + static_cast<std::ptrdiff_t>(p));
  theta.gamma = {flat[p], flat[p + 1]};
  theta.alpha = flat[p + 2];
  return theta;
}

void ParameterVector::validate() const {
  if (beta.empty()) throw DomainError("parameter vector has no intercept");
  for (double b : beta) {
    if (std::isnan(b)) throw EvaluationError("beta contains NaN");
  }
  if (std::isnan(gamma.gamma1) || std::isnan(gamma.gamma2) || std::isnan(alpha)) {
    throw EvaluationError("gamma or alpha is NaN");
  }
  bctcure::validate(gamma);
  if (alpha < 0.0 || alpha > 1.0) throw DomainError("alpha must lie in [0, 1], got " + std::to_string(alpha));
}

void Dataset::validate() const {
  if (records.empty()) throw DegenerateDataError("dataset is empty");
  const std::size_t dim = records.front().x.size();
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    if (r.x.size() != dim) throw DataError("record " + std::to_string(i) + " has inconsistent covariate dimension");
    if (std::isnan(r.y)) throw EvaluationError("record " + std::to_string(i) + " has NaN time");
    if (r.y < 0.0) throw DataError("record " + std::to_string(i) + " has negative time");
    if (r.delta != 0 && r.delta != 1) throw DataError("record " + std::to_string(i) + " has delta outside {0,1}");
    for (double v : r.x) {
      if (std::isnan(v)) throw EvaluationError("record " + std::to_string(i) + " has NaN covariate");
    }
  }
}

double Dataset::censoring_fraction() const {
  if (records.empty()) return 0.0;
  const auto censored = std::count_if(records.begin(), records.end(), [](const Observation& r) { return r.delta == 0; });
  return static_cast<double>(censored) / static_cast<double>(records.size());
}

double box_cox(double z, double alpha) {
  if (!(z > 0.0)) throw DomainError("box_cox: argument must be positive");
  if (alpha == 0.0) return std::log(z);
  return std::expm1(alpha * std::log(z)) / alpha;
}

double linear_predictor(std::span<const double> x, std::span<const double> beta) {
  if (beta.size() != x.size() + 1) {
    throw DomainError("linear predictor: beta has " + std::to_string(beta.size()) + " entries for " +
                      std::to_string(x.size()) + " covariates");
  }
  double eta = beta[0];
  for (std::size_t j = 0; j < x.size(); ++j) eta += beta[j + 1] * x[j];
  return eta;
}

double log_covariate_link(double alpha, double eta) {
  if (alpha < kAlphaZeroThreshold) return eta;
  return -softplus(-(eta + std::log(alpha))) - std::log(alpha);
}

double covariate_link(double alpha, double eta) { return std::exp(log_covariate_link(alpha, eta)); }

double log_population_survival(double y, std::span<const double> x, const ParameterVector& theta) {
  theta.validate();
  check_time(y, "population_survival");
  const double eta = linear_predictor(x, theta.beta);
  const double log_sw = std::isinf(y) ? kNegInf : weibull_log_survival(y, theta.gamma);
  return log_terms(theta.alpha, eta, log_sw).log_survival;
}

double population_survival(double y, std::span<const double> x, const ParameterVector& theta) {
  return std::exp(log_population_survival(y, x, theta));
}

double log_population_density(double y, std::span<const double> x, const ParameterVector& theta) {
  theta.validate();
  check_time(y, "population_density");
  if (y == 0.0) return weibull_log_pdf(0.0, theta.gamma);
  const double eta = linear_predictor(x, theta.beta);
  const LogTerms t = log_terms(theta.alpha, eta, weibull_log_survival(y, theta.gamma));
  return t.log_survival + t.log_phi + weibull_log_pdf(y, theta.gamma) - t.log_base;
}

double population_density(double y, std::span<const double> x, const ParameterVector& theta) {
  if (!(y > 0.0)) throw DomainError("population_density: time must be positive");
  return std::exp(log_population_density(y, x, theta));
}

double log_cure_rate(std::span<const double> x, const ParameterVector& theta) {
  theta.validate();
  const double eta = linear_predictor(x, theta.beta);
  if (theta.alpha < kAlphaZeroThreshold) return -std::exp(eta);
  // 1 - alpha phi = 1 / (1 + alpha e^eta)
  return -softplus(eta + std::log(theta.alpha)) / theta.alpha;
}

double cure_rate(std::span<const double> x, const ParameterVector& theta) { return std::exp(log_cure_rate(x, theta)); }

double cure_rate_linear_predictor(double p0, double alpha) {
  if (!(p0 > 0.0 && p0 < 1.0)) throw DomainError("cure proportion must lie strictly inside (0, 1)");
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw DomainError("alpha must lie in [0, 1]");
  if (alpha < kAlphaZeroThreshold) return std::log(-std::log(p0));
  return std::log(std::expm1(-alpha * std::log(p0)) / alpha);
}

double log_likelihood(const ParameterVector& theta, const Dataset& data) {
  if (data.records.empty()) throw DegenerateDataError("log_likelihood: dataset is empty");
  theta.validate();
  const double log_gamma1 = std::log(theta.gamma.gamma1);
  const double inv_gamma1 = 1.0 / theta.gamma.gamma1;
  double total = 0.0;
  for (const auto& r : data.records) {
    if (std::isnan(r.y)) throw EvaluationError("log_likelihood: NaN observation time");
    const double eta = linear_predictor(r.x, theta.beta);
    if (std::isnan(eta)) throw EvaluationError("log_likelihood: NaN covariate");
    if (r.y == 0.0) {
      if (r.delta == 1) return kNegInf;
      continue;  // log S_p(0) = 0
    }
    const double log_hy = std::log(theta.gamma.gamma2 * r.y) * inv_gamma1;
    const double log_sw = -std::exp(log_hy);
    const LogTerms t = log_terms(theta.alpha, eta, log_sw);
    double term = t.log_survival;
    if (r.delta == 1) {
      const double log_f = -log_gamma1 - std::log(r.y) + log_hy + log_sw;
      term += t.log_phi + log_f - t.log_base;
    }
    if (!(term > kNegInf) || std::isnan(term)) return kNegInf;
    total += term;
  }
  return std::isnan(total) ? kNegInf : total;
}

}  // namespace bctcure
