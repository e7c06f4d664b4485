#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "bctcure/lifetime.hpp"

namespace bctcure {

// Below this index the alpha = 0 (promotion time) formulas are used exactly.
inline constexpr double kAlphaZeroThreshold = 1e-12;

/// Full model state theta = (beta, gamma, alpha). beta[0] is the intercept;
/// covariate vectors passed to the model never include the leading 1.
/// The flat view orders coordinates (beta_0..beta_{p-1}, gamma1, gamma2, alpha).
struct ParameterVector {
  std::vector<double> beta;
  WeibullParams gamma;
  double alpha = 0.5;

  std::size_t dimension() const noexcept { return beta.size() + 3; }
  std::vector<double> to_flat() const;
  static ParameterVector from_flat(std::span<const double> flat);

  // Throws DomainError if alpha is outside [0, 1] or gamma is not positive,
  // EvaluationError if any entry is NaN.
  void validate() const;
};

struct Observation {
  double y = 0.0;
  int delta = 0;  // 1 = event observed, 0 = right-censored
  std::vector<double> x;
};

struct Dataset {
  std::vector<Observation> records;
  std::vector<std::string> covariate_names;

  std::size_t size() const noexcept { return records.size(); }
  std::size_t covariate_dim() const noexcept { return records.empty() ? covariate_names.size() : records.front().x.size(); }
  // Nonempty, homogeneous covariate dimension, y >= 0, delta in {0, 1}.
  void validate() const;
  double censoring_fraction() const;
};

// (z^alpha - 1) / alpha, or log z at alpha == 0.
double box_cox(double z, double alpha);

// x'beta with the implicit intercept.
double linear_predictor(std::span<const double> x, std::span<const double> beta);

// phi(alpha, eta) = e^eta / (1 + alpha e^eta), e^eta at alpha == 0.
double covariate_link(double alpha, double eta);
double log_covariate_link(double alpha, double eta);

double log_population_survival(double y, std::span<const double> x, const ParameterVector& theta);
double population_survival(double y, std::span<const double> x, const ParameterVector& theta);
double log_population_density(double y, std::span<const double> x, const ParameterVector& theta);
double population_density(double y, std::span<const double> x, const ParameterVector& theta);
double log_cure_rate(std::span<const double> x, const ParameterVector& theta);
double cure_rate(std::span<const double> x, const ParameterVector& theta);

/// Linear predictor that produces cure rate p0 under index alpha, i.e. the
/// inverse of cure_rate in eta: log{(p0^-alpha - 1)/alpha}, or log(-log p0)
/// at alpha == 0. Throws DomainError unless 0 < p0 < 1.
double cure_rate_linear_predictor(double p0, double alpha);

/// Censored-data log-likelihood sum_i [delta_i log f_p + (1 - delta_i) log S_p].
/// Returns -inf when any term underflows (the optimizer treats it as a
/// rejection); throws EvaluationError on NaN input and DomainError when theta
/// leaves the admissible set.
double log_likelihood(const ParameterVector& theta, const Dataset& data);

}  // namespace bctcure
