#pragma once

namespace bctcure {

// Two-parameter Weibull lifetime, F(y) = 1 - exp{-(gamma2 * y)^(1/gamma1)}.
// gamma1 is the reciprocal shape, gamma2 the inverse scale (1/time).
struct WeibullParams {
  double gamma1 = 1.0;
  double gamma2 = 1.0;

  bool valid() const noexcept;
};

// Throws DomainError unless both parameters are finite and positive.
void validate(const WeibullParams& params);

double weibull_cdf(double y, const WeibullParams& params);
double weibull_pdf(double y, const WeibullParams& params);
double weibull_quantile(double u, const WeibullParams& params);

// log(1 - F(y)) = -(gamma2 y)^(1/gamma1). Exact in log space for large y.
double weibull_log_survival(double y, const WeibullParams& params);
// log f(y); -inf at y == 0 when the density vanishes or diverges there.
double weibull_log_pdf(double y, const WeibullParams& params);

double weibull_mean(const WeibullParams& params);
double weibull_variance(const WeibullParams& params);

/// Solves for the Weibull whose mean and variance equal the given sample
/// moments. The coefficient of variation depends on gamma1 alone and is
/// increasing in it, so gamma1 comes from bisection on [1e-6, 50] and gamma2
/// follows from the mean. Throws NoConvergenceError when the requested CV is
/// outside what the bracket can reach.
WeibullParams weibull_moment_match(double sample_mean, double sample_var);

}  // namespace bctcure
