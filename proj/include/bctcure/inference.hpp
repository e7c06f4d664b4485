#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "bctcure/model.hpp"
#include "bctcure/rng.hpp"
#include "bctcure/sqh.hpp"

namespace bctcure {

// Product-limit estimate. survival[j] is the value just after times[j];
// the curve is 1 before times.front().
struct KmCurve {
  std::vector<double> times;  // distinct event times, ascending
  std::vector<double> survival;
  std::vector<std::size_t> at_risk;
  std::vector<std::size_t> events;
  double last_observed_time = 0.0;

  double operator()(double t) const;
  // KM value at the largest observed time (event or censored).
  double value_at_last_observation() const { return survival.empty() ? 1.0 : survival.back(); }
};

KmCurve kaplan_meier(const Dataset& data);

// Records whose first covariate lies in [lo, hi].
struct GroupSelector {
  double lo = 0.0;
  double hi = 0.0;
};

Dataset select_group(const Dataset& data, const GroupSelector& group);

std::vector<double> default_alpha_grid(std::size_t points = 21);

// Which times feed the Weibull moment match of the initial gamma.
enum class MomentSource {
  AllTimes,    // every observed time y, censored or not
  EventTimes,  // uncensored times only
};

struct InitialValueOptions {
  GroupSelector low{0.0, 0.0};
  GroupSelector high{1.0, 1.0};
  std::vector<double> alpha_grid = default_alpha_grid();
  MomentSource moments = MomentSource::AllTimes;
};

struct InitialValues {
  ParameterVector theta;
  double log_likelihood = 0.0;
  double cure_low = 0.0;   // KM cure estimate of the low-covariate group, after clamping
  double cure_high = 0.0;
  double x_low = 0.0;      // group mean of the first covariate
  double x_high = 0.0;
  bool clamped = false;    // a KM cure estimate hit 0 or 1 and was moved into [0.01, 0.99]
};

/// Data-driven starting point for a single-covariate fit: KM cure estimates
/// of the two extreme groups are matched to p0(x) at each grid alpha to give
/// (beta0, beta1); gamma comes from Weibull moment matching on all observed
/// times; the grid point with the largest log-likelihood wins.
/// Throws DegenerateDataError when a group is empty, the two groups share a
/// covariate value, or the observed times have no spread.
InitialValues initial_values(const Dataset& data, const InitialValueOptions& options = {});

// Runs SQH on the BCT log-likelihood from theta0 inside the BCT admissible box.
SqhResult fit_sqh(const Dataset& data, const ParameterVector& theta0, const SqhConfig& config = {});

struct BootstrapOptions {
  std::size_t resamples = 500;
  SqhConfig fit;
  InitialValueOptions init;
  // Start every refit here instead of recomputing initial values.
  std::optional<ParameterVector> fixed_start;
  std::size_t workers = 1;
  std::uint64_t seed = 0;
};

struct BootstrapResult {
  std::vector<double> standard_errors;  // flat parameter order
  std::size_t completed = 0;
  std::size_t failed = 0;
  std::vector<std::vector<double>> estimates;  // per completed resample, resample order
};

/// Nonparametric case-resampling bootstrap. Rows are first put in a canonical
/// order (y, delta, x), then resample b draws n row indices from stream
/// (seed, b). Each resample is refitted; SE is the sample standard deviation
/// over resamples that completed. Throws AggregateFailure if more than half fail.
BootstrapResult bootstrap_se(const Dataset& data, const BootstrapOptions& options);

double normal_cdf(double x);
/// Inverse standard normal CDF: Acklam's rational approximation (relative
/// error 1.15e-9) followed by one Halley correction step against erfc.
double normal_quantile(double p);

// One set of randomized quantile residuals in observation order.
std::vector<double> quantile_residual_set(const Dataset& data, const ParameterVector& theta, RandomStream& stream);

/// Element-wise median of n_sets sorted residual sets; set s uses stream (seed, s).
std::vector<double> quantile_residuals(const Dataset& data, const ParameterVector& theta, std::size_t n_sets = 5,
                                       std::uint64_t seed = 0);

struct KsResult {
  double statistic = 0.0;
  double p_value = 1.0;
};

// Limiting Kolmogorov distribution P(K > lambda).
double kolmogorov_survival(double lambda);

// One-sample KS test against N(0, 1), asymptotic p-value at sqrt(n) D.
KsResult ks_normality(std::vector<double> residuals);

std::vector<double> group_cure_rates(const ParameterVector& theta, const std::vector<std::vector<double>>& group_values);

struct FitReport {
  ParameterVector theta_hat;
  ParameterVector theta_initial;
  std::optional<std::vector<double>> standard_errors;
  std::vector<std::pair<std::vector<double>, double>> cure_rates;  // (x, p0)
  double log_likelihood = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
  std::size_t evaluations = 0;
  double wall_time = 0.0;
  std::optional<KsResult> residual_diagnostics;
  std::vector<std::string> warnings;
};

// Parameter names in flat order: beta0..beta{p-1}, gamma1, gamma2, alpha.
std::vector<std::string> parameter_names(std::size_t num_beta);

// key = value lines; theta keys use parameter_names.
void write_fit_report(std::ostream& out, const FitReport& report);
// Delimited table: parameter, estimate, se, initial
void write_fit_table(std::ostream& out, const FitReport& report, char delimiter = ',');
// Reads beta*, gamma1, gamma2, alpha from key = value text; other keys ignored.
ParameterVector read_theta(std::istream& in);

}  // namespace bctcure
