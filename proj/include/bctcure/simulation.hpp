#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <variant>
#include <vector>

#include "bctcure/inference.hpp"
#include "bctcure/model.hpp"
#include "bctcure/rng.hpp"
#include "bctcure/sqh.hpp"

namespace bctcure {

// How the censoring constants of a scenario are read: as exponential rates of
// the censoring time C, or as target censoring proportions that are converted
// to rates before generation.
enum class CensoringMode { Rate, Proportion };

struct BetaPair {
  double beta0 = 0.0;
  double beta1 = 0.0;
};

/// Two groups: group 1 has x = 1 and cure rate p01, group 2 has x = 0 and p00.
struct BinaryScenario {
  std::size_t n1 = 120;
  std::size_t n2 = 80;
  double p01 = 0.40;
  double p00 = 0.20;
  double alpha = 0.5;
  WeibullParams gamma{0.316, 0.179};
  double c1 = 0.15;
  double c2 = 0.10;
  CensoringMode censoring = CensoringMode::Rate;

  void validate() const;
  ParameterVector true_theta() const;
};

/// x ~ Uniform(x_min, x_max) with cure rate p_high at x_min and p_low at x_max.
struct ContinuousScenario {
  std::size_t n = 300;
  double p_high = 0.65;
  double p_low = 0.05;
  double x_min = 0.1;
  double x_max = 20.0;
  double alpha = 0.5;
  WeibullParams gamma{0.316, 0.179};
  double c = 0.10;
  CensoringMode censoring = CensoringMode::Rate;

  void validate() const;
  ParameterVector true_theta() const;
};

using Scenario = std::variant<BinaryScenario, ContinuousScenario>;

BetaPair true_params_binary(double p01, double p00, double alpha);
BetaPair true_params_continuous(double p_high, double p_low, double x_min, double x_max, double alpha);

/// Event time of a susceptible subject: solves {S_p(t) - p0}/(1 - p0) = u_star
/// for t by inverting F. Throws DomainError when the argument passed to F^-1
/// leaves [0, 1) by more than 1e-12, which means p0, phi and alpha disagree.
double susceptible_time(double u_star, double p0, double phi, double alpha, const WeibullParams& gamma);

/// Expected censoring proportion P(delta = 0) of one covariate value under
/// exponential censoring with the given rate (quadrature over the susceptible
/// quantile function).
double expected_censoring_proportion(double rate, double p0, double phi, double alpha, const WeibullParams& gamma);

/// Exponential censoring rate that yields the target censoring proportion.
/// The target must lie strictly between p0 and 1.
double censoring_rate_for_proportion(double target, double p0, double phi, double alpha, const WeibullParams& gamma);

// Per-group censoring rates after resolving CensoringMode (c1, c2 order).
std::pair<double, double> censoring_rates(const BinaryScenario& scenario);
double censoring_rate(const ContinuousScenario& scenario);

/// Group 1 rows (x = 1) first, then group 2 (x = 0). Per subject the stream
/// yields U, C and, for susceptibles only, U*.
Dataset generate_binary(const BinaryScenario& scenario, RandomStream& stream);
Dataset generate_binary(const BinaryScenario& scenario, std::uint64_t seed);
/// Per subject the stream yields x, U, C and, for susceptibles only, U*.
Dataset generate_continuous(const ContinuousScenario& scenario, RandomStream& stream);
Dataset generate_continuous(const ContinuousScenario& scenario, std::uint64_t seed);

Dataset generate(const Scenario& scenario, RandomStream& stream);
ParameterVector true_theta(const Scenario& scenario);
std::string describe(const Scenario& scenario);

// ---------------------------------------------------------------------------
// Monte-Carlo harness

enum class InitStrategy {
  KaplanMeier,     // data-driven initial values (initial_values)
  Truth,           // start at the true parameter
  PerturbedTruth,  // each true coordinate scaled by 1 + Uniform(-perturbation, perturbation)
};

enum class FitMode {
  Sqh,
  Oracle,  // no fitting: theta_hat is the true parameter
};

struct SurvivalTarget {
  double y = 2.0;
  std::vector<double> x;
};

struct McOptions {
  std::size_t replications = 100;
  SqhConfig fit;
  InitStrategy init = InitStrategy::PerturbedTruth;
  FitMode mode = FitMode::Sqh;
  std::size_t alpha_grid_points = 21;
  double perturbation = 0.2;
  std::vector<SurvivalTarget> survival_targets;
  // Covariate values whose cure rates are tracked. Empty means the scenario
  // default: x = 1 and x = 0 (binary), x_min and x_max (continuous).
  std::vector<std::vector<double>> cure_targets;
  std::size_t workers = 1;
  std::uint64_t seed = 0;
};

struct McQuantity {
  std::string name;
  double true_value = 0.0;
  double mean_estimate = 0.0;
  double bias = 0.0;            // |mean(estimate) - true|
  double mean_abs_error = 0.0;  // mean |estimate - true|
  double rmse = 0.0;
};

struct McReport {
  std::string scenario;
  std::vector<McQuantity> parameters;
  std::vector<McQuantity> derived;
  std::size_t requested = 0;
  std::size_t completed = 0;
  std::size_t diverged = 0;       // stalled, non-finite, or failed to initialize; excluded
  std::size_t iteration_cap = 0;  // completed fits stopped by max_iter; included
  double mean_iterations = 0.0;
  double wall_time = 0.0;  // seconds, whole study
  std::uint64_t seed = 0;
  std::vector<std::vector<double>> estimates;  // completed replications, index order
  std::vector<std::size_t> completed_indices;

  const McQuantity& parameter(const std::string& name) const;
  const McQuantity& quantity(const std::string& name) const;
};

// Initial-value options used for a scenario's extreme groups.
InitialValueOptions default_init_options(const Scenario& scenario, std::size_t alpha_grid_points = 21);

/// Generates, initializes and fits `replications` datasets; replication r
/// uses stream (seed, r). Failed replications are counted, not aggregated.
/// Throws AggregateFailure if every replication fails.
McReport monte_carlo_study(const Scenario& scenario, const McOptions& options);

// Aligned human-readable table: quantity, true, mean, bias, MAE, RMSE.
void write_report_table(std::ostream& out, const McReport& report);
// One row per (quantity, metric): scenario,quantity,metric,value.
void write_report_delimited(std::ostream& out, const McReport& report, char delimiter = ',');

}  // namespace bctcure
