#pragma once

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <span>
#include <vector>

namespace bctcure {

// Scalar objective over a flat parameter vector. May return -inf to signal an
// infeasible or underflowing point.
using Objective = std::function<double(std::span<const double>)>;

/// Per-coordinate bounds defining the admissible set. Entries may be infinite.
struct AdmissibleBox {
  std::vector<double> lower;
  std::vector<double> upper;

  std::size_t dimension() const noexcept { return lower.size(); }
  bool contains(std::span<const double> theta) const noexcept;
  void validate() const;

  static AdmissibleBox unbounded(std::size_t dimension);
  // beta free, gamma in [1e-10, inf), alpha in [0, 1]; num_beta includes the intercept.
  static AdmissibleBox for_bct(std::size_t num_beta);
};

struct InnerSearchConfig {
  double window = 10.0;        // w0; the search half-width is w0 / sqrt(1 + eps)
  double tolerance = 1e-8;     // golden-section bracket width
  std::size_t max_step_ups = 100;
};

struct SqhConfig {
  double epsilon0 = 1000.0;
  double lambda = 1000.0;  // step-up factor on insufficient increase
  double zeta = 0.5;       // step-down factor on acceptance
  double rho = 1000.0;     // sufficient-increase constant
  double kappa = 1e-3;     // stop when the squared step length drops below this
  std::size_t max_iter = 1000;
  InnerSearchConfig inner;
  bool gauss_seidel = false;  // default is the Jacobi update (all coordinates from the anchor)

  void validate() const;
};

struct SqhTraceEntry {
  std::size_t k = 0;
  std::vector<double> theta;
  double objective = 0.0;
  double epsilon = 0.0;  // penalty the accepted candidate was computed with
  double tau = 0.0;      // squared step length ||theta^{k+1} - theta^k||^2
  std::size_t rejections = 0;
};

using SqhTrace = std::vector<SqhTraceEntry>;

struct SqhResult {
  std::vector<double> theta0;
  double objective0 = 0.0;
  std::vector<double> theta_hat;
  double objective = 0.0;
  std::size_t iterations = 0;
  bool converged = false;  // tau-stop, as opposed to the iteration cap
  SqhTrace trace;
  std::size_t evaluations = 0;
  double wall_time = 0.0;  // seconds
};

// l(theta) - eps * ||theta - theta_tilde||^2
double augmented_objective(std::span<const double> theta, std::span<const double> theta_tilde, double epsilon,
                           const Objective& objective);

/// One SQH candidate: for every coordinate i, maximize the augmented objective
/// over v_i in the box with every other coordinate held at theta_k (or at the
/// already-updated values when gauss_seidel is set). Each 1-D problem is a
/// golden-section search on a penalty-scaled window, followed by a comparison
/// against the window ends and against staying at theta_k[i]; the result is
/// never worse than theta_k[i] in its own 1-D problem.
std::vector<double> coordinate_candidates(std::span<const double> theta_k, double epsilon, const AdmissibleBox& box,
                                          const Objective& objective, const InnerSearchConfig& inner = {},
                                          bool gauss_seidel = false);

/// Gradient-free sequential quadratic Hamiltonian maximization.
///
/// Each outer iteration computes a candidate with coordinate_candidates and
/// accepts it when l(candidate) - l(theta_k) >= rho * tau, shrinking eps by
/// zeta; otherwise eps grows by lambda and the candidate is recomputed. Stops
/// when tau < kappa (converged) or when more than max_iter steps were
/// accepted. Throws StallError after inner.max_step_ups consecutive
/// rejections and EvaluationError if the objective is not finite at theta0.
SqhResult sqh_maximize(const Objective& objective, std::span<const double> theta0, const AdmissibleBox& box,
                       const SqhConfig& config = {});

// Delimited table: iteration, objective, epsilon, tau, rejections, theta_0..theta_{d-1}
void write_trace(std::ostream& out, const SqhTrace& trace, char delimiter = ',');

}  // namespace bctcure
