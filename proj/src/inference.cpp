#include "bctcure/inference.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <limits>
#include <map>
#include <numbers>
#include <ostream>
#include <sstream>

#include "bctcure/errors.hpp"
#include "bctcure/parallel.hpp"

namespace bctcure {

// ---------------------------------------------------------------------------
// Kaplan-Meier

double KmCurve::operator()(double t) const {
  const auto it = std::upper_bound(times.begin(), times.end(), t);
  if (it == times.begin()) return 1.0;
  return survival[static_cast<std::size_t>(it - times.begin()) - 1];
}

KmCurve kaplan_meier(const Dataset& data) {
  std::vector<std::pair<double, int>> obs;
  obs.reserve(data.size());
  for (const auto& r : data.records) obs.emplace_back(r.y, r.delta);
  std::sort(obs.begin(), obs.end());

  KmCurve curve;
  if (obs.empty()) return curve;
  curve.last_observed_time = obs.back().first;
  double s = 1.0;
  std::size_t i = 0;
  while (i < obs.size()) {
    const double t = obs[i].first;
    const std::size_t at_risk = obs.size() - i;
    std::size_t events = 0;
    std::size_t j = i;
    for (; j < obs.size() && obs[j].first == t; ++j) events += static_cast<std::size_t>(obs[j].second);
    if (events > 0) {
      s *= 1.0 - static_cast<double>(events) / static_cast<double>(at_risk);
      curve.times.push_back(t);
      curve.survival.push_back(s);
      curve.at_risk.push_back(at_risk);
      curve.events.push_back(events);
    }
    i = j;
  }
  return curve;
}

// ---------------------------------------------------------------------------
// Initial values

Dataset select_group(const Dataset& data, const GroupSelector& group) {
  Dataset out;
  out.covariate_names = data.covariate_names;
  for (const auto& r : data.records) {
    if (!r.x.empty() && r.x[0] >= group.lo && r.x[0] <= group.hi) out.records.push_back(r);
  }
  return out;
}

std::vector<double> default_alpha_grid(std::size_t points) {
  if (points == 0) return {};
  if (points == 1) return {0.5};
  std::vector<double> grid(points);
  for (std::size_t i = 0; i < points; ++i) grid[i] = static_cast<double>(i) / static_cast<double>(points - 1);
  return grid;
}

namespace {

double mean_first_covariate(const Dataset& group) {
  double s = 0.0;
  for (const auto& r : group.records) s += r.x[0];
  return s / static_cast<double>(group.size());
}

}  // namespace

InitialValues initial_values(const Dataset& data, const InitialValueOptions& options) {
  data.validate();
  if (data.covariate_dim() != 1) throw DegenerateDataError("initial_values: expected exactly one covariate");
  if (options.alpha_grid.empty()) throw DomainError("initial_values: alpha grid is empty");

  const Dataset low = select_group(data, options.low);
  const Dataset high = select_group(data, options.high);
  if (low.records.empty() || high.records.empty()) {
    throw DegenerateDataError("initial_values: an extreme covariate group is empty");
  }

  InitialValues out;
  out.x_low = mean_first_covariate(low);
  out.x_high = mean_first_covariate(high);
  if (out.x_low == out.x_high) throw DegenerateDataError("initial_values: extreme groups share a covariate value");

  auto clamp_cure = [&](double p) {
    const double c = std::clamp(p, 0.01, 0.99);
    if (c != p) out.clamped = true;
    return c;
  };
  out.cure_low = clamp_cure(kaplan_meier(low).value_at_last_observation());
  out.cure_high = clamp_cure(kaplan_meier(high).value_at_last_observation());

  std::vector<double> times;
  for (const auto& r : data.records) {
    if (options.moments == MomentSource::AllTimes || r.delta == 1) times.push_back(r.y);
  }
  double mean = 0.0;
  for (double y : times) mean += y;
  mean /= static_cast<double>(times.size());
  double var = 0.0;
  for (double y : times) var += (y - mean) * (y - mean);
  if (times.size() < 2 || !(var > 0.0)) throw DegenerateDataError("initial_values: observed times have no spread");
  var /= static_cast<double>(times.size() - 1);
  const WeibullParams gamma = weibull_moment_match(mean, var);

  bool found = false;
  for (double alpha : options.alpha_grid) {
    const double eta_low = cure_rate_linear_predictor(out.cure_low, alpha);
    const double eta_high = cure_rate_linear_predictor(out.cure_high, alpha);
    ParameterVector theta;
    const double beta1 = (eta_high - eta_low) / (out.x_high - out.x_low);
    theta.beta = {eta_low - beta1 * out.x_low, beta1};
    theta.gamma = gamma;
    theta.alpha = alpha;
    const double ll = log_likelihood(theta, data);
    if (!found || ll > out.log_likelihood) {
      out.theta = std::move(theta);
      out.log_likelihood = ll;
      found = true;
    }
  }
  if (!std::isfinite(out.log_likelihood)) {
    throw DegenerateDataError("initial_values: log-likelihood is not finite at any grid point");
  }
  return out;
}

SqhResult fit_sqh(const Dataset& data, const ParameterVector& theta0, const SqhConfig& config) {
  data.validate();
  const std::size_t num_beta = theta0.beta.size();
  if (num_beta != data.covariate_dim() + 1) throw DomainError("fit_sqh: theta0 does not match the covariate dimension");
  const Objective objective = [&data](std::span<const double> flat) {
    return log_likelihood(ParameterVector::from_flat(flat), data);
  };
  const auto flat0 = theta0.to_flat();
  return sqh_maximize(objective, flat0, AdmissibleBox::for_bct(num_beta), config);
}

// ---------------------------------------------------------------------------
// Bootstrap

BootstrapResult bootstrap_se(const Dataset& data, const BootstrapOptions& options) {
  data.validate();
  if (options.resamples < 2) throw DomainError("bootstrap_se: need at least 2 resamples");

  Dataset canonical = data;
  std::sort(canonical.records.begin(), canonical.records.end(), [](const Observation& a, const Observation& b) {
    if (a.y != b.y) return a.y < b.y;
    if (a.delta != b.delta) return a.delta < b.delta;
    return a.x < b.x;
  });

  const std::size_t n = canonical.size();
  std::vector<std::optional<std::vector<double>>> fits(options.resamples);
  parallel_for(options.resamples, options.workers, [&](std::size_t b) {
    RandomStream stream(options.seed, b);
    Dataset resample;
    resample.covariate_names = canonical.covariate_names;
    resample.records.reserve(n);
    for (std::size_t i = 0; i < n; ++i) resample.records.push_back(canonical.records[stream.index(n)]);
    try {
      const ParameterVector start =
          options.fixed_start ? *options.fixed_start : initial_values(resample, options.init).theta;
      const SqhResult fit = fit_sqh(resample, start, options.fit);
      if (fit.converged && std::isfinite(fit.objective)) fits[b] = fit.theta_hat;
    } catch (const std::exception&) {
      // counted as failed below
    }
  });

  BootstrapResult result;
  for (auto& f : fits) {
    if (f) {
      result.estimates.push_back(std::move(*f));
    } else {
      ++result.failed;
    }
  }
  result.completed = result.estimates.size();
  if (2 * result.failed > options.resamples) {
    throw AggregateFailure("bootstrap_se: " + std::to_string(result.failed) + " of " +
                           std::to_string(options.resamples) + " resamples failed");
  }
  if (result.completed < 2) throw AggregateFailure("bootstrap_se: fewer than two resamples completed");

  const std::size_t dim = result.estimates.front().size();
  result.standard_errors.assign(dim, 0.0);
  for (std::size_t j = 0; j < dim; ++j) {
    double mean = 0.0;
    for (const auto& e : result.estimates) mean += e[j];
    mean /= static_cast<double>(result.completed);
    double ss = 0.0;
    for (const auto& e : result.estimates) ss += (e[j] - mean) * (e[j] - mean);
    result.standard_errors[j] = std::sqrt(ss / static_cast<double>(result.completed - 1));
  }
  return result;
}

// ---------------------------------------------------------------------------
// Residual diagnostics

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    if (p == 0.0) return -std::numeric_limits<double>::infinity();
    if (p == 1.0) return std::numeric_limits<double>::infinity();
    throw DomainError("normal_quantile: probability outside [0, 1]");
  }
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                                 1.383577518672690e+02,  -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                                 6.680131188771802e+01,  -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                                 -2.549732539343734e+00, 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                                 3.754408661907416e+00};
  constexpr double p_low = 0.02425;
  double x;
  if (p < p_low) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - p_low) {
    const double q = p - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log1p(-p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  // Halley step; use the upper tail for p > 1/2 to keep relative precision
  const double e = p > 0.5 ? (1.0 - p) - 0.5 * std::erfc(x / std::numbers::sqrt2)
                           : 0.5 * std::erfc(-x / std::numbers::sqrt2) - p;
  const double u = e * std::sqrt(2.0 * std::numbers::pi) * std::exp(0.5 * x * x);
  return x - u / (1.0 + 0.5 * x * u);
}

std::vector<double> quantile_residual_set(const Dataset& data, const ParameterVector& theta, RandomStream& stream) {
  constexpr double kClamp = 1e-15;
  std::vector<double> r;
  r.reserve(data.size());
  for (const auto& obs : data.records) {
    const double cdf = -std::expm1(log_population_survival(obs.y, obs.x, theta));
    double u = obs.delta == 1 ? cdf : stream.uniform(cdf, 1.0);
    u = std::clamp(u, kClamp, 1.0 - kClamp);
    r.push_back(normal_quantile(u));
  }
  return r;
}

std::vector<double> quantile_residuals(const Dataset& data, const ParameterVector& theta, std::size_t n_sets,
                                       std::uint64_t seed) {
  data.validate();
  theta.validate();
  if (n_sets == 0) throw DomainError("quantile_residuals: need at least one set");
  std::vector<std::vector<double>> sets;
  sets.reserve(n_sets);
  for (std::size_t s = 0; s < n_sets; ++s) {
    RandomStream stream(seed, s);
    auto set = quantile_residual_set(data, theta, stream);
    std::sort(set.begin(), set.end());
    sets.push_back(std::move(set));
  }
  std::vector<double> medians(data.size());
  std::vector<double> column(n_sets);
  for (std::size_t i = 0; i < data.size(); ++i) {
    for (std::size_t s = 0; s < n_sets; ++s) column[s] = sets[s][i];
    std::sort(column.begin(), column.end());
    medians[i] = n_sets % 2 == 1 ? column[n_sets / 2] : 0.5 * (column[n_sets / 2 - 1] + column[n_sets / 2]);
  }
  return medians;
}

double kolmogorov_survival(double lambda) {
  if (!(lambda > 0.0)) return 1.0;
  if (lambda < 1.18) {
    // P(K <= lambda) = sqrt(2 pi)/lambda * sum exp(-(2k-1)^2 pi^2 / (8 lambda^2))
    const double w = std::numbers::pi * std::numbers::pi / (8.0 * lambda * lambda);
    double cdf = 0.0;
    for (int k = 1; k <= 20; ++k) {
      const double m = 2.0 * k - 1.0;
      cdf += std::exp(-m * m * w);
    }
    cdf *= std::sqrt(2.0 * std::numbers::pi) / lambda;
    return std::clamp(1.0 - cdf, 0.0, 1.0);
  }
  double q = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * lambda * lambda);
    q += (k % 2 == 1 ? 2.0 : -2.0) * term;
    if (term < 1e-18) break;
  }
  return std::clamp(q, 0.0, 1.0);
}

KsResult ks_normality(std::vector<double> residuals) {
  if (residuals.size() < 5) throw DomainError("ks_normality: need at least 5 residuals");
  std::sort(residuals.begin(), residuals.end());
  const double n = static_cast<double>(residuals.size());
  double d = 0.0;
  for (std::size_t i = 0; i < residuals.size(); ++i) {
    const double f = normal_cdf(residuals[i]);
    d = std::max({d, (static_cast<double>(i) + 1.0) / n - f, f - static_cast<double>(i) / n});
  }
  return {d, kolmogorov_survival(std::sqrt(n) * d)};
}

std::vector<double> group_cure_rates(const ParameterVector& theta, const std::vector<std::vector<double>>& group_values) {
  std::vector<double> out;
  out.reserve(group_values.size());
  for (const auto& x : group_values) out.push_back(cure_rate(x, theta));
  return out;
}

// ---------------------------------------------------------------------------
// Report I/O

std::vector<std::string> parameter_names(std::size_t num_beta) {
  std::vector<std::string> names;
  for (std::size_t j = 0; j < num_beta; ++j) names.push_back("beta" + std::to_string(j));
  names.insert(names.end(), {"gamma1", "gamma2", "alpha"});
  return names;
}

void write_fit_report(std::ostream& out, const FitReport& report) {
  const auto flags = out.flags();
  const auto precision = out.precision();
  out << std::setprecision(17);
  const auto names = parameter_names(report.theta_hat.beta.size());
  const auto est = report.theta_hat.to_flat();
  const auto init = report.theta_initial.to_flat();
  for (std::size_t j = 0; j < names.size(); ++j) out << names[j] << " = " << est[j] << '\n';
  if (report.standard_errors) {
    for (std::size_t j = 0; j < names.size(); ++j) out << "se_" << names[j] << " = " << (*report.standard_errors)[j] << '\n';
  }
  for (std::size_t j = 0; j < names.size(); ++j) out << "initial_" << names[j] << " = " << init[j] << '\n';
  out << "log_likelihood = " << report.log_likelihood << '\n';
  out << "iterations = " << report.iterations << '\n';
  out << "converged = " << (report.converged ? "true" : "false") << '\n';
  out << "evaluations = " << report.evaluations << '\n';
  out << "alpha_on_boundary = " << (report.theta_hat.alpha == 0.0 || report.theta_hat.alpha == 1.0 ? "true" : "false")
      << '\n';
  for (std::size_t g = 0; g < report.cure_rates.size(); ++g) {
    const auto& [x, p] = report.cure_rates[g];
    out << "cure_rate_" << g << "_x =";
    for (double v : x) out << ' ' << v;
    out << '\n' << "cure_rate_" << g << " = " << p << '\n';
  }
  if (report.residual_diagnostics) {
    out << "ks_statistic = " << report.residual_diagnostics->statistic << '\n';
    out << "ks_p_value = " << report.residual_diagnostics->p_value << '\n';
  }
  for (const auto& w : report.warnings) out << "warning = " << w << '\n';
  out << "wall_time_seconds = " << report.wall_time << '\n';
  out.flags(flags);
  out.precision(precision);
}

void write_fit_table(std::ostream& out, const FitReport& report, char delimiter) {
  const auto flags = out.flags();
  const auto precision = out.precision();
  out << std::setprecision(17);
  const auto names = parameter_names(report.theta_hat.beta.size());
  const auto est = report.theta_hat.to_flat();
  const auto init = report.theta_initial.to_flat();
  out << "parameter" << delimiter << "estimate" << delimiter << "se" << delimiter << "initial" << '\n';
  for (std::size_t j = 0; j < names.size(); ++j) {
    out << names[j] << delimiter << est[j] << delimiter;
    if (report.standard_errors) out << (*report.standard_errors)[j];
    out << delimiter << init[j] << '\n';
  }
  out.flags(flags);
  out.precision(precision);
}

ParameterVector read_theta(std::istream& in) {
  std::map<std::string, double> values;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    const std::string key = trim(line.substr(0, eq));
    const bool wanted = key == "gamma1" || key == "gamma2" || key == "alpha" ||
                        (key.rfind("beta", 0) == 0 && key.size() > 4 &&
                         key.find_first_not_of("0123456789", 4) == std::string::npos);
    if (!wanted) continue;
    const std::string text = trim(line.substr(eq + 1));
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(text, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != text.size()) {
      throw DataError("theta file line " + std::to_string(line_no) + ": cannot parse value for " + key);
    }
    values[key] = v;
  }
  ParameterVector theta;
  for (std::size_t j = 0;; ++j) {
    const auto it = values.find("beta" + std::to_string(j));
    if (it == values.end()) break;
    theta.beta.push_back(it->second);
  }
  for (const char* key : {"gamma1", "gamma2", "alpha"}) {
    if (!values.contains(key)) throw DataError(std::string("theta file is missing ") + key);
  }
  if (theta.beta.empty()) throw DataError("theta file is missing beta0");
  theta.gamma = {values["gamma1"], values["gamma2"]};
  theta.alpha = values["alpha"];
  try {
    theta.validate();
  } catch (const std::exception& e) {
    throw DataError(std::string("theta file: ") + e.what());
  }
  return theta;
}

}  // namespace bctcure
