#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>

#include "bctcure/errors.hpp"
#include "bctcure/parallel.hpp"
#include "bctcure/simulation.hpp"

namespace bctcure {

namespace {

struct ReplicationOutcome {
  std::vector<double> theta;
  std::size_t iterations = 0;
  bool capped = false;
};

std::string format_x(const std::vector<double>& x) {
  std::ostringstream out;
  for (std::size_t j = 0; j < x.size(); ++j) out << (j ? ";" : "") << x[j];
  return out.str();
}

McQuantity summarize(std::string name, double truth, const std::vector<double>& estimates) {
  McQuantity q;
  q.name = std::move(name);
  q.true_value = truth;
  const double m = static_cast<double>(estimates.size());
  double sum = 0.0;
  double abs_sum = 0.0;
  double sq_sum = 0.0;
  for (double e : estimates) {
    sum += e;
    abs_sum += std::abs(e - truth);
    sq_sum += (e - truth) * (e - truth);
  }
  q.mean_estimate = sum / m;
  q.bias = std::abs(q.mean_estimate - truth);
  q.mean_abs_error = abs_sum / m;
  q.rmse = std::sqrt(sq_sum / m);
  return q;
}

std::vector<std::vector<double>> default_cure_targets(const Scenario& scenario) {
  if (const auto* c = std::get_if<ContinuousScenario>(&scenario)) return {{c->x_min}, {c->x_max}};
  return {{1.0}, {0.0}};
}

}  // namespace

const McQuantity& McReport::parameter(const std::string& name) const {
  for (const auto& q : parameters) {
    if (q.name == name) return q;
  }
  throw std::out_of_range("McReport: no parameter " + name);
}

const McQuantity& McReport::quantity(const std::string& name) const {
  for (const auto& q : derived) {
    if (q.name == name) return q;
  }
  throw std::out_of_range("McReport: no derived quantity " + name);
}

InitialValueOptions default_init_options(const Scenario& scenario, std::size_t alpha_grid_points) {
  InitialValueOptions options;
  options.alpha_grid = default_alpha_grid(alpha_grid_points);
  if (const auto* c = std::get_if<ContinuousScenario>(&scenario)) {
    // outer quarters of the covariate range stand in for the two extreme groups
    const double quarter = 0.25 * (c->x_max - c->x_min);
    options.low = {c->x_min, c->x_min + quarter};
    options.high = {c->x_max - quarter, c->x_max};
  } else {
    options.low = {0.0, 0.0};
    options.high = {1.0, 1.0};
  }
  return options;
}

McReport monte_carlo_study(const Scenario& scenario, const McOptions& options) {
  const auto start = std::chrono::steady_clock::now();
  if (options.replications < 1) throw DomainError("monte_carlo_study: need at least one replication");
  std::visit([](const auto& s) { s.validate(); }, scenario);
  options.fit.validate();

  const ParameterVector truth = true_theta(scenario);
  const auto truth_flat = truth.to_flat();
  const AdmissibleBox box = AdmissibleBox::for_bct(truth.beta.size());
  const InitialValueOptions init_options = default_init_options(scenario, options.alpha_grid_points);

  std::vector<std::optional<ReplicationOutcome>> outcomes(options.replications);
  parallel_for(options.replications, options.workers, [&](std::size_t r) {
    RandomStream stream(options.seed, r);
    try {
      const Dataset data = generate(scenario, stream);
      if (options.mode == FitMode::Oracle) {
        outcomes[r] = ReplicationOutcome{truth_flat, 0, false};
        return;
      }
      ParameterVector start = truth;
      if (options.init == InitStrategy::KaplanMeier) {
        start = initial_values(data, init_options).theta;
      } else if (options.init == InitStrategy::PerturbedTruth) {
        auto flat = truth_flat;
        for (std::size_t j = 0; j < flat.size(); ++j) {
          flat[j] = std::clamp(flat[j] * (1.0 + stream.uniform(-options.perturbation, options.perturbation)), box.lower[j],
                               box.upper[j]);
        }
        start = ParameterVector::from_flat(flat);
      }
      const SqhResult fit = fit_sqh(data, start, options.fit);
      if (!std::isfinite(fit.objective)) return;
      outcomes[r] = ReplicationOutcome{fit.theta_hat, fit.iterations, !fit.converged};
    } catch (const std::exception&) {
      // diverged: left empty
    }
  });

  McReport report;
  report.scenario = describe(scenario);
  report.requested = options.replications;
  report.seed = options.seed;
  double iteration_sum = 0.0;
  for (std::size_t r = 0; r < outcomes.size(); ++r) {
    if (!outcomes[r]) {
      ++report.diverged;
      continue;
    }
    report.estimates.push_back(outcomes[r]->theta);
    report.completed_indices.push_back(r);
    iteration_sum += static_cast<double>(outcomes[r]->iterations);
    if (outcomes[r]->capped) ++report.iteration_cap;
  }
  report.completed = report.estimates.size();
  if (report.completed == 0) throw AggregateFailure("monte_carlo_study: every replication failed");
  report.mean_iterations = iteration_sum / static_cast<double>(report.completed);

  const auto names = parameter_names(truth.beta.size());
  std::vector<double> column(report.completed);
  for (std::size_t j = 0; j < names.size(); ++j) {
    for (std::size_t r = 0; r < report.completed; ++r) column[r] = report.estimates[r][j];
    report.parameters.push_back(summarize(names[j], truth_flat[j], column));
  }

  const auto cure_targets = options.cure_targets.empty() ? default_cure_targets(scenario) : options.cure_targets;
  for (const auto& x : cure_targets) {
    for (std::size_t r = 0; r < report.completed; ++r) {
      column[r] = cure_rate(x, ParameterVector::from_flat(report.estimates[r]));
    }
    report.derived.push_back(summarize("cure[x=" + format_x(x) + "]", cure_rate(x, truth), column));
  }
  for (const auto& target : options.survival_targets) {
    for (std::size_t r = 0; r < report.completed; ++r) {
      column[r] = population_survival(target.y, target.x, ParameterVector::from_flat(report.estimates[r]));
    }
    std::ostringstream name;
    name << "S_p[y=" << target.y << ",x=" << format_x(target.x) << "]";
    report.derived.push_back(summarize(name.str(), population_survival(target.y, target.x, truth), column));
  }

  report.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

void write_report_table(std::ostream& out, const McReport& report) {
  const auto flags = out.flags();
  const auto precision = out.precision();
  out << "# " << report.scenario << '\n';
  out << "# replications requested=" << report.requested << " completed=" << report.completed
      << " diverged=" << report.diverged << " iteration_cap=" << report.iteration_cap << " seed=" << report.seed
      << '\n';
  out << std::left << std::setw(22) << "quantity" << std::right;
  for (const char* h : {"true", "mean", "bias", "MAE", "RMSE"}) out << std::setw(11) << h;
  out << '\n';
  out << std::fixed << std::setprecision(3);
  auto row = [&](const McQuantity& q) {
    out << std::left << std::setw(22) << q.name << std::right << std::setw(11) << q.true_value << std::setw(11)
        << q.mean_estimate << std::setw(11) << q.bias << std::setw(11) << q.mean_abs_error << std::setw(11) << q.rmse
        << '\n';
  };
  for (const auto& q : report.parameters) row(q);
  for (const auto& q : report.derived) row(q);
  out << "# mean iterations " << std::setprecision(2) << report.mean_iterations << ", wall time "
      << std::setprecision(3) << report.wall_time << " s\n";
  out.flags(flags);
  out.precision(precision);
}

void write_report_delimited(std::ostream& out, const McReport& report, char delimiter) {
  const auto flags = out.flags();
  const auto precision = out.precision();
  out << std::setprecision(17);
  out << "scenario" << delimiter << "quantity" << delimiter << "metric" << delimiter << "value\n";
  auto emit = [&](const std::string& quantity, const char* metric, auto value) {
    out << '"' << report.scenario << '"' << delimiter << quantity << delimiter << metric << delimiter << value << '\n';
  };
  for (const auto* group : {&report.parameters, &report.derived}) {
    for (const auto& q : *group) {
      emit(q.name, "true", q.true_value);
      emit(q.name, "mean", q.mean_estimate);
      emit(q.name, "bias", q.bias);
      emit(q.name, "mae", q.mean_abs_error);
      emit(q.name, "rmse", q.rmse);
    }
  }
  emit("replications", "requested", report.requested);
  emit("replications", "completed", report.completed);
  emit("replications", "diverged", report.diverged);
  emit("replications", "iteration_cap", report.iteration_cap);
  emit("iterations", "mean", report.mean_iterations);
  emit("run", "seed", report.seed);
  emit("run", "wall_time_seconds", report.wall_time);
  out.flags(flags);
  out.precision(precision);
}

}  // namespace bctcure
