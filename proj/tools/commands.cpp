#include "commands.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

#include "bctcure/errors.hpp"
#include "bctcure/inference.hpp"
#include "bctcure/simulation.hpp"

namespace bctcure::cli {

namespace {

namespace fs = std::filesystem;

std::ofstream open_output(const fs::path& dir, const std::string& name) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError("cannot create output directory " + dir.string() + ": " + ec.message());
  const fs::path path = dir / name;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  return out;
}

Scenario scenario_or_default(const RunConfig& config) { return config.scenario ? *config.scenario : Scenario{BinaryScenario{}}; }

std::vector<double> distinct_first_covariate(const Dataset& data) {
  std::set<double> values;
  for (const auto& r : data.records) {
    if (!r.x.empty()) values.insert(r.x[0]);
  }
  return {values.begin(), values.end()};
}

InitialValueOptions init_options_for(const Dataset& data, const RunConfig& config) {
  InitialValueOptions options;
  options.alpha_grid = default_alpha_grid(config.fit.alpha_grid_points);
  options.moments = config.fit.moments;
  const auto values = distinct_first_covariate(data);
  if (values.empty()) throw DegenerateDataError("fit: dataset has no covariate column");
  options.low = config.fit.group_low.value_or(GroupSelector{values.front(), values.front()});
  options.high = config.fit.group_high.value_or(GroupSelector{values.back(), values.back()});
  return options;
}

std::vector<std::vector<double>> cure_groups(const Dataset& data) {
  const auto values = distinct_first_covariate(data);
  std::vector<std::vector<double>> groups;
  if (data.covariate_dim() != 1) return groups;
  if (values.size() <= 20) {
    for (double v : values) groups.push_back({v});
  } else {
    groups = {{values.front()}, {values.back()}};
  }
  return groups;
}

std::string sweep_label(const std::string& name, double value) { return name + "_" + format_double(value); }

}  // namespace

int cmd_simulate(const RunConfig& config, std::ostream& log) {
  const Scenario scenario = scenario_or_default(config);
  RandomStream stream(config.seed, 0);
  const Dataset data = generate(scenario, stream);
  auto out = open_output(config.out, "data.csv");
  write_csv(out, data);
  if (!out) throw DataError("failed writing data.csv");

  log << describe(scenario) << '\n';
  log << "n = " << data.size() << ", censored = " << std::fixed << std::setprecision(1)
      << 100.0 * data.censoring_fraction() << "%\n";
  std::map<double, std::size_t> sizes;
  if (std::holds_alternative<BinaryScenario>(scenario)) {
    for (const auto& r : data.records) ++sizes[r.x[0]];
    for (const auto& [x, count] : sizes) log << "group x1 = " << format_double(x) << ": " << count << '\n';
  }
  log << "wrote " << (config.out / "data.csv").string() << '\n';
  log.unsetf(std::ios::floatfield);
  return kOk;
}

int cmd_fit(const fs::path& data_file, const RunConfig& config, std::ostream& log) {
  const Dataset data = read_csv(data_file);
  data.validate();

  FitReport report;
  if (config.fit.start) {
    report.theta_initial = ParameterVector::from_flat(*config.fit.start);
  } else {
    const InitialValues init = initial_values(data, init_options_for(data, config));
    report.theta_initial = init.theta;
    if (init.clamped) report.warnings.push_back("Kaplan-Meier cure estimate clamped into [0.01, 0.99]");
  }
  const SqhResult fit = fit_sqh(data, report.theta_initial, config.sqh);
  report.theta_hat = ParameterVector::from_flat(fit.theta_hat);
  report.log_likelihood = fit.objective;
  report.iterations = fit.iterations;
  report.converged = fit.converged;
  report.evaluations = fit.evaluations;
  report.wall_time = fit.wall_time;
  const auto groups = cure_groups(data);
  const auto rates = group_cure_rates(report.theta_hat, groups);
  for (std::size_t g = 0; g < groups.size(); ++g) report.cure_rates.emplace_back(groups[g], rates[g]);
  if (data.size() >= 5) {
    report.residual_diagnostics = ks_normality(quantile_residuals(data, report.theta_hat, config.residual_sets, config.seed));
  }
  if (!report.converged) report.warnings.push_back("iteration cap reached before tau < kappa");

  {
    auto out = open_output(config.out, "fit_report.txt");
    write_fit_report(out, report);
  }
  {
    auto out = open_output(config.out, "fit_table.csv");
    write_fit_table(out, report);
  }
  {
    auto out = open_output(config.out, "trace.csv");
    write_trace(out, fit.trace);
  }

  const auto names = parameter_names(report.theta_hat.beta.size());
  const auto est = report.theta_hat.to_flat();
  log << std::setprecision(6);
  for (std::size_t j = 0; j < names.size(); ++j) log << names[j] << " = " << est[j] << '\n';
  log << "log-likelihood = " << report.log_likelihood << ", iterations = " << report.iterations
      << (report.converged ? " (converged)" : " (iteration cap)") << '\n';
  for (const auto& [x, p] : report.cure_rates) log << "cure rate at x1 = " << format_double(x[0]) << ": " << p << '\n';
  for (const auto& w : report.warnings) log << "warning: " << w << '\n';
  return report.converged ? kOk : kNonConvergence;
}

int cmd_mc_study(const RunConfig& config, std::ostream& log) {
  const Scenario scenario = scenario_or_default(config);
  McOptions base;
  base.replications = config.mc.replications;
  base.fit = config.sqh;
  base.init = config.mc.init;
  base.mode = config.mc.mode;
  base.alpha_grid_points = config.mc.alpha_grid_points;
  base.perturbation = config.mc.perturbation;
  base.survival_targets = config.mc.survival_targets;
  if (base.survival_targets.empty() && std::holds_alternative<BinaryScenario>(scenario)) {
    base.survival_targets = {{2.0, {1.0}}, {2.0, {0.0}}};
  }
  base.workers = config.workers;
  base.seed = config.seed;

  std::vector<std::pair<std::string, McOptions>> points;
  auto add_sweep = [&](const std::vector<double>& values, const std::string& name, auto apply) {
    for (double v : values) {
      McOptions o = base;
      apply(o.fit, v);
      points.emplace_back(sweep_label(name, v), o);
    }
  };
  add_sweep(config.mc.zeta_sweep, "zeta", [](SqhConfig& c, double v) { c.zeta = v; });
  add_sweep(config.mc.lambda_sweep, "lambda", [](SqhConfig& c, double v) { c.lambda = v; });
  add_sweep(config.mc.rho_sweep, "rho", [](SqhConfig& c, double v) { c.rho = v; });
  add_sweep(config.mc.epsilon_sweep, "epsilon", [](SqhConfig& c, double v) { c.epsilon0 = v; });
  if (points.empty()) points.emplace_back("", base);

  for (const auto& [label, options] : points) {
    const McReport report = monte_carlo_study(scenario, options);
    const std::string stem = label.empty() ? "mc_report" : "mc_report_" + label;
    {
      auto out = open_output(config.out, stem + ".txt");
      write_report_table(out, report);
    }
    {
      auto out = open_output(config.out, stem + ".csv");
      write_report_delimited(out, report);
    }
    if (!label.empty()) log << "== " << label << '\n';
    write_report_table(log, report);
  }
  return kOk;
}

int cmd_bootstrap(const fs::path& data_file, const RunConfig& config, std::ostream& log) {
  const Dataset data = read_csv(data_file);
  BootstrapOptions options;
  options.resamples = config.bootstrap_resamples;
  options.fit = config.sqh;
  options.workers = config.workers;
  options.seed = config.seed;
  if (config.fit.start) {
    options.fixed_start = ParameterVector::from_flat(*config.fit.start);
  } else {
    options.init = init_options_for(data, config);
  }
  const BootstrapResult result = bootstrap_se(data, options);
  const auto names = parameter_names(data.covariate_dim() + 1);

  {
    auto out = open_output(config.out, "bootstrap_se.txt");
    out << std::setprecision(17);
    for (std::size_t j = 0; j < names.size(); ++j) out << "se_" << names[j] << " = " << result.standard_errors[j] << '\n';
    out << "resamples = " << options.resamples << '\n';
    out << "completed = " << result.completed << '\n';
    out << "failed = " << result.failed << '\n';
    out << "seed = " << options.seed << '\n';
  }
  {
    auto out = open_output(config.out, "bootstrap_estimates.csv");
    out << std::setprecision(17);
    for (std::size_t j = 0; j < names.size(); ++j) out << (j ? "," : "") << names[j];
    out << '\n';
    for (const auto& e : result.estimates) {
      for (std::size_t j = 0; j < e.size(); ++j) out << (j ? "," : "") << e[j];
      out << '\n';
    }
  }
  log << std::setprecision(6);
  for (std::size_t j = 0; j < names.size(); ++j) log << "se(" << names[j] << ") = " << result.standard_errors[j] << '\n';
  log << result.completed << " of " << options.resamples << " resamples completed\n";
  return kOk;
}

int cmd_residuals(const fs::path& data_file, const fs::path& theta_file, const RunConfig& config, std::ostream& log) {
  const Dataset data = read_csv(data_file);
  std::ifstream theta_in(theta_file);
  if (!theta_in) throw DataError("cannot open " + theta_file.string());
  const ParameterVector theta = read_theta(theta_in);
  if (theta.beta.size() != data.covariate_dim() + 1) {
    throw DataError("theta has " + std::to_string(theta.beta.size()) + " regression coefficients for " +
                    std::to_string(data.covariate_dim()) + " covariates");
  }
  const auto residuals = quantile_residuals(data, theta, config.residual_sets, config.seed);
  const KsResult ks = ks_normality(residuals);
  {
    auto out = open_output(config.out, "qq.csv");
    out << std::setprecision(17) << "theoretical,residual\n";
    const double n = static_cast<double>(residuals.size());
    for (std::size_t i = 0; i < residuals.size(); ++i) {
      out << normal_quantile((static_cast<double>(i) + 0.5) / n) << ',' << residuals[i] << '\n';
    }
  }
  {
    auto out = open_output(config.out, "ks.txt");
    out << std::setprecision(17) << "ks_statistic = " << ks.statistic << "\nks_p_value = " << ks.p_value
        << "\nn = " << residuals.size() << "\nsets = " << config.residual_sets << '\n';
  }
  log << std::setprecision(6) << "KS statistic = " << ks.statistic << ", p-value = " << ks.p_value << '\n';
  return kOk;
}

int cmd_km(const fs::path& data_file, const RunConfig& config, std::ostream& log) {
  const Dataset data = read_csv(data_file);
  std::vector<std::pair<std::string, KmCurve>> curves{{"all", kaplan_meier(data)}};
  const auto values = distinct_first_covariate(data);
  if (values.size() > 1 && values.size() <= 20) {
    for (double v : values) curves.emplace_back("x1_" + format_double(v), kaplan_meier(select_group(data, {v, v})));
  }
  for (const auto& [label, curve] : curves) {
    auto out = open_output(config.out, "km_" + label + ".csv");
    out << std::setprecision(17) << "time,survival\n0," << 1.0 << '\n';
    for (std::size_t j = 0; j < curve.times.size(); ++j) out << curve.times[j] << ',' << curve.survival[j] << '\n';
    log << std::setprecision(6) << label << ": " << curve.times.size() << " event times, plateau "
        << curve.value_at_last_observation() << '\n';
  }
  return kOk;
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e)) return kConfigError;
  if (dynamic_cast<const DataError*>(&e) || dynamic_cast<const DegenerateDataError*>(&e) ||
      dynamic_cast<const EvaluationError*>(&e)) {
    return kDataError;
  }
  if (dynamic_cast<const StallError*>(&e)) return kStall;
  if (dynamic_cast<const NoConvergenceError*>(&e) || dynamic_cast<const AggregateFailure*>(&e)) return kNonConvergence;
  return kInternal;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Box-Cox transformation cure model fitting with the SQH optimizer"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  std::optional<std::size_t> workers;
  std::string data_path;
  std::string theta_path;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "INI configuration file");
    sub->add_option("--seed", seed, "master random seed");
    sub->add_option("--out", out_dir, "output directory");
    sub->add_option("--workers", workers, "parallel workers")->check(CLI::PositiveNumber);
  };
  auto* simulate = app.add_subcommand("simulate", "generate a censored dataset from a scenario");
  auto* fit = app.add_subcommand("fit", "fit the BCT cure model to a CSV dataset");
  auto* mc = app.add_subcommand("mc-study", "Monte-Carlo bias/RMSE study");
  auto* boot = app.add_subcommand("bootstrap", "bootstrap standard errors");
  auto* resid = app.add_subcommand("residuals", "randomized quantile residuals and KS test");
  auto* km = app.add_subcommand("km", "Kaplan-Meier curves");
  for (auto* sub : {simulate, fit, mc, boot, resid, km}) common(sub);
  for (auto* sub : {fit, boot, resid, km}) sub->add_option("--data", data_path, "dataset CSV (y,delta,x1,...)")->required();
  resid->add_option("--theta", theta_path, "parameter file (key = value, e.g. fit_report.txt)")->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << '\n';
    return kConfigError;
  }

  try {
    RunConfig config = config_path.empty() ? build_run_config(IniDocument{}) : load_run_config(config_path);
    if (seed) config.seed = *seed;
    if (out_dir) config.out = *out_dir;
    if (workers) config.workers = *workers;

    if (simulate->parsed()) return cmd_simulate(config, out);
    if (fit->parsed()) return cmd_fit(data_path, config, out);
    if (mc->parsed()) return cmd_mc_study(config, out);
    if (boot->parsed()) return cmd_bootstrap(data_path, config, out);
    if (resid->parsed()) return cmd_residuals(data_path, theta_path, config, out);
    if (km->parsed()) return cmd_km(data_path, config, out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return exit_code_for(e);
  }
  return kInternal;
}

}  // namespace bctcure::cli
