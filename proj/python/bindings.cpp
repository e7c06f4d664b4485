#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "bctcure/errors.hpp"
#include "bctcure/inference.hpp"
#include "bctcure/io.hpp"
#include "bctcure/simulation.hpp"
#include "bctcure/sqh.hpp"

namespace py = pybind11;
using namespace bctcure;

namespace {

Dataset make_dataset(const std::vector<double>& y, const std::vector<int>& delta, const std::vector<std::vector<double>>& x) {
  if (y.size() != delta.size() || y.size() != x.size()) throw DataError("y, delta and x must have the same length");
  Dataset d;
  d.records.reserve(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) d.records.push_back({y[i], delta[i], x[i]});
  if (!d.records.empty()) {
    for (std::size_t j = 0; j < d.records.front().x.size(); ++j) d.covariate_names.push_back("x" + std::to_string(j + 1));
  }
  d.validate();
  return d;
}

py::dict fit_to_dict(const SqhResult& r) {
  py::dict out;
  out["theta0"] = r.theta0;
  out["theta_hat"] = r.theta_hat;
  out["log_likelihood"] = r.objective;
  out["initial_log_likelihood"] = r.objective0;
  out["iterations"] = r.iterations;
  out["converged"] = r.converged;
  out["evaluations"] = r.evaluations;
  out["wall_time"] = r.wall_time;
  py::list trace;
  for (const auto& e : r.trace) {
    py::dict row;
    row["k"] = e.k;
    row["theta"] = e.theta;
    row["objective"] = e.objective;
    row["epsilon"] = e.epsilon;
    row["tau"] = e.tau;
    row["rejections"] = e.rejections;
    trace.append(row);
  }
  out["trace"] = trace;
  return out;
}

py::dict report_to_dict(const McReport& r) {
  auto rows = [](const std::vector<McQuantity>& qs) {
    py::dict d;
    for (const auto& q : qs) {
      py::dict row;
      row["true"] = q.true_value;
      row["mean"] = q.mean_estimate;
      row["bias"] = q.bias;
      row["mae"] = q.mean_abs_error;
      row["rmse"] = q.rmse;
      d[py::str(q.name)] = row;
    }
    return d;
  };
  py::dict out;
  out["scenario"] = r.scenario;
  out["parameters"] = rows(r.parameters);
  out["derived"] = rows(r.derived);
  out["requested"] = r.requested;
  out["completed"] = r.completed;
  out["diverged"] = r.diverged;
  out["iteration_cap"] = r.iteration_cap;
  out["mean_iterations"] = r.mean_iterations;
  out["estimates"] = r.estimates;
  out["wall_time"] = r.wall_time;
  return out;
}

}  // namespace

PYBIND11_MODULE(_bctcure, m) {
  m.doc() = "Box-Cox transformation cure model with a gradient-free SQH optimizer";

  py::register_exception<DomainError>(m, "DomainError", PyExc_ValueError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<DataError>(m, "DataError", PyExc_ValueError);
  py::register_exception<DegenerateDataError>(m, "DegenerateDataError", PyExc_ValueError);
  py::register_exception<EvaluationError>(m, "EvaluationError", PyExc_ArithmeticError);
  py::register_exception<StallError>(m, "StallError", PyExc_RuntimeError);
  py::register_exception<NoConvergenceError>(m, "NoConvergenceError", PyExc_RuntimeError);
  py::register_exception<AggregateFailure>(m, "AggregateFailure", PyExc_RuntimeError);

  py::class_<WeibullParams>(m, "WeibullParams")
      .def(py::init<double, double>(), py::arg("gamma1"), py::arg("gamma2"))
      .def_readwrite("gamma1", &WeibullParams::gamma1)
      .def_readwrite("gamma2", &WeibullParams::gamma2)
      .def("__repr__", [](const WeibullParams& p) {
        std::ostringstream s;
        s << "WeibullParams(gamma1=" << p.gamma1 << ", gamma2=" << p.gamma2 << ")";
        return s.str();
      });

  m.def("weibull_cdf", &weibull_cdf, py::arg("y"), py::arg("params"));
  m.def("weibull_pdf", &weibull_pdf, py::arg("y"), py::arg("params"));
  m.def("weibull_quantile", &weibull_quantile, py::arg("u"), py::arg("params"));
  m.def("weibull_mean", &weibull_mean);
  m.def("weibull_variance", &weibull_variance);
  m.def("weibull_moment_match", &weibull_moment_match, py::arg("mean"), py::arg("variance"));

  py::class_<ParameterVector>(m, "ParameterVector")
      .def(py::init([](std::vector<double> beta, double gamma1, double gamma2, double alpha) {
             ParameterVector p{std::move(beta), {gamma1, gamma2}, alpha};
             p.validate();
             return p;
           }),
           py::arg("beta"), py::arg("gamma1"), py::arg("gamma2"), py::arg("alpha"))
      .def_static("from_flat", [](const std::vector<double>& flat) { return ParameterVector::from_flat(flat); })
      .def("to_flat", &ParameterVector::to_flat)
      .def_readwrite("beta", &ParameterVector::beta)
      .def_readwrite("gamma", &ParameterVector::gamma)
      .def_readwrite("alpha", &ParameterVector::alpha)
      .def("__repr__", [](const ParameterVector& p) {
        std::ostringstream s;
        s << "ParameterVector(flat=[";
        const auto flat = p.to_flat();
        for (std::size_t i = 0; i < flat.size(); ++i) s << (i ? ", " : "") << flat[i];
        s << "])";
        return s.str();
      });

  py::class_<Dataset>(m, "Dataset")
      .def(py::init(&make_dataset), py::arg("y"), py::arg("delta"), py::arg("x"))
      .def("__len__", &Dataset::size)
      .def_property_readonly("y", [](const Dataset& d) {
        std::vector<double> v;
        for (const auto& r : d.records) v.push_back(r.y);
        return v;
      })
      .def_property_readonly("delta", [](const Dataset& d) {
        std::vector<int> v;
        for (const auto& r : d.records) v.push_back(r.delta);
        return v;
      })
      .def_property_readonly("x", [](const Dataset& d) {
        std::vector<std::vector<double>> v;
        for (const auto& r : d.records) v.push_back(r.x);
        return v;
      })
      .def("censoring_fraction", &Dataset::censoring_fraction);

  m.def("read_csv", py::overload_cast<const std::filesystem::path&>(&read_csv), py::arg("path"));
  m.def("write_csv", py::overload_cast<const std::filesystem::path&, const Dataset&>(&write_csv), py::arg("path"),
        py::arg("data"));

  m.def("box_cox", &box_cox, py::arg("z"), py::arg("alpha"));
  m.def("covariate_link", &covariate_link, py::arg("alpha"), py::arg("eta"));
  m.def(
      "population_survival",
      [](double y, const std::vector<double>& x, const ParameterVector& t) { return population_survival(y, x, t); },
      py::arg("y"), py::arg("x"), py::arg("theta"));
  m.def(
      "population_density",
      [](double y, const std::vector<double>& x, const ParameterVector& t) { return population_density(y, x, t); },
      py::arg("y"), py::arg("x"), py::arg("theta"));
  m.def(
      "cure_rate", [](const std::vector<double>& x, const ParameterVector& t) { return cure_rate(x, t); }, py::arg("x"),
      py::arg("theta"));
  m.def("log_likelihood", &log_likelihood, py::arg("theta"), py::arg("data"));

  py::class_<SqhConfig>(m, "SqhConfig")
      .def(py::init<>())
      .def_readwrite("epsilon0", &SqhConfig::epsilon0)
      .def_readwrite("lambda_", &SqhConfig::lambda)
      .def_readwrite("zeta", &SqhConfig::zeta)
      .def_readwrite("rho", &SqhConfig::rho)
      .def_readwrite("kappa", &SqhConfig::kappa)
      .def_readwrite("max_iter", &SqhConfig::max_iter)
      .def_readwrite("gauss_seidel", &SqhConfig::gauss_seidel)
      .def_property(
          "window", [](const SqhConfig& c) { return c.inner.window; }, [](SqhConfig& c, double v) { c.inner.window = v; })
      .def_property(
          "max_step_ups", [](const SqhConfig& c) { return c.inner.max_step_ups; },
          [](SqhConfig& c, std::size_t v) { c.inner.max_step_ups = v; });

  m.def(
      "sqh_maximize",
      [](const std::function<double(std::vector<double>)>& f, const std::vector<double>& theta0, std::vector<double> lower,
         std::vector<double> upper, const SqhConfig& config) {
        const Objective objective = [&f](std::span<const double> t) {
          py::gil_scoped_acquire gil;
          return f(std::vector<double>(t.begin(), t.end()));
        };
        const AdmissibleBox box{std::move(lower), std::move(upper)};
        return fit_to_dict(sqh_maximize(objective, theta0, box, config));
      },
      py::arg("objective"), py::arg("theta0"), py::arg("lower"), py::arg("upper"), py::arg("config") = SqhConfig{},
      "Maximize a Python callable over a box with the SQH scheme.");

  py::class_<BinaryScenario>(m, "BinaryScenario")
      .def(py::init<>())
      .def_readwrite("n1", &BinaryScenario::n1)
      .def_readwrite("n2", &BinaryScenario::n2)
      .def_readwrite("p01", &BinaryScenario::p01)
      .def_readwrite("p00", &BinaryScenario::p00)
      .def_readwrite("alpha", &BinaryScenario::alpha)
      .def_readwrite("gamma", &BinaryScenario::gamma)
      .def_readwrite("c1", &BinaryScenario::c1)
      .def_readwrite("c2", &BinaryScenario::c2)
      .def("true_theta", &BinaryScenario::true_theta);
  py::class_<ContinuousScenario>(m, "ContinuousScenario")
      .def(py::init<>())
      .def_readwrite("n", &ContinuousScenario::n)
      .def_readwrite("p_high", &ContinuousScenario::p_high)
      .def_readwrite("p_low", &ContinuousScenario::p_low)
      .def_readwrite("x_min", &ContinuousScenario::x_min)
      .def_readwrite("x_max", &ContinuousScenario::x_max)
      .def_readwrite("alpha", &ContinuousScenario::alpha)
      .def_readwrite("gamma", &ContinuousScenario::gamma)
      .def_readwrite("c", &ContinuousScenario::c)
      .def("true_theta", &ContinuousScenario::true_theta);

  m.def(
      "true_params_binary",
      [](double p01, double p00, double alpha) {
        const BetaPair b = true_params_binary(p01, p00, alpha);
        return std::make_pair(b.beta0, b.beta1);
      },
      py::arg("p01"), py::arg("p00"), py::arg("alpha"));
  m.def(
      "true_params_continuous",
      [](double p_high, double p_low, double x_min, double x_max, double alpha) {
        const BetaPair b = true_params_continuous(p_high, p_low, x_min, x_max, alpha);
        return std::make_pair(b.beta0, b.beta1);
      },
      py::arg("p_high"), py::arg("p_low"), py::arg("x_min"), py::arg("x_max"), py::arg("alpha"));
  m.def("generate_binary", py::overload_cast<const BinaryScenario&, std::uint64_t>(&generate_binary), py::arg("scenario"),
        py::arg("seed"));
  m.def("generate_continuous", py::overload_cast<const ContinuousScenario&, std::uint64_t>(&generate_continuous),
        py::arg("scenario"), py::arg("seed"));

  m.def(
      "monte_carlo_study",
      [](const std::variant<BinaryScenario, ContinuousScenario>& scenario, std::size_t replications, const std::string& init,
         double perturbation, const SqhConfig& fit, std::uint64_t seed, std::size_t workers) {
        McOptions options;
        options.replications = replications;
        options.fit = fit;
        options.perturbation = perturbation;
        options.seed = seed;
        options.workers = workers;
        if (init == "km") {
          options.init = InitStrategy::KaplanMeier;
        } else if (init == "truth") {
          options.init = InitStrategy::Truth;
        } else if (init == "perturbed") {
          options.init = InitStrategy::PerturbedTruth;
        } else if (init == "oracle") {
          options.mode = FitMode::Oracle;
        } else {
          throw ConfigError("init", "expected km, truth, perturbed or oracle");
        }
        McReport report;
        {
          py::gil_scoped_release release;
          report = monte_carlo_study(scenario, options);
        }
        return report_to_dict(report);
      },
      py::arg("scenario"), py::arg("replications") = 100, py::arg("init") = "perturbed", py::arg("perturbation") = 0.2,
      py::arg("fit") = SqhConfig{}, py::arg("seed") = 0, py::arg("workers") = 1);

  m.def(
      "kaplan_meier",
      [](const Dataset& d) {
        const KmCurve km = kaplan_meier(d);
        return std::make_pair(km.times, km.survival);
      },
      py::arg("data"), "Returns (event_times, survival) of the product-limit estimate.");

  m.def(
      "initial_values",
      [](const Dataset& d, std::pair<double, double> low, std::pair<double, double> high, std::size_t grid_points) {
        InitialValueOptions options;
        options.low = {low.first, low.second};
        options.high = {high.first, high.second};
        options.alpha_grid = default_alpha_grid(grid_points);
        const InitialValues v = initial_values(d, options);
        py::dict out;
        out["theta"] = v.theta;
        out["log_likelihood"] = v.log_likelihood;
        out["cure_low"] = v.cure_low;
        out["cure_high"] = v.cure_high;
        out["clamped"] = v.clamped;
        return out;
      },
      py::arg("data"), py::arg("low") = std::make_pair(0.0, 0.0), py::arg("high") = std::make_pair(1.0, 1.0),
      py::arg("alpha_grid_points") = 21);

  m.def(
      "fit",
      [](const Dataset& d, const ParameterVector& theta0, const SqhConfig& config) {
        SqhResult r;
        {
          py::gil_scoped_release release;
          r = fit_sqh(d, theta0, config);
        }
        return fit_to_dict(r);
      },
      py::arg("data"), py::arg("theta0"), py::arg("config") = SqhConfig{});

  m.def(
      "bootstrap_se",
      [](const Dataset& d, std::size_t resamples, std::uint64_t seed, std::optional<ParameterVector> start, std::size_t workers) {
        BootstrapOptions options;
        options.resamples = resamples;
        options.seed = seed;
        options.fixed_start = std::move(start);
        options.workers = workers;
        BootstrapResult r;
        {
          py::gil_scoped_release release;
          r = bootstrap_se(d, options);
        }
        py::dict out;
        out["standard_errors"] = r.standard_errors;
        out["completed"] = r.completed;
        out["failed"] = r.failed;
        out["estimates"] = r.estimates;
        return out;
      },
      py::arg("data"), py::arg("resamples") = 500, py::arg("seed") = 0, py::arg("start") = py::none(), py::arg("workers") = 1);

  m.def("normal_quantile", &normal_quantile, py::arg("p"));
  m.def("quantile_residuals", &quantile_residuals, py::arg("data"), py::arg("theta"), py::arg("n_sets") = 5,
        py::arg("seed") = 0);
  m.def(
      "ks_normality",
      [](std::vector<double> r) {
        const KsResult ks = ks_normality(std::move(r));
        return std::make_pair(ks.statistic, ks.p_value);
      },
      py::arg("residuals"), "Returns (statistic, p_value).");
  m.def("group_cure_rates", &group_cure_rates, py::arg("theta"), py::arg("group_values"));
}
