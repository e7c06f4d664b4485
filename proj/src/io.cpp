#include "bctcure/io.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <istream>
#include <ostream>
#include <sstream>

#include "bctcure/errors.hpp"

namespace bctcure {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(std::string_view s, char delimiter) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(delimiter, start);
    parts.push_back(trim(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return parts;
}

bool parse_double(std::string_view text, double& out) {
  if (text.empty()) return false;
  if (text.front() == '+') text.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
  return ec == std::errc() && ptr == text.data() + text.size();
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

// ---------------------------------------------------------------------------
// CSV

void write_csv(std::ostream& out, const Dataset& data) {
  out << "y,delta";
  const std::size_t dim = data.covariate_dim();
  for (std::size_t j = 0; j < dim; ++j) {
    out << ',' << (j < data.covariate_names.size() ? data.covariate_names[j] : "x" + std::to_string(j + 1));
  }
  out << '\n';
  for (const auto& r : data.records) {
    out << format_double(r.y) << ',' << r.delta;
    for (double v : r.x) out << ',' << format_double(v);
    out << '\n';
  }
}

void write_csv(const std::filesystem::path& path, const Dataset& data) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  write_csv(out, data);
  if (!out) throw DataError("failed writing " + path.string());
}

Dataset read_csv(std::istream& in, const std::string& source) {
  std::string line;
  std::size_t line_no = 0;
  auto fail = [&](const std::string& what) -> DataError {
    return DataError(source + ":" + std::to_string(line_no) + ": " + what);
  };
  Dataset data;
  while (std::getline(in, line)) {
    ++line_no;
    if (!trim(line).empty()) break;
  }
  const auto header = split(line, ',');
  if (header.size() < 2 || header[0] != "y" || header[1] != "delta") {
    throw fail("header must start with y,delta");
  }
  data.covariate_names.assign(header.begin() + 2, header.end());
  const std::size_t columns = header.size();
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split(line, ',');
    if (fields.size() != columns) {
      throw fail("expected " + std::to_string(columns) + " fields, found " + std::to_string(fields.size()));
    }
    Observation obs;
    if (!parse_double(fields[0], obs.y) || !std::isfinite(obs.y)) throw fail("cannot parse y '" + fields[0] + "'");
    if (obs.y < 0.0) throw fail("negative observation time");
    if (fields[1] == "0") {
      obs.delta = 0;
    } else if (fields[1] == "1") {
      obs.delta = 1;
    } else {
      throw fail("delta must be 0 or 1, got '" + fields[1] + "'");
    }
    obs.x.resize(columns - 2);
    for (std::size_t j = 2; j < columns; ++j) {
      if (!parse_double(fields[j], obs.x[j - 2]) || !std::isfinite(obs.x[j - 2])) {
        throw fail("cannot parse covariate " + header[j] + " '" + fields[j] + "'");
      }
    }
    data.records.push_back(std::move(obs));
  }
  if (data.records.empty()) throw DataError(source + ": no data rows");
  return data;
}

Dataset read_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  return read_csv(in, path.string());
}

// ---------------------------------------------------------------------------
// Configuration

IniDocument parse_ini(std::istream& in, const std::string& source) {
  IniDocument doc;
  std::string section = "run";
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find_first_of("#;");
    const std::string text = trim(hash == std::string::npos ? line : line.substr(0, hash));
    if (text.empty()) continue;
    if (text.front() == '[') {
      if (text.back() != ']') throw ConfigError("", source + ":" + std::to_string(line_no) + ": malformed section header");
      section = trim(std::string_view(text).substr(1, text.size() - 2));
      doc.sections[section];
      continue;
    }
    const auto eq = text.find('=');
    if (eq == std::string::npos) throw ConfigError("", source + ":" + std::to_string(line_no) + ": expected key = value");
    const std::string key = trim(std::string_view(text).substr(0, eq));
    if (key.empty()) throw ConfigError("", source + ":" + std::to_string(line_no) + ": empty key");
    auto& entries = doc.sections[section];
    if (entries.contains(key)) throw ConfigError(section + "." + key, "duplicate key at line " + std::to_string(line_no));
    entries[key] = {trim(std::string_view(text).substr(eq + 1)), line_no};
  }
  return doc;
}

namespace {

class SectionReader {
 public:
  SectionReader(const IniDocument& doc, std::string name, std::set<std::string> allowed)
      : name_(std::move(name)) {
    const auto it = doc.sections.find(name_);
    if (it == doc.sections.end()) return;
    entries_ = &it->second;
    for (const auto& [key, value] : *entries_) {
      if (!allowed.contains(key)) throw ConfigError(field(key), "unknown key");
    }
  }

  const IniValue* find(const std::string& key) const {
    if (!entries_) return nullptr;
    const auto it = entries_->find(key);
    return it == entries_->end() ? nullptr : &it->second;
  }

  std::string field(const std::string& key) const { return name_ + "." + key; }

  void real(const std::string& key, double& out) const {
    if (const auto* v = find(key)) {
      if (!parse_double(v->text, out) || !std::isfinite(out)) throw ConfigError(field(key), "expected a number, got '" + v->text + "'");
    }
  }

  template <typename Int>
  void count(const std::string& key, Int& out) const {
    if (const auto* v = find(key)) {
      Int value{};
      const auto [ptr, ec] = std::from_chars(v->text.data(), v->text.data() + v->text.size(), value);
      if (ec != std::errc() || ptr != v->text.data() + v->text.size()) {
        throw ConfigError(field(key), "expected a nonnegative integer, got '" + v->text + "'");
      }
      out = value;
    }
  }

  void reals(const std::string& key, std::vector<double>& out) const {
    if (const auto* v = find(key)) {
      out.clear();
      for (const auto& part : split(v->text, ',')) {
        double d = 0.0;
        if (!parse_double(part, d) || !std::isfinite(d)) throw ConfigError(field(key), "expected a comma-separated list of numbers");
        out.push_back(d);
      }
    }
  }

  // "lo:hi" pairs
  std::optional<std::pair<double, double>> pair(const std::string& key) const {
    const auto* v = find(key);
    if (!v) return std::nullopt;
    const auto parts = split(v->text, ':');
    std::pair<double, double> p;
    if (parts.size() != 2 || !parse_double(parts[0], p.first) || !parse_double(parts[1], p.second)) {
      throw ConfigError(field(key), "expected lo:hi, got '" + v->text + "'");
    }
    return p;
  }

  template <typename Enum>
  void choice(const std::string& key, Enum& out, const std::map<std::string, Enum>& options) const {
    if (const auto* v = find(key)) {
      const auto it = options.find(v->text);
      if (it == options.end()) throw ConfigError(field(key), "unrecognized value '" + v->text + "'");
      out = it->second;
    }
  }

 private:
  std::string name_;
  const std::map<std::string, IniValue>* entries_ = nullptr;
};

template <typename F>
void rethrow_as_config(const std::string& field, F&& f) {
  try {
    f();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(field, e.what());
  }
}

std::string sqh_field(const std::string& message) {
  static const std::pair<const char*, const char*> phrases[] = {
      {"sqh: epsilon", "epsilon"}, {"sqh: lambda", "lambda"},   {"sqh: zeta", "zeta"},
      {"sqh: rho", "rho"},         {"sqh: kappa", "kappa"},     {"sqh: inner window", "window"},
      {"sqh: inner tolerance", "inner_tolerance"},              {"sqh: max_step_ups", "max_step_ups"},
  };
  for (const auto& [phrase, key] : phrases) {
    if (message.rfind(phrase, 0) == 0) return std::string("sqh.") + key;
  }
  return "sqh";
}

// Validation messages start with the offending name ("p01 must ...");
// map it back to the config key when possible.
std::string scenario_field(const std::string& message, const std::set<std::string>& keys) {
  for (const auto& key : keys) {
    if (message.rfind(key + " ", 0) == 0) return "scenario." + key;
  }
  return "scenario";
}

Scenario read_scenario(const IniDocument& doc) {
  const auto it = doc.sections.find("scenario");
  std::string type = "binary";
  if (it != doc.sections.end()) {
    if (const auto t = it->second.find("type"); t != it->second.end()) type = t->second.text;
  }
  const std::map<std::string, CensoringMode> censoring = {{"rate", CensoringMode::Rate},
                                                          {"proportion", CensoringMode::Proportion}};
  if (type == "binary") {
    const std::set<std::string> keys = {"type", "n1", "n2", "p01", "p00", "alpha", "gamma1", "gamma2", "c1", "c2", "censoring"};
    SectionReader r(doc, "scenario", keys);
    BinaryScenario s;
    r.count("n1", s.n1);
    r.count("n2", s.n2);
    r.real("p01", s.p01);
    r.real("p00", s.p00);
    r.real("alpha", s.alpha);
    r.real("gamma1", s.gamma.gamma1);
    r.real("gamma2", s.gamma.gamma2);
    r.real("c1", s.c1);
    r.real("c2", s.c2);
    r.choice("censoring", s.censoring, censoring);
    try {
      s.validate();
    } catch (const std::exception& e) {
      throw ConfigError(scenario_field(e.what(), keys), e.what());
    }
    return s;
  }
  if (type == "continuous") {
    const std::set<std::string> keys = {"type", "n", "p_high", "p_low", "x_min", "x_max", "alpha", "gamma1", "gamma2", "c", "censoring"};
    SectionReader r(doc, "scenario", keys);
    ContinuousScenario s;
    r.count("n", s.n);
    r.real("p_high", s.p_high);
    r.real("p_low", s.p_low);
    r.real("x_min", s.x_min);
    r.real("x_max", s.x_max);
    r.real("alpha", s.alpha);
    r.real("gamma1", s.gamma.gamma1);
    r.real("gamma2", s.gamma.gamma2);
    r.real("c", s.c);
    r.choice("censoring", s.censoring, censoring);
    try {
      s.validate();
    } catch (const std::exception& e) {
      throw ConfigError(scenario_field(e.what(), keys), e.what());
    }
    return s;
  }
  throw ConfigError("scenario.type", "expected binary or continuous, got '" + type + "'");
}

}  // namespace

RunConfig build_run_config(const IniDocument& doc) {
  static const std::set<std::string> known = {"run", "scenario", "sqh", "mc", "fit", "bootstrap", "residuals"};
  for (const auto& [name, entries] : doc.sections) {
    if (!known.contains(name)) throw ConfigError(name, "unknown section");
  }
  RunConfig cfg;
  {
    SectionReader r(doc, "run", {"seed", "workers", "out"});
    r.count("seed", cfg.seed);
    r.count("workers", cfg.workers);
    if (const auto* v = r.find("out")) cfg.out = v->text;
    if (cfg.workers == 0) throw ConfigError("run.workers", "must be at least 1");
  }
  if (doc.sections.contains("scenario")) cfg.scenario = read_scenario(doc);
  {
    SectionReader r(doc, "sqh", {"epsilon", "lambda", "zeta", "rho", "kappa", "max_iter", "window", "inner_tolerance",
                                 "max_step_ups", "update"});
    r.real("epsilon", cfg.sqh.epsilon0);
    r.real("lambda", cfg.sqh.lambda);
    r.real("zeta", cfg.sqh.zeta);
    r.real("rho", cfg.sqh.rho);
    r.real("kappa", cfg.sqh.kappa);
    r.count("max_iter", cfg.sqh.max_iter);
    r.real("window", cfg.sqh.inner.window);
    r.real("inner_tolerance", cfg.sqh.inner.tolerance);
    r.count("max_step_ups", cfg.sqh.inner.max_step_ups);
    r.choice("update", cfg.sqh.gauss_seidel, std::map<std::string, bool>{{"jacobi", false}, {"gauss_seidel", true}});
    try {
      cfg.sqh.validate();
    } catch (const DomainError& e) {
      throw ConfigError(sqh_field(e.what()), e.what());
    }
  }
  {
    SectionReader r(doc, "mc", {"replications", "init", "mode", "perturbation", "alpha_grid_points",
                                "survival_targets", "zeta_sweep", "lambda_sweep", "rho_sweep", "epsilon_sweep"});
    auto& mc = cfg.mc;
    r.count("replications", mc.replications);
    if (mc.replications == 0) throw ConfigError("mc.replications", "must be at least 1");
    r.choice("init", mc.init,
             std::map<std::string, InitStrategy>{{"km", InitStrategy::KaplanMeier},
                                                 {"truth", InitStrategy::Truth},
                                                 {"perturbed", InitStrategy::PerturbedTruth}});
    r.choice("mode", mc.mode, std::map<std::string, FitMode>{{"sqh", FitMode::Sqh}, {"oracle", FitMode::Oracle}});
    r.real("perturbation", mc.perturbation);
    if (!(mc.perturbation >= 0.0)) throw ConfigError("mc.perturbation", "must be nonnegative");
    r.count("alpha_grid_points", mc.alpha_grid_points);
    if (const auto* v = r.find("survival_targets")) {
      for (const auto& item : split(v->text, ',')) {
        const auto parts = split(item, ':');
        SurvivalTarget t;
        double x = 0.0;
        if (parts.size() != 2 || !parse_double(parts[0], t.y) || !parse_double(parts[1], x) || t.y < 0.0) {
          throw ConfigError("mc.survival_targets", "expected comma-separated y:x pairs");
        }
        t.x = {x};
        mc.survival_targets.push_back(std::move(t));
      }
    }
    r.reals("zeta_sweep", mc.zeta_sweep);
    r.reals("lambda_sweep", mc.lambda_sweep);
    r.reals("rho_sweep", mc.rho_sweep);
    r.reals("epsilon_sweep", mc.epsilon_sweep);
    auto check_sweep = [&](const std::vector<double>& values, const std::string& key, auto apply) {
      for (double v : values) {
        SqhConfig c = cfg.sqh;
        apply(c, v);
        rethrow_as_config("mc." + key, [&] { c.validate(); });
      }
    };
    check_sweep(mc.zeta_sweep, "zeta_sweep", [](SqhConfig& c, double v) { c.zeta = v; });
    check_sweep(mc.lambda_sweep, "lambda_sweep", [](SqhConfig& c, double v) { c.lambda = v; });
    check_sweep(mc.rho_sweep, "rho_sweep", [](SqhConfig& c, double v) { c.rho = v; });
    check_sweep(mc.epsilon_sweep, "epsilon_sweep", [](SqhConfig& c, double v) { c.epsilon0 = v; });
  }
  {
    SectionReader r(doc, "fit", {"alpha_grid_points", "group_low", "group_high", "start", "moments"});
    r.choice("moments", cfg.fit.moments,
             std::map<std::string, MomentSource>{{"all", MomentSource::AllTimes}, {"events", MomentSource::EventTimes}});
    r.count("alpha_grid_points", cfg.fit.alpha_grid_points);
    if (cfg.fit.alpha_grid_points == 0) throw ConfigError("fit.alpha_grid_points", "must be at least 1");
    if (const auto p = r.pair("group_low")) cfg.fit.group_low = GroupSelector{p->first, p->second};
    if (const auto p = r.pair("group_high")) cfg.fit.group_high = GroupSelector{p->first, p->second};
    if (r.find("start")) {
      std::vector<double> start;
      r.reals("start", start);
      rethrow_as_config("fit.start", [&] { ParameterVector::from_flat(start).validate(); });
      cfg.fit.start = std::move(start);
    }
  }
  {
    SectionReader r(doc, "bootstrap", {"resamples"});
    r.count("resamples", cfg.bootstrap_resamples);
    if (cfg.bootstrap_resamples < 2) throw ConfigError("bootstrap.resamples", "must be at least 2");
  }
  {
    SectionReader r(doc, "residuals", {"sets"});
    r.count("sets", cfg.residual_sets);
    if (cfg.residual_sets == 0) throw ConfigError("residuals.sets", "must be at least 1");
  }
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("", "cannot open config file " + path.string());
  return build_run_config(parse_ini(in, path.string()));
}

}  // namespace bctcure
