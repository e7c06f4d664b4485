#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "bctcure/inference.hpp"
#include "bctcure/model.hpp"
#include "bctcure/simulation.hpp"
#include "bctcure/sqh.hpp"

namespace bctcure {

// Shortest decimal text that parses back to the same double.
std::string format_double(double v);

// CSV with header `y,delta,<covariates...>`.
void write_csv(std::ostream& out, const Dataset& data);
void write_csv(const std::filesystem::path& path, const Dataset& data);
// Throws DataError naming `source` and the line number on malformed input.
Dataset read_csv(std::istream& in, const std::string& source = "<stream>");
Dataset read_csv(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// INI-style configuration

struct IniValue {
  std::string text;
  std::size_t line = 0;
};

// section -> key -> value. Keys before any [section] header go to "run".
struct IniDocument {
  std::map<std::string, std::map<std::string, IniValue>> sections;
};

IniDocument parse_ini(std::istream& in, const std::string& source = "<config>");

struct McSettings {
  std::size_t replications = 100;
  InitStrategy init = InitStrategy::PerturbedTruth;
  FitMode mode = FitMode::Sqh;
  double perturbation = 0.2;
  std::size_t alpha_grid_points = 21;
  std::vector<SurvivalTarget> survival_targets;
  std::vector<double> zeta_sweep;
  std::vector<double> lambda_sweep;
  std::vector<double> rho_sweep;
  std::vector<double> epsilon_sweep;
};

struct FitSettings {
  std::size_t alpha_grid_points = 21;
  std::optional<GroupSelector> group_low;   // default: smallest x1 value
  std::optional<GroupSelector> group_high;  // default: largest x1 value
  std::optional<std::vector<double>> start; // flat theta; skips initial-value search
  MomentSource moments = MomentSource::AllTimes;
};

struct RunConfig {
  std::optional<Scenario> scenario;
  SqhConfig sqh;
  McSettings mc;
  FitSettings fit;
  std::size_t bootstrap_resamples = 500;
  std::size_t residual_sets = 5;
  std::uint64_t seed = 0;
  std::size_t workers = 1;
  std::filesystem::path out = ".";
};

/// Builds a validated RunConfig. Unknown sections or keys, unparseable values
/// and invalid scenario/optimizer settings raise ConfigError naming the field
/// as `section.key`.
RunConfig build_run_config(const IniDocument& doc);
RunConfig load_run_config(const std::filesystem::path& path);

}  // namespace bctcure
