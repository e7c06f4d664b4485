#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "bctcure/io.hpp"

namespace bctcure::cli {

enum ExitCode : int {
  kOk = 0,
  kInternal = 1,
  kConfigError = 2,
  kDataError = 3,
  kNonConvergence = 4,
  kStall = 5,
};

// Each command writes its files under config.out and a short summary to `log`.
// Errors propagate as exceptions; exit_code_for maps them.
int cmd_simulate(const RunConfig& config, std::ostream& log);
int cmd_fit(const std::filesystem::path& data_file, const RunConfig& config, std::ostream& log);
int cmd_mc_study(const RunConfig& config, std::ostream& log);
int cmd_bootstrap(const std::filesystem::path& data_file, const RunConfig& config, std::ostream& log);
int cmd_residuals(const std::filesystem::path& data_file, const std::filesystem::path& theta_file,
                  const RunConfig& config, std::ostream& log);
int cmd_km(const std::filesystem::path& data_file, const RunConfig& config, std::ostream& log);

int exit_code_for(const std::exception& e);

// Full command line: `bctcure <simulate|fit|mc-study|bootstrap|residuals|km> [flags]`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace bctcure::cli
