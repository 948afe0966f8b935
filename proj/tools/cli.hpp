#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "sbgam/config.hpp"

namespace sbgam::cli {

enum class Command { fit, simulate, study };

inline constexpr int kExitOk = 0;
inline constexpr int kExitInput = 2;
inline constexpr int kExitConvergence = 3;
inline constexpr int kExitInternal = 4;

/// Every option of the three commands. Keys of the config file are the long flag names.
struct RunConfig {
  Command command = Command::fit;
  std::string input;
  std::string output = "sbgam_out";
  std::string response = "y";
  std::string family = "bernoulli_logit";
  std::string estimator = "nw";
  std::string kernel = "epanechnikov";
  std::vector<double> bandwidth;   ///< rescaled; empty selects the rule
  double bandwidth_factor = 0.0;   ///< 0 selects the study fixture (study) or 1 (fit)
  double extra_bandwidth = 0.1;
  std::size_t grid = 41;
  FitConfig fit;
  std::string model = "1,1";
  std::size_t n = 100;
  std::size_t extra_dims = 0;
  std::uint64_t seed = 1;
  std::uint64_t rep = 0;
  std::size_t reps = 200;
  std::size_t threads = 0;
  double bad_threshold = 50.0;
};

/// Parses argv (flags override --config). Throws CLI11 errors for malformed flags.
RunConfig parse_args(const std::vector<std::string>& args);

/// Flat "key = value" text that parse_config reads back to the same RunConfig.
std::string format_config(const RunConfig& cfg);
RunConfig parse_config(const std::string& text);

/// Runs one command with args[0] the program name; returns 0, 2 (input/config), 3 (convergence or degenerate
/// weight) or 4 (internal). Errors also leave error.json in the output directory.
int run_cli(const std::vector<std::string>& args);
int run_cli(int argc, const char* const* argv);

}  // namespace sbgam::cli
