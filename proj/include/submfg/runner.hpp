#pragma once

// Subcommand execution: loads a config, prepares the run directory, runs the
// requested pipeline, writes its artifacts, and maps outcomes to process
// exit codes.

#include <string>

#include "submfg/config.hpp"

namespace submfg {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;      // invalid config / invalid request
inline constexpr int kExitNumerical = 3;   // divergence or numerical failure
inline constexpr int kExitAssertion = 4;   // a checked property failed

struct RunnerOptions {
  std::string config_path;
  std::string output_override;  // replaces outputs.directory when nonempty
  bool verbose = false;
};

/// Runs one of: check, solve, iterate, fp, compare, bench.  Every run writes
/// config.json (the validated snapshot) and run.json (outcome + plan
/// fingerprint + version) into the run directory; failed runs keep whatever
/// artifacts were produced.  The SUBMFG_OUTPUT_ROOT environment variable
/// reroots relative run directories.
int run_command(const std::string& subcommand, const RunnerOptions& opts);

}  // namespace submfg
