#pragma once

#include <nlohmann/json.hpp>

#include <ostream>
#include <string>
#include <vector>

#include "aoi/io.hpp"
#include "run_config.hpp"

namespace aoi::cli {

enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 1,
  kExitCalibration = 2,
  kExitEvaluation = 3,
  kExitAcceptance = 4,
  kExitPartialSweep = 5,
};

struct RunContext {
  RunConfig config;
  unsigned threads = 1;
  std::ostream* out = nullptr;
  std::ostream* err = nullptr;
};

struct SweepResult {
  std::vector<PercentileRecord> rows;
  std::vector<std::string> failures;
};

/// One percentile row per point of the sweep cross product
/// (link, s, tau, c; c varies fastest).
SweepResult run_sweep(const RunConfig& config, unsigned threads);

struct CompareReport {
  double max_z = 0;
  double fraction_within = 0;
  std::size_t cells = 0;
  nlohmann::json diagnostics;
  nlohmann::json dominance;
  bool passed = false;
};

/// Exact vs simulated grid z-scores plus dominance along iid, the kappa
/// ladder (descending), and frozen.
CompareReport run_compare(const RunConfig& config, unsigned threads);

int cmd_calibrate(const RunContext& ctx);
int cmd_exact(const RunContext& ctx);
int cmd_simulate(const RunContext& ctx);
int cmd_compare(const RunContext& ctx);
int cmd_sweep(const RunContext& ctx);

/// Full command line entry point; returns the process exit code.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace aoi::cli
