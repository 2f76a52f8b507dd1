#pragma once

#include <optional>
#include <string>
#include <vector>

#include "mmg/domain.hpp"

namespace mmg::runner {

enum class Mode { cooperative, isolated, deterministic, centralized };

Mode parse_mode(const std::string& s);  // throws ValidationError

struct RunSpec {
  std::string config_path;
  Mode mode = Mode::cooperative;
  std::string out_dir = ".";
  std::optional<double> alpha, eps, tau, p0;
  std::optional<std::string> lambda0;  // "mean" or a number
  bool include_fees = false;           // centralized only
};

// Exit codes shared with the CLI.
constexpr int kOk = 0;
constexpr int kValidationError = 2;
constexpr int kInfeasible = 3;
constexpr int kNoConvergence = 4;

/// Loads, applies overrides, runs the selected pipeline and writes the
/// CSV artifact set into out_dir. Diagnostics go to err.
int run(const RunSpec& spec, std::string& err);

/// One row per sweep value; writes sweep.csv into out_dir.
int sweep(const RunSpec& spec, const std::string& parameter,
          const std::vector<double>& values, std::string& err);

/// Applies overrides to a loaded config (validates ranges).
void apply_overrides(domain::MmgConfig& config, const RunSpec& spec);

}  // namespace mmg::runner
