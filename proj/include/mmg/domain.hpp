#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace mmg::domain {

/// Raised when a config document cannot be parsed at all.
struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Raised when a parsed document violates a model invariant. The message
/// names the offending path, e.g. "mgs[1].demand.dev_plus".
struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct HorizonSpec {
  int hours = 24;   // T
  double dt = 1.0;  // interval length in hours
};

struct DgParams {
  double a = 0.0;      // quadratic fuel-cost coefficient ($/MW^2 h)
  double b = 0.0;      // linear fuel-cost coefficient ($/MWh)
  double p_min = 0.0;  // MW
  double p_max = 0.0;  // MW
  double r_up = 0.0;   // up reserve capability (MW)
  double r_dn = 0.0;   // down reserve capability (MW)
  double ramp_up = 0.0;  // up ramp rate (MW/h)
  double ramp_dn = 0.0;  // down ramp rate (MW/h)
};

struct EssParams {
  double a = 0.0;         // degradation-cost coefficient ($/MW^2 h)
  double capacity = 0.0;  // B_e (MWh)
  double eta_c = 1.0;
  double eta_d = 1.0;
  double pc_max = 0.0;  // MW
  double pd_max = 0.0;  // MW
  double soc_min = 0.0;  // fraction of capacity
  double soc_max = 1.0;
  double soc_ref = 0.5;  // reference terminal SOC
};

struct FlexLoadParams {
  double a = 0.0;  // inconvenience-cost coefficient ($/MW^2 h)
  std::vector<double> rd_max;  // per-hour redispatch cap (MW)
  std::vector<double> cd_max;  // per-hour curtailment cap (MW)
  double e_shed = 0.0;         // worst-case total shed budget (MWh)
};

/// Per-hour mean plus absolute upward/downward deviations of the
/// confidence bounds. Percent deviations in the config are converted to
/// absolute values at load time.
struct UncertainSeries {
  std::vector<double> mean;
  std::vector<double> dev_plus;
  std::vector<double> dev_minus;

  int size() const { return static_cast<int>(mean.size()); }
};

enum class SeriesKind { demand, res, price };

/// The +1 / -1 confidence-bound levels of a series. For demand and price
/// the +1 level is mean + dev_plus; for RES generation the +1 level is the
/// LOW-generation bound mean - dev_minus (a positive reserve requirement).
struct BoundPair {
  std::vector<double> plus_level;
  std::vector<double> minus_level;
};

BoundPair expand_bounds(const UncertainSeries& series, SeriesKind kind);

struct MgConfig {
  std::string id;
  std::vector<DgParams> dgs;
  std::vector<EssParams> esses;
  std::optional<FlexLoadParams> flex;
  UncertainSeries demand;
  std::vector<UncertainSeries> wind;
  std::vector<UncertainSeries> pv;
  double p_pso_max = 0.0;  // trade capacity with the PSO (MW)
};

struct MarketParams {
  UncertainSeries gamma_buy;   // grid buying price ($/MWh)
  UncertainSeries gamma_sell;  // grid selling price ($/MWh)
  double tau = 0.0;    // per-unit service fee ($/MWh)
  double alpha = 1.0;  // sub-gradient step size
  double eps = 0.005;  // convergence tolerance (MW)
  std::vector<double> lambda0;  // initial MEP per hour; empty = band midpoint
  double p0 = 0.5;     // base-case probability
  int max_iter = 5000;
};

struct MmgConfig {
  HorizonSpec horizon;
  std::vector<MgConfig> mgs;
  MarketParams market;
  std::vector<std::string> warnings;  // non-fatal validation findings
};

/// Parses and validates a YAML config document.
MmgConfig load_config(const std::string& text);
MmgConfig load_config_file(const std::string& path);

/// Emits a YAML document that load_config parses back to an equal config.
std::string serialize(const MmgConfig& config);

bool operator==(const UncertainSeries& a, const UncertainSeries& b);
bool operator==(const MmgConfig& a, const MmgConfig& b);

}  // namespace mmg::domain
