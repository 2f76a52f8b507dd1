#pragma once

#include <vector>

#include "mmg/domain.hpp"

namespace mmg::scenarios {

/// Rows of +1/-1 factor levels. Column 0 is the PSO (grid price) factor,
/// columns 1..M the per-MG factors.
struct LevelMatrix {
  std::vector<std::vector<int>> rows;

  int num_rows() const { return static_cast<int>(rows.size()); }
  int num_cols() const { return rows.empty() ? 0 : static_cast<int>(rows[0].size()); }
};

/// One realized scenario. h = 0 is the base case (all means).
struct Scenario {
  int h = 0;
  std::vector<std::vector<double>> demand;               // [m][t] MW
  std::vector<std::vector<std::vector<double>>> wind;    // [m][w][t] MW
  std::vector<std::vector<std::vector<double>>> pv;      // [m][s][t] MW
  std::vector<double> gamma_buy;                         // [t] $/MWh
  std::vector<double> gamma_sell;                        // [t] $/MWh
};

struct ScenarioSet {
  std::vector<Scenario> scenarios;  // size H+1, scenarios[0].h == 0
  LevelMatrix levels;

  int num_hedged() const { return static_cast<int>(scenarios.size()) - 1; }  // H
};

/// First num_factors columns of the canonical L8(2^7) array. Rejects
/// num_factors outside [1, 7]; this artifact fixes the design family.
LevelMatrix build_orthogonal_array(int num_factors);

/// Realizes the base case plus one scenario per OA row. levels must have
/// 1 + M columns (PSO first).
ScenarioSet realize_scenarios(const domain::MmgConfig& config,
                              const LevelMatrix& levels);

/// Base case only (H = 0); the deterministic mode input.
ScenarioSet base_case_only(const domain::MmgConfig& config);

/// Convenience: L8 columns for 1 + M factors, then realize.
ScenarioSet default_scenarios(const domain::MmgConfig& config);

}  // namespace mmg::scenarios
