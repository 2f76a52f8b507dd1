#pragma once

#include <vector>

#include "mmg/domain.hpp"
#include "mmg/market.hpp"
#include "mmg/scenarios.hpp"
#include "mmg/subproblem.hpp"

namespace mmg::centralized {

using subproblem::Grid;

struct CentralOutcome {
  std::vector<subproblem::MgDispatch> dispatches;
  Grid grid_buy;   // P_N,b per (t,h)
  Grid grid_sell;  // P_N,s per (t,h)
  Grid duals;      // coupling-constraint price per (t,h), $/MWh
  double objective = 0.0;  // expected social cost
};

struct CentralOptions {
  bool include_fees = false;  // add tau * (buy + sell) per MG to the objective
  double grid_cap = -1.0;     // per-(t,h) cap on each grid arc; < 0 = unbounded
};

/// Pools all MG blocks with one grid arc per (t, h) and solves the
/// centralized problem. The coupling dual is reported in price units
/// (the raw multiplier divided by the scenario weight).
CentralOutcome solve_centralized(const domain::MmgConfig& config,
                                 const scenarios::ScenarioSet& scen,
                                 const CentralOptions& options = {});

struct GapMetrics {
  double objective_gap = 0.0;   // |obj_m - obj_c| / max(1, |obj_c|)
  double trade_deviation = 0.0; // max |trade_m - trade_c| (MW)
  double price_deviation = 0.0; // max |lambda_eq - coupling dual| ($/MWh)
};

GapMetrics duality_gap(const CentralOutcome& central,
                       const market::MarketOutcome& market);

}  // namespace mmg::centralized
