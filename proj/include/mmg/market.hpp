#pragma once

#include <string>
#include <tuple>
#include <vector>

#include "mmg/domain.hpp"
#include "mmg/scenarios.hpp"
#include "mmg/subproblem.hpp"

namespace mmg::market {

using subproblem::Grid;

struct PriceState {
  Grid lambda;      // internal multiplier, [t][h]
  Grid lambda_eq;   // clamped market equilibrium price
  Grid beta_buy;    // lambda_eq + tau
  Grid beta_sell;   // lambda_eq - tau
};

struct IterationRecord {
  int k = 0;
  Grid net_bid;          // dP_PSO, [t][h]
  Grid grid_settlement;  // dP_N = grid_buy - grid_sell
  Grid lambda_eq;        // clamped MEP after this iteration's update
  double mismatch = 0.0;
  double system_objective = 0.0;  // sum of MG expected costs
};

struct MarketOutcome {
  bool converged = false;
  bool stalled = false;       // objective flat while mismatch stays above eps
  bool oscillating = false;   // growing lambda swings; reduce alpha
  std::vector<IterationRecord> iterations;
  PriceState final_prices;
  std::vector<subproblem::MgDispatch> dispatches;
  Grid grid_buy;    // P_N,b
  Grid grid_sell;   // P_N,s
  Grid pso_income;  // per (t,h)
  double system_objective = 0.0;
};

struct ClearOptions {
  bool projected = true;  // carry the clamped lambda_eq between iterations
};

/// One sub-gradient ascent step on the MEP.
double subgradient_step(double lambda, double net_bid, double alpha);

/// Clamps the updated MEP into the grid price band and settles the
/// residual bid with the grid: returns (lambda_eq, grid_buy, grid_sell).
std::tuple<double, double, double> clamp_and_settle(double lambda_next,
                                                    double gamma_buy,
                                                    double gamma_sell,
                                                    double net_bid);

/// Iterative market clearing over all (t, h) pairs.
MarketOutcome clear_market(const domain::MmgConfig& config,
                           const scenarios::ScenarioSet& scen,
                           const ClearOptions& options = {});

/// PSO service-fee income per (t, h): tau * sum_m (buy_m + sell_m).
Grid pso_income(const std::vector<subproblem::MgDispatch>& dispatches, double tau);

/// Baseline: every MG trades with the main grid alone at gamma prices.
std::vector<subproblem::MgDispatch> run_isolated(const domain::MmgConfig& config,
                                                 const scenarios::ScenarioSet& scen);

}  // namespace mmg::market
