#include "mmg/centralized.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "mmg/qp_builder.hpp"

namespace mmg::centralized {

using subproblem::MgVarLayout;
using subproblem::make_grid;
using subproblem::scenario_weight;

CentralOutcome solve_centralized(const domain::MmgConfig& config,
                                 const scenarios::ScenarioSet& scen,
                                 const CentralOptions& options) {
  const int T = config.horizon.hours;
  const int S = static_cast<int>(scen.scenarios.size());
  const int H = S - 1;
  const int M = static_cast<int>(config.mgs.size());
  const double p0 = config.market.p0;
  const double tau = options.include_fees ? config.market.tau : 0.0;

  qp::QpAssembler qb;
  std::vector<MgVarLayout> layouts;
  const Grid fee = make_grid(T, S, tau);
  for (int m = 0; m < M; ++m)
    layouts.push_back(subproblem::append_mg_block(qb, config.mgs[m], m, scen,
                                                  config.horizon, fee, fee, p0));

  // One grid arc pair per (t, h), settled at the gamma prices.
  const double cap = options.grid_cap < 0.0 ? qp::QpAssembler::kInf
                                            : options.grid_cap;
  std::vector<int> gb(T * S), gs(T * S);
  for (int t = 0; t < T; ++t)
    for (int h = 0; h < S; ++h) {
      const double w = scenario_weight(h, H, p0);
      const std::string suf =
          ".t" + std::to_string(t) + ".h" + std::to_string(h);
      gb[t * S + h] = qb.add_var("grid.buy" + suf, 0.0, cap);
      gs[t * S + h] = qb.add_var("grid.sell" + suf, 0.0, cap);
      qb.add_lin_cost(gb[t * S + h], w * scen.scenarios[h].gamma_buy[t]);
      qb.add_lin_cost(gs[t * S + h], -w * scen.scenarios[h].gamma_sell[t]);

      qp::QpAssembler::Terms coupling;
      for (int m = 0; m < M; ++m) {
        coupling.emplace_back(layouts[m].buy(t, h), 1.0);
        coupling.emplace_back(layouts[m].sell(t, h), -1.0);
      }
      coupling.emplace_back(gb[t * S + h], -1.0);
      coupling.emplace_back(gs[t * S + h], 1.0);
      qb.add_eq(coupling, 0.0, "coupling");
    }

  qp::QpProblem problem = qb.build();
  // Coupling rows sit at the tail of the equality block, in (t, h) order.
  const int coupling_base = problem.num_eq() - T * S;

  qp::QpSolution sol = qp::solve_qp(problem);
  if (sol.status == qp::SolveStatus::infeasible)
    throw subproblem::InfeasibleError("central", sol.infeasible_row);
  if (sol.status != qp::SolveStatus::optimal)
    throw std::runtime_error("centralized solve did not converge (iteration limit)");

  CentralOutcome out;
  out.objective = sol.objective;
  out.grid_buy = make_grid(T, S);
  out.grid_sell = make_grid(T, S);
  out.duals = make_grid(T, S);
  for (int t = 0; t < T; ++t)
    for (int h = 0; h < S; ++h) {
      out.grid_buy[t][h] = sol.x[gb[t * S + h]];
      out.grid_sell[t][h] = sol.x[gs[t * S + h]];
      const double w = scenario_weight(h, H, p0);
      out.duals[t][h] = sol.duals_eq[coupling_base + t * S + h] / w;
    }

  // Per-MG cost splits at the shadow prices, so they line up with what a
  // converged market run reports.
  Grid beta_buy = make_grid(T, S), beta_sell = make_grid(T, S);
  for (int t = 0; t < T; ++t)
    for (int h = 0; h < S; ++h) {
      beta_buy[t][h] = out.duals[t][h] + tau;
      beta_sell[t][h] = out.duals[t][h] - tau;
    }
  for (int m = 0; m < M; ++m)
    out.dispatches.push_back(subproblem::extract_dispatch(
        layouts[m], sol.x, config.mgs[m], beta_buy, beta_sell, p0,
        config.horizon));
  return out;
}

GapMetrics duality_gap(const CentralOutcome& central,
                       const market::MarketOutcome& market) {
  if (central.dispatches.size() != market.dispatches.size())
    throw std::invalid_argument("duality_gap: MG count mismatch");
  GapMetrics g;
  g.objective_gap = std::abs(market.system_objective - central.objective) /
                    std::max(1.0, std::abs(central.objective));
  const int T = static_cast<int>(central.grid_buy.size());
  const int S = T ? static_cast<int>(central.grid_buy[0].size()) : 0;
  for (size_t m = 0; m < central.dispatches.size(); ++m) {
    const auto& a = central.dispatches[m].trade_schedule;
    const auto& b = market.dispatches[m].trade_schedule;
    if (a.size() != b.size() || (T && a[0].size() != b[0].size()))
      throw std::invalid_argument("duality_gap: trade grid shape mismatch");
    for (int t = 0; t < T; ++t)
      for (int h = 0; h < S; ++h)
        g.trade_deviation = std::max(g.trade_deviation, std::abs(a[t][h] - b[t][h]));
  }
  for (int t = 0; t < T; ++t)
    for (int h = 0; h < S; ++h)
      g.price_deviation =
          std::max(g.price_deviation, std::abs(market.final_prices.lambda_eq[t][h] -
                                               central.duals[t][h]));
  return g;
}

}  // namespace mmg::centralized
