#include "mmg/market.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "mmg/qp_builder.hpp"

namespace mmg::market {

using domain::MmgConfig;
using scenarios::ScenarioSet;
using subproblem::MgDispatch;
using subproblem::MgVarLayout;
using subproblem::make_grid;
using subproblem::scenario_weight;

double subgradient_step(double lambda, double net_bid, double alpha) {
  if (alpha <= 0.0) throw std::invalid_argument("subgradient_step: alpha must be > 0");
  return lambda + alpha * net_bid;
}

std::tuple<double, double, double> clamp_and_settle(double lambda_next,
                                                    double gamma_buy,
                                                    double gamma_sell,
                                                    double net_bid) {
  if (lambda_next >= gamma_buy) return {gamma_buy, net_bid, 0.0};
  if (lambda_next <= gamma_sell) return {gamma_sell, 0.0, -net_bid};
  return {lambda_next, 0.0, 0.0};
}

Grid pso_income(const std::vector<MgDispatch>& dispatches, double tau) {
  if (dispatches.empty()) return {};
  const int T = static_cast<int>(dispatches[0].buy.size());
  const int S = T ? static_cast<int>(dispatches[0].buy[0].size()) : 1;
  Grid income = make_grid(T, S);
  for (const auto& d : dispatches)
    for (int t = 0; t < T; ++t)
      for (int h = 0; h < S; ++h) income[t][h] += tau * (d.buy[t][h] + d.sell[t][h]);
  return income;
}

namespace {

struct GammaGrids {
  Grid buy, sell;
};

GammaGrids realized_gamma(const ScenarioSet& scen, int T) {
  const int S = static_cast<int>(scen.scenarios.size());
  GammaGrids g{make_grid(T, S), make_grid(T, S)};
  for (int t = 0; t < T; ++t)
    for (int h = 0; h < S; ++h) {
      g.buy[t][h] = scen.scenarios[h].gamma_buy[t];
      g.sell[t][h] = scen.scenarios[h].gamma_sell[t];
    }
  return g;
}

// One MG's cached solver: the problem is assembled once with zero trade
// cost; each iteration just rewrites the buy/sell linear coefficients.
struct MgSolver {
  MgVarLayout layout;
  qp::QpSolver solver;
  Eigen::VectorXd base_c;

  MgSolver(MgVarLayout lay, qp::QpProblem prob, const qp::QpSettings& st)
      : layout(lay), solver(std::move(prob), st),
        base_c(solver.problem().c) {}

  MgDispatch solve_at(const domain::MgConfig& mg, const Grid& beta_buy,
                      const Grid& beta_sell, double p0,
                      const domain::HorizonSpec& horizon) {
    const int T = layout.T, S = layout.S, H = S - 1;
    Eigen::VectorXd c = base_c;
    for (int t = 0; t < T; ++t)
      for (int h = 0; h < S; ++h) {
        const double w = scenario_weight(h, H, p0);
        c[layout.buy(t, h)] += w * beta_buy[t][h];
        c[layout.sell(t, h)] -= w * beta_sell[t][h];
      }
    solver.set_linear_cost(c);
    qp::QpSolution sol = solver.solve();
    if (sol.status == qp::SolveStatus::infeasible)
      throw subproblem::InfeasibleError(mg.id, sol.infeasible_row);
    if (sol.status != qp::SolveStatus::optimal)
      throw std::runtime_error("MG '" + mg.id +
                               "' dispatch did not converge (iteration limit)");
    MgDispatch d = subproblem::extract_dispatch(layout, sol.x, mg, beta_buy,
                                                beta_sell, p0, horizon);
    d.objective = sol.objective;
    return d;
  }
};

}  // namespace

MarketOutcome clear_market(const MmgConfig& config, const ScenarioSet& scen,
                           const ClearOptions& options) {
  const int T = config.horizon.hours;
  const int S = static_cast<int>(scen.scenarios.size());
  const int M = static_cast<int>(config.mgs.size());
  const auto& mk = config.market;
  const GammaGrids gamma = realized_gamma(scen, T);

  std::vector<MgSolver> solvers;
  solvers.reserve(M);
  const Grid zero = make_grid(T, S);
  // During the price iteration the subgradient only needs net bids to well
  // below eps, so the per-MG solves run at a relaxed tolerance; the final
  // dispatches are re-solved tightly once prices have settled.
  qp::QpSettings loop_settings;
  loop_settings.tol = 1e-4;
  loop_settings.rho = 0.05;
  loop_settings.polish = false;
  for (int m = 0; m < M; ++m) {
    qp::QpAssembler qb;
    MgVarLayout lay = subproblem::append_mg_block(qb, config.mgs[m], m, scen,
                                                  config.horizon, zero, zero, mk.p0);
    solvers.emplace_back(lay, qb.build(), loop_settings);
  }

  MarketOutcome out;
  PriceState ps;
  ps.lambda = make_grid(T, S);
  ps.lambda_eq = make_grid(T, S);
  ps.beta_buy = make_grid(T, S);
  ps.beta_sell = make_grid(T, S);
  for (int t = 0; t < T; ++t)
    for (int h = 0; h < S; ++h) {
      const double mid = 0.5 * (gamma.buy[t][h] + gamma.sell[t][h]);
      double l0 = mk.lambda0.empty() ? mid : mk.lambda0[t];
      ps.lambda[t][h] = l0;
      ps.lambda_eq[t][h] = std::clamp(l0, gamma.sell[t][h], gamma.buy[t][h]);
    }
  out.grid_buy = make_grid(T, S);
  out.grid_sell = make_grid(T, S);

  double prev_obj = 0.0;
  int flat_count = 0;
  double prev_swing = 0.0;
  int swing_growth = 0;
  std::vector<double> mismatch_hist;

  for (int k = 0; k < mk.max_iter; ++k) {
    for (int t = 0; t < T; ++t)
      for (int h = 0; h < S; ++h) {
        ps.beta_buy[t][h] = ps.lambda_eq[t][h] + mk.tau;
        ps.beta_sell[t][h] = ps.lambda_eq[t][h] - mk.tau;
      }

    out.dispatches.clear();
    double objective = 0.0;
    for (int m = 0; m < M; ++m) {
      out.dispatches.push_back(solvers[m].solve_at(config.mgs[m], ps.beta_buy,
                                                   ps.beta_sell, mk.p0,
                                                   config.horizon));
      objective += out.dispatches.back().cost_expected;
    }

    IterationRecord rec;
    rec.k = k;
    rec.net_bid = make_grid(T, S);
    rec.grid_settlement = make_grid(T, S);
    rec.system_objective = objective;
    double mismatch = 0.0;
    double swing = 0.0;
    for (int t = 0; t < T; ++t)
      for (int h = 0; h < S; ++h) {
        double bid = 0.0;
        for (const auto& d : out.dispatches) bid += d.buy[t][h] - d.sell[t][h];
        rec.net_bid[t][h] = bid;

        const double carry =
            options.projected ? ps.lambda_eq[t][h] : ps.lambda[t][h];
        const double next = subgradient_step(carry, bid, mk.alpha);
        auto [leq, gb, gs] =
            clamp_and_settle(next, gamma.buy[t][h], gamma.sell[t][h], bid);
        swing = std::max(swing, std::abs(leq - ps.lambda_eq[t][h]));
        ps.lambda[t][h] = next;
        ps.lambda_eq[t][h] = leq;
        out.grid_buy[t][h] = gb;
        out.grid_sell[t][h] = gs;
        rec.grid_settlement[t][h] = gb - gs;
        mismatch = std::max(mismatch, std::abs(bid - (gb - gs)));
      }
    rec.mismatch = mismatch;
    rec.lambda_eq = ps.lambda_eq;
    out.iterations.push_back(std::move(rec));
    out.system_objective = objective;

    if (mismatch < mk.eps) {
      out.converged = true;
      break;
    }

    // Stall guard: flat objective AND no mismatch progress means the loop
    // is pinned oscillating (typically alpha too large to settle). A slow
    // but steady mismatch decline is legitimate and must not trip it.
    mismatch_hist.push_back(mismatch);
    const bool mismatch_flat =
        mismatch_hist.size() > 10 &&
        mismatch >= 0.999 * mismatch_hist[mismatch_hist.size() - 11];
    const double denom = std::max(1.0, std::abs(prev_obj));
    if (k > 0 && std::abs(objective - prev_obj) / denom < 1e-6 && mismatch_flat) {
      if (++flat_count >= 5) {
        out.stalled = true;
        break;
      }
    } else {
      flat_count = 0;
    }
    prev_obj = objective;

    // Divergence detector: lambda swings growing while the mismatch also
    // grows run-over-run.
    if (k > 0 && swing > prev_swing * (1.0 + 1e-9) && swing > mk.eps &&
        mismatch_flat) {
      if (++swing_growth >= 8) out.oscillating = true;
    } else {
      swing_growth = 0;
    }
    prev_swing = swing;
  }

  // Re-solve each MG tightly at the settled prices so the reported
  // dispatches carry certified KKT residuals and the final price state is
  // self-consistent (beta = lambda_eq +- tau).
  for (int t = 0; t < T; ++t)
    for (int h = 0; h < S; ++h) {
      ps.beta_buy[t][h] = ps.lambda_eq[t][h] + mk.tau;
      ps.beta_sell[t][h] = ps.lambda_eq[t][h] - mk.tau;
    }
  out.dispatches.clear();
  out.system_objective = 0.0;
  for (int m = 0; m < M; ++m) {
    solvers[m].solver.set_tolerance(1e-6);
    out.dispatches.push_back(solvers[m].solve_at(config.mgs[m], ps.beta_buy,
                                                 ps.beta_sell, mk.p0,
                                                 config.horizon));
    out.system_objective += out.dispatches.back().cost_expected;
  }

  out.final_prices = ps;
  out.pso_income = pso_income(out.dispatches, mk.tau);
  return out;
}

std::vector<MgDispatch> run_isolated(const MmgConfig& config,
                                     const ScenarioSet& scen) {
  const int T = config.horizon.hours;
  const GammaGrids gamma = realized_gamma(scen, T);
  std::vector<MgDispatch> out;
  for (size_t m = 0; m < config.mgs.size(); ++m)
    out.push_back(subproblem::solve_mg(config.mgs[m], static_cast<int>(m), scen,
                                       config.horizon, gamma.buy, gamma.sell,
                                       config.market.p0));
  return out;
}

}  // namespace mmg::market
