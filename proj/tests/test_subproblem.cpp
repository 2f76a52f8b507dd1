#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>

#include "mmg/audit.hpp"
#include "mmg/domain.hpp"
#include "mmg/scenarios.hpp"
#include "mmg/subproblem.hpp"
#include "test_util.hpp"

using namespace mmg;
using subproblem::Grid;
using subproblem::make_grid;

namespace {

// One-DG microgrid with configurable demand, used by the analytic cases.
domain::MgConfig simple_mg(double demand_mean, double dev = 0.0,
                           double p_max = 1.0) {
  domain::MgConfig mg;
  mg.id = "test";
  domain::DgParams dg;
  dg.a = 5.0;
  dg.b = 70.0;
  dg.p_max = p_max;
  dg.r_up = dg.r_dn = p_max;
  dg.ramp_up = dg.ramp_dn = p_max;
  mg.dgs.push_back(dg);
  mg.demand.mean = {demand_mean};
  mg.demand.dev_plus = {dev};
  mg.demand.dev_minus = {dev};
  mg.p_pso_max = 1.5;
  return mg;
}

domain::MmgConfig wrap(const domain::MgConfig& mg) {
  domain::MmgConfig cfg;
  cfg.horizon.hours = static_cast<int>(mg.demand.mean.size());
  cfg.mgs.push_back(mg);
  cfg.market.gamma_buy.mean.assign(cfg.horizon.hours, 200.0);
  cfg.market.gamma_buy.dev_plus.assign(cfg.horizon.hours, 0.0);
  cfg.market.gamma_buy.dev_minus.assign(cfg.horizon.hours, 0.0);
  cfg.market.gamma_sell = cfg.market.gamma_buy;
  cfg.market.gamma_sell.mean.assign(cfg.horizon.hours, 10.0);
  return cfg;
}

}  // namespace

TEST_CASE("scenario weights split p0 across the hedged set") {
  CHECK(subproblem::scenario_weight(0, 8, 0.5) == doctest::Approx(0.5));
  CHECK(subproblem::scenario_weight(3, 8, 0.5) == doctest::Approx(0.0625));
  CHECK(subproblem::scenario_weight(0, 0, 0.3) == doctest::Approx(1.0));
  CHECK(subproblem::scenario_weight(0, 4, 0.2) == doctest::Approx(0.2));
  CHECK(subproblem::scenario_weight(1, 4, 0.2) == doctest::Approx(0.2));
}

TEST_CASE("variable count matches the documented index map") {
  // Case-study MG2: 1 DG, 1 ESS, no flexible load, T=24, H=8. Per (t,h):
  // dg + charge/discharge + soc + buy/sell = 6. Per hour: dg hi/lo (2),
  // soc hi/lo (2), charge/discharge hi/lo (4).
  auto cfg = domain::load_config_file(testutil::config_path("case_study.yaml"));
  auto scen = scenarios::default_scenarios(cfg);
  subproblem::MgVarLayout lay;
  auto prob = subproblem::build_mg_problem(
      cfg.mgs[1], 1, scen, cfg.horizon,
      make_grid(24, 9, 100.0), make_grid(24, 9, 90.0), 0.5, &lay);
  CHECK(lay.size() == 24 * 9 * 6 + 24 * 8);
  CHECK(prob.n == lay.size());
}

TEST_CASE("zero demand yields the zero dispatch at zero cost") {
  auto mg = simple_mg(0.0);
  auto cfg = wrap(mg);
  auto scen = scenarios::default_scenarios(cfg);
  const int S = static_cast<int>(scen.scenarios.size());
  auto d = subproblem::solve_mg(mg, 0, scen, cfg.horizon,
                                make_grid(1, S, 150.0), make_grid(1, S, 20.0), 0.5);
  CHECK(std::abs(d.cost_expected) <= 1e-6);
  for (int h = 0; h < S; ++h) {
    CHECK(std::abs(d.dg_power[0][0][h]) <= 1e-6);
    CHECK(std::abs(d.trade_schedule[0][h]) <= 1e-6);
  }
}

TEST_CASE("cheap local generation serves demand without trading") {
  // Marginal cost at 0.5 MW is 10*0.5 + 70 = 75 < beta_buy = 200, and
  // beta_sell = 10 < 70 kills exports.
  auto mg = simple_mg(0.5);
  auto cfg = wrap(mg);
  auto scen = scenarios::default_scenarios(cfg);
  const int S = static_cast<int>(scen.scenarios.size());
  auto d = subproblem::solve_mg(mg, 0, scen, cfg.horizon,
                                make_grid(1, S, 200.0), make_grid(1, S, 10.0), 0.5);
  for (int h = 0; h < S; ++h) {
    CHECK(d.dg_power[0][0][h] == doctest::Approx(0.5).epsilon(1e-4));
    CHECK(std::abs(d.buy[0][h]) <= 1e-5);
    CHECK(std::abs(d.sell[0][h]) <= 1e-5);
  }
  CHECK(d.cost_energy == doctest::Approx(5 * 0.25 + 70 * 0.5).epsilon(1e-4));
}

TEST_CASE("a rich export price pushes the DG to its capacity") {
  // KKT: 10 P + 70 = 80 => P = 1.0, exactly p_max; the surplus above the
  // 0.5 MW local demand is exported.
  auto mg = simple_mg(0.5);
  auto cfg = wrap(mg);
  auto scen = scenarios::default_scenarios(cfg);
  const int S = static_cast<int>(scen.scenarios.size());
  auto d = subproblem::solve_mg(mg, 0, scen, cfg.horizon,
                                make_grid(1, S, 90.0), make_grid(1, S, 80.0), 0.5);
  for (int h = 0; h < S; ++h) {
    CHECK(d.dg_power[0][0][h] == doctest::Approx(1.0).epsilon(1e-4));
    CHECK(d.sell[0][h] == doctest::Approx(0.5).epsilon(1e-4));
    CHECK(std::abs(d.buy[0][h]) <= 1e-5);
  }
}

TEST_CASE("p0 = 1 removes the reserve term from the objective") {
  auto mg = simple_mg(0.5, 0.05);
  auto cfg = wrap(mg);
  auto scen = scenarios::default_scenarios(cfg);
  const int S = static_cast<int>(scen.scenarios.size());
  auto d = subproblem::solve_mg(mg, 0, scen, cfg.horizon,
                                make_grid(1, S, 200.0), make_grid(1, S, 10.0), 1.0);
  CHECK(d.cost_expected == doctest::Approx(d.cost_energy).epsilon(1e-9));
}

TEST_CASE("cost_breakdown implements the reserve-cost definition") {
  // Fabricated dispatch: one hour, H = 2, linear DG (a=0, b=1) so the
  // stage costs equal the dispatched power: 10, 12, 14.
  domain::MgConfig mg;
  mg.id = "pseudo";
  domain::DgParams dg;
  dg.b = 1.0;
  dg.p_max = 20.0;
  dg.ramp_up = dg.ramp_dn = 20.0;
  mg.dgs.push_back(dg);
  mg.demand.mean = {10.0};
  mg.demand.dev_plus = {4.0};
  mg.demand.dev_minus = {2.0};
  mg.p_pso_max = 0.0;

  subproblem::MgDispatch d;
  d.mg_id = mg.id;
  d.dg_power = {Grid{{10.0, 12.0, 14.0}}};
  d.buy = make_grid(1, 3);
  d.sell = make_grid(1, 3);
  d.trade_schedule = make_grid(1, 3);

  domain::HorizonSpec hz;
  hz.hours = 1;
  auto split = subproblem::cost_breakdown(d, mg, make_grid(1, 3, 100.0),
                                          make_grid(1, 3, 90.0), 0.5);
  CHECK(split.energy == doctest::Approx(10.0));
  CHECK(split.reserve == doctest::Approx(3.0));  // (12+14)/2 - 10
  CHECK(split.expected == doctest::Approx(11.5));

  // The identity C_exp = C_E + (1-p0) C_R at other weights.
  auto at_p0 = subproblem::cost_breakdown(d, mg, make_grid(1, 3, 100.0),
                                          make_grid(1, 3, 90.0), 0.2);
  CHECK(at_p0.expected ==
        doctest::Approx(at_p0.energy + 0.8 * at_p0.reserve));
}

TEST_CASE("infeasible demand names the binding constraint family") {
  auto mg = simple_mg(5.0);  // demand 5 MW > p_max 1 + p_pso_max 1.5
  auto cfg = wrap(mg);
  auto scen = scenarios::default_scenarios(cfg);
  const int S = static_cast<int>(scen.scenarios.size());
  CHECK_THROWS_AS(subproblem::solve_mg(mg, 0, scen, cfg.horizon,
                                       make_grid(1, S, 200.0),
                                       make_grid(1, S, 10.0), 0.5),
                  subproblem::InfeasibleError);
}

TEST_CASE("deterministic single-scenario solve has zero reserve cost") {
  auto cfg = domain::load_config_file(testutil::config_path("minimal.yaml"));
  auto scen = scenarios::base_case_only(cfg);
  auto d = subproblem::solve_mg(cfg.mgs[0], 0, scen, cfg.horizon,
                                make_grid(cfg.horizon.hours, 1, 150.0),
                                make_grid(cfg.horizon.hours, 1, 40.0),
                                cfg.market.p0);
  CHECK(std::abs(d.cost_reserve) <= 1e-8);
  CHECK(d.cost_expected == doctest::Approx(d.cost_energy));
}

TEST_CASE("solved case-study microgrids pass the constraint audit") {
  auto cfg = domain::load_config_file(testutil::config_path("case_study.yaml"));
  auto scen = scenarios::default_scenarios(cfg);
  const int T = cfg.horizon.hours;
  const int S = static_cast<int>(scen.scenarios.size());
  Grid bb(T), bs(T);
  for (int t = 0; t < T; ++t) {
    bb[t].assign(S, 0.0);
    bs[t].assign(S, 0.0);
    for (int h = 0; h < S; ++h) {
      bb[t][h] = scen.scenarios[h].gamma_buy[t];
      bs[t][h] = scen.scenarios[h].gamma_sell[t];
    }
  }
  for (size_t m = 0; m < cfg.mgs.size(); ++m) {
    auto d = subproblem::solve_mg(cfg.mgs[m], static_cast<int>(m), scen,
                                  cfg.horizon, bb, bs, cfg.market.p0);
    auto report = audit::audit_dispatch(d, cfg.mgs[m], static_cast<int>(m),
                                        scen, cfg.horizon);
    INFO("MG ", m, " max violation ", report.max_violation);
    CHECK(report.ok(1e-6));

    // Envelope tightness: the per-hour DG envelope dominates all scenarios.
    for (size_t g = 0; g < cfg.mgs[m].dgs.size(); ++g)
      for (int t = 0; t < T; ++t) {
        double mx = *std::max_element(d.dg_power[g][t].begin(),
                                      d.dg_power[g][t].end());
        double mn = *std::min_element(d.dg_power[g][t].begin(),
                                      d.dg_power[g][t].end());
        CHECK(d.dg_hi[g][t] >= mx - 1e-6);
        CHECK(d.dg_lo[g][t] <= mn + 1e-6);
      }

    // Simultaneous buy/sell is excluded when the price spread is positive.
    for (int t = 0; t < T; ++t)
      for (int h = 0; h < S; ++h)
        CHECK(d.buy[t][h] * d.sell[t][h] <= 1e-8);

    // Terminal SOC conditions.
    for (size_t e = 0; e < cfg.mgs[m].esses.size(); ++e) {
      const auto& ess = cfg.mgs[m].esses[e];
      CHECK(d.soc[e][T - 1][0] == doctest::Approx(ess.soc_ref).epsilon(1e-6));
      for (int h = 1; h < S; ++h) {
        CHECK(d.soc[e][T - 1][h] >= 0.8 * ess.soc_ref - 1e-6);
        CHECK(d.soc[e][T - 1][h] <= 1.2 * ess.soc_ref + 1e-6);
      }
    }

    // Base-case load neutrality and the worst-case shed budget.
    if (cfg.mgs[m].flex) {
      double net = 0.0, shed = 0.0;
      for (int t = 0; t < T; ++t) {
        net += d.load_rd[t][0] - d.load_cd[t][0];
        double cd_max = *std::max_element(d.load_cd[t].begin(), d.load_cd[t].end());
        double rd_min = *std::min_element(d.load_rd[t].begin(), d.load_rd[t].end());
        shed += cfg.horizon.dt * (cd_max - rd_min);
      }
      CHECK(std::abs(net) <= 1e-6);
      CHECK(shed <= cfg.mgs[m].flex->e_shed + 1e-6);
    }
  }
}

TEST_CASE("the audit flags a corrupted dispatch") {
  auto mg = simple_mg(0.5);
  auto cfg = wrap(mg);
  auto scen = scenarios::default_scenarios(cfg);
  const int S = static_cast<int>(scen.scenarios.size());
  auto d = subproblem::solve_mg(mg, 0, scen, cfg.horizon,
                                make_grid(1, S, 200.0), make_grid(1, S, 10.0), 0.5);
  d.dg_power[0][0][0] += 0.2;  // breaks the base-case power balance
  auto report = audit::audit_dispatch(d, mg, 0, scen, cfg.horizon);
  CHECK(!report.ok(1e-6));
  REQUIRE(!report.violations.empty());
  bool found = false;
  for (const auto& v : report.violations)
    if (v.constraint == "power-balance") found = true;
  CHECK(found);
}

TEST_CASE("build rejects malformed price grids and weights") {
  auto mg = simple_mg(0.5);
  auto cfg = wrap(mg);
  auto scen = scenarios::default_scenarios(cfg);
  const int S = static_cast<int>(scen.scenarios.size());
  CHECK_THROWS(subproblem::build_mg_problem(mg, 0, scen, cfg.horizon,
                                            make_grid(1, S - 1, 100.0),
                                            make_grid(1, S, 90.0), 0.5));
  CHECK_THROWS(subproblem::build_mg_problem(mg, 0, scen, cfg.horizon,
                                            make_grid(1, S, 100.0),
                                            make_grid(1, S, 90.0), 0.0));
}
