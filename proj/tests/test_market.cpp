#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "mmg/domain.hpp"
#include "mmg/market.hpp"
#include "mmg/scenarios.hpp"
#include "test_util.hpp"

using namespace mmg;
using market::clamp_and_settle;
using market::subgradient_step;

namespace {

domain::MmgConfig two_mg_config() {
  return domain::load_config_file(testutil::config_path("two_mg.yaml"));
}

double final_mismatch(const market::MarketOutcome& out) {
  REQUIRE(!out.iterations.empty());
  return out.iterations.back().mismatch;
}

}  // namespace

TEST_CASE("subgradient step arithmetic") {
  CHECK(subgradient_step(100.0, 0.2, 4.0) == doctest::Approx(100.8));
  CHECK(subgradient_step(77.0, 0.0, 9.0) == doctest::Approx(77.0));
  CHECK(subgradient_step(100.0, -0.5, 2.0) == doctest::Approx(99.0));
}

TEST_CASE("clamp_and_settle covers all three price regions") {
  {
    auto [leq, gb, gs] = clamp_and_settle(120.0, 110.0, 50.0, 0.3);
    CHECK(leq == doctest::Approx(110.0));
    CHECK(gb == doctest::Approx(0.3));
    CHECK(gs == doctest::Approx(0.0));
  }
  {
    auto [leq, gb, gs] = clamp_and_settle(40.0, 110.0, 50.0, -0.4);
    CHECK(leq == doctest::Approx(50.0));
    CHECK(gb == doctest::Approx(0.0));
    CHECK(gs == doctest::Approx(0.4));
  }
  {
    auto [leq, gb, gs] = clamp_and_settle(80.0, 110.0, 50.0, 0.0);
    CHECK(leq == doctest::Approx(80.0));
    CHECK(gb == doctest::Approx(0.0));
    CHECK(gs == doctest::Approx(0.0));
  }
}

TEST_CASE("two-microgrid instance clears at the marginal price of 75") {
  auto cfg = two_mg_config();
  auto scen = scenarios::default_scenarios(cfg);
  auto out = market::clear_market(cfg, scen);
  REQUIRE(out.converged);
  CHECK(final_mismatch(out) < cfg.market.eps);

  const int S = static_cast<int>(scen.scenarios.size());
  for (int h = 0; h < S; ++h) {
    CHECK(out.final_prices.lambda_eq[0][h] == doctest::Approx(75.0).epsilon(0.01));
    // Seller covers the buyer; the grid stays out of the trade.
    CHECK(out.dispatches[0].sell[0][h] == doctest::Approx(0.5).epsilon(0.02));
    CHECK(out.dispatches[1].buy[0][h] == doctest::Approx(0.5).epsilon(0.02));
    CHECK(std::abs(out.grid_buy[0][h]) <= 1e-6);
    CHECK(std::abs(out.grid_sell[0][h]) <= 1e-6);
  }
}

TEST_CASE("a tight grid buy price clamps the MEP and splits the supply") {
  auto cfg = two_mg_config();
  // Lower the grid buy price below the internal marginal price of 75:
  // the MEP pins at 72 and the residual demand settles with the grid.
  cfg.market.gamma_buy.mean.assign(1, 72.0);
  auto scen = scenarios::default_scenarios(cfg);
  auto out = market::clear_market(cfg, scen);
  REQUIRE(out.converged);
  const int S = static_cast<int>(scen.scenarios.size());
  for (int h = 0; h < S; ++h) {
    CHECK(out.final_prices.lambda_eq[0][h] == doctest::Approx(72.0).epsilon(1e-6));
    // At beta = 72 the DG supplies (72-70)/10 = 0.2 MW; the grid covers
    // the remaining 0.3 MW of MG B's demand.
    CHECK(out.dispatches[0].sell[0][h] == doctest::Approx(0.2).epsilon(0.05));
    CHECK(out.grid_buy[0][h] == doctest::Approx(0.3).epsilon(0.05));
  }
}

TEST_CASE("price band and settlement invariants hold at every iteration") {
  auto cfg = two_mg_config();
  auto scen = scenarios::default_scenarios(cfg);
  auto out = market::clear_market(cfg, scen);
  const int S = static_cast<int>(scen.scenarios.size());
  for (const auto& rec : out.iterations)
    for (int h = 0; h < S; ++h) {
      CHECK(rec.lambda_eq[0][h] >= scen.scenarios[h].gamma_sell[0] - 1e-12);
      CHECK(rec.lambda_eq[0][h] <= scen.scenarios[h].gamma_buy[0] + 1e-12);
    }
  for (int h = 0; h < S; ++h) {
    CHECK(out.grid_buy[0][h] * out.grid_sell[0][h] == doctest::Approx(0.0));
    // Interior price => no grid settlement.
    const double leq = out.final_prices.lambda_eq[0][h];
    if (leq > scen.scenarios[h].gamma_sell[0] + 1e-9 &&
        leq < scen.scenarios[h].gamma_buy[0] - 1e-9) {
      CHECK(std::abs(out.grid_buy[0][h]) <= 1e-9);
      CHECK(std::abs(out.grid_sell[0][h]) <= 1e-9);
    }
    for (const auto& d : out.dispatches)
      CHECK(d.buy[0][h] * d.sell[0][h] <= 1e-8);
  }
}

TEST_CASE("beta prices track the MEP with the service fee") {
  auto cfg = two_mg_config();
  cfg.market.tau = 5.0;
  auto scen = scenarios::default_scenarios(cfg);
  auto out = market::clear_market(cfg, scen);
  const int S = static_cast<int>(scen.scenarios.size());
  for (int h = 0; h < S; ++h) {
    CHECK(out.final_prices.beta_buy[0][h] ==
          doctest::Approx(out.final_prices.lambda_eq[0][h] + 5.0));
    CHECK(out.final_prices.beta_sell[0][h] ==
          doctest::Approx(out.final_prices.lambda_eq[0][h] - 5.0));
  }
}

TEST_CASE("pso_income charges the fee on gross traded volume") {
  auto cfg = two_mg_config();
  cfg.market.tau = 5.0;
  auto scen = scenarios::default_scenarios(cfg);
  auto out = market::clear_market(cfg, scen);
  auto income = market::pso_income(out.dispatches, 5.0);
  const int S = static_cast<int>(scen.scenarios.size());
  for (int h = 0; h < S; ++h) {
    double gross = 0.0;
    for (const auto& d : out.dispatches) gross += d.buy[0][h] + d.sell[0][h];
    CHECK(income[0][h] == doctest::Approx(5.0 * gross));
  }
  CHECK(market::pso_income(out.dispatches, 0.0)[0][0] == doctest::Approx(0.0));
}

TEST_CASE("isolated trading is costlier and ignores the fee parameter") {
  auto cfg = two_mg_config();
  auto scen = scenarios::default_scenarios(cfg);
  auto iso = market::run_isolated(cfg, scen);
  REQUIRE(iso.size() == 2);
  const int S = static_cast<int>(scen.scenarios.size());
  // MG B can only import at gamma_buy = 200.
  for (int h = 0; h < S; ++h)
    CHECK(iso[1].buy[0][h] == doctest::Approx(0.5).epsilon(1e-4));
  double iso_total = iso[0].cost_expected + iso[1].cost_expected;

  auto coop = market::clear_market(cfg, scen);
  CHECK(coop.system_objective < iso_total - 1e-6);

  auto cfg_fee = two_mg_config();
  cfg_fee.market.tau = 42.0;
  auto iso_fee = market::run_isolated(cfg_fee, scen);
  CHECK(iso_fee[0].cost_expected == doctest::Approx(iso[0].cost_expected));
  CHECK(iso_fee[1].cost_expected == doctest::Approx(iso[1].cost_expected));
}

TEST_CASE("a self-sufficient single microgrid converges with zero trades") {
  // One MG whose generator covers its own demand: no counterparty exists,
  // so the MEP settles at the local marginal cost with no trades.
  auto cfg = domain::load_config_file(testutil::config_path("minimal.yaml"));
  for (auto& v : cfg.mgs[0].demand.dev_plus) v = 0.0;
  for (auto& v : cfg.mgs[0].demand.dev_minus) v = 0.0;
  auto scen = scenarios::default_scenarios(cfg);
  auto out = market::clear_market(cfg, scen);
  REQUIRE(out.converged);
  const int T = cfg.horizon.hours;
  const int S = static_cast<int>(scen.scenarios.size());
  for (int t = 0; t < T; ++t)
    for (int h = 0; h < S; ++h) {
      CHECK(std::abs(out.dispatches[0].trade_schedule[t][h]) <= 0.01);
      CHECK(out.final_prices.lambda_eq[t][h] >
            scen.scenarios[h].gamma_sell[t] - 1e-9);
      CHECK(out.final_prices.lambda_eq[t][h] <
            scen.scenarios[h].gamma_buy[t] + 1e-9);
    }
}

TEST_CASE("the final objective is independent of the initial price") {
  auto cfg = two_mg_config();
  auto scen = scenarios::default_scenarios(cfg);
  double objs[2];
  int idx = 0;
  for (double l0 : {15.0, 190.0}) {
    cfg.market.lambda0.assign(1, l0);
    auto out = market::clear_market(cfg, scen);
    REQUIRE(out.converged);
    objs[idx++] = out.system_objective;
  }
  CHECK(std::abs(objs[0] - objs[1]) <=
        1e-3 * std::max(1.0, std::abs(objs[1])));
}

TEST_CASE("the unclamped variant also settles the derived instance") {
  auto cfg = two_mg_config();
  auto scen = scenarios::default_scenarios(cfg);
  market::ClearOptions opt;
  opt.projected = false;
  auto out = market::clear_market(cfg, scen, opt);
  REQUIRE(out.converged);
  CHECK(out.final_prices.lambda_eq[0][0] == doctest::Approx(75.0).epsilon(0.01));
}

TEST_CASE("iteration trace is well-formed") {
  auto cfg = two_mg_config();
  auto scen = scenarios::default_scenarios(cfg);
  auto out = market::clear_market(cfg, scen);
  int expect = 0;
  for (const auto& rec : out.iterations) {
    CHECK(rec.k == expect++);
    CHECK(rec.mismatch >= 0.0);
  }
  CHECK(final_mismatch(out) < cfg.market.eps);
}
