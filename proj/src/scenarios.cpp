#include "mmg/scenarios.hpp"

#include <stdexcept>
#include <string>

namespace mmg::scenarios {

using domain::MmgConfig;
using domain::SeriesKind;
using domain::UncertainSeries;

namespace {

// Canonical L8(2^7). Columns 1-5 follow the published selection for a
// 4-MG system (PSO, MG1..MG4); columns 6-7 complete the family as the
// remaining two-factor interactions.
constexpr int kL8[8][7] = {
    {+1, +1, +1, +1, +1, +1, +1},
    {+1, +1, +1, -1, -1, -1, -1},
    {+1, -1, -1, +1, +1, -1, -1},
    {+1, -1, -1, -1, -1, +1, +1},
    {-1, +1, -1, +1, -1, +1, -1},
    {-1, +1, -1, -1, +1, -1, +1},
    {-1, -1, +1, +1, -1, -1, +1},
    {-1, -1, +1, -1, +1, +1, -1},
};

std::vector<double> pick(const UncertainSeries& s, SeriesKind kind, int level) {
  const auto b = domain::expand_bounds(s, kind);
  return level > 0 ? b.plus_level : b.minus_level;
}

Scenario make_base(const MmgConfig& config) {
  Scenario base;
  base.h = 0;
  base.gamma_buy = config.market.gamma_buy.mean;
  base.gamma_sell = config.market.gamma_sell.mean;
  for (const auto& mg : config.mgs) {
    base.demand.push_back(mg.demand.mean);
    auto& w = base.wind.emplace_back();
    for (const auto& series : mg.wind) w.push_back(series.mean);
    auto& s = base.pv.emplace_back();
    for (const auto& series : mg.pv) s.push_back(series.mean);
  }
  return base;
}

}  // namespace

LevelMatrix build_orthogonal_array(int num_factors) {
  if (num_factors < 1 || num_factors > 7) {
    throw std::invalid_argument(
        "orthogonal array: " + std::to_string(num_factors) +
        " factors unsupported; the L8(2^7) design covers 1 to 7 factors "
        "(at most 6 microgrids plus the grid-price factor)");
  }
  LevelMatrix m;
  m.rows.resize(8);
  for (int r = 0; r < 8; ++r) {
    m.rows[r].assign(kL8[r], kL8[r] + num_factors);
  }
  return m;
}

ScenarioSet realize_scenarios(const MmgConfig& config, const LevelMatrix& levels) {
  const int M = static_cast<int>(config.mgs.size());
  if (levels.num_cols() != M + 1) {
    throw std::invalid_argument(
        "scenario realization: level matrix has " +
        std::to_string(levels.num_cols()) + " columns, expected " +
        std::to_string(M + 1) + " (PSO + one per MG)");
  }

  ScenarioSet set;
  set.levels = levels;
  set.scenarios.reserve(levels.num_rows() + 1);

  set.scenarios.push_back(make_base(config));

  for (int r = 0; r < levels.num_rows(); ++r) {
    Scenario sc;
    sc.h = r + 1;
    const int pso_level = levels.rows[r][0];
    sc.gamma_buy = pick(config.market.gamma_buy, SeriesKind::price, pso_level);
    sc.gamma_sell = pick(config.market.gamma_sell, SeriesKind::price, pso_level);
    for (int m = 0; m < M; ++m) {
      const auto& mg = config.mgs[m];
      const int level = levels.rows[r][m + 1];
      sc.demand.push_back(pick(mg.demand, SeriesKind::demand, level));
      auto& w = sc.wind.emplace_back();
      for (const auto& series : mg.wind) w.push_back(pick(series, SeriesKind::res, level));
      auto& s = sc.pv.emplace_back();
      for (const auto& series : mg.pv) s.push_back(pick(series, SeriesKind::res, level));
    }
    set.scenarios.push_back(std::move(sc));
  }
  return set;
}

ScenarioSet base_case_only(const MmgConfig& config) {
  ScenarioSet set;
  set.scenarios.push_back(make_base(config));
  return set;
}

ScenarioSet default_scenarios(const MmgConfig& config) {
  return realize_scenarios(
      config, build_orthogonal_array(static_cast<int>(config.mgs.size()) + 1));
}

}  // namespace mmg::scenarios
