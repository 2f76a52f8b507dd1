#pragma once

#include <string>
#include <vector>

#include "mmg/domain.hpp"
#include "mmg/qp.hpp"
#include "mmg/qp_builder.hpp"
#include "mmg/scenarios.hpp"

namespace mmg::subproblem {

/// [t][h] grids, t = 0..T-1, h = 0..H (h = 0 is the base case).
using Grid = std::vector<std::vector<double>>;

Grid make_grid(int T, int S, double fill = 0.0);

/// Column layout of one MG's variable block inside a QP. All indices are
/// absolute (the block may sit at any offset inside a pooled problem).
struct MgVarLayout {
  int T = 0;       // hours
  int S = 1;       // scenario count H+1
  int num_dg = 0;
  int num_ess = 0;
  bool has_flex = false;
  int offset = 0;

  int size() const;

  // Per (t, h) decision variables.
  int dg_p(int g, int t, int h) const;
  int ess_c(int e, int t, int h) const;
  int ess_d(int e, int t, int h) const;
  int soc(int e, int t, int h) const;
  int rd(int t, int h) const;
  int cd(int t, int h) const;
  int buy(int t, int h) const;
  int sell(int t, int h) const;

  // Per-hour envelope (auxiliary) variables.
  int dg_hi(int g, int t) const;
  int dg_lo(int g, int t) const;
  int soc_hi(int e, int t) const;
  int soc_lo(int e, int t) const;
  int chg_hi(int e, int t) const;
  int chg_lo(int e, int t) const;
  int dis_hi(int e, int t) const;
  int dis_lo(int e, int t) const;
  int rd_lo(int t) const;
  int cd_hi(int t) const;
};

/// One MG's solved decision variables plus the cost split.
struct MgDispatch {
  std::string mg_id;
  std::vector<Grid> dg_power;       // [g][t][h]
  std::vector<Grid> ess_charge;     // [e][t][h]
  std::vector<Grid> ess_discharge;  // [e][t][h]
  std::vector<Grid> soc;            // [e][t][h]
  Grid load_rd;                     // [t][h] (empty when no flex)
  Grid load_cd;
  Grid buy;
  Grid sell;
  Grid trade_schedule;              // buy - sell

  // Envelopes, [g or e][t].
  std::vector<std::vector<double>> dg_hi, dg_lo;
  std::vector<std::vector<double>> soc_hi, soc_lo, chg_hi, chg_lo, dis_hi, dis_lo;
  std::vector<double> rd_lo, cd_hi;

  double cost_energy = 0.0;    // C_E
  double cost_reserve = 0.0;   // C_R
  double cost_expected = 0.0;  // C_exp = C_E + (1 - p0) C_R
  double objective = 0.0;      // QP objective value
};

struct CostSplit {
  double energy = 0.0;
  double reserve = 0.0;
  double expected = 0.0;
};

/// Scenario weight: w_0 = p0 (1 when there are no hedged scenarios),
/// w_h = (1 - p0)/H otherwise.
double scenario_weight(int h, int H, double p0);

struct MgProblem {
  qp::QpProblem qp;
  MgVarLayout layout;
};

/// Raised when a subproblem is infeasible; carries the MG id and the
/// dominant constraint family from the infeasibility certificate.
struct InfeasibleError : std::runtime_error {
  InfeasibleError(const std::string& mg, const std::string& family)
      : std::runtime_error("MG '" + mg + "' dispatch is infeasible" +
                           (family.empty() ? "" : " (binding family: " + family + ")")),
        mg_id(mg), constraint_family(family) {}
  std::string mg_id;
  std::string constraint_family;
};

/// Appends MG m's variables, constraints and local costs to an assembler-
/// owned problem. buy_cost/sell_cost are the per-(t,h) linear trade
/// coefficients applied at scenario weight (beta_b and -beta_s for the
/// standalone subproblem; service fees or zero for the pooled problem).
MgVarLayout append_mg_block(qp::QpAssembler& builder, const domain::MgConfig& mg,
                            int mg_index, const scenarios::ScenarioSet& scen,
                            const domain::HorizonSpec& horizon, const Grid& buy_cost,
                            const Grid& sell_cost, double p0);

qp::QpProblem build_mg_problem(const domain::MgConfig& mg, int mg_index,
                               const scenarios::ScenarioSet& scen,
                               const domain::HorizonSpec& horizon,
                               const Grid& beta_buy, const Grid& beta_sell,
                               double p0, MgVarLayout* layout_out = nullptr);

MgDispatch solve_mg(const domain::MgConfig& mg, int mg_index,
                    const scenarios::ScenarioSet& scen,
                    const domain::HorizonSpec& horizon, const Grid& beta_buy,
                    const Grid& beta_sell, double p0);

/// Reads one MG block out of a primal vector; canonicalizes the
/// per-scenario SOC bookkeeping values and computes the cost split.
MgDispatch extract_dispatch(const MgVarLayout& layout, const Eigen::VectorXd& x,
                            const domain::MgConfig& mg,
                            const Grid& beta_buy, const Grid& beta_sell, double p0,
                            const domain::HorizonSpec& horizon);

/// C_E, C_R, C_exp from solved variables and trading prices.
CostSplit cost_breakdown(const MgDispatch& dispatch, const domain::MgConfig& mg,
                         const Grid& beta_buy, const Grid& beta_sell, double p0);

}  // namespace mmg::subproblem
