#include "mmg/audit.hpp"

#include <algorithm>
#include <cmath>

namespace mmg::audit {

using subproblem::MgDispatch;

namespace {

struct Collector {
  AuditReport rep;
  double tol;

  void fail(const std::string& name, int t, int h, double amount) {
    if (amount <= tol) return;
    rep.violations.push_back({name, t, h, amount, false});
    rep.max_violation = std::max(rep.max_violation, amount);
  }
  void warn(const std::string& name, int t, int h, double amount) {
    if (amount <= tol) return;
    rep.warnings.push_back({name, t, h, amount, true});
  }
};

}  // namespace

AuditReport audit_dispatch(const MgDispatch& d, const domain::MgConfig& mg,
                           int mg_index, const scenarios::ScenarioSet& scen,
                           const domain::HorizonSpec& horizon, double tol) {
  Collector c;
  c.tol = tol;
  const int T = horizon.hours;
  const int S = static_cast<int>(scen.scenarios.size());
  const double dt = horizon.dt;
  const bool flex = !d.load_rd.empty();

  // Power balance per (t, h).
  for (int t = 0; t < T; ++t)
    for (int h = 0; h < S; ++h) {
      const auto& sc = scen.scenarios[h];
      double net = sc.demand[mg_index][t];
      for (const auto& w : sc.wind[mg_index]) net -= w[t];
      for (const auto& s : sc.pv[mg_index]) net -= s[t];
      double lhs = d.buy[t][h] - d.sell[t][h];
      for (size_t g = 0; g < mg.dgs.size(); ++g) lhs += d.dg_power[g][t][h];
      for (size_t e = 0; e < mg.esses.size(); ++e)
        lhs += d.ess_discharge[e][t][h] - d.ess_charge[e][t][h];
      if (flex) lhs += d.load_cd[t][h] - d.load_rd[t][h];
      c.fail("power-balance", t, h, std::abs(lhs - net));
    }

  // DG limits, reserve bands, inter-hour ramps over all scenario pairs.
  for (size_t g = 0; g < mg.dgs.size(); ++g) {
    const auto& dg = mg.dgs[g];
    for (int t = 0; t < T; ++t) {
      double pmax = -1e300, pmin = 1e300;
      for (int h = 0; h < S; ++h) {
        const double p = d.dg_power[g][t][h];
        pmax = std::max(pmax, p);
        pmin = std::min(pmin, p);
        c.fail("dg-capacity", t, h, std::max(p - dg.p_max, dg.p_min - p));
        if (h != 0) {
          c.fail("dg-reserve-band", t, h, p - d.dg_power[g][t][0] - dg.r_up);
          c.fail("dg-reserve-band", t, h, d.dg_power[g][t][0] - p - dg.r_dn);
        }
      }
      if (t >= 1) {
        double prev_max = -1e300, prev_min = 1e300;
        for (int h = 0; h < S; ++h) {
          prev_max = std::max(prev_max, d.dg_power[g][t - 1][h]);
          prev_min = std::min(prev_min, d.dg_power[g][t - 1][h]);
        }
        c.fail("dg-ramp", t, -1, pmax - prev_min - dg.ramp_up);
        c.fail("dg-ramp", t, -1, prev_max - pmin - dg.ramp_dn);
      }
    }
  }

  // ESS: power caps, SOC recursion per scenario, SOC bounds, terminal.
  for (size_t e = 0; e < mg.esses.size(); ++e) {
    const auto& es = mg.esses[e];
    const double kc = dt / es.capacity * es.eta_c;
    const double kd = dt / es.capacity / es.eta_d;
    double prev0 = es.soc_ref;
    double prev_max = es.soc_ref, prev_min = es.soc_ref;
    for (int t = 0; t < T; ++t) {
      double soc_max_h = -1e300, soc_min_h = 1e300;
      double c_max = -1e300, c_min = 1e300, d_max = -1e300, d_min = 1e300;
      for (int h = 0; h < S; ++h) {
        const double pc = d.ess_charge[e][t][h];
        const double pd = d.ess_discharge[e][t][h];
        const double soc = d.soc[e][t][h];
        c.fail("ess-charge-cap", t, h, std::max(pc - es.pc_max, -pc));
        c.fail("ess-discharge-cap", t, h, std::max(pd - es.pd_max, -pd));
        c.fail("ess-soc-bounds", t, h, std::max(soc - es.soc_max, es.soc_min - soc));
        c.warn("ess-simultaneous", t, h, std::min(pc, pd));
        soc_max_h = std::max(soc_max_h, soc);
        soc_min_h = std::min(soc_min_h, soc);
        c_max = std::max(c_max, pc);
        c_min = std::min(c_min, pc);
        d_max = std::max(d_max, pd);
        d_min = std::min(d_min, pd);
      }
      // Base-case recursion (SOC) and the nonconvex worst-case coverage
      // inequalities (SOC2/SOC1): the scenario SOC family must reach at
      // least the max-accumulation trajectory from above and the
      // min-accumulation trajectory from below.
      const double pc0 = d.ess_charge[e][t][0], pd0 = d.ess_discharge[e][t][0];
      c.fail("ess-soc-recursion", t, 0,
             std::abs(d.soc[e][t][0] - (prev0 + kc * pc0 - kd * pd0)));
      c.fail("ess-soc-coverage-hi", t, -1,
             (prev_max + kc * c_max - kd * d_min) - soc_max_h);
      c.fail("ess-soc-coverage-lo", t, -1,
             soc_min_h - (prev_min + kc * c_min - kd * d_max));
      prev0 = d.soc[e][t][0];
      prev_max = soc_max_h;
      prev_min = soc_min_h;
    }
    for (int h = 0; h < S; ++h) {
      const double fin = d.soc[e][T - 1][h];
      if (h == 0)
        c.fail("ess-terminal", T - 1, h, std::abs(fin - es.soc_ref));
      else
        c.fail("ess-terminal", T - 1, h,
               std::max(fin - 1.2 * es.soc_ref, 0.8 * es.soc_ref - fin));
    }
  }

  // Flexible load: caps, base-case neutrality, worst-case shed budget.
  if (flex && mg.flex) {
    double neutral = 0.0, shed = 0.0;
    for (int t = 0; t < T; ++t) {
      double rd_min = 1e300, cd_max = -1e300;
      for (int h = 0; h < S; ++h) {
        const double rd = d.load_rd[t][h], cd = d.load_cd[t][h];
        c.fail("load-caps", t, h,
               std::max({rd - mg.flex->rd_max[t], cd - mg.flex->cd_max[t], -rd, -cd}));
        rd_min = std::min(rd_min, rd);
        cd_max = std::max(cd_max, cd);
      }
      neutral += d.load_rd[t][0] - d.load_cd[t][0];
      shed += dt * (cd_max - rd_min);
    }
    c.fail("load-neutrality", -1, -1, std::abs(neutral));
    c.fail("shed-budget", -1, -1, shed - mg.flex->e_shed);
  }

  // Trade caps and simultaneous buy/sell (soft).
  for (int t = 0; t < T; ++t)
    for (int h = 0; h < S; ++h) {
      c.fail("trade-cap", t, h,
             std::max({d.buy[t][h] - mg.p_pso_max, d.sell[t][h] - mg.p_pso_max,
                       -d.buy[t][h], -d.sell[t][h]}));
      c.warn("trade-simultaneous", t, h, std::min(d.buy[t][h], d.sell[t][h]));
    }

  return c.rep;
}

}  // namespace mmg::audit
