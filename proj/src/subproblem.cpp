#include "mmg/subproblem.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace mmg::subproblem {

using domain::HorizonSpec;
using domain::MgConfig;
using qp::QpAssembler;
using Terms = QpAssembler::Terms;

namespace {
constexpr double kInf = QpAssembler::kInf;
}

Grid make_grid(int T, int S, double fill) {
  return Grid(T, std::vector<double>(S, fill));
}

double scenario_weight(int h, int H, double p0) {
  if (H == 0) return 1.0;
  return h == 0 ? p0 : (1.0 - p0) / H;
}

// ---- layout ---------------------------------------------------------------

namespace {
struct Off {
  int TS, base_essc, base_essd, base_soc, base_rd, base_cd, base_buy, base_sell,
      aux0, aux_dglo, aux_sochi, aux_soclo, aux_chghi, aux_chglo, aux_dishi,
      aux_dislo, aux_rdlo, aux_cdhi;
};

Off offsets(const MgVarLayout& L) {
  Off o;
  o.TS = L.T * L.S;
  const int F = L.has_flex ? 1 : 0;
  o.base_essc = L.offset + L.num_dg * o.TS;
  o.base_essd = o.base_essc + L.num_ess * o.TS;
  o.base_soc = o.base_essd + L.num_ess * o.TS;
  o.base_rd = o.base_soc + L.num_ess * o.TS;
  o.base_cd = o.base_rd + F * o.TS;
  o.base_buy = o.base_cd + F * o.TS;
  o.base_sell = o.base_buy + o.TS;
  o.aux0 = o.base_sell + o.TS;
  o.aux_dglo = o.aux0 + L.num_dg * L.T;
  o.aux_sochi = o.aux_dglo + L.num_dg * L.T;
  o.aux_soclo = o.aux_sochi + L.num_ess * L.T;
  o.aux_chghi = o.aux_soclo + L.num_ess * L.T;
  o.aux_chglo = o.aux_chghi + L.num_ess * L.T;
  o.aux_dishi = o.aux_chglo + L.num_ess * L.T;
  o.aux_dislo = o.aux_dishi + L.num_ess * L.T;
  o.aux_rdlo = o.aux_dislo + L.num_ess * L.T;
  o.aux_cdhi = o.aux_rdlo + F * L.T;
  return o;
}
}  // namespace

int MgVarLayout::size() const {
  const int F = has_flex ? 1 : 0;
  return (num_dg + 3 * num_ess + 2 * F + 2) * T * S +
         (2 * num_dg + 6 * num_ess + 2 * F) * T;
}

int MgVarLayout::dg_p(int g, int t, int h) const {
  return offset + g * T * S + t * S + h;
}
int MgVarLayout::ess_c(int e, int t, int h) const {
  return offsets(*this).base_essc + e * T * S + t * S + h;
}
int MgVarLayout::ess_d(int e, int t, int h) const {
  return offsets(*this).base_essd + e * T * S + t * S + h;
}
int MgVarLayout::soc(int e, int t, int h) const {
  return offsets(*this).base_soc + e * T * S + t * S + h;
}
int MgVarLayout::rd(int t, int h) const { return offsets(*this).base_rd + t * S + h; }
int MgVarLayout::cd(int t, int h) const { return offsets(*this).base_cd + t * S + h; }
int MgVarLayout::buy(int t, int h) const { return offsets(*this).base_buy + t * S + h; }
int MgVarLayout::sell(int t, int h) const { return offsets(*this).base_sell + t * S + h; }
int MgVarLayout::dg_hi(int g, int t) const { return offsets(*this).aux0 + g * T + t; }
int MgVarLayout::dg_lo(int g, int t) const { return offsets(*this).aux_dglo + g * T + t; }
int MgVarLayout::soc_hi(int e, int t) const { return offsets(*this).aux_sochi + e * T + t; }
int MgVarLayout::soc_lo(int e, int t) const { return offsets(*this).aux_soclo + e * T + t; }
int MgVarLayout::chg_hi(int e, int t) const { return offsets(*this).aux_chghi + e * T + t; }
int MgVarLayout::chg_lo(int e, int t) const { return offsets(*this).aux_chglo + e * T + t; }
int MgVarLayout::dis_hi(int e, int t) const { return offsets(*this).aux_dishi + e * T + t; }
int MgVarLayout::dis_lo(int e, int t) const { return offsets(*this).aux_dislo + e * T + t; }
int MgVarLayout::rd_lo(int t) const { return offsets(*this).aux_rdlo + t; }
int MgVarLayout::cd_hi(int t) const { return offsets(*this).aux_cdhi + t; }

// ---- block assembly -------------------------------------------------------

MgVarLayout append_mg_block(QpAssembler& qb, const MgConfig& mg, int mg_index,
                            const scenarios::ScenarioSet& scen,
                            const HorizonSpec& horizon, const Grid& buy_cost,
                            const Grid& sell_cost, double p0) {
  const int T = horizon.hours;
  const int S = static_cast<int>(scen.scenarios.size());
  const int H = S - 1;
  const double dt = horizon.dt;

  MgVarLayout L;
  L.T = T;
  L.S = S;
  L.num_dg = static_cast<int>(mg.dgs.size());
  L.num_ess = static_cast<int>(mg.esses.size());
  // Degenerate flexible load collapses to the critical demand alone.
  L.has_flex = false;
  if (mg.flex) {
    for (int t = 0; t < T; ++t)
      if (mg.flex->rd_max[t] > 0.0 || mg.flex->cd_max[t] > 0.0) L.has_flex = true;
  }
  L.offset = qb.num_vars();

  const std::string pre = "m" + std::to_string(mg_index) + ".";
  auto th = [](int t, int h) {
    return ".t" + std::to_string(t) + ".h" + std::to_string(h);
  };
  auto tt = [](int t) { return ".t" + std::to_string(t); };

  // Variables, in layout order.
  for (int g = 0; g < L.num_dg; ++g)
    for (int t = 0; t < T; ++t)
      for (int h = 0; h < S; ++h)
        qb.add_var(pre + "dg" + std::to_string(g) + ".p" + th(t, h),
                   mg.dgs[g].p_min, mg.dgs[g].p_max);
  for (int e = 0; e < L.num_ess; ++e)
    for (int t = 0; t < T; ++t)
      for (int h = 0; h < S; ++h)
        qb.add_var(pre + "ess" + std::to_string(e) + ".c" + th(t, h), 0.0,
                   mg.esses[e].pc_max);
  for (int e = 0; e < L.num_ess; ++e)
    for (int t = 0; t < T; ++t)
      for (int h = 0; h < S; ++h)
        qb.add_var(pre + "ess" + std::to_string(e) + ".d" + th(t, h), 0.0,
                   mg.esses[e].pd_max);
  for (int e = 0; e < L.num_ess; ++e) {
    const auto& es = mg.esses[e];
    // Terminal band (scenarios h != 0) intersected with the SOC bounds.
    const double term_lo = std::max(es.soc_min, 0.8 * es.soc_ref);
    const double term_hi = std::min(es.soc_max, 1.2 * es.soc_ref);
    for (int t = 0; t < T; ++t)
      for (int h = 0; h < S; ++h) {
        double lo = es.soc_min, hi = es.soc_max;
        if (t == T - 1 && h != 0) {
          lo = term_lo;
          hi = term_hi;
        }
        qb.add_var(pre + "ess" + std::to_string(e) + ".soc" + th(t, h), lo, hi);
      }
  }
  if (L.has_flex) {
    for (int t = 0; t < T; ++t)
      for (int h = 0; h < S; ++h)
        qb.add_var(pre + "rd" + th(t, h), 0.0, mg.flex->rd_max[t]);
    for (int t = 0; t < T; ++t)
      for (int h = 0; h < S; ++h)
        qb.add_var(pre + "cd" + th(t, h), 0.0, mg.flex->cd_max[t]);
  }
  for (int t = 0; t < T; ++t)
    for (int h = 0; h < S; ++h)
      qb.add_var(pre + "buy" + th(t, h), 0.0, mg.p_pso_max);
  for (int t = 0; t < T; ++t)
    for (int h = 0; h < S; ++h)
      qb.add_var(pre + "sell" + th(t, h), 0.0, mg.p_pso_max);

  // Envelope variables. Boxes are valid because each stands for a max or
  // min of box-bounded scenario values; the terminal band applies to the
  // SOC envelopes so the worst-case trajectories honor it too.
  for (int g = 0; g < L.num_dg; ++g)
    for (int t = 0; t < T; ++t)
      qb.add_var(pre + "dg" + std::to_string(g) + ".hi" + tt(t), mg.dgs[g].p_min,
                 mg.dgs[g].p_max);
  for (int g = 0; g < L.num_dg; ++g)
    for (int t = 0; t < T; ++t)
      qb.add_var(pre + "dg" + std::to_string(g) + ".lo" + tt(t), mg.dgs[g].p_min,
                 mg.dgs[g].p_max);
  for (int e = 0; e < L.num_ess; ++e) {
    const auto& es = mg.esses[e];
    const double term_lo = std::max(es.soc_min, 0.8 * es.soc_ref);
    const double term_hi = std::min(es.soc_max, 1.2 * es.soc_ref);
    for (int t = 0; t < T; ++t)
      qb.add_var(pre + "ess" + std::to_string(e) + ".sochi" + tt(t), es.soc_min,
                 t == T - 1 ? term_hi : es.soc_max);
    // soc_lo added after the loop over hi to preserve layout order
    (void)term_lo;
  }
  for (int e = 0; e < L.num_ess; ++e) {
    const auto& es = mg.esses[e];
    const double term_lo = std::max(es.soc_min, 0.8 * es.soc_ref);
    for (int t = 0; t < T; ++t)
      qb.add_var(pre + "ess" + std::to_string(e) + ".soclo" + tt(t),
                 t == T - 1 ? term_lo : es.soc_min, es.soc_max);
  }
  for (int e = 0; e < L.num_ess; ++e)
    for (int t = 0; t < T; ++t)
      qb.add_var(pre + "ess" + std::to_string(e) + ".chghi" + tt(t), 0.0,
                 mg.esses[e].pc_max);
  for (int e = 0; e < L.num_ess; ++e)
    for (int t = 0; t < T; ++t)
      qb.add_var(pre + "ess" + std::to_string(e) + ".chglo" + tt(t), 0.0,
                 mg.esses[e].pc_max);
  for (int e = 0; e < L.num_ess; ++e)
    for (int t = 0; t < T; ++t)
      qb.add_var(pre + "ess" + std::to_string(e) + ".dishi" + tt(t), 0.0,
                 mg.esses[e].pd_max);
  for (int e = 0; e < L.num_ess; ++e)
    for (int t = 0; t < T; ++t)
      qb.add_var(pre + "ess" + std::to_string(e) + ".dislo" + tt(t), 0.0,
                 mg.esses[e].pd_max);
  if (L.has_flex) {
    for (int t = 0; t < T; ++t)
      qb.add_var(pre + "rdlo" + tt(t), 0.0, mg.flex->rd_max[t]);
    for (int t = 0; t < T; ++t)
      qb.add_var(pre + "cdhi" + tt(t), 0.0, mg.flex->cd_max[t]);
  }

  // ---- objective ----
  for (int t = 0; t < T; ++t)
    for (int h = 0; h < S; ++h) {
      const double w = scenario_weight(h, H, p0);
      for (int g = 0; g < L.num_dg; ++g) {
        qb.add_quad_cost(L.dg_p(g, t, h), w * mg.dgs[g].a);
        qb.add_lin_cost(L.dg_p(g, t, h), w * mg.dgs[g].b);
      }
      for (int e = 0; e < L.num_ess; ++e)
        qb.add_pair_quad_cost(L.ess_c(e, t, h), L.ess_d(e, t, h), w * mg.esses[e].a);
      if (L.has_flex)
        qb.add_pair_quad_cost(L.rd(t, h), L.cd(t, h), w * mg.flex->a);
      qb.add_lin_cost(L.buy(t, h), w * buy_cost[t][h]);
      qb.add_lin_cost(L.sell(t, h), w * sell_cost[t][h]);
    }

  // ---- constraints ----
  for (int t = 0; t < T; ++t)
    for (int h = 0; h < S; ++h) {
      const auto& sc = scen.scenarios[h];
      double rhs = sc.demand[mg_index][t];
      for (const auto& w : sc.wind[mg_index]) rhs -= w[t];
      for (const auto& s : sc.pv[mg_index]) rhs -= s[t];
      Terms bal;
      for (int g = 0; g < L.num_dg; ++g) bal.emplace_back(L.dg_p(g, t, h), 1.0);
      for (int e = 0; e < L.num_ess; ++e) {
        bal.emplace_back(L.ess_d(e, t, h), 1.0);
        bal.emplace_back(L.ess_c(e, t, h), -1.0);
      }
      bal.emplace_back(L.buy(t, h), 1.0);
      bal.emplace_back(L.sell(t, h), -1.0);
      if (L.has_flex) {
        bal.emplace_back(L.rd(t, h), -1.0);
        bal.emplace_back(L.cd(t, h), 1.0);
      }
      qb.add_eq(bal, rhs, "power-balance");
    }

  for (int g = 0; g < L.num_dg; ++g) {
    const auto& dg = mg.dgs[g];
    for (int t = 0; t < T; ++t) {
      for (int h = 1; h < S; ++h) {
        // Reserve capability band around the base-case dispatch.
        qb.add_le({{L.dg_p(g, t, h), 1.0}, {L.dg_p(g, t, 0), -1.0}}, dg.r_up,
                  "dg-reserve-band");
        qb.add_le({{L.dg_p(g, t, 0), 1.0}, {L.dg_p(g, t, h), -1.0}}, dg.r_dn,
                  "dg-reserve-band");
      }
      for (int h = 0; h < S; ++h) {
        qb.add_le({{L.dg_p(g, t, h), 1.0}, {L.dg_hi(g, t), -1.0}}, 0.0,
                  "dg-envelope");
        qb.add_le({{L.dg_lo(g, t), 1.0}, {L.dg_p(g, t, h), -1.0}}, 0.0,
                  "dg-envelope");
      }
      if (t >= 1) {
        qb.add_le({{L.dg_hi(g, t), 1.0}, {L.dg_lo(g, t - 1), -1.0}}, dg.ramp_up,
                  "dg-ramp");
        qb.add_le({{L.dg_hi(g, t - 1), 1.0}, {L.dg_lo(g, t), -1.0}}, dg.ramp_dn,
                  "dg-ramp");
      }
    }
  }

  for (int e = 0; e < L.num_ess; ++e) {
    const auto& es = mg.esses[e];
    const double kc = dt / es.capacity * es.eta_c;
    const double kd = dt / es.capacity / es.eta_d;
    for (int t = 0; t < T; ++t) {
      // Base-case SOC recursion; the start of day sits at the reference SOC.
      Terms rec{{L.soc(e, t, 0), 1.0},
                {L.ess_c(e, t, 0), -kc},
                {L.ess_d(e, t, 0), kd}};
      double rhs = 0.0;
      if (t == 0)
        rhs = es.soc_ref;
      else
        rec.emplace_back(L.soc(e, t - 1, 0), -1.0);
      qb.add_eq(rec, rhs, "ess-soc-recursion");

      for (int h = 0; h < S; ++h) {
        qb.add_le({{L.soc(e, t, h), 1.0}, {L.soc_hi(e, t), -1.0}}, 0.0,
                  "ess-soc-envelope");
        qb.add_le({{L.soc_lo(e, t), 1.0}, {L.soc(e, t, h), -1.0}}, 0.0,
                  "ess-soc-envelope");
        qb.add_le({{L.ess_c(e, t, h), 1.0}, {L.chg_hi(e, t), -1.0}}, 0.0,
                  "ess-power-envelope");
        qb.add_le({{L.chg_lo(e, t), 1.0}, {L.ess_c(e, t, h), -1.0}}, 0.0,
                  "ess-power-envelope");
        qb.add_le({{L.ess_d(e, t, h), 1.0}, {L.dis_hi(e, t), -1.0}}, 0.0,
                  "ess-power-envelope");
        qb.add_le({{L.dis_lo(e, t), 1.0}, {L.ess_d(e, t, h), -1.0}}, 0.0,
                  "ess-power-envelope");
      }

      // Worst-case SOC trajectory recursions.
      {
        Terms hi{{L.soc_hi(e, t), -1.0},
                 {L.chg_hi(e, t), kc},
                 {L.dis_lo(e, t), -kd}};
        Terms lo{{L.soc_lo(e, t), 1.0},
                 {L.chg_lo(e, t), -kc},
                 {L.dis_hi(e, t), kd}};
        double hi_rhs = 0.0, lo_rhs = 0.0;
        if (t == 0) {
          hi_rhs = -es.soc_ref;
          lo_rhs = es.soc_ref;
        } else {
          hi.emplace_back(L.soc_hi(e, t - 1), 1.0);
          lo.emplace_back(L.soc_lo(e, t - 1), -1.0);
        }
        qb.add_le(hi, hi_rhs, "ess-soc-recursion-hi");
        qb.add_le(lo, lo_rhs, "ess-soc-recursion-lo");
      }
    }
    // Terminal base-case SOC pins to the reference.
    qb.add_eq({{L.soc(e, T - 1, 0), 1.0}}, es.soc_ref, "ess-terminal");
  }

  if (L.has_flex) {
    Terms neutral;
    for (int t = 0; t < T; ++t) {
      for (int h = 0; h < S; ++h) {
        qb.add_le({{L.rd_lo(t), 1.0}, {L.rd(t, h), -1.0}}, 0.0, "load-envelope");
        qb.add_le({{L.cd(t, h), 1.0}, {L.cd_hi(t), -1.0}}, 0.0, "load-envelope");
      }
      neutral.emplace_back(L.rd(t, 0), 1.0);
      neutral.emplace_back(L.cd(t, 0), -1.0);
    }
    qb.add_eq(neutral, 0.0, "load-neutrality");

    Terms shed;
    for (int t = 0; t < T; ++t) {
      shed.emplace_back(L.cd_hi(t), dt);
      shed.emplace_back(L.rd_lo(t), -dt);
    }
    qb.add_le(shed, mg.flex->e_shed, "shed-budget");
  }

  return L;
}

qp::QpProblem build_mg_problem(const MgConfig& mg, int mg_index,
                               const scenarios::ScenarioSet& scen,
                               const HorizonSpec& horizon, const Grid& beta_buy,
                               const Grid& beta_sell, double p0,
                               MgVarLayout* layout_out) {
  const int T = horizon.hours;
  const int S = static_cast<int>(scen.scenarios.size());
  if (static_cast<int>(beta_buy.size()) != T ||
      static_cast<int>(beta_sell.size()) != T)
    throw std::invalid_argument("build_mg_problem: price grid must cover all hours");
  for (int t = 0; t < T; ++t)
    if (static_cast<int>(beta_buy[t].size()) != S ||
        static_cast<int>(beta_sell[t].size()) != S)
      throw std::invalid_argument(
          "build_mg_problem: price grid must cover all scenarios");
  if (p0 <= 0.0 || p0 > 1.0)
    throw std::invalid_argument("build_mg_problem: p0 must be in (0, 1]");

  Grid sell_cost = make_grid(T, S);
  for (int t = 0; t < T; ++t)
    for (int h = 0; h < S; ++h) sell_cost[t][h] = -beta_sell[t][h];

  QpAssembler qb;
  MgVarLayout layout = append_mg_block(qb, mg, mg_index, scen, horizon, beta_buy,
                                       sell_cost, p0);
  if (layout_out) *layout_out = layout;
  return qb.build();
}

// ---- extraction -----------------------------------------------------------

namespace {

// The QP leaves per-scenario SOC values for h != 0 underdetermined (they
// are bookkeeping; only the envelopes constrain them). Rewrite them as
// worst-case-consistent trajectories so the nonconvex SOC recursions hold
// on the reported dispatch: scenario 1 carries the max trajectory,
// scenario 2 the min, the rest follow their own charge/discharge series.
void canonicalize_soc(MgDispatch& d, const MgConfig& mg, double dt) {
  const int T = d.buy.empty() ? 0 : static_cast<int>(d.buy.size());
  const int S = T ? static_cast<int>(d.buy[0].size()) : 1;
  if (S <= 1) return;
  for (size_t e = 0; e < mg.esses.size(); ++e) {
    const auto& es = mg.esses[e];
    const double kc = dt / es.capacity * es.eta_c;
    const double kd = dt / es.capacity / es.eta_d;
    double hi = es.soc_ref, lo = es.soc_ref;
    std::vector<double> walk(S, es.soc_ref);
    for (int t = 0; t < T; ++t) {
      double cmax = -kInf, cmin = kInf, dmax = -kInf, dmin = kInf;
      for (int h = 0; h < S; ++h) {
        cmax = std::max(cmax, d.ess_charge[e][t][h]);
        cmin = std::min(cmin, d.ess_charge[e][t][h]);
        dmax = std::max(dmax, d.ess_discharge[e][t][h]);
        dmin = std::min(dmin, d.ess_discharge[e][t][h]);
      }
      hi += kc * cmax - kd * dmin;
      lo += kc * cmin - kd * dmax;
      for (int h = 1; h < S; ++h) {
        walk[h] += kc * d.ess_charge[e][t][h] - kd * d.ess_discharge[e][t][h];
        walk[h] = std::clamp(walk[h], lo, hi);
      }
      d.soc[e][t][1] = hi;
      if (S >= 3) d.soc[e][t][2] = lo;
      for (int h = 3; h < S; ++h) d.soc[e][t][h] = walk[h];
    }
  }
}

}  // namespace

CostSplit cost_breakdown(const MgDispatch& d, const MgConfig& mg,
                         const Grid& beta_buy, const Grid& beta_sell, double p0) {
  const int T = static_cast<int>(d.buy.size());
  const int S = T ? static_cast<int>(d.buy[0].size()) : 1;
  const int H = S - 1;

  auto stage_cost = [&](int t, int h) {
    double c = 0.0;
    for (size_t g = 0; g < mg.dgs.size(); ++g) {
      const double p = d.dg_power[g][t][h];
      c += mg.dgs[g].a * p * p + mg.dgs[g].b * p;
    }
    for (size_t e = 0; e < mg.esses.size(); ++e) {
      const double thr = d.ess_charge[e][t][h] + d.ess_discharge[e][t][h];
      c += mg.esses[e].a * thr * thr;
    }
    if (!d.load_rd.empty() && mg.flex) {
      const double fd = d.load_rd[t][h] + d.load_cd[t][h];
      c += mg.flex->a * fd * fd;
    }
    c += beta_buy[t][h] * d.buy[t][h] - beta_sell[t][h] * d.sell[t][h];
    return c;
  };

  CostSplit cs;
  for (int t = 0; t < T; ++t) {
    const double c0 = stage_cost(t, 0);
    cs.energy += c0;
    if (H > 0) {
      double avg = 0.0;
      for (int h = 1; h < S; ++h) avg += stage_cost(t, h);
      cs.reserve += avg / H - c0;
    }
  }
  cs.expected = cs.energy + (1.0 - p0) * cs.reserve;
  return cs;
}

MgDispatch extract_dispatch(const MgVarLayout& L, const Eigen::VectorXd& x,
                            const MgConfig& mg, const Grid& beta_buy,
                            const Grid& beta_sell, double p0,
                            const HorizonSpec& horizon) {
  MgDispatch d;
  d.mg_id = mg.id;
  const int T = L.T, S = L.S;

  for (int g = 0; g < L.num_dg; ++g) {
    auto& grid = d.dg_power.emplace_back(make_grid(T, S));
    for (int t = 0; t < T; ++t)
      for (int h = 0; h < S; ++h) grid[t][h] = x[L.dg_p(g, t, h)];
  }
  for (int e = 0; e < L.num_ess; ++e) {
    auto& c = d.ess_charge.emplace_back(make_grid(T, S));
    auto& dd = d.ess_discharge.emplace_back(make_grid(T, S));
    auto& s = d.soc.emplace_back(make_grid(T, S));
    for (int t = 0; t < T; ++t)
      for (int h = 0; h < S; ++h) {
        c[t][h] = x[L.ess_c(e, t, h)];
        dd[t][h] = x[L.ess_d(e, t, h)];
        s[t][h] = x[L.soc(e, t, h)];
      }
  }
  if (L.has_flex) {
    d.load_rd = make_grid(T, S);
    d.load_cd = make_grid(T, S);
    for (int t = 0; t < T; ++t)
      for (int h = 0; h < S; ++h) {
        d.load_rd[t][h] = x[L.rd(t, h)];
        d.load_cd[t][h] = x[L.cd(t, h)];
      }
  }
  d.buy = make_grid(T, S);
  d.sell = make_grid(T, S);
  d.trade_schedule = make_grid(T, S);
  for (int t = 0; t < T; ++t)
    for (int h = 0; h < S; ++h) {
      // Net overlapping buy/sell volumes. With a zero price spread the QP
      // cost is indifferent to the gross split, so only the net trade is
      // meaningful; netting keeps the power balance exact and never
      // increases the cost when the spread is positive.
      const double net = x[L.buy(t, h)] - x[L.sell(t, h)];
      d.buy[t][h] = std::max(net, 0.0);
      d.sell[t][h] = std::max(-net, 0.0);
      d.trade_schedule[t][h] = net;
    }

  for (int g = 0; g < L.num_dg; ++g) {
    auto& hi = d.dg_hi.emplace_back(T, 0.0);
    auto& lo = d.dg_lo.emplace_back(T, 0.0);
    for (int t = 0; t < T; ++t) {
      hi[t] = x[L.dg_hi(g, t)];
      lo[t] = x[L.dg_lo(g, t)];
    }
  }
  for (int e = 0; e < L.num_ess; ++e) {
    auto& shi = d.soc_hi.emplace_back(T, 0.0);
    auto& slo = d.soc_lo.emplace_back(T, 0.0);
    auto& chi = d.chg_hi.emplace_back(T, 0.0);
    auto& clo = d.chg_lo.emplace_back(T, 0.0);
    auto& dhi = d.dis_hi.emplace_back(T, 0.0);
    auto& dlo = d.dis_lo.emplace_back(T, 0.0);
    for (int t = 0; t < T; ++t) {
      shi[t] = x[L.soc_hi(e, t)];
      slo[t] = x[L.soc_lo(e, t)];
      chi[t] = x[L.chg_hi(e, t)];
      clo[t] = x[L.chg_lo(e, t)];
      dhi[t] = x[L.dis_hi(e, t)];
      dlo[t] = x[L.dis_lo(e, t)];
    }
  }
  if (L.has_flex) {
    d.rd_lo.resize(T);
    d.cd_hi.resize(T);
    for (int t = 0; t < T; ++t) {
      d.rd_lo[t] = x[L.rd_lo(t)];
      d.cd_hi[t] = x[L.cd_hi(t)];
    }
  }

  canonicalize_soc(d, mg, horizon.dt);
  const CostSplit cs = cost_breakdown(d, mg, beta_buy, beta_sell, p0);
  d.cost_energy = cs.energy;
  d.cost_reserve = cs.reserve;
  d.cost_expected = cs.expected;
  return d;
}

MgDispatch solve_mg(const MgConfig& mg, int mg_index,
                    const scenarios::ScenarioSet& scen, const HorizonSpec& horizon,
                    const Grid& beta_buy, const Grid& beta_sell, double p0) {
  MgVarLayout layout;
  qp::QpProblem problem =
      build_mg_problem(mg, mg_index, scen, horizon, beta_buy, beta_sell, p0, &layout);
  qp::QpSolution sol = qp::solve_qp(problem);
  if (sol.status == qp::SolveStatus::infeasible)
    throw InfeasibleError(mg.id, sol.infeasible_row);
  if (sol.status != qp::SolveStatus::optimal)
    throw std::runtime_error("MG '" + mg.id +
                             "' dispatch did not converge (iteration limit)");
  MgDispatch d =
      extract_dispatch(layout, sol.x, mg, beta_buy, beta_sell, p0, horizon);
  d.objective = sol.objective;
  return d;
}

}  // namespace mmg::subproblem
