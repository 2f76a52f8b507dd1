#include "mmg/runner.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <stdexcept>

#include "mmg/centralized.hpp"
#include "mmg/csv.hpp"
#include "mmg/market.hpp"
#include "mmg/scenarios.hpp"
#include "mmg/subproblem.hpp"

namespace mmg::runner {

namespace fs = std::filesystem;
using subproblem::Grid;

Mode parse_mode(const std::string& s) {
  if (s == "cooperative") return Mode::cooperative;
  if (s == "isolated") return Mode::isolated;
  if (s == "deterministic") return Mode::deterministic;
  if (s == "centralized") return Mode::centralized;
  throw domain::ValidationError(
      "mode: must be one of cooperative|isolated|deterministic|centralized");
}

void apply_overrides(domain::MmgConfig& config, const RunSpec& spec) {
  auto& mk = config.market;
  if (spec.alpha) {
    if (*spec.alpha <= 0) throw domain::ValidationError("alpha: must be > 0");
    mk.alpha = *spec.alpha;
  }
  if (spec.eps) {
    if (*spec.eps <= 0) throw domain::ValidationError("eps: must be > 0");
    mk.eps = *spec.eps;
  }
  if (spec.tau) {
    if (*spec.tau < 0) throw domain::ValidationError("tau: must be >= 0");
    mk.tau = *spec.tau;
  }
  if (spec.p0) {
    if (*spec.p0 <= 0 || *spec.p0 > 1)
      throw domain::ValidationError("p0: must be in (0, 1]");
    mk.p0 = *spec.p0;
  }
  if (spec.lambda0) {
    if (*spec.lambda0 == "mean") {
      mk.lambda0.clear();  // band midpoint per (t, h)
    } else {
      double v;
      try {
        v = std::stod(*spec.lambda0);
      } catch (const std::exception&) {
        throw domain::ValidationError("lambda0: expected 'mean' or a number");
      }
      mk.lambda0.assign(config.horizon.hours, v);
    }
  }
}

namespace {

void write_prices(const market::PriceState& ps, const std::string& path) {
  csv::Writer w({"t", "h", "lambda_eq", "beta_buy", "beta_sell"});
  for (size_t t = 0; t < ps.lambda_eq.size(); ++t)
    for (size_t h = 0; h < ps.lambda_eq[t].size(); ++h) {
      w.cell(static_cast<int>(t)).cell(static_cast<int>(h));
      w.cell(ps.lambda_eq[t][h]).cell(ps.beta_buy[t][h]).cell(ps.beta_sell[t][h]);
      w.end_row();
    }
  w.save(path);
}

void write_trades(const std::vector<subproblem::MgDispatch>& ds,
                  const Grid* grid_buy, const Grid* grid_sell,
                  const std::string& path) {
  csv::Writer w({"t", "h", "party", "buy", "sell", "net"});
  if (ds.empty()) {
    w.save(path);
    return;
  }
  const size_t T = ds[0].buy.size(), S = T ? ds[0].buy[0].size() : 0;
  for (size_t t = 0; t < T; ++t)
    for (size_t h = 0; h < S; ++h) {
      for (const auto& d : ds) {
        w.cell(static_cast<int>(t)).cell(static_cast<int>(h)).cell(d.mg_id);
        w.cell(d.buy[t][h]).cell(d.sell[t][h]).cell(d.buy[t][h] - d.sell[t][h]);
        w.end_row();
      }
      if (grid_buy) {
        const double gb = (*grid_buy)[t][h], gs = (*grid_sell)[t][h];
        w.cell(static_cast<int>(t)).cell(static_cast<int>(h)).cell(std::string("grid"));
        w.cell(gb).cell(gs).cell(gb - gs);
        w.end_row();
      }
    }
  w.save(path);
}

void write_dispatch(const std::vector<subproblem::MgDispatch>& ds,
                    const std::string& path) {
  csv::Writer w({"t", "h", "device", "value"});
  for (const auto& d : ds) {
    const size_t T = d.buy.size(), S = T ? d.buy[0].size() : 0;
    for (size_t t = 0; t < T; ++t)
      for (size_t h = 0; h < S; ++h) {
        auto row = [&](const std::string& dev, double v) {
          w.cell(static_cast<int>(t)).cell(static_cast<int>(h));
          w.cell(d.mg_id + "." + dev).cell(v);
          w.end_row();
        };
        for (size_t g = 0; g < d.dg_power.size(); ++g)
          row("dg" + std::to_string(g), d.dg_power[g][t][h]);
        for (size_t e = 0; e < d.ess_charge.size(); ++e) {
          row("ess" + std::to_string(e) + ".charge", d.ess_charge[e][t][h]);
          row("ess" + std::to_string(e) + ".discharge", d.ess_discharge[e][t][h]);
          row("ess" + std::to_string(e) + ".soc", d.soc[e][t][h]);
        }
        if (!d.load_rd.empty()) {
          row("load.rd", d.load_rd[t][h]);
          row("load.cd", d.load_cd[t][h]);
        }
        row("buy", d.buy[t][h]);
        row("sell", d.sell[t][h]);
      }
  }
  w.save(path);
}

void write_costs(const std::vector<subproblem::MgDispatch>& ds,
                 double pso_total, const std::string& costs_path,
                 const std::string& summary_path) {
  for (const std::string& path : {costs_path, summary_path}) {
    csv::Writer w({"party", "C_E", "C_R", "C_exp"});
    for (const auto& d : ds) {
      w.cell(d.mg_id).cell(d.cost_energy).cell(d.cost_reserve).cell(d.cost_expected);
      w.end_row();
    }
    w.cell(std::string("PSO")).cell(pso_total).cell(0.0).cell(pso_total);
    w.end_row();
    w.save(path);
  }
}

double income_total(const Grid& income, int H, double p0) {
  double total = 0.0;
  for (const auto& row : income)
    for (size_t h = 0; h < row.size(); ++h)
      total += subproblem::scenario_weight(static_cast<int>(h), H, p0) * row[h];
  return total;
}

struct MarketRun {
  market::MarketOutcome outcome;
  bool isolated = false;
};

int run_market_mode(const domain::MmgConfig& config,
                    const scenarios::ScenarioSet& scen, const RunSpec& spec,
                    const fs::path& out, std::string& err) {
  const auto& mk = config.market;
  if (spec.mode == Mode::isolated) {
    auto ds = market::run_isolated(config, scen);
    write_trades(ds, nullptr, nullptr, (out / "trades.csv").string());
    write_dispatch(ds, (out / "dispatch.csv").string());
    write_costs(ds, 0.0, (out / "costs.csv").string(),
                (out / "summary.csv").string());
    csv::Writer w({"k", "mismatch", "objective"});
    w.save((out / "trace.csv").string());
    return kOk;
  }

  market::MarketOutcome mo = market::clear_market(config, scen);
  {
    csv::Writer w({"k", "mismatch", "objective"});
    for (const auto& it : mo.iterations) {
      w.cell(it.k).cell(it.mismatch).cell(it.system_objective);
      w.end_row();
    }
    w.save((out / "trace.csv").string());
  }
  write_prices(mo.final_prices, (out / "prices.csv").string());
  write_trades(mo.dispatches, &mo.grid_buy, &mo.grid_sell,
               (out / "trades.csv").string());
  write_dispatch(mo.dispatches, (out / "dispatch.csv").string());
  write_costs(mo.dispatches,
              income_total(mo.pso_income, scen.num_hedged(), mk.p0),
              (out / "costs.csv").string(), (out / "summary.csv").string());
  if (!mo.converged) {
    err = "market clearing did not converge after " +
          std::to_string(mo.iterations.size()) + " iterations (mismatch " +
          csv::num(mo.iterations.empty() ? 0.0 : mo.iterations.back().mismatch) +
          " MW)";
    if (mo.oscillating) err += "; lambda oscillation growing, reduce --alpha";
    return kNoConvergence;
  }
  return kOk;
}

int run_centralized_mode(const domain::MmgConfig& config,
                         const scenarios::ScenarioSet& scen, const RunSpec& spec,
                         const fs::path& out) {
  centralized::CentralOptions opt;
  opt.include_fees = spec.include_fees;
  centralized::CentralOutcome co = centralized::solve_centralized(config, scen, opt);
  {
    csv::Writer w({"t", "h", "dual"});
    for (size_t t = 0; t < co.duals.size(); ++t)
      for (size_t h = 0; h < co.duals[t].size(); ++h) {
        w.cell(static_cast<int>(t)).cell(static_cast<int>(h)).cell(co.duals[t][h]);
        w.end_row();
      }
    w.save((out / "duals.csv").string());
  }
  write_trades(co.dispatches, &co.grid_buy, &co.grid_sell,
               (out / "trades.csv").string());
  write_dispatch(co.dispatches, (out / "dispatch.csv").string());
  double fees = 0.0;
  if (spec.include_fees) {
    Grid income = market::pso_income(co.dispatches, config.market.tau);
    fees = income_total(income, scen.num_hedged(), config.market.p0);
  }
  write_costs(co.dispatches, fees, (out / "costs.csv").string(),
              (out / "summary.csv").string());
  csv::Writer w({"party", "objective"});
  w.cell(std::string("system")).cell(co.objective);
  w.end_row();
  w.save((out / "objective.csv").string());
  return kOk;
}

}  // namespace

int run(const RunSpec& spec, std::string& err) {
  try {
    domain::MmgConfig config = domain::load_config_file(spec.config_path);
    apply_overrides(config, spec);
    const fs::path out(spec.out_dir);
    fs::create_directories(out);
    scenarios::ScenarioSet scen = spec.mode == Mode::deterministic
                                      ? scenarios::base_case_only(config)
                                      : scenarios::default_scenarios(config);
    if (spec.mode == Mode::centralized)
      return run_centralized_mode(config, scen, spec, out);
    return run_market_mode(config, scen, spec, out, err);
  } catch (const domain::ParseError& e) {
    err = e.what();
    return kValidationError;
  } catch (const domain::ValidationError& e) {
    err = e.what();
    return kValidationError;
  } catch (const std::invalid_argument& e) {
    err = e.what();
    return kValidationError;
  } catch (const subproblem::InfeasibleError& e) {
    err = e.what();
    return kInfeasible;
  } catch (const std::runtime_error& e) {
    err = e.what();
    return kNoConvergence;
  }
}

int sweep(const RunSpec& spec, const std::string& parameter,
          const std::vector<double>& values, std::string& err) {
  if (values.empty()) {
    err = "sweep: empty value list";
    return kValidationError;
  }
  if (parameter != "alpha" && parameter != "p0") {
    err = "sweep: parameter must be alpha or p0";
    return kValidationError;
  }
  try {
    domain::MmgConfig base = domain::load_config_file(spec.config_path);
    apply_overrides(base, spec);
    const fs::path out(spec.out_dir);
    fs::create_directories(out);

    if (parameter == "alpha") {
      csv::Writer w({"alpha", "converged", "iterations", "objective"});
      for (double a : values) {
        if (a <= 0) throw domain::ValidationError("alpha: must be > 0");
        domain::MmgConfig cfg = base;
        cfg.market.alpha = a;
        auto scen = scenarios::default_scenarios(cfg);
        market::MarketOutcome mo = market::clear_market(cfg, scen);
        w.cell(a).cell(std::string(mo.converged ? "1" : "0"));
        w.cell(static_cast<int>(mo.iterations.size())).cell(mo.system_objective);
        w.end_row();
      }
      w.save((out / "sweep.csv").string());
      return kOk;
    }

    csv::Writer w({"p0", "party", "cooperative_C_exp", "isolated_C_exp",
                   "reduction_pct"});
    for (double p0 : values) {
      if (p0 <= 0 || p0 > 1) throw domain::ValidationError("p0: must be in (0, 1]");
      domain::MmgConfig cfg = base;
      cfg.market.p0 = p0;
      auto scen = scenarios::default_scenarios(cfg);
      market::MarketOutcome mo = market::clear_market(cfg, scen);
      auto iso = market::run_isolated(cfg, scen);
      double coop_total = 0.0, iso_total = 0.0;
      for (size_t m = 0; m < cfg.mgs.size(); ++m) {
        const double cc = mo.dispatches[m].cost_expected;
        const double ic = iso[m].cost_expected;
        coop_total += cc;
        iso_total += ic;
        const double pct =
            ic != 0.0 ? 100.0 * (ic - cc) / std::abs(ic) : 0.0;
        w.cell(p0).cell(cfg.mgs[m].id).cell(cc).cell(ic).cell(pct);
        w.end_row();
      }
      const double pct = iso_total != 0.0
                             ? 100.0 * (iso_total - coop_total) / std::abs(iso_total)
                             : 0.0;
      w.cell(p0).cell(std::string("total")).cell(coop_total).cell(iso_total).cell(pct);
      w.end_row();
    }
    w.save((out / "sweep.csv").string());
    return kOk;
  } catch (const domain::ParseError& e) {
    err = std::string(e.what()) + " (sweep " + parameter + ")";
    return kValidationError;
  } catch (const domain::ValidationError& e) {
    err = std::string(e.what()) + " (sweep " + parameter + ")";
    return kValidationError;
  } catch (const subproblem::InfeasibleError& e) {
    err = std::string(e.what()) + " (sweep " + parameter + ")";
    return kInfeasible;
  } catch (const std::runtime_error& e) {
    err = std::string(e.what()) + " (sweep " + parameter + ")";
    return kNoConvergence;
  }
}

}  // namespace mmg::runner
