#include <cstdio>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "mmg/csv.hpp"
#include "mmg/domain.hpp"
#include "mmg/runner.hpp"
#include "mmg/scenarios.hpp"
#include "mmg/subproblem.hpp"

namespace fs = std::filesystem;
using namespace mmg;

namespace {

struct CommonFlags {
  std::string config_path;
  std::string out_dir = ".";
  std::optional<double> alpha, eps, tau, p0;
  std::optional<std::string> lambda0;

  void attach(CLI::App* app) {
    app->add_option("-c,--config", config_path, "YAML config file")
        ->required()
        ->check(CLI::ExistingFile);
    app->add_option("-o,--out", out_dir, "output directory");
    app->add_option("--alpha", alpha, "sub-gradient step size override");
    app->add_option("--eps", eps, "convergence tolerance override (MW)");
    app->add_option("--tau", tau, "service fee override ($/MWh)");
    app->add_option("--p0", p0, "base-case probability override");
    app->add_option("--lambda0", lambda0, "initial MEP: 'mean' or a number");
  }

  runner::RunSpec spec() const {
    runner::RunSpec s;
    s.config_path = config_path;
    s.out_dir = out_dir;
    s.alpha = alpha;
    s.eps = eps;
    s.tau = tau;
    s.p0 = p0;
    s.lambda0 = lambda0;
    return s;
  }
};

int dump_scenarios(const CommonFlags& flags, bool deterministic) {
  try {
    domain::MmgConfig config = domain::load_config_file(flags.config_path);
    runner::RunSpec spec = flags.spec();
    runner::apply_overrides(config, spec);
    scenarios::ScenarioSet scen = deterministic
                                      ? scenarios::base_case_only(config)
                                      : scenarios::default_scenarios(config);
    fs::create_directories(flags.out_dir);
    csv::Writer w({"h", "mg", "quantity", "t", "value"});
    for (const auto& sc : scen.scenarios) {
      const int T = config.horizon.hours;
      for (size_t m = 0; m < config.mgs.size(); ++m) {
        const std::string& id = config.mgs[m].id;
        for (int t = 0; t < T; ++t) {
          w.cell(sc.h).cell(id).cell(std::string("demand")).cell(t);
          w.cell(sc.demand[m][t]).end_row();
        }
        for (size_t u = 0; u < sc.wind[m].size(); ++u)
          for (int t = 0; t < T; ++t) {
            w.cell(sc.h).cell(id).cell("wind" + std::to_string(u)).cell(t);
            w.cell(sc.wind[m][u][t]).end_row();
          }
        for (size_t u = 0; u < sc.pv[m].size(); ++u)
          for (int t = 0; t < T; ++t) {
            w.cell(sc.h).cell(id).cell("pv" + std::to_string(u)).cell(t);
            w.cell(sc.pv[m][u][t]).end_row();
          }
      }
      for (int t = 0; t < config.horizon.hours; ++t) {
        w.cell(sc.h).cell(std::string("grid")).cell(std::string("gamma_buy")).cell(t);
        w.cell(sc.gamma_buy[t]).end_row();
        w.cell(sc.h).cell(std::string("grid")).cell(std::string("gamma_sell")).cell(t);
        w.cell(sc.gamma_sell[t]).end_row();
      }
    }
    const std::string path = (fs::path(flags.out_dir) / "scenarios.csv").string();
    w.save(path);
    std::printf("wrote %s (%d scenarios)\n", path.c_str(),
                static_cast<int>(scen.scenarios.size()));
    return runner::kOk;
  } catch (const domain::ParseError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return runner::kValidationError;
  } catch (const domain::ValidationError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return runner::kValidationError;
  }
}

int solve_one_mg(const CommonFlags& flags, const std::string& mg_id,
                 double beta_buy, double beta_sell) {
  try {
    domain::MmgConfig config = domain::load_config_file(flags.config_path);
    runner::RunSpec spec = flags.spec();
    runner::apply_overrides(config, spec);
    int idx = -1;
    for (size_t m = 0; m < config.mgs.size(); ++m)
      if (config.mgs[m].id == mg_id) idx = static_cast<int>(m);
    if (idx < 0)
      throw domain::ValidationError("mg: no MG with id '" + mg_id + "'");
    scenarios::ScenarioSet scen = scenarios::default_scenarios(config);
    const int T = config.horizon.hours;
    const int S = static_cast<int>(scen.scenarios.size());
    subproblem::Grid bb = subproblem::make_grid(T, S, beta_buy);
    subproblem::Grid bs = subproblem::make_grid(T, S, beta_sell);
    subproblem::MgDispatch d = subproblem::solve_mg(
        config.mgs[idx], idx, scen, config.horizon, bb, bs, config.market.p0);
    fs::create_directories(flags.out_dir);
    csv::Writer w({"t", "h", "device", "value"});
    for (int t = 0; t < T; ++t)
      for (int h = 0; h < S; ++h) {
        auto row = [&](const std::string& dev, double v) {
          w.cell(t).cell(h).cell(dev).cell(v);
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
    const std::string path = (fs::path(flags.out_dir) / "dispatch.csv").string();
    w.save(path);
    std::printf("%s: C_E=%s C_R=%s C_exp=%s -> %s\n", mg_id.c_str(),
                csv::num(d.cost_energy).c_str(), csv::num(d.cost_reserve).c_str(),
                csv::num(d.cost_expected).c_str(), path.c_str());
    return runner::kOk;
  } catch (const domain::ParseError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return runner::kValidationError;
  } catch (const domain::ValidationError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return runner::kValidationError;
  } catch (const subproblem::InfeasibleError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return runner::kInfeasible;
  } catch (const std::runtime_error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return runner::kNoConvergence;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Robust day-ahead scheduling and market clearing for multi-microgrid "
      "systems"};
  app.require_subcommand(1);

  // run
  auto* run_cmd = app.add_subcommand(
      "run", "Run one scheduling pipeline and emit the CSV artifact set");
  CommonFlags run_flags;
  run_flags.attach(run_cmd);
  std::string mode = "cooperative";
  run_cmd->add_option("-m,--mode", mode,
                      "cooperative|isolated|deterministic|centralized");
  bool include_fees = false;
  run_cmd->add_flag("--include-fees", include_fees,
                    "centralized: add the tau service fee to the objective");

  // sweep
  auto* sweep_cmd =
      app.add_subcommand("sweep", "Sweep alpha or p0 and emit sweep.csv");
  CommonFlags sweep_flags;
  sweep_flags.attach(sweep_cmd);
  std::string sweep_param;
  std::vector<double> sweep_values;
  sweep_cmd->add_option("--parameter", sweep_param, "alpha or p0")->required();
  sweep_cmd->add_option("--values", sweep_values, "sweep values")->required();

  // scenarios dump
  auto* scen_cmd = app.add_subcommand("scenarios", "Scenario-set utilities");
  scen_cmd->require_subcommand(1);
  auto* dump_cmd =
      scen_cmd->add_subcommand("dump", "Write the realized scenario set as CSV");
  CommonFlags dump_flags;
  dump_flags.attach(dump_cmd);
  bool dump_det = false;
  dump_cmd->add_flag("--deterministic", dump_det, "base case only");

  // mg solve
  auto* mg_cmd = app.add_subcommand("mg", "Single-MG utilities");
  mg_cmd->require_subcommand(1);
  auto* mg_solve = mg_cmd->add_subcommand(
      "solve", "Solve one MG at fixed trading prices and emit dispatch.csv");
  CommonFlags mg_flags;
  mg_flags.attach(mg_solve);
  std::string mg_id;
  double mg_beta_buy = 0.0, mg_beta_sell = 0.0;
  mg_solve->add_option("--mg", mg_id, "MG id")->required();
  mg_solve->add_option("--beta-buy", mg_beta_buy, "buying price ($/MWh)")
      ->required();
  mg_solve->add_option("--beta-sell", mg_beta_sell, "selling price ($/MWh)")
      ->required();

  // central
  auto* central_cmd = app.add_subcommand(
      "central", "Solve the pooled centralized problem and emit duals.csv");
  CommonFlags central_flags;
  central_flags.attach(central_cmd);
  bool central_fees = false;
  central_cmd->add_flag("--include-fees", central_fees,
                        "add the tau service fee to the objective");

  CLI11_PARSE(app, argc, argv);

  if (*run_cmd) {
    runner::RunSpec spec = run_flags.spec();
    try {
      spec.mode = runner::parse_mode(mode);
    } catch (const domain::ValidationError& e) {
      std::fprintf(stderr, "error: %s\n", e.what());
      return runner::kValidationError;
    }
    spec.include_fees = include_fees;
    std::string err;
    const int rc = runner::run(spec, err);
    if (rc != runner::kOk) std::fprintf(stderr, "error: %s\n", err.c_str());
    return rc;
  }
  if (*sweep_cmd) {
    std::string err;
    const int rc =
        runner::sweep(sweep_flags.spec(), sweep_param, sweep_values, err);
    if (rc != runner::kOk) std::fprintf(stderr, "error: %s\n", err.c_str());
    return rc;
  }
  if (*dump_cmd) return dump_scenarios(dump_flags, dump_det);
  if (*mg_solve) return solve_one_mg(mg_flags, mg_id, mg_beta_buy, mg_beta_sell);
  if (*central_cmd) {
    runner::RunSpec spec = central_flags.spec();
    spec.mode = runner::Mode::centralized;
    spec.include_fees = central_fees;
    std::string err;
    const int rc = runner::run(spec, err);
    if (rc != runner::kOk) std::fprintf(stderr, "error: %s\n", err.c_str());
    return rc;
  }
  return runner::kOk;
}
