#include "mmg/domain.hpp"

#include <yaml-cpp/yaml.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace mmg::domain {

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& what) {
  throw ValidationError(path + ": " + what);
}

void require(bool ok, const std::string& path, const std::string& what) {
  if (!ok) fail(path, what);
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::vector<double> parse_broadcast(const YAML::Node& node, int T,
                                    const std::string& path) {
  std::vector<double> out;
  if (!node) return out;
  if (node.IsSequence()) {
    for (const auto& v : node) out.push_back(v.as<double>());
    require(static_cast<int>(out.size()) == T, path,
            "expected " + std::to_string(T) + " entries, got " +
                std::to_string(out.size()));
  } else {
    out.assign(T, node.as<double>());
  }
  return out;
}

UncertainSeries parse_series(const YAML::Node& node, int T,
                             const std::string& path) {
  require(node && node.IsMap(), path, "expected a map with a 'mean' entry");
  UncertainSeries s;
  s.mean = parse_broadcast(node["mean"], T, path + ".mean");
  require(s.mean.size() == static_cast<size_t>(T), path + ".mean", "missing");

  auto dev = [&](const char* abs_key, const char* pct_key) {
    if (node[abs_key]) {
      require(!node[pct_key], path, std::string("give either ") + abs_key +
                                        " or " + pct_key + ", not both");
      return parse_broadcast(node[abs_key], T, path + "." + abs_key);
    }
    std::vector<double> out(T, 0.0);
    if (node[pct_key]) {
      const double pct = node[pct_key].as<double>();
      for (int t = 0; t < T; ++t) out[t] = s.mean[t] * pct / 100.0;
    }
    return out;
  };
  s.dev_plus = dev("dev_plus", "dev_plus_pct");
  s.dev_minus = dev("dev_minus", "dev_minus_pct");
  for (int t = 0; t < T; ++t) {
    require(s.dev_plus[t] >= 0.0, path + ".dev_plus", "must be >= 0");
    require(s.dev_minus[t] >= 0.0, path + ".dev_minus", "must be >= 0");
  }
  return s;
}

DgParams parse_dg(const YAML::Node& n, const std::string& path) {
  DgParams d;
  d.a = n["a"].as<double>(0.0);
  d.b = n["b"].as<double>(0.0);
  d.p_min = n["p_min"].as<double>(0.0);
  d.p_max = n["p_max"].as<double>();
  d.r_up = n["r_up"].as<double>(0.0);
  d.r_dn = n["r_dn"].as<double>(0.0);
  d.ramp_up = n["ramp_up"].as<double>();
  d.ramp_dn = n["ramp_dn"].as<double>();
  require(d.a >= 0.0, path + ".a", "must be >= 0");
  require(d.p_min >= 0.0, path + ".p_min", "must be >= 0");
  require(d.p_min <= d.p_max, path, "p_min must be <= p_max");
  require(d.r_up >= 0.0 && d.r_dn >= 0.0, path, "reserve limits must be >= 0");
  require(d.ramp_up >= 0.0 && d.ramp_dn >= 0.0, path, "ramp limits must be >= 0");
  return d;
}

EssParams parse_ess(const YAML::Node& n, const std::string& path) {
  EssParams e;
  e.a = n["a"].as<double>(0.0);
  e.capacity = n["capacity"].as<double>();
  e.eta_c = n["eta_c"].as<double>(1.0);
  e.eta_d = n["eta_d"].as<double>(1.0);
  e.pc_max = n["pc_max"].as<double>();
  e.pd_max = n["pd_max"].as<double>();
  e.soc_min = n["soc_min"].as<double>(0.0);
  e.soc_max = n["soc_max"].as<double>(1.0);
  e.soc_ref = n["soc_ref"].as<double>();
  require(e.a >= 0.0, path + ".a", "must be >= 0");
  require(e.capacity > 0.0, path + ".capacity", "must be > 0");
  require(e.eta_c > 0.0 && e.eta_c <= 1.0, path + ".eta_c", "must be in (0, 1]");
  require(e.eta_d > 0.0 && e.eta_d <= 1.0, path + ".eta_d", "must be in (0, 1]");
  require(e.pc_max >= 0.0 && e.pd_max >= 0.0, path, "power limits must be >= 0");
  require(0.0 <= e.soc_min && e.soc_min <= e.soc_ref &&
              e.soc_ref <= e.soc_max && e.soc_max <= 1.0,
          path, "need 0 <= soc_min <= soc_ref <= soc_max <= 1");
  return e;
}

FlexLoadParams parse_flex(const YAML::Node& n, int T, const std::string& path) {
  FlexLoadParams f;
  f.a = n["a"].as<double>(0.0);
  f.rd_max = parse_broadcast(n["rd_max"], T, path + ".rd_max");
  f.cd_max = parse_broadcast(n["cd_max"], T, path + ".cd_max");
  f.e_shed = n["e_shed"].as<double>();
  require(f.a >= 0.0, path + ".a", "must be >= 0");
  require(f.rd_max.size() == static_cast<size_t>(T), path + ".rd_max", "missing");
  require(f.cd_max.size() == static_cast<size_t>(T), path + ".cd_max", "missing");
  for (double v : f.rd_max) require(v >= 0.0, path + ".rd_max", "must be >= 0");
  for (double v : f.cd_max) require(v >= 0.0, path + ".cd_max", "must be >= 0");
  require(f.e_shed >= 0.0, path + ".e_shed", "must be >= 0");
  return f;
}

std::string fmt_list(const std::vector<double>& v) {
  std::string r = "[";
  for (size_t i = 0; i < v.size(); ++i) {
    if (i) r += ", ";
    r += fmt(v[i]);
  }
  return r + "]";
}

void emit_series(std::ostringstream& out, const UncertainSeries& s,
                 const std::string& key, int indent) {
  const std::string pad(indent, ' ');
  out << pad << key << ":\n";
  out << pad << "  mean: " << fmt_list(s.mean) << "\n";
  out << pad << "  dev_plus: " << fmt_list(s.dev_plus) << "\n";
  out << pad << "  dev_minus: " << fmt_list(s.dev_minus) << "\n";
}

// Series as a flow-style map, for list items.
std::string series_inline(const UncertainSeries& s) {
  return "{mean: " + fmt_list(s.mean) + ", dev_plus: " + fmt_list(s.dev_plus) +
         ", dev_minus: " + fmt_list(s.dev_minus) + "}";
}

}  // namespace

BoundPair expand_bounds(const UncertainSeries& series, SeriesKind kind) {
  const int T = series.size();
  BoundPair b;
  b.plus_level.resize(T);
  b.minus_level.resize(T);
  for (int t = 0; t < T; ++t) {
    if (kind == SeriesKind::res) {
      // +1 means a positive reserve requirement: generation dips to the
      // low bound. -1 is the high-generation bound.
      b.plus_level[t] = series.mean[t] - series.dev_minus[t];
      b.minus_level[t] = series.mean[t] + series.dev_plus[t];
    } else {
      b.plus_level[t] = series.mean[t] + series.dev_plus[t];
      b.minus_level[t] = series.mean[t] - series.dev_minus[t];
    }
  }
  return b;
}

MmgConfig load_config(const std::string& text) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::Exception& e) {
    throw ParseError(std::string("config parse error: ") + e.what());
  }
  if (!root.IsMap()) throw ParseError("config parse error: top level must be a map");

  MmgConfig cfg;
  try {
    const auto hz = root["horizon"];
    require(hz && hz.IsMap(), "horizon", "missing section");
    cfg.horizon.hours = hz["hours"].as<int>();
    cfg.horizon.dt = hz["dt"].as<double>(1.0);
    require(cfg.horizon.hours >= 1, "horizon.hours", "must be >= 1");
    require(cfg.horizon.dt > 0.0, "horizon.dt", "must be > 0");
    const int T = cfg.horizon.hours;

    const auto mk = root["market"];
    require(mk && mk.IsMap(), "market", "missing section");
    cfg.market.gamma_buy = parse_series(mk["gamma_buy"], T, "market.gamma_buy");
    cfg.market.gamma_sell = parse_series(mk["gamma_sell"], T, "market.gamma_sell");
    cfg.market.tau = mk["tau"].as<double>(0.0);
    cfg.market.alpha = mk["alpha"].as<double>(1.0);
    cfg.market.eps = mk["eps"].as<double>(0.005);
    cfg.market.p0 = mk["p0"].as<double>(0.5);
    cfg.market.max_iter = mk["max_iter"].as<int>(5000);
    if (mk["lambda0"] && !(mk["lambda0"].IsScalar() &&
                           mk["lambda0"].as<std::string>() == "mean")) {
      cfg.market.lambda0 = parse_broadcast(mk["lambda0"], T, "market.lambda0");
    }
    require(cfg.market.tau >= 0.0, "market.tau", "must be >= 0");
    require(cfg.market.alpha > 0.0, "market.alpha", "must be > 0");
    require(cfg.market.eps > 0.0, "market.eps", "must be > 0");
    require(cfg.market.p0 > 0.0 && cfg.market.p0 <= 1.0, "market.p0",
            "must be in (0, 1]");
    require(cfg.market.max_iter >= 1, "market.max_iter", "must be >= 1");

    // Every realized buy price must exceed the matching sell price: levels
    // are tied through the single PSO factor, so check per level.
    const auto gb = expand_bounds(cfg.market.gamma_buy, SeriesKind::price);
    const auto gs = expand_bounds(cfg.market.gamma_sell, SeriesKind::price);
    for (int t = 0; t < T; ++t) {
      const bool ok = gb.plus_level[t] > gs.plus_level[t] &&
                      gb.minus_level[t] > gs.minus_level[t] &&
                      cfg.market.gamma_buy.mean[t] > cfg.market.gamma_sell.mean[t];
      require(ok, "market.gamma_sell[" + std::to_string(t) + "]",
              "realized sell price must stay below the buy price");
    }

    const auto mgs = root["mgs"];
    require(mgs && mgs.IsSequence() && mgs.size() >= 1, "mgs",
            "need at least one microgrid");
    int mi = 0;
    for (const auto& node : mgs) {
      const std::string path = "mgs[" + std::to_string(mi) + "]";
      MgConfig mg;
      mg.id = node["id"].as<std::string>("MG" + std::to_string(mi + 1));
      int gi = 0;
      for (const auto& d : node["dgs"])
        mg.dgs.push_back(parse_dg(d, path + ".dgs[" + std::to_string(gi++) + "]"));
      int ei = 0;
      for (const auto& e : node["esses"])
        mg.esses.push_back(parse_ess(e, path + ".esses[" + std::to_string(ei++) + "]"));
      if (node["flex"]) mg.flex = parse_flex(node["flex"], T, path + ".flex");
      mg.demand = parse_series(node["demand"], T, path + ".demand");
      int wi = 0;
      for (const auto& w : node["wind"])
        mg.wind.push_back(parse_series(w, T, path + ".wind[" + std::to_string(wi++) + "]"));
      int si = 0;
      for (const auto& s : node["pv"])
        mg.pv.push_back(parse_series(s, T, path + ".pv[" + std::to_string(si++) + "]"));
      mg.p_pso_max = node["p_pso_max"].as<double>(0.0);
      require(mg.p_pso_max >= 0.0, path + ".p_pso_max", "must be >= 0");

      double supply = mg.p_pso_max;
      for (const auto& d : mg.dgs) supply += d.p_max;
      for (const auto& e : mg.esses) supply += e.pd_max;
      const auto dem = expand_bounds(mg.demand, SeriesKind::demand);
      for (int t = 0; t < T; ++t) {
        if (dem.plus_level[t] > supply) {
          cfg.warnings.push_back(path + ": peak demand " + fmt(dem.plus_level[t]) +
                                 " MW at hour " + std::to_string(t) +
                                 " exceeds total supply capability " + fmt(supply) +
                                 " MW; the dispatch may be infeasible");
          break;
        }
      }
      cfg.mgs.push_back(std::move(mg));
      ++mi;
    }
  } catch (const YAML::Exception& e) {
    throw ParseError(std::string("config parse error: ") + e.what());
  }
  return cfg;
}

MmgConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open config file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return load_config(ss.str());
}

std::string serialize(const MmgConfig& cfg) {
  std::ostringstream out;
  out << "horizon:\n  hours: " << cfg.horizon.hours
      << "\n  dt: " << fmt(cfg.horizon.dt) << "\n";
  out << "market:\n";
  emit_series(out, cfg.market.gamma_buy, "gamma_buy", 2);
  emit_series(out, cfg.market.gamma_sell, "gamma_sell", 2);
  out << "  tau: " << fmt(cfg.market.tau) << "\n";
  out << "  alpha: " << fmt(cfg.market.alpha) << "\n";
  out << "  eps: " << fmt(cfg.market.eps) << "\n";
  out << "  p0: " << fmt(cfg.market.p0) << "\n";
  out << "  max_iter: " << cfg.market.max_iter << "\n";
  if (!cfg.market.lambda0.empty()) {
    out << "  lambda0: [";
    for (size_t i = 0; i < cfg.market.lambda0.size(); ++i)
      out << (i ? ", " : "") << fmt(cfg.market.lambda0[i]);
    out << "]\n";
  }
  out << "mgs:\n";
  for (const auto& mg : cfg.mgs) {
    out << "  - id: " << mg.id << "\n";
    out << "    dgs:\n";
    for (const auto& d : mg.dgs) {
      out << "      - {a: " << fmt(d.a) << ", b: " << fmt(d.b)
          << ", p_min: " << fmt(d.p_min) << ", p_max: " << fmt(d.p_max)
          << ", r_up: " << fmt(d.r_up) << ", r_dn: " << fmt(d.r_dn)
          << ", ramp_up: " << fmt(d.ramp_up) << ", ramp_dn: " << fmt(d.ramp_dn)
          << "}\n";
    }
    out << "    esses:\n";
    for (const auto& e : mg.esses) {
      out << "      - {a: " << fmt(e.a) << ", capacity: " << fmt(e.capacity)
          << ", eta_c: " << fmt(e.eta_c) << ", eta_d: " << fmt(e.eta_d)
          << ", pc_max: " << fmt(e.pc_max) << ", pd_max: " << fmt(e.pd_max)
          << ", soc_min: " << fmt(e.soc_min) << ", soc_max: " << fmt(e.soc_max)
          << ", soc_ref: " << fmt(e.soc_ref) << "}\n";
    }
    if (mg.flex) {
      out << "    flex:\n      a: " << fmt(mg.flex->a) << "\n";
      out << "      rd_max: " << fmt_list(mg.flex->rd_max) << "\n";
      out << "      cd_max: " << fmt_list(mg.flex->cd_max) << "\n";
      out << "      e_shed: " << fmt(mg.flex->e_shed) << "\n";
    }
    emit_series(out, mg.demand, "demand", 4);
    out << "    wind:\n";
    for (const auto& w : mg.wind) out << "      - " << series_inline(w) << "\n";
    out << "    pv:\n";
    for (const auto& s : mg.pv) out << "      - " << series_inline(s) << "\n";
    out << "    p_pso_max: " << fmt(mg.p_pso_max) << "\n";
  }
  return out.str();
}

bool operator==(const UncertainSeries& a, const UncertainSeries& b) {
  return a.mean == b.mean && a.dev_plus == b.dev_plus && a.dev_minus == b.dev_minus;
}

namespace {

bool eq(const DgParams& a, const DgParams& b) {
  return a.a == b.a && a.b == b.b && a.p_min == b.p_min && a.p_max == b.p_max &&
         a.r_up == b.r_up && a.r_dn == b.r_dn && a.ramp_up == b.ramp_up &&
         a.ramp_dn == b.ramp_dn;
}

bool eq(const EssParams& a, const EssParams& b) {
  return a.a == b.a && a.capacity == b.capacity && a.eta_c == b.eta_c &&
         a.eta_d == b.eta_d && a.pc_max == b.pc_max && a.pd_max == b.pd_max &&
         a.soc_min == b.soc_min && a.soc_max == b.soc_max && a.soc_ref == b.soc_ref;
}

bool eq(const FlexLoadParams& a, const FlexLoadParams& b) {
  return a.a == b.a && a.rd_max == b.rd_max && a.cd_max == b.cd_max &&
         a.e_shed == b.e_shed;
}

bool eq(const MgConfig& a, const MgConfig& b) {
  if (a.id != b.id || a.p_pso_max != b.p_pso_max) return false;
  if (a.dgs.size() != b.dgs.size() || a.esses.size() != b.esses.size() ||
      a.wind.size() != b.wind.size() || a.pv.size() != b.pv.size())
    return false;
  for (size_t i = 0; i < a.dgs.size(); ++i)
    if (!eq(a.dgs[i], b.dgs[i])) return false;
  for (size_t i = 0; i < a.esses.size(); ++i)
    if (!eq(a.esses[i], b.esses[i])) return false;
  if (a.flex.has_value() != b.flex.has_value()) return false;
  if (a.flex && !eq(*a.flex, *b.flex)) return false;
  if (!(a.demand == b.demand)) return false;
  for (size_t i = 0; i < a.wind.size(); ++i)
    if (!(a.wind[i] == b.wind[i])) return false;
  for (size_t i = 0; i < a.pv.size(); ++i)
    if (!(a.pv[i] == b.pv[i])) return false;
  return true;
}

}  // namespace

bool operator==(const MmgConfig& a, const MmgConfig& b) {
  if (a.horizon.hours != b.horizon.hours || a.horizon.dt != b.horizon.dt)
    return false;
  const auto& ma = a.market;
  const auto& mb = b.market;
  if (!(ma.gamma_buy == mb.gamma_buy) || !(ma.gamma_sell == mb.gamma_sell) ||
      ma.tau != mb.tau || ma.alpha != mb.alpha || ma.eps != mb.eps ||
      ma.lambda0 != mb.lambda0 || ma.p0 != mb.p0 || ma.max_iter != mb.max_iter)
    return false;
  if (a.mgs.size() != b.mgs.size()) return false;
  for (size_t i = 0; i < a.mgs.size(); ++i)
    if (!eq(a.mgs[i], b.mgs[i])) return false;
  return true;
}

}  // namespace mmg::domain
