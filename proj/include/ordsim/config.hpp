#pragma once

#include <fstream>
#include <sstream>
#include <string>

#include "ordsim/simnet.hpp"

namespace ordsim {

namespace cfg_detail {

inline const Json& need(const Json& j, const char* key, const char* where) {
  if (!j.is_object() || !j.contains(key))
    throw ConfigError(std::string("config: missing key '") + key + "' in " + where);
  return j[key];
}

template <typename T>
T get_or(const Json& j, const char* key, T fallback) {
  if (!j.is_object() || !j.contains(key)) return fallback;
  try {
    return j[key].get<T>();
  } catch (const std::exception&) {
    throw ConfigError(std::string("config: bad value for key '") + key + "'");
  }
}

}  // namespace cfg_detail

inline Topology parse_topology(const Json& j) {
  using cfg_detail::get_or;
  using cfg_detail::need;
  std::string kind = need(j, "kind", "topology").get<std::string>();
  if (kind == "complete") return make_complete(need(j, "n", "topology").get<int>());
  if (kind == "ring") return make_ring(need(j, "n", "topology").get<int>());
  if (kind == "path") return make_path(need(j, "n", "topology").get<int>());
  if (kind == "grid")
    return make_grid(need(j, "rows", "topology").get<int>(),
                     need(j, "cols", "topology").get<int>());
  if (kind == "explicit") {
    int n = need(j, "n", "topology").get<int>();
    std::vector<std::pair<NodeId, NodeId>> edges;
    for (const auto& e : need(j, "edges", "topology"))
      edges.emplace_back(e.at(0).get<int>(), e.at(1).get<int>());
    return Topology::build(n, edges);
  }
  throw ConfigError("config: unknown topology kind '" + kind + "'");
}

inline LatencyModel parse_latency(const Json& j) {
  using cfg_detail::get_or;
  LatencyModel m;
  std::string model = get_or<std::string>(j, "model", "uniform");
  if (model == "fixed") {
    m.kind = LatencyModel::Kind::Fixed;
    m.fixed = get_or<int64_t>(j, "d", 1);
    if (m.fixed < 1) throw ConfigError("config: latency 'd' must be >= 1");
  } else if (model == "uniform") {
    m.kind = LatencyModel::Kind::Uniform;
    m.lo = get_or<int64_t>(j, "lo", 1);
    m.hi = get_or<int64_t>(j, "hi", 10);
    if (m.lo < 1 || m.hi < m.lo) throw ConfigError("config: latency bounds need 1 <= lo <= hi");
  } else if (model == "expdisc") {
    m.kind = LatencyModel::Kind::ExpDiscrete;
    m.mean = get_or<double>(j, "mean", 8.0);
    if (m.mean < 1.0) throw ConfigError("config: latency 'mean' must be >= 1");
  } else {
    throw ConfigError("config: unknown latency model '" + model + "'");
  }
  return m;
}

inline int64_t parse_mu(const Json& v) {
  if (v.is_string()) {
    if (v == "inf") return kMuInfinity;
    throw ConfigError("config: 'mu' must be a nonnegative integer or \"inf\"");
  }
  int64_t mu = v.get<int64_t>();
  if (mu < 0) throw ConfigError("config: 'mu' must be a nonnegative integer or \"inf\"");
  return mu;
}

inline OrderingConfig parse_ordering(const Json& j) {
  using cfg_detail::get_or;
  using cfg_detail::need;
  OrderingConfig o;
  std::string gate = need(j, "gate", "ordering").get<std::string>();
  if (gate == "fdc") o.gate = GateKind::Fdc;
  else if (gate == "cdc") o.gate = GateKind::Cdc;
  else if (gate == "rfdc") o.gate = GateKind::Rfdc;
  else if (gate == "rcdc") o.gate = GateKind::Rcdc;
  else if (gate == "psdc" || gate == "pspgc") o.gate = GateKind::Psdc;
  else throw ConfigError("config: unknown gate '" + gate + "'");

  if (j.contains("mu")) {
    if (j["mu"].is_string() && j["mu"] == "kz") o.mu_kz = true;
    else o.mu = parse_mu(j["mu"]);
  }
  std::string attach = get_or<std::string>(j, "attach", "sparse");
  if (attach == "sparse") o.sparse_attach = true;
  else if (attach == "full") o.sparse_attach = false;
  else throw ConfigError("config: 'attach' must be \"sparse\" or \"full\"");

  std::string policy = get_or<std::string>(j, "pulse_policy", "synchronous");
  if (policy == "synchronous") o.pulse_policy = OrderingConfig::PulsePolicy::Synchronous;
  else if (policy == "constant") o.pulse_policy = OrderingConfig::PulsePolicy::Constant;
  else if (policy == "linsolve") o.pulse_policy = OrderingConfig::PulsePolicy::Linsolve;
  else throw ConfigError("config: unknown pulse_policy '" + policy + "'");
  o.rho_const = get_or<int64_t>(j, "rho", 1);
  o.delta_const = get_or<int64_t>(j, "delta", 0);
  o.horizon = get_or<int64_t>(j, "horizon", 0);
  return o;
}

inline LinearSystem parse_system(const Json& j) {
  using cfg_detail::need;
  LinearSystem s;
  s.n = need(j, "n", "system").get<int>();
  s.b.assign(s.n + 1, 0.0);
  s.x0.assign(s.n + 1, 0.0);
  const Json& entries = need(j, "entries", "system");
  for (const auto& e : entries) {
    int r = e.at(0).get<int>(), c = e.at(1).get<int>();
    s.coef[{r, c}] = e.at(2).get<double>();
  }
  const Json& b = need(j, "b", "system");
  if (static_cast<int>(b.size()) != s.n) throw ConfigError("config: 'b' must have n entries");
  for (int i = 0; i < s.n; ++i) s.b[i + 1] = b[i].get<double>();
  if (j.contains("x0")) {
    if (static_cast<int>(j["x0"].size()) != s.n)
      throw ConfigError("config: 'x0' must have n entries");
    for (int i = 0; i < s.n; ++i) s.x0[i + 1] = j["x0"][i].get<double>();
  }
  s.eps = cfg_detail::get_or<double>(j, "eps", 1e-8);
  if (!(s.eps > 0.0 && s.eps < 1.0)) throw ConfigError("config: 'eps' must lie in (0,1)");
  return s;
}

inline AppConfig parse_application(const Json& j) {
  using cfg_detail::get_or;
  using cfg_detail::need;
  AppConfig a;
  std::string kind = need(j, "kind", "application").get<std::string>();
  if (kind == "traffic") {
    a.kind = AppKind::EventTraffic;
    a.credits = get_or<int64_t>(j, "credits", 6);
  } else if (kind == "kz") {
    a.kind = AppKind::Backtrack;
    a.tree = get_or<std::string>(j, "tree", "synthetic");
    if (a.tree != "synthetic" && a.tree != "queens")
      throw ConfigError("config: 'tree' must be \"synthetic\" or \"queens\"");
    a.tree_seed = get_or<uint64_t>(j, "tree_seed", 1);
    a.max_branching = get_or<int>(j, "max_branching", 4);
    a.leaves = get_or<int64_t>(j, "leaves", 15);
    a.queens = get_or<int>(j, "queens", 4);
    a.root_holder = get_or<int>(j, "root", 1);
  } else if (kind == "pulse_traffic") {
    a.kind = AppKind::PulseTraffic;
    a.max_rank = get_or<int64_t>(j, "max_rank", 8);
  } else if (kind == "linsolve") {
    a.kind = AppKind::Linsolve;
    a.system = parse_system(need(j, "system", "application"));
    a.coloring = get_or<std::string>(j, "coloring", "gauss-seidel");
    if (a.coloring != "gauss-seidel" && a.coloring != "jacobi")
      throw ConfigError("config: 'coloring' must be \"gauss-seidel\" or \"jacobi\"");
    std::string res = get_or<std::string>(j, "residual", "tree");
    if (res == "tree") a.residual = ResidualMode::Tree;
    else if (res == "oracle") a.residual = ResidualMode::Oracle;
    else throw ConfigError("config: 'residual' must be \"tree\" or \"oracle\"");
  } else {
    throw ConfigError("config: unknown application kind '" + kind + "'");
  }
  return a;
}

/// Parse a full run configuration; the returned SimConfig carries the
/// effective (defaults filled) document for the report echo.
inline SimConfig parse_config(const Json& j) {
  using cfg_detail::get_or;
  using cfg_detail::need;
  SimConfig c;
  c.seed = get_or<uint64_t>(j, "seed", 1);
  c.topo = parse_topology(need(j, "topology", "config"));
  c.latency = parse_latency(j.contains("latency") ? j["latency"] : Json::object());
  c.ordering = parse_ordering(need(j, "ordering", "config"));
  c.app = parse_application(need(j, "application", "config"));
  if (j.contains("limits")) c.max_events = get_or<int64_t>(j["limits"], "max_events", 200000);
  if (c.max_events <= 0) throw ConfigError("config: 'max_events' must be positive");
  if (j.contains("inject"))
    c.inject_force_accept = get_or<int64_t>(j["inject"], "force_accept_at", 0);

  // Echo the effective configuration so a run is reproducible from its
  // own artifacts.
  Json echo = j;
  echo["seed"] = c.seed;
  if (!echo.contains("latency")) echo["latency"] = Json{{"model", "uniform"}, {"lo", 1}, {"hi", 10}};
  if (!echo.contains("limits")) echo["limits"] = Json{{"max_events", c.max_events}};
  c.echo = echo;
  return c;
}

inline SimConfig parse_config_text(const std::string& text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const std::exception& e) {
    throw ConfigError(std::string("config: not valid JSON: ") + e.what());
  }
  return parse_config(j);
}

inline SimConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

/// Bundled demo configurations.
inline std::string demo_config(const std::string& name) {
  if (name == "kz-complete4")
    return R"({
  "seed": 1,
  "topology": {"kind": "complete", "n": 4},
  "latency": {"model": "uniform", "lo": 1, "hi": 20},
  "ordering": {"gate": "rcdc", "mu": "kz"},
  "application": {"kind": "kz", "tree": "synthetic", "tree_seed": 7, "leaves": 15, "max_branching": 4},
  "limits": {"max_events": 200000}
})";
  if (name == "kz-ring8")
    return R"({
  "seed": 1,
  "topology": {"kind": "ring", "n": 8},
  "latency": {"model": "uniform", "lo": 1, "hi": 30},
  "ordering": {"gate": "rcdc", "mu": "kz"},
  "application": {"kind": "kz", "tree": "synthetic", "tree_seed": 11, "leaves": 60, "max_branching": 5},
  "limits": {"max_events": 400000}
})";
  if (name == "jacobi-2x2")
    return R"({
  "seed": 1,
  "topology": {"kind": "explicit", "n": 2, "edges": [[1, 2]]},
  "latency": {"model": "uniform", "lo": 1, "hi": 6},
  "ordering": {"gate": "psdc", "pulse_policy": "linsolve"},
  "application": {
    "kind": "linsolve",
    "coloring": "jacobi",
    "residual": "tree",
    "system": {"n": 2, "entries": [[1,1,2.0],[1,2,1.0],[2,1,1.0],[2,2,2.0]], "b": [3.0,3.0], "x0": [0.0,0.0], "eps": 1e-8}
  },
  "limits": {"max_events": 400000}
})";
  if (name == "gauss-seidel-grid9")
    return R"({
  "seed": 1,
  "topology": {"kind": "grid", "rows": 3, "cols": 3},
  "latency": {"model": "uniform", "lo": 1, "hi": 6},
  "ordering": {"gate": "psdc", "pulse_policy": "linsolve"},
  "application": {
    "kind": "linsolve",
    "coloring": "gauss-seidel",
    "residual": "tree",
    "system": {
      "n": 9,
      "entries": [
        [1,1,4.0],[2,2,5.0],[3,3,4.0],[4,4,5.0],[5,5,6.0],[6,6,5.0],[7,7,4.0],[8,8,5.0],[9,9,4.0],
        [1,2,-1.0],[2,1,-1.0],[2,3,-1.0],[3,2,-1.0],
        [4,5,-1.0],[5,4,-1.0],[5,6,-1.0],[6,5,-1.0],
        [7,8,-1.0],[8,7,-1.0],[8,9,-1.0],[9,8,-1.0],
        [1,4,-1.0],[4,1,-1.0],[4,7,-1.0],[7,4,-1.0],
        [2,5,-1.0],[5,2,-1.0],[5,8,-1.0],[8,5,-1.0],
        [3,6,-1.0],[6,3,-1.0],[6,9,-1.0],[9,6,-1.0]
      ],
      "b": [1.0,1.0,1.0,1.0,1.0,1.0,1.0,1.0,1.0],
      "x0": [0.0,0.0,0.0,0.0,0.0,0.0,0.0,0.0,0.0],
      "eps": 1e-8
    }
  },
  "limits": {"max_events": 600000}
})";
  if (name == "sync-vs-async")
    return R"({
  "seed": 1,
  "topology": {"kind": "ring", "n": 8},
  "latency": {"model": "uniform", "lo": 1, "hi": 12},
  "ordering": {"gate": "psdc", "pulse_policy": "synchronous"},
  "application": {"kind": "pulse_traffic", "max_rank": 12},
  "limits": {"max_events": 200000}
})";
  throw ConfigError("unknown demo '" + name +
                    "' (available: kz-complete4, kz-ring8, jacobi-2x2, gauss-seidel-grid9, "
                    "sync-vs-async)");
}

}  // namespace ordsim
