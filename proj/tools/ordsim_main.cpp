#include <fstream>
#include <iostream>
#include <memory>
#include <string>

#include <CLI11.hpp>

#include "ordsim/config.hpp"
#include "ordsim/simnet.hpp"
#include "ordsim/verifier.hpp"

namespace {

using namespace ordsim;

void write_or_print(const std::string& path, const std::string& content) {
  if (path.empty() || path == "-") {
    std::cout << content;
    return;
  }
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open output file " + path);
  out << content;
}

int do_run(SimConfig cfg, const std::string& trace_path, const std::string& report_path) {
  bool is_kz = cfg.app.kind == AppKind::Backtrack;
  auto result = run(std::move(cfg));
  if (!trace_path.empty()) {
    std::ofstream out(trace_path);
    if (!out) throw ConfigError("cannot open trace file " + trace_path);
    result.trace.write(out);
  }
  std::string report = result.report.to_text();
  if (is_kz) {
    auto scan = scan_donation_overtaking(result.trace);
    report += "app.overtaking_failures=" + std::to_string(scan.failures) + "\n";
  }
  write_or_print(report_path, report);
  return result.report.completed ? 0 : 1;
}

std::pair<uint64_t, uint64_t> parse_seed_range(const std::string& s) {
  auto dots = s.find("..");
  if (dots == std::string::npos) {
    uint64_t v = std::stoull(s);
    return {v, v};
  }
  uint64_t a = std::stoull(s.substr(0, dots));
  uint64_t b = std::stoull(s.substr(dots + 2));
  if (b < a) throw ConfigError("seed range must be ascending");
  return {a, b};
}

int do_sweep(const Json& base, const std::string& seeds, const std::string& out_path) {
  auto [lo, hi] = parse_seed_range(seeds);
  std::ostringstream csv;
  AppKind kind = parse_config(base).app.kind;
  csv << "seed,delivered,postponed_total,postponed_max,pulses_max";
  if (kind == AppKind::Backtrack) csv << ",leaves,donations,failures";
  if (kind == AppKind::Linsolve) csv << ",iterations,residual";
  csv << "\n";
  for (uint64_t s = lo; s <= hi; ++s) {
    Json j = base;
    j["seed"] = s;
    auto result = run(parse_config(j));
    const auto& r = result.report;
    csv << s << ',' << r.delivered << ',' << r.postponed_total << ',' << r.postponed_max
        << ',' << r.pulses_max();
    if (kind == AppKind::Backtrack) {
      auto scan = scan_donation_overtaking(result.trace);
      csv << ',' << r.app["leaves"].get<int64_t>() << ',' << r.app["donations"].get<int64_t>()
          << ',' << scan.failures;
    }
    if (kind == AppKind::Linsolve)
      csv << ',' << r.app["iterations"].get<int64_t>() << ','
          << (r.app.contains("residual") ? r.app["residual"].dump() : "");
    csv << "\n";
    if (!r.completed)
      std::cerr << "warning: seed " << s << " did not complete: " << r.error << "\n";
  }
  write_or_print(out_path, csv.str());
  return 0;
}

int do_verify(const std::string& trace_path, const std::string& cond_name,
              const std::string& mu, int64_t rho, int64_t delta,
              const std::string& config_path) {
  Trace trace = Trace::read_file(trace_path);
  auto cond = condition_from(cond_name);
  if (!cond) throw ConfigError("unknown condition '" + cond_name + "'");

  CheckParams params;
  if (!mu.empty()) params.mu_override = (mu == "inf") ? kMuInfinity : std::stoll(mu);
  if (rho >= 0) params.rho_override = rho;
  if (delta >= 0) params.delta_const = delta;

  std::shared_ptr<DeltaPolicy> published;  // keep the policy alive for the check
  if (!config_path.empty() && *cond == Condition::Pspgc) {
    SimConfig cfg = load_config(config_path);
    if (cfg.app.kind == AppKind::Linsolve &&
        cfg.ordering.pulse_policy == OrderingConfig::PulsePolicy::Linsolve) {
      Coloring col = cfg.app.coloring == "jacobi" ? Coloring::uniform(cfg.topo.n())
                                                  : greedy_coloring(cfg.topo);
      IterationSchedule sched;
      sched.ncolors = col.ncolors;
      sched.nresidual = cfg.app.residual == ResidualMode::Tree
                            ? 2 * SpanningTree::bfs(cfg.topo, 1).height + 1
                            : 1;
      published =
          std::make_shared<LinsolveDelta>(col, sched, cfg.app.residual, /*gate_form=*/false);
      params.delta_theory = [published](int64_t rank, NodeId i, NodeId j) {
        return published->delta(rank, i, j) - 1;
      };
    } else if (cfg.ordering.pulse_policy == OrderingConfig::PulsePolicy::Constant) {
      params.delta_const = cfg.ordering.delta_const;
    }
  }

  auto v = check(trace, *cond, params);
  if (!v) {
    std::cout << "pass\n";
    return 0;
  }
  std::cout << "violation at seq " << v->seq << ": " << v->explanation << "\n";
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"deterministic simulator and checker for ordered message delivery"};
  app.require_subcommand(1);

  std::string config_path, trace_path, report_path;
  int64_t seed_override = -1;

  auto* run_cmd = app.add_subcommand("run", "run one configuration");
  run_cmd->add_option("config", config_path, "run configuration (JSON)")->required();
  run_cmd->add_option("--trace", trace_path, "write the trace (JSON Lines) here");
  run_cmd->add_option("--report", report_path, "write the report here (default stdout)");
  run_cmd->add_option("--seed", seed_override, "override the config seed");

  std::string seeds, sweep_out;
  auto* sweep_cmd = app.add_subcommand("sweep", "run a seed range, emit metrics CSV");
  sweep_cmd->add_option("config", config_path, "run configuration (JSON)")->required();
  sweep_cmd->add_option("--seeds", seeds, "seed range a..b")->required();
  sweep_cmd->add_option("--out", sweep_out, "CSV output path (default stdout)");

  std::string verify_trace, cond_name, mu_arg, verify_config;
  int64_t rho_arg = -1, delta_arg = -1;
  auto* verify_cmd = app.add_subcommand("verify", "check a trace against a condition");
  verify_cmd->add_option("trace", verify_trace, "trace file (JSON Lines)")->required();
  verify_cmd->add_option("--condition", cond_name,
                         "fdc|cdc|rfdc|rcdc|sdc|spgc|psdc|pspgc")
      ->required();
  verify_cmd->add_option("--mu", mu_arg, "tolerance override (integer or 'inf')");
  verify_cmd->add_option("--rho", rho_arg, "minimum-delay override");
  verify_cmd->add_option("--delta", delta_arg, "maximum-delay schedule constant");
  verify_cmd->add_option("--config", verify_config,
                         "run configuration, for schedule-based conditions");

  std::string demo_name;
  auto* demo_cmd = app.add_subcommand("demo", "run a bundled configuration");
  demo_cmd->add_option("name", demo_name,
                       "kz-complete4|kz-ring8|jacobi-2x2|gauss-seidel-grid9|sync-vs-async")
      ->required();
  demo_cmd->add_option("--trace", trace_path, "write the trace here");
  demo_cmd->add_option("--report", report_path, "write the report here (default stdout)");
  demo_cmd->add_option("--seed", seed_override, "override the bundled seed");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run_cmd) {
      auto cfg = ordsim::load_config(config_path);
      if (seed_override >= 0) {
        ordsim::Json j = cfg.echo;
        j["seed"] = seed_override;
        cfg = ordsim::parse_config(j);
      }
      return do_run(std::move(cfg), trace_path, report_path);
    }
    if (*sweep_cmd) {
      std::ifstream in(config_path);
      if (!in) throw ordsim::ConfigError("config: cannot open " + config_path);
      std::stringstream ss;
      ss << in.rdbuf();
      ordsim::Json base = ordsim::Json::parse(ss.str());
      return do_sweep(base, seeds, sweep_out);
    }
    if (*verify_cmd)
      return do_verify(verify_trace, cond_name, mu_arg, rho_arg, delta_arg, verify_config);
    if (*demo_cmd) {
      if (demo_name == "sync-vs-async") {
        // side-by-side run of the synchronous gate and a relaxed one
        ordsim::Json j = ordsim::Json::parse(ordsim::demo_config(demo_name));
        if (seed_override >= 0) j["seed"] = seed_override;
        auto sync_res = ordsim::run(ordsim::parse_config(j));
        j["ordering"] = ordsim::Json{{"gate", "psdc"},
                                     {"pulse_policy", "constant"},
                                     {"rho", 1},
                                     {"delta", 3}};
        auto relaxed = ordsim::run(ordsim::parse_config(j));
        std::ostringstream os;
        os << "synchronous.postponed_total=" << sync_res.report.postponed_total << "\n"
           << "synchronous.quiescence_tick=" << sync_res.report.quiescence_tick << "\n"
           << "relaxed.postponed_total=" << relaxed.report.postponed_total << "\n"
           << "relaxed.quiescence_tick=" << relaxed.report.quiescence_tick << "\n";
        write_or_print(report_path, os.str());
        if (!trace_path.empty()) {
          std::ofstream out(trace_path);
          sync_res.trace.write(out);
        }
        return 0;
      }
      auto cfg = ordsim::parse_config_text(ordsim::demo_config(demo_name));
      if (seed_override >= 0) {
        ordsim::Json j = cfg.echo;
        j["seed"] = seed_override;
        cfg = ordsim::parse_config(j);
      }
      return do_run(std::move(cfg), trace_path, report_path);
    }
  } catch (const ordsim::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
