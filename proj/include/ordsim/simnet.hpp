#pragma once

#include <deque>
#include <memory>
#include <queue>
#include <sstream>
#include <utility>
#include <vector>

#include "ordsim/app_backtrack.hpp"
#include "ordsim/app_linsolve.hpp"
#include "ordsim/apps_traffic.hpp"
#include "ordsim/event_order.hpp"
#include "ordsim/graph.hpp"
#include "ordsim/message.hpp"
#include "ordsim/pulse_order.hpp"
#include "ordsim/rng.hpp"
#include "ordsim/trace.hpp"

namespace ordsim {

enum class GateKind { Fdc, Cdc, Rfdc, Rcdc, Psdc };

inline const char* to_string(GateKind g) {
  switch (g) {
    case GateKind::Fdc: return "fdc";
    case GateKind::Cdc: return "cdc";
    case GateKind::Rfdc: return "rfdc";
    case GateKind::Rcdc: return "rcdc";
    case GateKind::Psdc: return "psdc";
  }
  return "?";
}

inline bool is_pulse_gate(GateKind g) { return g == GateKind::Psdc; }

enum class AppKind { EventTraffic, Backtrack, PulseTraffic, Linsolve };

inline const char* to_string(AppKind a) {
  switch (a) {
    case AppKind::EventTraffic: return "traffic";
    case AppKind::Backtrack: return "kz";
    case AppKind::PulseTraffic: return "pulse_traffic";
    case AppKind::Linsolve: return "linsolve";
  }
  return "?";
}

inline bool is_pulse_app(AppKind a) {
  return a == AppKind::PulseTraffic || a == AppKind::Linsolve;
}

struct OrderingConfig {
  GateKind gate = GateKind::Fdc;
  int64_t mu = 0;          // constant tolerance; kMuInfinity = unbounded
  bool mu_kz = false;      // use the backtrack tolerance schedule instead
  bool sparse_attach = true;
  enum class PulsePolicy { Synchronous, Constant, Linsolve };
  PulsePolicy pulse_policy = PulsePolicy::Synchronous;
  int64_t delta_const = 0;  // condition-form value; the gate waits one later
  int64_t rho_const = 1;
  int64_t horizon = 0;  // compatibility validation horizon; 0 = auto
};

struct AppConfig {
  AppKind kind = AppKind::EventTraffic;
  // traffic
  int64_t credits = 6;
  int64_t max_rank = 8;
  // backtrack
  std::string tree = "synthetic";  // or "queens"
  uint64_t tree_seed = 1;
  int max_branching = 4;
  int64_t leaves = 15;
  int queens = 4;
  NodeId root_holder = 1;
  // linsolve
  LinearSystem system;
  std::string coloring = "gauss-seidel";  // or "jacobi"
  ResidualMode residual = ResidualMode::Tree;
};

struct SimConfig {
  uint64_t seed = 1;
  Topology topo;
  LatencyModel latency;
  OrderingConfig ordering;
  AppConfig app;
  int64_t max_events = 200000;
  int64_t inject_force_accept = 0;  // 1-based index of the postpone to force
  Json echo;                        // effective configuration, for the report
};

struct RunReport {
  int64_t sent = 0;
  int64_t delivered = 0;
  int64_t postponed_total = 0;
  int64_t postponed_max = 0;
  std::vector<int64_t> pulses;  // per node, pulse framework only
  int64_t quiescence_tick = 0;
  int64_t attachment_entries = 0;
  int64_t attachment_bytes = 0;
  bool completed = false;
  std::string error;
  Json app;
  Json effective_config;

  int64_t pulses_max() const {
    int64_t m = 0;
    for (auto p : pulses) m = std::max(m, p);
    return m;
  }

  std::string to_text() const {
    std::ostringstream os;
    os << "completed=" << (completed ? 1 : 0) << '\n';
    if (!error.empty()) os << "error=" << error << '\n';
    os << "sent=" << sent << '\n';
    os << "delivered=" << delivered << '\n';
    os << "postponed_total=" << postponed_total << '\n';
    os << "postponed_max=" << postponed_max << '\n';
    os << "pulses_max=" << pulses_max() << '\n';
    os << "quiescence_tick=" << quiescence_tick << '\n';
    os << "attachment_entries=" << attachment_entries << '\n';
    os << "attachment_bytes=" << attachment_bytes << '\n';
    if (app.is_object())
      for (auto& [k, v] : app.items()) os << "app." << k << "=" << v.dump() << '\n';
    if (!effective_config.is_null()) os << "config=" << effective_config.dump() << '\n';
    return os.str();
  }
};

struct RunResult {
  Trace trace;
  RunReport report;
};

/// Deterministic discrete-event kernel. A run is a pure function of its
/// configuration: latencies and tie-breaks come from one seeded stream in
/// send order, application randomness from per-node streams.
class Simulator {
public:
  explicit Simulator(SimConfig cfg) : cfg_(std::move(cfg)), net_rng_(Rng::stream(cfg_.seed, 0x6e65ULL)) {
    const Topology& topo = cfg_.topo;
    bool pulse = is_pulse_gate(cfg_.ordering.gate);
    if (pulse != is_pulse_app(cfg_.app.kind))
      throw ConfigError("config: application " + std::string(to_string(cfg_.app.kind)) +
                        " is incompatible with gate " + to_string(cfg_.ordering.gate));

    if (!pulse) {
      EventGate::Options opt;
      opt.row_scope =
          cfg_.ordering.gate == GateKind::Fdc || cfg_.ordering.gate == GateKind::Rfdc;
      opt.sparse_attach = cfg_.ordering.sparse_attach;
      if (cfg_.ordering.gate == GateKind::Fdc || cfg_.ordering.gate == GateKind::Cdc)
        opt.tolerance = std::make_shared<ConstantTolerance>(0);
      else if (cfg_.ordering.mu_kz)
        opt.tolerance = std::make_shared<BacktrackTolerance>();
      else
        opt.tolerance = std::make_shared<ConstantTolerance>(cfg_.ordering.mu);
      event_gate_ = std::make_unique<EventGate>(topo, opt);

      if (cfg_.app.kind == AppKind::EventTraffic)
        traffic_ = std::make_unique<EventTrafficApp>(topo, cfg_.seed, cfg_.app.credits);
      else
        backtrack_ = std::make_unique<BacktrackApp>(topo, make_tree(cfg_.app), cfg_.seed,
                                                    cfg_.app.root_holder);
    } else {
      if (cfg_.app.kind == AppKind::Linsolve) {
        Coloring col = cfg_.app.coloring == "jacobi" ? Coloring::uniform(topo.n())
                                                     : greedy_coloring(topo);
        solver_ = std::make_unique<LinsolveApp>(topo, cfg_.app.system, col, cfg_.app.residual);
      } else {
        pulse_traffic_ = std::make_unique<PulseTrafficApp>(topo, cfg_.seed, cfg_.app.max_rank);
      }

      std::shared_ptr<RhoPolicy> rho;
      std::shared_ptr<DeltaPolicy> delta;
      switch (cfg_.ordering.pulse_policy) {
        case OrderingConfig::PulsePolicy::Synchronous:
          rho = synchronous_rho();
          delta = synchronous_delta();
          break;
        case OrderingConfig::PulsePolicy::Constant:
          rho = std::make_shared<ConstantRho>(cfg_.ordering.rho_const);
          delta = std::make_shared<ConstantDelta>(cfg_.ordering.delta_const + 1);
          break;
        case OrderingConfig::PulsePolicy::Linsolve:
          if (!solver_) throw ConfigError("config: linsolve delays need the linsolve app");
          rho = solver_->rho_policy();
          delta = solver_->delta_policy();
          break;
      }
      int64_t horizon = cfg_.ordering.horizon;
      if (horizon <= 0) horizon = default_horizon();
      if (auto bad = validate_compatibility(*rho, *delta, topo, horizon))
        throw ConfigError("config: incompatible delay policies at sender pulse " +
                          std::to_string(bad->send_rank) + " on edge " +
                          std::to_string(bad->from) + "->" + std::to_string(bad->to));
      pulse_gate_ = std::make_unique<PulseGate>(topo, rho, delta);
    }
  }

  static std::shared_ptr<TreeSource> make_tree(const AppConfig& app) {
    if (app.tree == "queens") return std::make_shared<QueensTree>(app.queens);
    return std::make_shared<SyntheticTree>(app.tree_seed, app.max_branching, app.leaves);
  }

  RunResult run() {
    if (event_gate_)
      run_event();
    else
      run_pulse();
    report_.effective_config = cfg_.echo;
    report_.app = app_report();
    return {std::move(trace_), std::move(report_)};
  }

  EventGate* event_gate() { return event_gate_.get(); }
  PulseGate* pulse_gate() { return pulse_gate_.get(); }
  const LinsolveApp* solver() const { return solver_.get(); }
  const BacktrackApp* backtrack() const { return backtrack_.get(); }

private:
  struct QueueEntry {
    int64_t tick;
    uint64_t tiebreak;
    MsgId id;
    bool operator>(const QueueEntry& o) const {
      if (tick != o.tick) return tick > o.tick;
      if (tiebreak != o.tiebreak) return tiebreak > o.tiebreak;
      return id > o.id;
    }
  };

  // ---- shared plumbing ----

  void enqueue(Envelope env) {
    env.send_tick = now_;
    int64_t latency = cfg_.latency.sample(net_rng_);
    env.tiebreak = net_rng_.next();
    env.arrival_tick = now_ + latency;
    report_.attachment_entries += env.att.scalar_count();
    queue_.push({env.arrival_tick, env.tiebreak, env.id});
    in_flight_.emplace(env.id, std::move(env));
  }

  TraceRecord& trace_send(const Envelope& env, bool pulse_framework) {
    TraceRecord r;
    r.kind = RecordKind::Send;
    r.node = env.src;
    r.peer = env.dst;
    r.msg = env.id;
    if (pulse_framework)
      r.rank = env.sender_time;
    else
      r.t = env.sender_time;
    if (env.att.mu >= 0) r.mu = env.att.mu;
    if (env.att.rho >= 0) r.rho = env.att.rho;
    Json attach = env.att.to_json();
    Json tag = env.payload.tag();
    for (auto& [k, v] : tag.items()) attach[k] = v;
    r.attach = std::move(attach);
    return trace_.append(std::move(r));
  }

  void send_event_messages(NodeId from, const std::vector<MsgOut>& outs) {
    auto atts = event_gate_->attach_for_event(from, outs);
    for (size_t m = 0; m < outs.size(); ++m) {
      if (!cfg_.topo.adjacent(from, outs[m].dest))
        throw ConfigError("app: message to non-neighbor " + std::to_string(outs[m].dest));
      Envelope env;
      env.id = next_msg_++;
      env.src = from;
      env.dst = outs[m].dest;
      env.payload = outs[m].payload;
      env.att = std::move(atts[m]);
      env.sender_time = event_time_[from];
      trace_send(env, false);
      ++report_.sent;
      enqueue(std::move(env));
    }
  }

  Json clock_json(NodeId v) const {
    Json arr = Json::array();
    const auto& e = event_gate_->clock_of(v).entries;
    for (size_t h = 1; h < e.size(); ++h) arr.push_back(e[h]);
    return arr;
  }

  // ---- event-driven framework ----

  void run_event() {
    const Topology& topo = cfg_.topo;
    event_time_.assign(topo.n() + 1, 0);
    postponed_.assign(topo.n() + 1, {});

    for (NodeId v = 1; v <= topo.n(); ++v) {
      event_gate_->local_event(v);
      event_time_[v] = 1;
      TraceRecord r;
      r.kind = RecordKind::Local;
      r.node = v;
      r.t = 1;
      Json annot = Json::object();
      std::vector<MsgOut> outs;
      if (traffic_)
        traffic_->init(v, outs, annot);
      else
        backtrack_->init(v, outs, annot);
      annot["E"] = clock_json(v);
      r.attach = std::move(annot);
      trace_.append(std::move(r));
      ++events_;
      send_event_messages(v, outs);
      check_halt();
    }

    while (!queue_.empty()) {
      if (events_ > cfg_.max_events) {
        fail_max_events();
        return;
      }
      Envelope env = pop_next();
      now_ = env.arrival_tick;
      GateDecision d = event_gate_->on_arrival(env.dst, env);
      if (d == GateDecision::Postpone && !maybe_inject(env.dst)) {
        record_postpone(env);
        postponed_[env.dst].push_back(std::move(env));
        continue;
      }
      if (d == GateDecision::Postpone) {  // injected illegal early delivery
        event_gate_->on_arrival(env.dst, env, /*force=*/true);
        deliver_event(env, false, true);
      } else {
        deliver_event(env, false, false);
      }
      release_loop_event(env.dst);
    }
    finish();
  }

  void deliver_event(const Envelope& env, bool released, bool forced) {
    NodeId i = env.dst;
    if (released) {
      TraceRecord rel;
      rel.kind = RecordKind::Release;
      rel.node = i;
      rel.peer = env.src;
      rel.msg = env.id;
      trace_.append(std::move(rel));
    }
    event_time_[i] += 1;
    ++events_;
    ++report_.delivered;
    TraceRecord r;
    r.kind = RecordKind::Deliver;
    r.node = i;
    r.peer = env.src;
    r.msg = env.id;
    r.t = event_time_[i];
    if (env.att.mu >= 0) r.mu = env.att.mu;
    Json annot = env.payload.tag();
    if (forced) annot["forced"] = 1;
    std::vector<MsgOut> outs;
    if (!halted_) {
      if (traffic_)
        traffic_->on_message(i, env, outs, annot);
      else
        backtrack_->on_message(i, env, outs, annot);
    }
    annot["E"] = clock_json(i);
    r.attach = std::move(annot);
    trace_.append(std::move(r));
    send_event_messages(i, outs);
    check_halt();
  }

  void release_loop_event(NodeId i) {
    bool progressed = true;
    while (progressed) {
      progressed = false;
      auto& buf = postponed_[i];
      for (size_t k = 0; k < buf.size(); ++k) {
        if (event_gate_->on_arrival(i, buf[k]) == GateDecision::Accept) {
          Envelope env = std::move(buf[k]);
          buf.erase(buf.begin() + static_cast<long>(k));
          deliver_event(env, true, false);
          progressed = true;
          break;
        }
      }
    }
  }

  void check_halt() {
    if (backtrack_ && !halted_ && backtrack_->halted()) halted_ = true;
  }

  // ---- pulse-driven framework ----

  void run_pulse() {
    const Topology& topo = cfg_.topo;
    postponed_.assign(topo.n() + 1, {});
    pulse_count_.assign(topo.n() + 1, 0);

    for (NodeId v = 1; v <= topo.n(); ++v) pulse_progress(v);

    while (!queue_.empty()) {
      if (events_ > cfg_.max_events) {
        fail_max_events();
        return;
      }
      Envelope env = pop_next();
      now_ = env.arrival_tick;
      NodeId i = env.dst;
      if (env.att.control) {
        pulse_gate_->on_control(i, env.src, env.att.send_rank, env.att.control_count);
        record_deliver_pulse(env, false);
      } else {
        GateDecision d = pulse_gate_->on_arrival(i, env);
        if (d == GateDecision::Postpone && !maybe_inject(i)) {
          record_postpone(env);
          postponed_[i].push_back(std::move(env));
          pulse_progress(i);
          continue;
        }
        bool forced = d == GateDecision::Postpone;
        if (forced) pulse_gate_->on_arrival(i, env, /*force=*/true);
        record_deliver_pulse(env, forced);
        if (solver_)
          solver_->on_message(i, env);
        else
          pulse_traffic_->on_message(i, env);
      }
      pulse_progress(i);
    }
    finish();
  }

  void record_deliver_pulse(const Envelope& env, bool forced) {
    ++events_;
    ++report_.delivered;
    TraceRecord r;
    r.kind = RecordKind::Deliver;
    r.node = env.dst;
    r.peer = env.src;
    r.msg = env.id;
    r.rank = pulse_gate_->clock(env.dst) + 1;  // the pulse this delivery feeds
    Json annot = env.payload.tag();
    if (env.att.control) {
      annot["ctl"] = 1;
      annot["cnt"] = env.att.control_count;
    }
    if (forced) annot["forced"] = 1;
    r.attach = std::move(annot);
    trace_.append(std::move(r));
  }

  bool app_passive(NodeId v) const {
    return solver_ ? solver_->passive(v) : pulse_traffic_->passive(v);
  }

  void pulse_progress(NodeId v) {
    bool progressed = true;
    while (progressed) {
      progressed = false;
      if (!app_passive(v) && pulse_gate_->has_advanced(v)) {
        fire_pulse(v);
        progressed = true;
        // a new pulse may release postponed messages, which may enable
        // further advancement
        release_loop_pulse(v);
      }
    }
  }

  void fire_pulse(NodeId v) {
    int64_t rank = pulse_gate_->get_current(v);
    pulse_count_[v] = rank;
    ++events_;
    TraceRecord r;
    r.kind = RecordKind::Pulse;
    r.node = v;
    r.rank = rank;
    Json annot = Json::object();
    std::vector<MsgOut> outs;
    if (solver_)
      solver_->on_pulse(v, rank, outs, annot);
    else
      pulse_traffic_->on_pulse(v, rank, outs, annot);
    r.attach = std::move(annot);
    trace_.append(std::move(r));

    // control messages first, one per neighbor, announcing this pulse's
    // message count toward that neighbor
    for (NodeId w : cfg_.topo.neighbors(v)) {
      int64_t cnt = 0;
      for (const auto& m : outs)
        if (m.dest == w) ++cnt;
      Envelope env;
      env.id = next_msg_++;
      env.src = v;
      env.dst = w;
      env.payload.kind = PayloadKind::Control;
      env.payload.count = cnt;
      env.att = pulse_gate_->attach_control(rank, cnt);
      env.sender_time = rank;
      trace_send(env, true);
      ++report_.sent;
      enqueue(std::move(env));
    }
    for (const auto& m : outs) {
      if (!cfg_.topo.adjacent(v, m.dest))
        throw ConfigError("app: message to non-neighbor " + std::to_string(m.dest));
      Envelope env;
      env.id = next_msg_++;
      env.src = v;
      env.dst = m.dest;
      env.payload = m.payload;
      env.att = pulse_gate_->attach_on_send(v, m.dest, env.payload, rank);
      env.sender_time = rank;
      trace_send(env, true);
      ++report_.sent;
      enqueue(std::move(env));
    }
  }

  void release_loop_pulse(NodeId i) {
    bool progressed = true;
    while (progressed) {
      progressed = false;
      auto& buf = postponed_[i];
      for (size_t k = 0; k < buf.size(); ++k) {
        if (pulse_gate_->on_arrival(i, buf[k]) == GateDecision::Accept) {
          Envelope env = std::move(buf[k]);
          buf.erase(buf.begin() + static_cast<long>(k));
          TraceRecord rel;
          rel.kind = RecordKind::Release;
          rel.node = i;
          rel.peer = env.src;
          rel.msg = env.id;
          trace_.append(std::move(rel));
          record_deliver_pulse(env, false);
          if (solver_)
            solver_->on_message(i, env);
          else
            pulse_traffic_->on_message(i, env);
          progressed = true;
          break;
        }
      }
    }
  }

  // ---- common endgame ----

  Envelope pop_next() {
    QueueEntry top = queue_.top();
    queue_.pop();
    auto it = in_flight_.find(top.id);
    Envelope env = std::move(it->second);
    in_flight_.erase(it);
    update_postponed_max();
    return env;
  }

  void record_postpone(const Envelope& env) {
    TraceRecord r;
    r.kind = RecordKind::Postpone;
    r.node = env.dst;
    r.peer = env.src;
    r.msg = env.id;
    trace_.append(std::move(r));
    ++report_.postponed_total;
  }

  bool maybe_inject(NodeId) {
    ++postpone_decisions_;
    return cfg_.inject_force_accept > 0 && postpone_decisions_ == cfg_.inject_force_accept;
  }

  void update_postponed_max() {
    for (auto& buf : postponed_)
      report_.postponed_max =
          std::max(report_.postponed_max, static_cast<int64_t>(buf.size()));
  }

  void fail_max_events() {
    report_.completed = false;
    std::ostringstream os;
    os << "max events exceeded (" << cfg_.max_events << ")";
    append_starvation(os);
    report_.error = os.str();
    finish_counters();
  }

  void finish() {
    update_postponed_max();
    bool stuck = false;
    std::ostringstream os;
    for (auto& buf : postponed_)
      if (!buf.empty()) stuck = true;
    if (!event_gate_) {
      for (NodeId v = 1; v <= cfg_.topo.n(); ++v)
        if (!app_passive(v)) {
          stuck = true;
          break;
        }
    }
    if (backtrack_ && !halted_) {
      stuck = true;
      os << "search incomplete (" << backtrack_->solved() << " leaves solved);";
    }
    if (stuck) {
      os << "no quiescence: ";
      append_starvation(os);
      report_.error = os.str();
      report_.completed = false;
    } else {
      report_.completed = true;
    }
    finish_counters();
  }

  void append_starvation(std::ostringstream& os) {
    for (NodeId v = 1; v < static_cast<NodeId>(postponed_.size()); ++v)
      if (!postponed_[v].empty()) {
        const Envelope& e = postponed_[v].front();
        os << " first permanently postponed: msg " << e.id << " from " << e.src << " to "
           << e.dst;
        return;
      }
    if (!event_gate_) {
      for (NodeId v = 1; v <= cfg_.topo.n(); ++v)
        if (!app_passive(v)) {
          os << " node " << v << " still active at pulse " << pulse_gate_->clock(v);
          return;
        }
    }
  }

  void finish_counters() {
    report_.quiescence_tick = now_;
    report_.attachment_bytes = report_.attachment_entries * 8;
    if (!pulse_count_.empty())
      report_.pulses.assign(pulse_count_.begin() + 1, pulse_count_.end());
  }

  Json app_report() const {
    if (traffic_) return traffic_->report();
    if (backtrack_) return backtrack_->report();
    if (solver_) return solver_->report();
    if (pulse_traffic_) return pulse_traffic_->report();
    return Json::object();
  }

  SimConfig cfg_;
  Rng net_rng_;
  Trace trace_;
  RunReport report_;

  std::unique_ptr<EventGate> event_gate_;
  std::unique_ptr<PulseGate> pulse_gate_;
  std::unique_ptr<EventTrafficApp> traffic_;
  std::unique_ptr<BacktrackApp> backtrack_;
  std::unique_ptr<PulseTrafficApp> pulse_traffic_;
  std::unique_ptr<LinsolveApp> solver_;

  std::priority_queue<QueueEntry, std::vector<QueueEntry>, std::greater<QueueEntry>> queue_;
  std::map<MsgId, Envelope> in_flight_;
  std::vector<std::vector<Envelope>> postponed_;
  std::vector<int64_t> event_time_;
  std::vector<int64_t> pulse_count_;
  MsgId next_msg_ = 0;
  int64_t now_ = 0;
  int64_t events_ = 0;
  int64_t postpone_decisions_ = 0;
  bool halted_ = false;

  int64_t default_horizon() const {
    // ten times the expected pulse count; the schedules are periodic, so a
    // few periods already cover every distinct case
    if (solver_) return 10 * solver_->schedule().period_len();
    return 10 * std::max<int64_t>(cfg_.app.max_rank, 20);
  }
};

inline RunResult run(SimConfig cfg) { return Simulator(std::move(cfg)).run(); }

}  // namespace ordsim
