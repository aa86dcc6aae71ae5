#pragma once

#include <algorithm>
#include <cassert>
#include <functional>
#include <map>
#include <memory>
#include <vector>

#include "ordsim/causality.hpp"
#include "ordsim/graph.hpp"
#include "ordsim/message.hpp"

namespace ordsim {

/// setTolerance/getTolerance hook: picks the tolerance attached to each
/// outgoing message. Stateful policies (like the backtrack one) mutate
/// per-destination counters inside tolerance().
class TolerancePolicy {
public:
  virtual ~TolerancePolicy() = default;
  virtual int64_t tolerance(NodeId from, NodeId to, const Payload& p) = 0;
};

class ConstantTolerance : public TolerancePolicy {
public:
  explicit ConstantTolerance(int64_t mu) : mu_(mu) {}
  int64_t tolerance(NodeId, NodeId, const Payload&) override { return mu_; }

private:
  int64_t mu_;
};

/// Per-node counter state for the counting delivery conditions: the view of
/// who-sent-how-much-to-whom (s), exact receive counts (r), and the
/// attachment-staleness counters (U) driving sparse piggybacking.
struct CounterState {
  NodeId owner = 0;
  std::map<std::pair<NodeId, NodeId>, int64_t> s;  // s_i^{k->l}
  std::map<NodeId, int64_t> r;                     // r_i^j
  // U[dest][(k,l)]: sends to dest that carried the current value of s^{k->l}
  std::map<NodeId, std::map<std::pair<NodeId, NodeId>, int64_t>> u;
  // Clock piggybacking state (Singhal-Kshemkalyani over clock entries).
  EventVectorClock clock;
  std::map<NodeId, std::map<NodeId, int64_t>> u_clock;  // [dest][h]

  int64_t s_at(NodeId k, NodeId l) const {
    auto it = s.find({k, l});
    return it == s.end() ? 0 : it->second;
  }
  int64_t r_from(NodeId j) const {
    auto it = r.find(j);
    return it == r.end() ? 0 : it->second;
  }

  /// Raise s^{k->l} to v; on a strict increase the U row for that entry is
  /// forgotten so the new value flows to every destination again.
  void raise_s(NodeId k, NodeId l, int64_t v) {
    auto& cur = s[{k, l}];
    if (v > cur) {
      cur = v;
      for (auto& [dest, row] : u) row.erase({k, l});
    }
  }

  void raise_clock_entry(NodeId h, int64_t v) {
    if (v > clock.entries[h]) {
      clock.entries[h] = v;
      for (auto& [dest, row] : u_clock) row.erase(h);
    }
  }
};

/// Delivery gates for the event-driven framework. One implementation covers
/// the whole FDC/RFDC/CDC/RCDC family: FDC is the zero-tolerance row gate,
/// RFDC the row gate with a tolerance policy, CDC/RCDC the matrix gate.
/// `row_scope` restricts both attachments and the delivery condition to the
/// sender's own row (the per-channel conditions).
class EventGate {
public:
  struct Options {
    bool row_scope = false;       // FDC/RFDC: origin row only
    bool sparse_attach = true;    // Singhal-Kshemkalyani filtering on
    std::shared_ptr<TolerancePolicy> tolerance;
  };

  EventGate(const Topology& topo, Options opt) : topo_(&topo), opt_(std::move(opt)) {
    states_.resize(topo.n() + 1);
    for (NodeId v = 1; v <= topo.n(); ++v) {
      states_[v].owner = v;
      states_[v].clock = EventVectorClock::initial(v, topo.n());
    }
  }

  /// Clock tick for an event with no incoming message (the initial event).
  void local_event(NodeId i) {
    auto& st = states_[i];
    st.clock = merge_clock(st.clock, {});
    for (auto& [dest, row] : st.u_clock) row.erase(i);
  }

  /// Build the attachments for all of one event's outgoing messages: the
  /// tolerance per message, then every send counted, then per-destination
  /// piggybacking over the full post-send view. Entries on rows addressed to
  /// the destination always ride along (they are what the receiving gate
  /// evaluates); everything else is filtered by its staleness counter when
  /// sparse piggybacking is on. One message per destination per event.
  std::vector<Attachments> attach_for_event(NodeId j, const std::vector<MsgOut>& outs) {
    auto& st = states_[j];
    std::vector<Attachments> atts(outs.size());
    std::set<NodeId> dests;
    for (size_t m = 0; m < outs.size(); ++m) {
      if (!dests.insert(outs[m].dest).second)
        throw ConfigError("gate: two messages to one destination in a single event");
      atts[m].mu =
          opt_.tolerance ? opt_.tolerance->tolerance(j, outs[m].dest, outs[m].payload) : 0;
    }
    for (const auto& o : outs) st.raise_s(j, o.dest, st.s_at(j, o.dest) + 1);

    for (size_t m = 0; m < outs.size(); ++m) {
      NodeId i = outs[m].dest;
      Attachments& att = atts[m];
      att.s_own = st.s_at(j, i);

      if (!opt_.row_scope) {
        auto& u_row = st.u[i];
        for (auto& [kl, cnt] : st.s) {
          auto [k, l] = kl;
          if (k == j && l == i) continue;  // rides as the per-message entry
          bool gate_relevant = (l == i);
          int64_t& uc = u_row[kl];
          if (gate_relevant || !opt_.sparse_attach || uc <= att.mu) {
            att.s_entries.emplace_back(k, l, cnt);
            ++uc;
          }
        }
      }

      auto& uc_row = st.u_clock[i];
      for (NodeId h = 1; h <= topo_->n(); ++h) {
        int64_t v = st.clock.entries[h];
        if (v == 0) continue;
        int64_t& uc = uc_row[h];
        if (!opt_.sparse_attach || uc <= att.mu) {
          att.clock_entries.emplace_back(h, v);
          ++uc;
        }
      }
    }
    return atts;
  }

  /// Arrival handling per the receiving half: increment r, evaluate the
  /// delivery condition, and either merge-and-accept or roll back r and
  /// postpone. When `force` is set the condition is skipped (fault injection).
  GateDecision on_arrival(NodeId i, const Envelope& env, bool force = false) {
    auto& st = states_[i];
    NodeId j = env.src;
    st.r[j] += 1;

    bool ok = force || condition_holds(st, i, env);
    if (!ok) {
      st.r[j] -= 1;
      return GateDecision::Postpone;
    }

    // Merge attached counter knowledge, then advance the clock through the
    // delivery event.
    if (env.att.s_own >= 0) st.raise_s(j, i, env.att.s_own);
    for (auto& [k, l, cnt] : env.att.s_entries) st.raise_s(k, l, cnt);
    for (auto& [h, v] : env.att.clock_entries) st.raise_clock_entry(h, v);
    std::vector<int64_t> incoming(topo_->n() + 1, 0);
    for (auto& [h, v] : env.att.clock_entries) incoming[h] = v;
    st.clock = merge_clock(st.clock, incoming);
    for (auto& [dest, row] : st.u_clock) row.erase(i);
    if (deliver_hook) deliver_hook(i, st);
    return GateDecision::Accept;
  }

  const CounterState& state(NodeId i) const { return states_[i]; }
  const EventVectorClock& clock_of(NodeId i) const { return states_[i].clock; }

  /// Test instrumentation: observe the merged per-node state at each accept.
  std::function<void(NodeId, const CounterState&)> deliver_hook;

private:
  // The delivery condition consults the message's own attachments: the
  // sender's view of each channel into i at send time. The receiver's own
  // (possibly fresher) knowledge stays out of the predicate: messages the
  // trigger's causal past does not know of are concurrent with it, not
  // overtaken by it, and folding them in can wedge two zero-tolerance
  // messages against each other forever.
  bool condition_holds(const CounterState& st, NodeId i, const Envelope& env) const {
    NodeId j = env.src;
    int64_t mu = env.att.mu < 0 ? 0 : env.att.mu;
    if (env.att.s_own < 0) throw ConfigError("gate: arrival without counter attachment");

    // Trigger channel: messages the sender had already sent to i, minus
    // receipts; the message itself is counted on both sides.
    if (env.att.s_own - st.r_from(j) > mu) return false;
    if (opt_.row_scope) return true;

    for (auto& [k, l, cnt] : env.att.s_entries)
      if (l == i && k != j && cnt - st.r_from(k) > mu) return false;
    return true;
  }

  const Topology* topo_;
  Options opt_;
  std::vector<CounterState> states_;
};

}  // namespace ordsim
