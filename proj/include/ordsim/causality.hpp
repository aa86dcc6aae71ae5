#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ordsim/graph.hpp"
#include "ordsim/trace.hpp"

namespace ordsim {

struct EventId {
  NodeId node = 0;
  int64_t time = 0;  // 1-based ordinal at the node

  bool operator==(const EventId& o) const { return node == o.node && time == o.time; }
  bool operator<(const EventId& o) const {
    return node != o.node ? node < o.node : time < o.time;
  }
};

/// Online event-framework vector clock (Eq.-style maintenance: componentwise
/// max with the sender's clock, then the owner entry becomes the event time).
struct EventVectorClock {
  NodeId owner = 0;
  int64_t at = 0;
  std::vector<int64_t> entries;  // index 1..n; entries[owner] == at

  static EventVectorClock initial(NodeId owner, int n) {
    EventVectorClock c;
    c.owner = owner;
    c.at = 0;
    c.entries.assign(n + 1, 0);
    return c;
  }
};

/// Advance `local` to its next event time, folding in the sender's entries
/// when the event is a message delivery (incoming may be empty for a local
/// event). Throws on length mismatch.
inline EventVectorClock merge_clock(const EventVectorClock& local,
                                    const std::vector<int64_t>& incoming) {
  EventVectorClock out = local;
  if (!incoming.empty()) {
    if (incoming.size() != local.entries.size())
      throw ConfigError("merge_clock: clock length mismatch");
    for (size_t h = 1; h < out.entries.size(); ++h)
      out.entries[h] = std::max(out.entries[h], incoming[h]);
  }
  out.at = local.at + 1;
  out.entries[out.owner] = out.at;
  return out;
}

/// Per-neighbor in-transit counts M_i(t_i), reconstructed offline.
struct TransitCount {
  NodeId receiver = 0;
  int64_t at = 0;
  std::map<NodeId, int64_t> counts;  // channel peer -> in-transit count
};

namespace detail {
constexpr int64_t kNever = std::numeric_limits<int64_t>::max();
}

/// Offline causality engine for event-framework traces. Everything here is
/// recomputed from the record sequence alone; online gate state is never
/// consulted, which keeps this usable as an independent oracle.
class EventCausality {
public:
  struct Event {
    NodeId node = 0;
    int64_t time = 0;
    Seq seq = 0;            // trace seq of the local/deliver record
    NodeId from = 0;        // origin for deliveries, 0 for local events
    MsgId msg = -1;
    int64_t sender_time = 0;  // event time of the matching send
  };

  struct ChannelMsg {
    MsgId msg = -1;
    int64_t send_time = 0;     // sender event time
    int64_t deliver_time = detail::kNever;  // receiver event time, kNever if undelivered
    Seq send_seq = 0;
  };

  explicit EventCausality(const Trace& trace) {
    int maxnode = 0;
    for (const auto& r : trace.records()) maxnode = std::max(maxnode, std::max(r.node, r.peer));
    n_ = maxnode;
    per_node_.assign(n_ + 1, {});

    std::map<MsgId, std::pair<NodeId, int64_t>> send_of;  // msg -> (sender, sender time)
    std::map<MsgId, Seq> send_seq_of;
    for (const auto& r : trace.records()) {
      switch (r.kind) {
        case RecordKind::Local: {
          add_event({r.node, r.t, r.seq, 0, -1, 0});
          break;
        }
        case RecordKind::Send: {
          if (r.msg < 0 || r.t < 0)
            throw ConfigError("trace: send record missing msg/t at seq " + std::to_string(r.seq));
          send_of[r.msg] = {r.node, r.t};
          send_seq_of[r.msg] = r.seq;
          channels_[{r.node, r.peer}].push_back({r.msg, r.t, detail::kNever, r.seq});
          break;
        }
        case RecordKind::Deliver: {
          auto it = send_of.find(r.msg);
          if (it == send_of.end())
            throw ConfigError("trace: deliver without prior send, msg " + std::to_string(r.msg));
          if (it->second.first != r.peer)
            throw ConfigError("trace: deliver origin mismatch, msg " + std::to_string(r.msg));
          add_event({r.node, r.t, r.seq, r.peer, r.msg, it->second.second});
          auto& ch = channels_[{r.peer, r.node}];
          for (auto& cm : ch)
            if (cm.msg == r.msg) cm.deliver_time = r.t;
          msg_edge_list_.push_back({{r.peer, it->second.second}, {r.node, r.t}});
          break;
        }
        case RecordKind::Postpone:
        case RecordKind::Release:
        case RecordKind::Pulse:
          break;
      }
    }
    for (NodeId v = 1; v <= n_; ++v) {
      auto& evs = per_node_[v];
      std::sort(evs.begin(), evs.end(),
                [](const Event& a, const Event& b) { return a.time < b.time; });
      for (size_t i = 0; i < evs.size(); ++i)
        if (evs[i].time != static_cast<int64_t>(i + 1))
          throw ConfigError("trace: event times at node " + std::to_string(v) +
                            " are not consecutive from 1");
    }
    msg_edges_.assign(n_ + 1, {});
    for (NodeId v = 1; v <= n_; ++v) msg_edges_[v].assign(per_node_[v].size(), {});
    for (const auto& [from, to] : msg_edge_list_)
      msg_edges_[from.node][static_cast<size_t>(from.time - 1)].push_back(to);
    compute_clocks();
  }

  int n() const { return n_; }
  int64_t events_at(NodeId v) const { return static_cast<int64_t>(per_node_[v].size()); }
  const Event& event(EventId e) const {
    check(e);
    return per_node_[e.node][static_cast<size_t>(e.time - 1)];
  }

  /// Definitional vector clock of an event (recomputed over the trace DAG).
  const std::vector<int64_t>& clock(EventId e) const {
    check(e);
    return clocks_[e.node][static_cast<size_t>(e.time - 1)];
  }

  /// a leads-to b through a nonempty chain of local-succession/message edges.
  /// Computed by explicit reachability over the event DAG, independently of
  /// any vector clock, so it can serve as the oracle for clock soundness.
  bool happened_before(EventId a, EventId b) const {
    check(a);
    check(b);
    if (a == b) return false;
    std::vector<std::vector<char>> seen(n_ + 1);
    for (NodeId v = 1; v <= n_; ++v) seen[v].assign(per_node_[v].size(), 0);
    std::vector<EventId> stack{a};
    seen[a.node][static_cast<size_t>(a.time - 1)] = 1;
    while (!stack.empty()) {
      EventId cur = stack.back();
      stack.pop_back();
      auto push = [&](EventId nx) {
        if (nx == b) return true;
        auto& s = seen[nx.node][static_cast<size_t>(nx.time - 1)];
        if (!s) {
          s = 1;
          stack.push_back(nx);
        }
        return false;
      };
      if (cur.time < events_at(cur.node) && push({cur.node, cur.time + 1})) return true;
      for (const auto& out : msg_edges_[cur.node][static_cast<size_t>(cur.time - 1)])
        if (push(out)) return true;
    }
    return false;
  }

  /// Componentwise clock order: a's clock <= b's clock and the two differ.
  bool clock_less(EventId a, EventId b) const {
    const auto& ca = clock(a);
    const auto& cb = clock(b);
    return clock_dominated(ca, cb) && ca != cb;
  }

  /// Latest event at j that happens-before e; nullopt when none exists.
  std::optional<EventId> pred(NodeId j, EventId e) const {
    check(e);
    if (j < 1 || j > n_) throw ConfigError("pred: unknown node");
    int64_t t = clock(e)[j];
    if (j == e.node) t = e.time - 1;
    if (t <= 0) return std::nullopt;
    return EventId{j, t};
  }

  /// Earliest event at i that the event e happens-before; nullopt when none.
  std::optional<EventId> succ(NodeId i, EventId e) const {
    check(e);
    if (i < 1 || i > n_) throw ConfigError("succ: unknown node");
    int64_t t = succ_time_[e.node][static_cast<size_t>(e.time - 1)][i];
    if (i == e.node) t = e.time + 1 <= events_at(i) ? e.time + 1 : detail::kNever;
    if (t == detail::kNever) return std::nullopt;
    return EventId{i, t};
  }

  /// In-transit counts per channel peer at (i, t_i): messages sent by j no
  /// later than time_j(pred_j) and not received by i at event time <= t_i.
  TransitCount transit_count(NodeId i, int64_t t_i) const {
    if (i < 1 || i > n_ || t_i < 1 || t_i > events_at(i))
      throw ConfigError("transit_count: event time out of range");
    TransitCount tc;
    tc.receiver = i;
    tc.at = t_i;
    const auto& ck = clock({i, t_i});
    for (const auto& [key, ch] : channels_) {
      if (key.second != i) continue;
      NodeId j = key.first;
      int64_t pred_time = ck[j];
      int64_t cnt = 0;
      for (const auto& cm : ch)
        if (cm.send_time <= pred_time && cm.deliver_time > t_i) ++cnt;
      tc.counts[j] = cnt;
    }
    return tc;
  }

  int64_t transit_count_on(NodeId i, int64_t t_i, NodeId j) const {
    auto tc = transit_count(i, t_i);
    auto it = tc.counts.find(j);
    return it == tc.counts.end() ? 0 : it->second;
  }

  /// Messages k->i sent at k-events up to `horizon` and not received by i at
  /// event time <= t_i.
  int64_t undelivered_on(NodeId i, int64_t t_i, NodeId k, int64_t horizon) const {
    auto it = channels_.find({k, i});
    if (it == channels_.end()) return 0;
    int64_t cnt = 0;
    for (const auto& cm : it->second)
      if (cm.send_time <= horizon && cm.deliver_time > t_i) ++cnt;
    return cnt;
  }

  /// Number of k->i messages sent at k-events up to `horizon`.
  int64_t sent_upto(NodeId k, NodeId i, int64_t horizon) const {
    auto it = channels_.find({k, i});
    if (it == channels_.end()) return 0;
    int64_t cnt = 0;
    for (const auto& cm : it->second)
      if (cm.send_time <= horizon) ++cnt;
    return cnt;
  }

  /// Number of k->i messages received by i at event times <= t_i, regardless
  /// of when they were sent (the receiver's receipt counter r_i^k).
  int64_t received_upto(NodeId k, NodeId i, int64_t t_i) const {
    auto it = channels_.find({k, i});
    if (it == channels_.end()) return 0;
    int64_t cnt = 0;
    for (const auto& cm : it->second)
      if (cm.deliver_time <= t_i) ++cnt;
    return cnt;
  }

  /// All channel peers that ever sent to i.
  std::vector<NodeId> senders_to(NodeId i) const {
    std::vector<NodeId> out;
    for (const auto& [key, ch] : channels_)
      if (key.second == i && !ch.empty()) out.push_back(key.first);
    return out;
  }

  const std::vector<Event>& events_of(NodeId v) const { return per_node_[v]; }

private:
  void add_event(Event e) {
    if (e.node < 1) throw ConfigError("trace: bad node id");
    per_node_[e.node].push_back(e);
  }

  void check(EventId e) const {
    if (e.node < 1 || e.node > n_ || e.time < 1 || e.time > events_at(e.node))
      throw ConfigError("causality: unknown event (" + std::to_string(e.node) + "," +
                        std::to_string(e.time) + ")");
  }

  static bool clock_dominated(const std::vector<int64_t>& a, const std::vector<int64_t>& b) {
    for (size_t h = 1; h < a.size(); ++h)
      if (a[h] > b[h]) return false;
    return true;
  }

  void compute_clocks() {
    clocks_.assign(n_ + 1, {});
    succ_time_.assign(n_ + 1, {});
    for (NodeId v = 1; v <= n_; ++v) {
      clocks_[v].assign(per_node_[v].size(), {});
      succ_time_[v].assign(per_node_[v].size(),
                           std::vector<int64_t>(n_ + 1, detail::kNever));
    }
    // Forward pass in (node-local time, message) order: a send's event always
    // precedes its delivery, so processing nodes' events by ascending time with
    // message edges resolved on demand needs a global order. Trace seq gives one.
    std::vector<const Event*> order;
    for (NodeId v = 1; v <= n_; ++v)
      for (const auto& e : per_node_[v]) order.push_back(&e);
    std::sort(order.begin(), order.end(),
              [](const Event* a, const Event* b) { return a->seq < b->seq; });
    for (const Event* e : order) {
      std::vector<int64_t> ck(n_ + 1, 0);
      if (e->time > 1) ck = clocks_[e->node][static_cast<size_t>(e->time - 2)];
      if (e->from != 0) {
        const auto& sk = clocks_[e->from][static_cast<size_t>(e->sender_time - 1)];
        if (sk.empty())
          throw ConfigError("trace: delivery observed before its send event, msg " +
                            std::to_string(e->msg));
        for (int h = 1; h <= n_; ++h) ck[h] = std::max(ck[h], sk[h]);
      }
      ck[e->node] = e->time;
      clocks_[e->node][static_cast<size_t>(e->time - 1)] = std::move(ck);
    }
    // Backward pass for earliest successors.
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
      const Event* e = *it;
      auto& st = succ_time_[e->node][static_cast<size_t>(e->time - 1)];
      if (e->time < events_at(e->node)) {
        const auto& nx = succ_time_[e->node][static_cast<size_t>(e->time)];
        for (int h = 1; h <= n_; ++h) st[h] = std::min(st[h], nx[h]);
        st[e->node] = std::min(st[e->node], e->time + 1);
      }
      if (e->from != 0) {
        auto& sst = succ_time_[e->from][static_cast<size_t>(e->sender_time - 1)];
        for (int h = 1; h <= n_; ++h) sst[h] = std::min(sst[h], st[h]);
        sst[e->node] = std::min(sst[e->node], e->time);
      }
    }
  }

  int n_ = 0;
  std::vector<std::vector<Event>> per_node_;
  std::map<std::pair<NodeId, NodeId>, std::vector<ChannelMsg>> channels_;
  std::vector<std::vector<std::vector<int64_t>>> clocks_;
  std::vector<std::vector<std::vector<int64_t>>> succ_time_;
  std::vector<std::pair<EventId, EventId>> msg_edge_list_;
  std::vector<std::vector<std::vector<EventId>>> msg_edges_;
};

/// Offline model of a pulse-framework trace. Delivery events carry the rank of
/// the pulse they feed (the pulse following the arrival); sends carry the rank
/// of the generating pulse.
class PulseCausality {
public:
  struct Delivery {
    Seq seq = 0;
    NodeId node = 0;
    NodeId from = 0;
    MsgId msg = -1;
    int64_t recv_rank = 0;   // rank of the pulse the delivery feeds
    int64_t send_rank = 0;
    int64_t rho = -1;
    bool control = false;
  };

  explicit PulseCausality(const Trace& trace) {
    int maxnode = 0;
    for (const auto& r : trace.records()) maxnode = std::max(maxnode, std::max(r.node, r.peer));
    n_ = maxnode;
    pulses_.assign(n_ + 1, 0);

    std::map<MsgId, const TraceRecord*> send_of;
    for (const auto& r : trace.records()) {
      switch (r.kind) {
        case RecordKind::Pulse: {
          if (r.rank != pulses_[r.node] + 1)
            throw ConfigError("trace: pulse ranks at node " + std::to_string(r.node) +
                              " are not consecutive");
          pulses_[r.node] = r.rank;
          pulse_seq_[{r.node, r.rank}] = r.seq;
          break;
        }
        case RecordKind::Send: {
          if (r.rank < 0)
            throw ConfigError("trace: pulse-framework send without rank, msg " +
                              std::to_string(r.msg));
          send_of[r.msg] = &r;
          break;
        }
        case RecordKind::Deliver: {
          auto it = send_of.find(r.msg);
          if (it == send_of.end())
            throw ConfigError("trace: deliver without prior send, msg " + std::to_string(r.msg));
          Delivery d;
          d.seq = r.seq;
          d.node = r.node;
          d.from = r.peer;
          d.msg = r.msg;
          d.recv_rank = r.rank;
          d.send_rank = it->second->rank;
          d.rho = it->second->rho;
          d.control = it->second->attach.is_object() && it->second->attach.contains("ctl");
          deliveries_.push_back(d);
          delivered_.insert(r.msg);
          break;
        }
        default:
          break;
      }
    }
    for (const auto& [msg, r] : send_of) {
      if (delivered_.count(msg)) continue;
      Delivery d;  // undelivered; kept for in-transit accounting
      d.seq = -1;
      d.node = r->peer;
      d.from = r->node;
      d.msg = msg;
      d.recv_rank = std::numeric_limits<int64_t>::max();
      d.send_rank = r->rank;
      d.rho = r->rho;
      d.control = r->attach.is_object() && r->attach.contains("ctl");
      undelivered_.push_back(d);
    }
    build_index();
  }

  int n() const { return n_; }
  int64_t pulses_at(NodeId v) const { return pulses_[v]; }
  const std::vector<Delivery>& deliveries() const { return deliveries_; }
  const std::vector<Delivery>& undelivered() const { return undelivered_; }

  /// Deterministic pulse vector clock entry: rank of pred_j of pulse (i, l).
  static int64_t pred_rank(int64_t rank, int dist) {
    return std::max<int64_t>(0, rank - dist);
  }

  /// Application messages on channel j->i, ordered by send rank, with a
  /// running maximum of receive ranks for window queries.
  struct ChannelIndex {
    std::vector<int64_t> send_ranks;
    std::vector<int64_t> recv_ranks;
    std::vector<int64_t> recv_prefix_max;
  };

  const ChannelIndex& channel(NodeId from, NodeId to) const {
    static const ChannelIndex empty;
    auto it = index_.find({from, to});
    return it == index_.end() ? empty : it->second;
  }

  const std::map<std::pair<NodeId, NodeId>, ChannelIndex>& channels() const { return index_; }

  /// Messages j->i in transit in the state induced by pulse (i, rank):
  /// sent at a pulse ranking <= rank-1 and received feeding a pulse > rank.
  /// Channel peers are neighbors, so the clock entry for j is rank-1.
  int64_t transit_on(NodeId i, NodeId j, int64_t rank) const {
    const auto& ch = channel(j, i);
    auto hi = std::upper_bound(ch.send_ranks.begin(), ch.send_ranks.end(), rank - 1) -
              ch.send_ranks.begin();
    int64_t cnt = 0;
    for (long k = 0; k < hi; ++k)
      if (ch.recv_ranks[static_cast<size_t>(k)] > rank) ++cnt;
    return cnt;
  }

  /// True iff some j->i message sent at a pulse <= sent_bound is received
  /// into a pulse > rank (or never received).
  bool in_transit_beyond(NodeId i, NodeId j, int64_t sent_bound, int64_t rank) const {
    const auto& ch = channel(j, i);
    auto hi = std::upper_bound(ch.send_ranks.begin(), ch.send_ranks.end(), sent_bound) -
              ch.send_ranks.begin();
    if (hi == 0) return false;
    return ch.recv_prefix_max[static_cast<size_t>(hi - 1)] > rank;
  }

  /// First offending message for the scenario above, for diagnostics.
  std::optional<Delivery> find_in_transit(NodeId i, NodeId j, int64_t sent_bound,
                                          int64_t rank) const {
    auto scan = [&](const std::vector<Delivery>& list) -> std::optional<Delivery> {
      for (const auto& d : list)
        if (d.node == i && d.from == j && !d.control && d.send_rank <= sent_bound &&
            d.recv_rank > rank)
          return d;
      return std::nullopt;
    };
    if (auto d = scan(deliveries_)) return d;
    return scan(undelivered_);
  }

  Seq pulse_seq(NodeId v, int64_t rank) const {
    auto it = pulse_seq_.find({v, rank});
    return it == pulse_seq_.end() ? -1 : it->second;
  }

private:
  void build_index() {
    std::map<std::pair<NodeId, NodeId>, std::vector<std::pair<int64_t, int64_t>>> raw;
    auto add = [&](const Delivery& d) {
      if (!d.control) raw[{d.from, d.node}].emplace_back(d.send_rank, d.recv_rank);
    };
    for (const auto& d : deliveries_) add(d);
    for (const auto& d : undelivered_) add(d);
    for (auto& [key, list] : raw) {
      std::sort(list.begin(), list.end());
      auto& ch = index_[key];
      int64_t running = std::numeric_limits<int64_t>::min();
      for (auto& [s, r] : list) {
        ch.send_ranks.push_back(s);
        ch.recv_ranks.push_back(r);
        running = std::max(running, r);
        ch.recv_prefix_max.push_back(running);
      }
    }
  }

  int n_ = 0;
  std::vector<int64_t> pulses_;
  std::vector<Delivery> deliveries_;
  std::vector<Delivery> undelivered_;
  std::set<MsgId> delivered_;
  std::map<std::pair<NodeId, int64_t>, Seq> pulse_seq_;
  std::map<std::pair<NodeId, NodeId>, ChannelIndex> index_;
};

}  // namespace ordsim
