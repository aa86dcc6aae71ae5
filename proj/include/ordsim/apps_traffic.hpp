#pragma once

#include <vector>

#include "ordsim/app_backtrack.hpp"
#include "ordsim/graph.hpp"
#include "ordsim/message.hpp"
#include "ordsim/rng.hpp"

namespace ordsim {

/// Seeded message workload for exercising the event-driven gates: every node
/// starts with a send budget and reacts to each delivery by pinging a random
/// nonempty subset of its neighbors until the budget runs out. Quiesces by
/// construction.
class EventTrafficApp {
public:
  EventTrafficApp(const Topology& topo, uint64_t seed, int64_t credits)
      : topo_(&topo), credits_(topo.n() + 1, credits) {
    rngs_.reserve(topo.n() + 1);
    for (NodeId v = 0; v <= topo.n(); ++v) rngs_.push_back(Rng::stream(seed, 0x7472ULL + v));
  }

  void init(NodeId i, std::vector<MsgOut>& out, Json&) { emit(i, out); }

  void on_message(NodeId i, const Envelope&, std::vector<MsgOut>& out, Json&) {
    emit(i, out);
  }

  bool halted() const { return false; }

  Json report() const {
    Json j;
    j["pings"] = sent_;
    return j;
  }

private:
  void emit(NodeId i, std::vector<MsgOut>& out) {
    if (credits_[i] <= 0) return;
    const auto& nb = topo_->neighbors(i);
    if (nb.empty()) return;
    credits_[i] -= 1;
    auto& rng = rngs_[i];
    uint64_t m = 1 + rng.below(nb.size());
    std::vector<NodeId> picks(nb.begin(), nb.end());
    for (uint64_t k = 0; k < m; ++k) {
      size_t idx = k + static_cast<size_t>(rng.below(picks.size() - k));
      std::swap(picks[k], picks[idx]);
      Payload p;
      p.kind = PayloadKind::Ping;
      p.iter = sent_++;
      out.push_back({picks[k], std::move(p)});
    }
  }

  const Topology* topo_;
  std::vector<int64_t> credits_;
  std::vector<Rng> rngs_;
  int64_t sent_ = 0;
};

/// Pulse-framework counterpart: each node runs a fixed number of pulses and
/// pings a random neighbor subset at each one, then goes passive.
class PulseTrafficApp {
public:
  PulseTrafficApp(const Topology& topo, uint64_t seed, int64_t max_rank)
      : topo_(&topo), max_rank_(max_rank) {
    rngs_.reserve(topo.n() + 1);
    for (NodeId v = 0; v <= topo.n(); ++v) rngs_.push_back(Rng::stream(seed, 0x7074ULL + v));
    done_.assign(topo.n() + 1, false);
  }

  void on_pulse(NodeId i, int64_t rank, std::vector<MsgOut>& out, Json&) {
    if (rank >= max_rank_) done_[i] = true;
    auto& rng = rngs_[i];
    const auto& nb = topo_->neighbors(i);
    uint64_t m = rng.below(nb.size() + 1);  // possibly no messages this pulse
    std::vector<NodeId> picks(nb.begin(), nb.end());
    for (uint64_t k = 0; k < m; ++k) {
      size_t idx = k + static_cast<size_t>(rng.below(picks.size() - k));
      std::swap(picks[k], picks[idx]);
      Payload p;
      p.kind = PayloadKind::Ping;
      p.iter = rank;
      out.push_back({picks[k], std::move(p)});
    }
  }

  void on_message(NodeId, const Envelope&) {}

  bool passive(NodeId i) const { return done_[i]; }

  Json report() const {
    Json j;
    j["max_rank"] = max_rank_;
    return j;
  }

private:
  const Topology* topo_;
  int64_t max_rank_;
  std::vector<Rng> rngs_;
  std::vector<bool> done_;
};

}  // namespace ordsim
