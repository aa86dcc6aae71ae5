#pragma once

#include <cassert>
#include <map>
#include <memory>
#include <optional>
#include <vector>

#include "ordsim/graph.hpp"
#include "ordsim/message.hpp"

namespace ordsim {

/// Maximum-delay schedule consulted by the local clock mechanism. The value is
/// the gate form: advancing to candidate rank L waits on the neighbor pulse
/// ranked L - delta(L, ...). The set-theoretic condition parameter checked by
/// the verifier is one less (a message received while the receiver's clock
/// reads c joins the pulse ranked c+1).
class DeltaPolicy {
public:
  virtual ~DeltaPolicy() = default;
  virtual int64_t delta(int64_t candidate_rank, NodeId i, NodeId j) const = 0;
};

/// Minimum-delay attachment rule (setMinimumDelay), per outgoing message.
class RhoPolicy {
public:
  virtual ~RhoPolicy() = default;
  virtual int64_t rho(int64_t send_rank, NodeId from, NodeId to, const Payload& p) const = 0;
  /// All rho values the policy may emit at this (rank, edge), for the
  /// compatibility validator; the default covers payload-independent policies.
  virtual std::vector<int64_t> rho_values(int64_t send_rank, NodeId from, NodeId to) const {
    return {rho(send_rank, from, to, Payload{})};
  }
};

class ConstantDelta : public DeltaPolicy {
public:
  explicit ConstantDelta(int64_t gate_value) : v_(gate_value) {}
  int64_t delta(int64_t, NodeId, NodeId) const override { return v_; }

private:
  int64_t v_;
};

class ConstantRho : public RhoPolicy {
public:
  explicit ConstantRho(int64_t v) : v_(v) {}
  int64_t rho(int64_t, NodeId, NodeId, const Payload&) const override { return v_; }

private:
  int64_t v_;
};

/// The fully synchronous ordering: minimum delay 1 and the tightest live
/// maximum-delay gate. Every message from pulse l is received into pulse l+1.
inline std::shared_ptr<DeltaPolicy> synchronous_delta() {
  return std::make_shared<ConstantDelta>(1);
}
inline std::shared_ptr<RhoPolicy> synchronous_rho() { return std::make_shared<ConstantRho>(1); }

struct Incompatibility {
  int64_t send_rank = 0;
  NodeId from = 0;
  NodeId to = 0;
};

/// Checks that for every message a delivery pulse exists satisfying both the
/// minimum delay and the pulse-generation schedule. The local clock demands
/// the messages of neighbor pulse l_j before generating any pulse L with
/// L - delta(L) = l_j; the message must therefore be deliverable by the first
/// such L, i.e. l_j + rho <= L.
inline std::optional<Incompatibility> validate_compatibility(const RhoPolicy& rho,
                                                             const DeltaPolicy& delta,
                                                             const Topology& topo,
                                                             int64_t horizon,
                                                             int64_t scan_span = 512) {
  for (auto [a, b] : topo.edges()) {
    for (int dir = 0; dir < 2; ++dir) {
      NodeId from = dir == 0 ? a : b;
      NodeId to = dir == 0 ? b : a;
      for (int64_t lj = 1; lj <= horizon; ++lj) {
        auto rhos = rho.rho_values(lj, from, to);
        if (rhos.empty()) continue;  // nothing is sent at this pulse
        int64_t deadline = -1;  // first pulse at `to` demanding pulse-lj receipt
        for (int64_t L = lj + 1; L <= lj + scan_span; ++L) {
          if (L - delta.delta(L, to, from) == lj) {
            deadline = L;
            break;
          }
        }
        for (int64_t r : rhos) {
          if (r < 1) return Incompatibility{lj, from, to};
          if (deadline >= 0 && lj + r > deadline) return Incompatibility{lj, from, to};
        }
      }
    }
  }
  return std::nullopt;
}

/// Per-node local clock state for the partially synchronous gates. The clock
/// value is the rank of the most recently generated pulse (0 before the
/// first); a message delivered while the clock reads c feeds pulse c+1.
class PulseGate {
public:
  PulseGate(const Topology& topo, std::shared_ptr<RhoPolicy> rho,
            std::shared_ptr<DeltaPolicy> delta)
      : topo_(&topo), rho_(std::move(rho)), delta_(std::move(delta)) {
    clock_.assign(topo.n() + 1, 0);
    advanced_.assign(topo.n() + 1, 0);
    announced_.resize(topo.n() + 1);
    consumed_.resize(topo.n() + 1);
  }

  int64_t clock(NodeId i) const { return clock_[i]; }

  /// Control messages bypass the delivery gate entirely; the kernel folds
  /// them in on arrival. `announced` is the sender pulse's message count
  /// toward this node.
  void on_control(NodeId i, NodeId j, int64_t rank, int64_t announced) {
    announced_[i][{j, rank}] = announced;
  }

  /// Announced-but-undelivered count for a neighbor pulse; meaningful once
  /// the control message has arrived, and never negative then (a pulse
  /// cannot deliver more than it sent).
  int64_t pending(NodeId i, NodeId j, int64_t rank) const {
    auto a = announced_[i].find({j, rank});
    if (a == announced_[i].end()) return 0;
    auto c = consumed_[i].find({j, rank});
    return a->second - (c == consumed_[i].end() ? 0 : c->second);
  }

  bool has_advanced(NodeId i) {
    if (advanced_[i]) return false;  // awaiting the matching get_current
    int64_t candidate = clock_[i] + 1;
    for (NodeId j : topo_->neighbors(i)) {
      int64_t q = candidate - delta_->delta(candidate, i, j);
      if (q <= 0) continue;  // ranks at or below 0 are safe with nothing pending
      auto s = announced_[i].find({j, q});
      if (s == announced_[i].end()) return false;  // not yet safe
      auto c = consumed_[i].find({j, q});
      if (s->second != (c == consumed_[i].end() ? 0 : c->second)) return false;
    }
    clock_[i] = candidate;
    advanced_[i] = 1;
    return true;
  }

  int64_t get_current(NodeId i) {
    if (!advanced_[i])
      throw std::logic_error("pulse clock: get_current without a prior advance");
    advanced_[i] = 0;
    return clock_[i];
  }

  /// Delivery condition for application messages: the pulse the delivery
  /// would feed (clock+1) must rank at least l_j + rho.
  GateDecision on_arrival(NodeId i, const Envelope& env, bool force = false) {
    if (env.att.send_rank < 0 || env.att.rho < 0)
      throw ConfigError("pulse gate: arrival without rank/rho attachment");
    bool ok = force || clock_[i] + 1 >= env.att.send_rank + env.att.rho;
    if (!ok) return GateDecision::Postpone;
    consumed_[i][{env.src, env.att.send_rank}] += 1;
    return GateDecision::Accept;
  }

  Attachments attach_on_send(NodeId j, NodeId i, const Payload& p, int64_t rank) const {
    Attachments att;
    att.send_rank = rank;
    att.rho = rho_->rho(rank, j, i, p);
    return att;
  }

  Attachments attach_control(int64_t rank, int64_t count) const {
    Attachments att;
    att.send_rank = rank;
    att.control = true;
    att.control_count = count;
    return att;
  }

  int64_t pending_total(NodeId i) const {
    int64_t s = 0;
    for (auto& [key, announced] : announced_[i]) s += pending(i, key.first, key.second);
    return s;
  }

  bool safe(NodeId i, NodeId j, int64_t rank) const {
    return announced_[i].count({j, rank}) != 0;
  }

  const RhoPolicy& rho_policy() const { return *rho_; }
  const DeltaPolicy& delta_policy() const { return *delta_; }

private:
  const Topology* topo_;
  std::shared_ptr<RhoPolicy> rho_;
  std::shared_ptr<DeltaPolicy> delta_;
  std::vector<int64_t> clock_;
  std::vector<char> advanced_;
  std::vector<std::map<std::pair<NodeId, int64_t>, int64_t>> announced_;
  std::vector<std::map<std::pair<NodeId, int64_t>, int64_t>> consumed_;
};

}  // namespace ordsim
