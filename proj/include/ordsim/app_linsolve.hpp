#pragma once

#include <cmath>
#include <map>
#include <memory>
#include <vector>

#include "ordsim/graph.hpp"
#include "ordsim/message.hpp"
#include "ordsim/pulse_order.hpp"

namespace ordsim {

/// Ax = b with a symmetric off-diagonal structure: the topology's edges are
/// exactly the nonzero off-diagonal coefficient pairs.
struct LinearSystem {
  int n = 0;
  std::map<std::pair<int, int>, double> coef;  // includes diagonal
  std::vector<double> b;   // index 1..n
  std::vector<double> x0;  // index 1..n
  double eps = 1e-8;

  double at(int i, int j) const {
    auto it = coef.find({i, j});
    return it == coef.end() ? 0.0 : it->second;
  }
  double diag(int i) const { return at(i, i); }

  void validate(const Topology& topo) const {
    if (n != topo.n()) throw ConfigError("system: size does not match topology");
    if (static_cast<int>(b.size()) != n + 1 || static_cast<int>(x0.size()) != n + 1)
      throw ConfigError("system: b/x0 must have n entries");
    for (int i = 1; i <= n; ++i)
      if (diag(i) == 0.0) throw ConfigError("system: zero diagonal at row " + std::to_string(i));
    for (auto& [ij, v] : coef) {
      auto [i, j] = ij;
      if (i < 1 || i > n || j < 1 || j > n)
        throw ConfigError("system: coefficient index out of range");
      if (i != j && v != 0.0 && !topo.adjacent(i, j))
        throw ConfigError("system: off-diagonal entry (" + std::to_string(i) + "," +
                          std::to_string(j) + ") has no matching edge");
    }
    for (auto [a, c] : topo.edges())
      if (at(a, c) == 0.0 && at(c, a) == 0.0)
        throw ConfigError("system: edge (" + std::to_string(a) + "," + std::to_string(c) +
                          ") has no nonzero coefficient");
  }

  double residual_norm(const std::vector<double>& x, const Topology& topo) const {
    double sum = 0.0;
    for (int i = 1; i <= n; ++i) {
      double r = b[i] - diag(i) * x[i];
      for (NodeId j : topo.neighbors(i)) r -= at(i, j) * x[j];
      sum += r * r;
    }
    return std::sqrt(sum);
  }
};

inline bool converged(const std::vector<double>& x, const LinearSystem& sys,
                      const Topology& topo) {
  return sys.residual_norm(x, topo) <= sys.eps;
}

/// Pulse-to-phase bookkeeping: rank 1 is phase 0 of period 0; each period has
/// ncolors update phases followed by nresidual residual phases.
struct IterationSchedule {
  int ncolors = 1;
  int nresidual = 1;

  int period_len() const { return ncolors + nresidual; }
  int64_t period(int64_t rank) const { return (rank - 1) / period_len(); }
  int phase(int64_t rank) const { return static_cast<int>((rank - 1) % period_len()); }
  bool is_update_phase(int64_t rank) const { return phase(rank) < ncolors; }
  int64_t update_rank(int64_t period, int color) const {
    return period * period_len() + color + 1;
  }
};

enum class ResidualMode { Tree, Oracle };

/// Maximum-delay schedule for the colored iteration. At node i's update phase
/// the wait reaches back to the neighbor pulse carrying the iterate the
/// update consumes; other update-window pulses add one per pulse so the
/// requirement stays fixed; late residual phases wait hop-by-hop so the
/// convergecast and broadcast complete within the residual window.
class LinsolveDelta : public DeltaPolicy {
public:
  /// gate_form adds the hop-by-hop wait at the late residual phases that the
  /// tree reduction relies on; the published schedule (the one the verifier
  /// checks against) is the color arithmetic alone.
  LinsolveDelta(const Coloring& coloring, IterationSchedule sched, ResidualMode mode,
                bool gate_form = true)
      : coloring_(coloring), sched_(sched), mode_(mode), gate_form_(gate_form) {}

  int64_t delta(int64_t candidate_rank, NodeId i, NodeId j) const override {
    int ci = coloring_.of(i), cj = coloring_.of(j);
    int P = sched_.period_len();
    int phase = sched_.phase(candidate_rank);
    if (gate_form_ && mode_ == ResidualMode::Tree && phase >= sched_.ncolors + 1) return 1;
    int gap = ci == cj ? sched_.ncolors
                       : circular_distance(cj, ci, sched_.ncolors);
    int64_t base = gap + (cj < ci ? 0 : sched_.nresidual);
    int off = phase - ci;
    if (off < 0) off += P;
    return base + off;
  }

private:
  Coloring coloring_;
  IterationSchedule sched_;
  ResidualMode mode_;
  bool gate_form_;
};

/// Minimum delays: iterate values to a higher color arrive within the same
/// period; values to a lower-or-equal color wait out the residual window and
/// land in the next period's update phases. Reduction traffic moves freely.
class LinsolveRho : public RhoPolicy {
public:
  LinsolveRho(const Coloring& coloring, IterationSchedule sched) : coloring_(coloring), sched_(sched) {}

  int64_t rho(int64_t send_rank, NodeId from, NodeId to, const Payload& p) const override {
    if (p.kind == PayloadKind::ResPartial || p.kind == PayloadKind::ResVerdict) return 1;
    if (coloring_.of(to) > coloring_.of(from)) return 1;
    int P = sched_.period_len();
    return P - ((send_rank - 1) % P);
  }

  /// Only the message classes actually emitted at this rank: iterate values
  /// at the sender's update phase, reduction traffic at residual phases.
  std::vector<int64_t> rho_values(int64_t send_rank, NodeId from, NodeId to) const override {
    std::vector<int64_t> vals;
    int ph = sched_.phase(send_rank);
    if (ph == coloring_.of(from)) {
      if (coloring_.of(to) > coloring_.of(from)) {
        vals.push_back(1);
      } else {
        int P = sched_.period_len();
        vals.push_back(P - ((send_rank - 1) % P));
      }
    }
    if (ph >= sched_.ncolors) vals.push_back(1);
    return vals;
  }

private:
  Coloring coloring_;
  IterationSchedule sched_;
};

/// Colored iterative solve of Ax = b under the partially synchronous gates.
/// Iterate k is computed in period k (k >= 1) at each node's color phase from
/// the lower neighbors' iterate k and the upper neighbors' iterate k-1; the
/// residual of the completed iterate k-1 is reduced over a BFS spanning tree
/// during period k's residual phases, and every node freezes at the first
/// update phase whose latest verdict reports convergence.
class LinsolveApp {
public:
  LinsolveApp(const Topology& topo, const LinearSystem& sys, const Coloring& coloring,
              ResidualMode mode)
      : topo_(&topo), sys_(sys), coloring_(coloring), mode_(mode), tree_(SpanningTree::bfs(topo, 1)) {
    sys_.validate(topo);
    if (!coloring_.uses_all_colors(topo.n()))
      throw ConfigError("solver: coloring must use colors 0..ncolors-1");
    sched_.ncolors = coloring_.ncolors;
    sched_.nresidual = mode == ResidualMode::Tree ? 2 * tree_.height + 1 : 1;
    nodes_.assign(topo.n() + 1, {});
    for (NodeId v = 1; v <= topo.n(); ++v) {
      auto& st = nodes_[v];
      st.x = sys_.x0[v];
      st.x_hist.push_back(st.x);
      for (NodeId j : topo.neighbors(v)) {
        st.vals[j] = {};
        // Upper and equal-color neighbors' initial values are read from the
        // shared input, which stands in for their first transmission.
        if (coloring_.of(j) >= coloring_.of(v)) st.received += 1;
      }
      st.expected = expected_per_period(v);
    }
  }

  const IterationSchedule& schedule() const { return sched_; }
  const Coloring& coloring() const { return coloring_; }
  std::shared_ptr<DeltaPolicy> delta_policy() const {
    return std::make_shared<LinsolveDelta>(coloring_, sched_, mode_, true);
  }
  std::shared_ptr<DeltaPolicy> published_delta_policy() const {
    return std::make_shared<LinsolveDelta>(coloring_, sched_, mode_, false);
  }
  std::shared_ptr<RhoPolicy> rho_policy() const {
    return std::make_shared<LinsolveRho>(coloring_, sched_);
  }

  void on_pulse(NodeId i, int64_t rank, std::vector<MsgOut>& out, Json& annot) {
    auto& st = nodes_[i];
    int64_t p = sched_.period(rank);
    int phase = sched_.phase(rank);

    if (phase == coloring_.of(i) && p >= 1 && !st.frozen) {
      if (knows_converged(i, p)) {
        st.frozen = true;
        annot["frozen"] = 1;
        return;
      }
      if (st.received != st.expected)
        throw ConfigError("solver: received count off at node " + std::to_string(i) +
                          " period " + std::to_string(p) + ": " +
                          std::to_string(st.received) + " vs " + std::to_string(st.expected));
      double res = residual_term(i, p);
      st.x = res / sys_.diag(i) + st.x;
      st.x_hist.push_back(st.x);
      st.k = p;
      st.received = 0;
      Payload v;
      v.kind = PayloadKind::Value;
      v.value = st.x;
      v.iter = p;
      for (NodeId j : topo_->neighbors(i)) out.push_back({j, v});
      annot["k"] = p;
      annot["x"] = st.x;
      return;
    }

    if (mode_ == ResidualMode::Tree && phase >= sched_.ncolors && !st.frozen)
      residual_phase(i, p, phase - sched_.ncolors, out, annot);
  }

  void on_message(NodeId i, const Envelope& env) {
    auto& st = nodes_[i];
    const Payload& pl = env.payload;
    st.received += 1;
    switch (pl.kind) {
      case PayloadKind::Value:
        st.vals[env.src].push_back(pl.value);
        break;
      case PayloadKind::ResPartial:
        st.child_sum += pl.value;
        st.child_parts += 1;
        break;
      case PayloadKind::ResVerdict:
        note_verdict(pl.iter, pl.flag);
        st.verdict_round = pl.iter;
        st.verdict_flag = pl.flag;
        if (pl.flag && st.ok_round < 0) st.ok_round = pl.iter;
        break;
      default:
        throw ConfigError("solver: unexpected message kind");
    }
  }

  bool passive(NodeId i) const { return nodes_[i].frozen; }

  int64_t iterations() const { return converged_at_ < 0 ? -1 : converged_at_; }

  /// Iterate vector after iteration k (0 = the initial guess).
  std::vector<double> iterate(int64_t k) const {
    std::vector<double> x(topo_->n() + 1, 0.0);
    for (NodeId v = 1; v <= topo_->n(); ++v) {
      if (k >= static_cast<int64_t>(nodes_[v].x_hist.size()))
        throw ConfigError("solver: iterate index out of range");
      x[v] = nodes_[v].x_hist[static_cast<size_t>(k)];
    }
    return x;
  }

  int64_t iterates_computed() const {
    int64_t m = std::numeric_limits<int64_t>::max();
    for (NodeId v = 1; v <= topo_->n(); ++v)
      m = std::min<int64_t>(m, static_cast<int64_t>(nodes_[v].x_hist.size()) - 1);
    return m;
  }

  Json report() const {
    Json j;
    int64_t k = iterations();
    j["iterations"] = k;
    if (k >= 0) {
      auto x = iterate(k);
      j["residual"] = sys_.residual_norm(x, *topo_);
      Json xa = Json::array();
      for (NodeId v = 1; v <= topo_->n(); ++v) xa.push_back(x[v]);
      j["x"] = xa;
    }
    j["ncolors"] = sched_.ncolors;
    j["nresidual"] = sched_.nresidual;
    j["speculative"] = iterates_computed() - (k < 0 ? 0 : k);
    return j;
  }

  const LinearSystem& system() const { return sys_; }
  ResidualMode mode() const { return mode_; }

private:
  struct NodeState {
    double x = 0.0;
    std::vector<double> x_hist;           // x_hist[k] = iterate k at this node
    std::map<NodeId, std::vector<double>> vals;  // per-neighbor received values
    int64_t k = 0;
    int64_t received = 0;
    int64_t expected = 0;
    bool frozen = false;
    // convergecast scratch (reset each period)
    double child_sum = 0.0;
    int64_t child_parts = 0;
    int64_t verdict_round = -1;  // latest verdict held, for the relay phase
    bool verdict_flag = false;
    int64_t ok_round = -1;  // first converged verdict this node learned of
  };

  int64_t reduction_msgs_expected(NodeId i) const {
    if (mode_ != ResidualMode::Tree) return 0;
    return static_cast<int64_t>(tree_.children[i].size()) + (i == tree_.root ? 0 : 1);
  }

  int64_t expected_per_period(NodeId i) const {
    return topo_->degree(i) + reduction_msgs_expected(i);
  }

  /// Value of neighbor j's iterate k as known at i (k = 0 is the initial guess).
  double neighbor_iterate(NodeId i, NodeId j, int64_t k) const {
    if (k == 0) return sys_.x0[j];
    const auto& v = nodes_[i].vals.at(j);
    if (k > static_cast<int64_t>(v.size()))
      throw ConfigError("solver: missing neighbor iterate");
    return v[static_cast<size_t>(k - 1)];
  }

  /// The update numerator for iteration p at node i: lower neighbors
  /// contribute iterate p, upper (and equal-color, i.e. Jacobi) neighbors
  /// iterate p-1. Summed in neighbor order so timing never shifts numerics.
  double residual_term(NodeId i, int64_t p) const {
    double r = sys_.b[i] - sys_.diag(i) * nodes_[i].x;
    for (NodeId j : topo_->neighbors(i)) {
      int64_t k = coloring_.of(j) < coloring_.of(i) ? p : p - 1;
      r -= sys_.at(i, j) * neighbor_iterate(i, j, k);
    }
    return r;
  }

  /// Residual component of the completed iterate p-1 at node i.
  double completed_residual(NodeId i, int64_t p) const {
    int64_t k = p - 1;
    double xi = nodes_[i].x_hist[static_cast<size_t>(k)];
    double r = sys_.b[i] - sys_.diag(i) * xi;
    for (NodeId j : topo_->neighbors(i)) r -= sys_.at(i, j) * neighbor_iterate(i, j, k);
    return r;
  }

  void residual_phase(NodeId i, int64_t p, int m, std::vector<MsgOut>& out, Json& annot) {
    int h = tree_.height;
    int d = tree_.depth[i];
    int64_t round = std::max<int64_t>(p - 1, 0);  // reducing r(x[round])
    if (d >= 1 && m == h - d) {
      double own = completed_residual(i, round + 1);
      Payload part;
      part.kind = PayloadKind::ResPartial;
      part.value = st_scratch_take(i) + own * own;
      part.iter = round;
      out.push_back({tree_.parent[i], part});
      annot["up"] = round;
    } else if (d == 0 && m == h) {
      double own = completed_residual(i, round + 1);
      double total = st_scratch_take(i) + own * own;
      bool ok = std::sqrt(total) <= sys_.eps;
      note_verdict(round, ok);
      nodes_[i].verdict_round = round;
      nodes_[i].verdict_flag = ok;
      if (ok && nodes_[i].ok_round < 0) nodes_[i].ok_round = round;
      Payload v;
      v.kind = PayloadKind::ResVerdict;
      v.iter = round;
      v.flag = ok;
      for (NodeId c : tree_.children[i]) out.push_back({c, v});
      annot["verdict"] = ok;
    } else if (d >= 1 && d <= h - 1 && m == h + d) {
      Payload v;
      v.kind = PayloadKind::ResVerdict;
      v.iter = nodes_[i].verdict_round;
      v.flag = nodes_[i].verdict_flag;
      for (NodeId c : tree_.children[i]) out.push_back({c, v});
    }
  }

  double st_scratch_take(NodeId i) {
    auto& st = nodes_[i];
    double s = st.child_sum;
    st.child_sum = 0.0;
    st.child_parts = 0;
    return s;
  }

  void note_verdict(int64_t round, bool ok) {
    if (ok && (converged_at_ < 0 || round < converged_at_)) converged_at_ = round;
    if (round > last_round_) last_round_ = round;
  }

  /// Freeze test at node i's period-p update phase. In tree mode a node
  /// freezes once a converged verdict has reached it through the broadcast
  /// (uniformly at period K+2 when iterate K converged). In oracle mode the
  /// kernel-side view of x[p-1] is consulted directly, with no transport lag.
  bool knows_converged(NodeId i, int64_t p) {
    if (mode_ == ResidualMode::Oracle) {
      int64_t round = p - 1;
      if (oracle_verdicts_.count(round) == 0) {
        std::vector<double> x(topo_->n() + 1, 0.0);
        for (NodeId v = 1; v <= topo_->n(); ++v)
          x[v] = nodes_[v].x_hist[static_cast<size_t>(round)];
        bool ok = sys_.residual_norm(x, *topo_) <= sys_.eps;
        oracle_verdicts_[round] = ok;
        note_verdict(round, ok);
      }
      return oracle_verdicts_[round];
    }
    return nodes_[i].ok_round >= 0;
  }

  Topology const* topo_;
  LinearSystem sys_;
  Coloring coloring_;
  ResidualMode mode_;
  SpanningTree tree_;
  IterationSchedule sched_;
  std::vector<NodeState> nodes_;
  int64_t converged_at_ = -1;
  int64_t last_round_ = -1;
  std::map<int64_t, bool> oracle_verdicts_;
};

}  // namespace ordsim
