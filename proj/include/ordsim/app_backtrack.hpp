#pragma once

#include <algorithm>
#include <map>
#include <memory>
#include <set>
#include <vector>

#include "ordsim/event_order.hpp"
#include "ordsim/graph.hpp"
#include "ordsim/message.hpp"
#include "ordsim/rng.hpp"

namespace ordsim {

/// A subproblem is identified by its path of child indices from the root;
/// its level is the path length. Depth-first (leftmost) order is
/// lexicographic order on paths.
using SubPath = std::vector<int>;

/// Pluggable search tree. branch() is a pure function of the path; an empty
/// child list marks a leaf (the branching procedure solves it directly).
class TreeSource {
public:
  virtual ~TreeSource() = default;
  virtual std::vector<SubPath> branch(const SubPath& s) const = 0;
  virtual int64_t total_leaves() const = 0;
};

/// Seeded random tree with an exact leaf count. Built once by recursively
/// splitting a leaf quota; branch() is then a table lookup.
class SyntheticTree : public TreeSource {
public:
  SyntheticTree(uint64_t seed, int max_branching, int64_t leaves) : leaves_(leaves) {
    if (max_branching < 2) throw ConfigError("synthetic tree: max branching must be >= 2");
    if (leaves < 1) throw ConfigError("synthetic tree: leaf count must be >= 1");
    Rng rng = Rng::stream(seed, 0x7265655fULL);
    build(SubPath{}, leaves, max_branching, rng, 0);
  }

  std::vector<SubPath> branch(const SubPath& s) const override {
    auto it = children_.find(s);
    if (it == children_.end()) throw ConfigError("synthetic tree: unknown subproblem");
    std::vector<SubPath> out;
    for (int c = 0; c < it->second; ++c) {
      SubPath p = s;
      p.push_back(c);
      out.push_back(std::move(p));
    }
    return out;
  }

  int64_t total_leaves() const override { return leaves_; }

private:
  void build(const SubPath& at, int64_t quota, int maxb, Rng& rng, int depth) {
    if (quota == 1 && (depth > 0 && rng.below(4) != 0)) {
      children_[at] = 0;  // leaf
      return;
    }
    if (quota == 1) {
      // occasional unary chain before the leaf, for depth variety
      children_[at] = 1;
      SubPath p = at;
      p.push_back(0);
      if (depth > 24) {
        children_[p] = 0;
        return;
      }
      children_[p] = 0;
      return;
    }
    int nc = static_cast<int>(rng.range(2, std::min<int64_t>(maxb, quota)));
    children_[at] = nc;
    // random composition of quota into nc positive parts
    std::vector<int64_t> parts(nc, 1);
    int64_t rest = quota - nc;
    for (int i = 0; i < nc && rest > 0; ++i) {
      int64_t take = (i == nc - 1) ? rest : rng.range(0, rest);
      parts[i] += take;
      rest -= take;
    }
    for (int c = 0; c < nc; ++c) {
      SubPath p = at;
      p.push_back(c);
      build(p, parts[c], maxb, rng, depth + 1);
    }
  }

  std::map<SubPath, int> children_;
  int64_t leaves_;
};

/// n-queens backtrack tree: a path lists the column placed in each row, and
/// children are the safe placements for the next row. Leaves are complete
/// boards and dead ends alike.
class QueensTree : public TreeSource {
public:
  explicit QueensTree(int size) : size_(size) {
    if (size < 1) throw ConfigError("queens: board size must be >= 1");
    leaves_ = count_leaves(SubPath{});
  }

  std::vector<SubPath> branch(const SubPath& s) const override {
    std::vector<SubPath> out;
    int row = static_cast<int>(s.size());
    if (row == size_) return out;
    for (int col = 0; col < size_; ++col) {
      bool ok = true;
      for (int r = 0; r < row && ok; ++r) {
        int c = s[r];
        if (c == col || std::abs(c - col) == row - r) ok = false;
      }
      if (ok) {
        SubPath p = s;
        p.push_back(col);
        out.push_back(std::move(p));
      }
    }
    return out;
  }

  int64_t total_leaves() const override { return leaves_; }

private:
  int64_t count_leaves(const SubPath& s) const {
    auto ch = branch(s);
    if (ch.empty()) return 1;
    int64_t total = 0;
    for (auto& c : ch) total += count_leaves(c);
    return total;
  }

  int size_;
  int64_t leaves_;
};

/// Tolerance schedule for the search: a pairing message with a donation
/// request resets the per-destination tolerance to zero, anything else
/// increments it before attaching.
class BacktrackTolerance : public TolerancePolicy {
public:
  int64_t tolerance(NodeId from, NodeId to, const Payload& p) override {
    int64_t& mu = counters_[{from, to}];
    if (p.kind == PayloadKind::Request)
      mu = 0;
    else
      mu += 1;
    return mu;
  }

private:
  std::map<std::pair<NodeId, NodeId>, int64_t> counters_;
};

/// Asynchronous randomized distributed backtrack search. Every event emits
/// one message per neighbor: a donation plus pairings when answering a
/// request from a busy node, otherwise pairings with at most one donation
/// request (emitted whenever the local frontier is exhausted).
class BacktrackApp {
public:
  struct NodeState {
    std::set<SubPath> frontier;
    Rng rng{0};
  };

  BacktrackApp(const Topology& topo, std::shared_ptr<TreeSource> tree, uint64_t seed,
               NodeId root_holder = 1)
      : topo_(&topo), tree_(std::move(tree)) {
    nodes_.resize(topo.n() + 1);
    for (NodeId v = 1; v <= topo.n(); ++v) nodes_[v].rng = Rng::stream(seed, 0x6b7aULL + v);
    nodes_[root_holder].frontier.insert(SubPath{});
  }

  void init(NodeId i, std::vector<MsgOut>& out, Json& annot) {
    step(i, nullptr, 0, out, annot);
  }

  void on_message(NodeId i, const Envelope& env, std::vector<MsgOut>& out, Json& annot) {
    step(i, &env.payload, env.src, out, annot);
  }

  bool halted() const { return solved_ >= tree_->total_leaves(); }

  int64_t solved() const { return solved_; }
  int64_t branchings() const { return branchings_; }
  int64_t donations() const { return donations_; }
  int64_t requests() const { return requests_; }
  int64_t failed_requests() const { return failed_requests_; }

  Json report() const {
    Json j;
    j["leaves"] = solved_;
    j["branchings"] = branchings_;
    j["donations"] = donations_;
    j["requests"] = requests_;
    j["failed_requests"] = failed_requests_;
    return j;
  }

private:
  void step(NodeId i, const Payload* msg, NodeId from, std::vector<MsgOut>& out, Json& annot) {
    auto& st = nodes_[i];
    std::vector<NodeId> candidates = topo_->neighbors(i);

    if (msg && msg->kind == PayloadKind::Request) {
      ++requests_;
      if (st.frontier.size() >= 2) {
        auto donated = take_donation(st);
        Payload d;
        d.kind = PayloadKind::Donation;
        d.paths = donated;
        out.push_back({from, std::move(d)});
        ++donations_;
      } else {
        ++failed_requests_;
      }
      candidates.erase(std::remove(candidates.begin(), candidates.end(), from),
                       candidates.end());
    } else if (msg && msg->kind == PayloadKind::Donation) {
      for (const auto& p : msg->paths) st.frontier.insert(p);
    }

    if (!st.frontier.empty()) {
      Json branched = Json::array();
      Json solved = Json::array();
      branch_once(st, branched, solved);
      // With no neighbors there are no events to drive the search, so an
      // isolated node works its frontier off within the one event it gets.
      if (topo_->degree(i) == 0)
        while (!st.frontier.empty()) branch_once(st, branched, solved);
      annot["br"] = branched;
      if (!solved.empty()) annot["solved"] = solved;
    }

    if (st.frontier.empty() && !candidates.empty()) {
      size_t pick = st.rng.pick_index(candidates);
      NodeId dest = candidates[pick];
      candidates.erase(candidates.begin() + static_cast<long>(pick));
      Payload rq;
      rq.kind = PayloadKind::Request;
      out.push_back({dest, std::move(rq)});
    }
    for (NodeId k : candidates) {
      Payload pr;
      pr.kind = PayloadKind::Pairing;
      out.push_back({k, std::move(pr)});
    }
  }

  void branch_once(NodeState& st, Json& branched, Json& solved) {
    SubPath s = *st.frontier.begin();  // leftmost
    st.frontier.erase(st.frontier.begin());
    auto children = tree_->branch(s);
    ++branchings_;
    Json path = Json::array();
    for (int v : s) path.push_back(v);
    branched.push_back(path);
    if (children.empty()) {
      ++solved_;
      solved.push_back(path);
    } else {
      for (auto& c : children) st.frontier.insert(std::move(c));
    }
  }

  /// The lowest-level (shallowest) half of the frontier, leftmost first.
  std::vector<SubPath> take_donation(NodeState& st) {
    size_t min_level = SIZE_MAX;
    for (const auto& p : st.frontier) min_level = std::min(min_level, p.size());
    std::vector<SubPath> tier;
    for (const auto& p : st.frontier)
      if (p.size() == min_level) tier.push_back(p);
    size_t take = (tier.size() + 1) / 2;
    tier.resize(take);
    for (const auto& p : tier) st.frontier.erase(p);
    return tier;
  }

  const Topology* topo_;
  std::shared_ptr<TreeSource> tree_;
  std::vector<NodeState> nodes_;
  int64_t solved_ = 0;
  int64_t branchings_ = 0;
  int64_t donations_ = 0;
  int64_t requests_ = 0;
  int64_t failed_requests_ = 0;
};

/// Offline census: how many branching events solved each leaf, read back
/// from the trace annotations. Also exposes every branched path, for the
/// no-duplication check over internal subproblems.
struct BranchCensus {
  std::map<SubPath, int64_t> leaf_solves;
  std::map<SubPath, int64_t> branchings;
};

inline BranchCensus branch_census(const Trace& trace) {
  BranchCensus c;
  for (const auto& r : trace.records()) {
    if (r.kind != RecordKind::Deliver && r.kind != RecordKind::Local) continue;
    if (!r.attach.is_object()) continue;
    if (r.attach.contains("br"))
      for (const auto& pj : r.attach["br"]) {
        SubPath p;
        for (const auto& v : pj) p.push_back(v.get<int>());
        c.branchings[p] += 1;
      }
    if (r.attach.contains("solved"))
      for (const auto& pj : r.attach["solved"]) {
        SubPath p;
        for (const auto& v : pj) p.push_back(v.get<int>());
        c.leaf_solves[p] += 1;
      }
  }
  return c;
}

inline std::map<SubPath, int64_t> leaf_census(const Trace& trace, const TreeSource&) {
  return branch_census(trace).leaf_solves;
}

/// Depth-first enumeration of all leaves, the independent oracle for the
/// distributed census.
inline std::vector<SubPath> enumerate_leaves(const TreeSource& tree) {
  std::vector<SubPath> leaves;
  std::vector<SubPath> stack{SubPath{}};
  while (!stack.empty()) {
    SubPath s = std::move(stack.back());
    stack.pop_back();
    auto ch = tree.branch(s);
    if (ch.empty()) {
      leaves.push_back(std::move(s));
      continue;
    }
    for (auto it = ch.rbegin(); it != ch.rend(); ++it) stack.push_back(std::move(*it));
  }
  return leaves;
}

}  // namespace ordsim
