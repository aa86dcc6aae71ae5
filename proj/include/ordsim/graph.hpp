#pragma once

#include <algorithm>
#include <optional>
#include <queue>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace ordsim {

// Nodes are dense integers 1..n.
using NodeId = int;

class ConfigError : public std::runtime_error {
public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// Undirected connected topology over nodes 1..n. Immutable after construction.
class Topology {
public:
  Topology() = default;

  static Topology build(int n, const std::vector<std::pair<NodeId, NodeId>>& edges) {
    if (n < 1) throw ConfigError("topology: node count must be >= 1");
    Topology t;
    t.n_ = n;
    t.adj_.assign(n + 1, {});
    std::set<std::pair<NodeId, NodeId>> seen;
    for (auto [a, b] : edges) {
      if (a < 1 || a > n || b < 1 || b > n)
        throw ConfigError("topology: edge endpoint out of range: (" + std::to_string(a) +
                          "," + std::to_string(b) + ")");
      if (a == b) throw ConfigError("topology: self-loop at node " + std::to_string(a));
      auto key = std::minmax(a, b);
      if (!seen.insert(key).second)
        throw ConfigError("topology: duplicate edge (" + std::to_string(key.first) + "," +
                          std::to_string(key.second) + ")");
      t.edges_.push_back(key);
      t.adj_[a].push_back(b);
      t.adj_[b].push_back(a);
    }
    for (NodeId v = 1; v <= n; ++v) std::sort(t.adj_[v].begin(), t.adj_[v].end());
    std::sort(t.edges_.begin(), t.edges_.end());
    if (!t.connected()) throw ConfigError("topology: graph is not connected");
    return t;
  }

  int n() const { return n_; }
  const std::vector<NodeId>& neighbors(NodeId v) const { return adj_[v]; }
  const std::vector<std::pair<NodeId, NodeId>>& edges() const { return edges_; }
  int degree(NodeId v) const { return static_cast<int>(adj_[v].size()); }
  int max_degree() const {
    int d = 0;
    for (NodeId v = 1; v <= n_; ++v) d = std::max(d, degree(v));
    return d;
  }
  bool adjacent(NodeId a, NodeId b) const {
    return std::binary_search(adj_[a].begin(), adj_[a].end(), b);
  }

  /// BFS hop distances from src; distance to unreachable nodes is -1.
  std::vector<int> bfs_distances(NodeId src) const {
    std::vector<int> dist(n_ + 1, -1);
    std::queue<NodeId> q;
    dist[src] = 0;
    q.push(src);
    while (!q.empty()) {
      NodeId v = q.front();
      q.pop();
      for (NodeId w : adj_[v])
        if (dist[w] < 0) {
          dist[w] = dist[v] + 1;
          q.push(w);
        }
    }
    return dist;
  }

  std::vector<std::vector<int>> all_pairs_distances() const {
    std::vector<std::vector<int>> d(n_ + 1);
    for (NodeId v = 1; v <= n_; ++v) d[v] = bfs_distances(v);
    return d;
  }

private:
  bool connected() const {
    auto dist = bfs_distances(1);
    for (NodeId v = 1; v <= n_; ++v)
      if (dist[v] < 0) return false;
    return true;
  }

  int n_ = 0;
  std::vector<std::pair<NodeId, NodeId>> edges_;
  std::vector<std::vector<NodeId>> adj_;
};

/// BFS spanning tree (parent pointers and depths), used by the solver's
/// residual convergecast. parent[root] = 0.
struct SpanningTree {
  NodeId root = 1;
  std::vector<NodeId> parent;              // 0 for root
  std::vector<int> depth;                  // 0 for root
  std::vector<std::vector<NodeId>> children;
  int height = 0;

  static SpanningTree bfs(const Topology& t, NodeId root) {
    SpanningTree st;
    st.root = root;
    st.parent.assign(t.n() + 1, 0);
    st.depth.assign(t.n() + 1, -1);
    st.children.assign(t.n() + 1, {});
    std::queue<NodeId> q;
    st.depth[root] = 0;
    q.push(root);
    while (!q.empty()) {
      NodeId v = q.front();
      q.pop();
      for (NodeId w : t.neighbors(v))
        if (st.depth[w] < 0) {
          st.depth[w] = st.depth[v] + 1;
          st.parent[w] = v;
          st.children[v].push_back(w);
          q.push(w);
        }
    }
    for (NodeId v = 1; v <= t.n(); ++v) st.height = std::max(st.height, st.depth[v]);
    return st;
  }
};

/// Node coloring with colors 0..ncolors-1. Properness is relative to the
/// dependency graph being colored, which may be the topology itself
/// (Gauss-Seidel) or the empty graph (Jacobi, a single color class).
struct Coloring {
  std::vector<int> color;  // index 1..n
  int ncolors = 0;

  int of(NodeId v) const { return color[v]; }

  bool proper_on(const Topology& t) const {
    for (auto [a, b] : t.edges())
      if (color[a] == color[b]) return false;
    return true;
  }

  /// Every color in 0..ncolors-1 must be used at least once.
  bool uses_all_colors(int n) const {
    std::vector<char> used(ncolors, 0);
    for (NodeId v = 1; v <= n; ++v) {
      if (color[v] < 0 || color[v] >= ncolors) return false;
      used[color[v]] = 1;
    }
    return std::all_of(used.begin(), used.end(), [](char c) { return c != 0; });
  }

  static Coloring uniform(int n) {
    Coloring c;
    c.color.assign(n + 1, 0);
    c.ncolors = 1;
    return c;
  }
};

/// Greedy sweep in the given node order; each node takes the smallest color
/// unused among already-colored neighbors. Yields at most max_degree+1 colors.
inline Coloring greedy_coloring(const Topology& t, const std::vector<NodeId>& order) {
  if (static_cast<int>(order.size()) != t.n())
    throw ConfigError("coloring: order must be a permutation of 1..n");
  Coloring c;
  c.color.assign(t.n() + 1, -1);
  for (NodeId v : order) {
    if (v < 1 || v > t.n() || c.color[v] != -1)
      throw ConfigError("coloring: order must be a permutation of 1..n");
    std::vector<char> taken(t.degree(v) + 2, 0);
    for (NodeId w : t.neighbors(v)) {
      int cw = c.color[w];
      if (cw >= 0 && cw < static_cast<int>(taken.size())) taken[cw] = 1;
    }
    int pick = 0;
    while (taken[pick]) ++pick;
    c.color[v] = pick;
    c.ncolors = std::max(c.ncolors, pick + 1);
  }
  return c;
}

inline Coloring greedy_coloring(const Topology& t) {
  std::vector<NodeId> order(t.n());
  for (int i = 0; i < t.n(); ++i) order[i] = i + 1;
  return greedy_coloring(t, order);
}

/// Per-node split of the neighborhood by color: lower = N(i) with smaller
/// color, upper = the rest.
struct ColorPartition {
  std::vector<std::vector<NodeId>> lower;  // C(i)
  std::vector<std::vector<NodeId>> upper;  // C-bar(i)

  static ColorPartition build(const Topology& t, const Coloring& c) {
    ColorPartition p;
    p.lower.assign(t.n() + 1, {});
    p.upper.assign(t.n() + 1, {});
    for (NodeId v = 1; v <= t.n(); ++v)
      for (NodeId w : t.neighbors(v))
        (c.of(w) < c.of(v) ? p.lower[v] : p.upper[v]).push_back(w);
    return p;
  }
};

/// Circular color distance: b - a going forward around the color cycle.
inline int circular_distance(int a, int b, int ncolors) {
  if (a < 0 || a >= ncolors || b < 0 || b >= ncolors)
    throw ConfigError("circular_distance: color out of range");
  return b >= a ? b - a : b + ncolors - a;
}

/// Canned topologies used by the bundled configs and tests.
inline Topology make_complete(int n) {
  std::vector<std::pair<NodeId, NodeId>> e;
  for (int a = 1; a <= n; ++a)
    for (int b = a + 1; b <= n; ++b) e.emplace_back(a, b);
  return Topology::build(n, e);
}

inline Topology make_ring(int n) {
  std::vector<std::pair<NodeId, NodeId>> e;
  for (int a = 1; a <= n; ++a) e.emplace_back(a, a % n + 1);
  if (n == 2) e.pop_back();  // avoid the duplicate (1,2)
  return Topology::build(n, e);
}

inline Topology make_path(int n) {
  std::vector<std::pair<NodeId, NodeId>> e;
  for (int a = 1; a < n; ++a) e.emplace_back(a, a + 1);
  return Topology::build(n, e);
}

inline Topology make_grid(int rows, int cols) {
  auto id = [cols](int r, int c) { return r * cols + c + 1; };
  std::vector<std::pair<NodeId, NodeId>> e;
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) {
      if (c + 1 < cols) e.emplace_back(id(r, c), id(r, c + 1));
      if (r + 1 < rows) e.emplace_back(id(r, c), id(r + 1, c));
    }
  return Topology::build(rows * cols, e);
}

}  // namespace ordsim
