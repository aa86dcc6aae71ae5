#include <doctest.h>

#include <set>

#include "ordsim/app_backtrack.hpp"
#include "ordsim/config.hpp"
#include "ordsim/verifier.hpp"

using namespace ordsim;

namespace {

// Independent n-queens enumeration for the tree-source oracle: direct
// recursive counting, no TreeSource involved.
void queens_rec(int n, std::vector<int>& cols, int64_t& leaves, int64_t& solutions) {
  int row = static_cast<int>(cols.size());
  if (row == n) {
    ++leaves;
    ++solutions;
    return;
  }
  bool any = false;
  for (int c = 0; c < n; ++c) {
    bool ok = true;
    for (int r = 0; r < row && ok; ++r)
      if (cols[r] == c || std::abs(cols[r] - c) == row - r) ok = false;
    if (!ok) continue;
    any = true;
    cols.push_back(c);
    queens_rec(n, cols, leaves, solutions);
    cols.pop_back();
  }
  if (!any) ++leaves;  // dead end: a leaf the branching procedure solves
}

std::pair<int64_t, int64_t> queens_oracle(int n) {
  std::vector<int> cols;
  int64_t leaves = 0, solutions = 0;
  queens_rec(n, cols, leaves, solutions);
  return {leaves, solutions};
}

std::string kz_config(uint64_t seed, const std::string& topo, const std::string& gate,
                      const std::string& mu, int64_t leaves, uint64_t tree_seed,
                      int64_t hi_latency = 25) {
  return std::string(R"({"seed": )") + std::to_string(seed) + R"(, "topology": )" + topo +
         R"(, "latency": {"model": "uniform", "lo": 1, "hi": )" + std::to_string(hi_latency) +
         R"(}, "ordering": {"gate": ")" + gate + R"(", "mu": )" + mu +
         R"(}, "application": {"kind": "kz", "tree": "synthetic", "tree_seed": )" +
         std::to_string(tree_seed) + R"(, "leaves": )" + std::to_string(leaves) +
         R"(, "max_branching": 4}, "limits": {"max_events": 500000}})";
}

}  // namespace

TEST_CASE("synthetic trees have exactly the requested leaves") {
  for (uint64_t seed : {1ULL, 5ULL, 9ULL}) {
    for (int64_t want : {1LL, 10LL, 57LL, 200LL}) {
      SyntheticTree t(seed, 4, want);
      CHECK(t.total_leaves() == want);
      CHECK(static_cast<int64_t>(enumerate_leaves(t).size()) == want);
    }
  }
}

TEST_CASE("queens tree matches the direct enumeration") {
  for (int n : {4, 5}) {
    auto [leaves, solutions] = queens_oracle(n);
    QueensTree t(n);
    CHECK(t.total_leaves() == leaves);
    auto all = enumerate_leaves(t);
    CHECK(static_cast<int64_t>(all.size()) == leaves);
    int64_t full = 0;
    for (auto& p : all)
      if (static_cast<int>(p.size()) == n) ++full;
    CHECK(full == solutions);
  }
  CHECK(queens_oracle(4).second == 2);   // the classic counts
  CHECK(queens_oracle(5).second == 10);
}

TEST_CASE("event handler follows the donation protocol") {
  auto topo = make_complete(4);
  auto tree = std::make_shared<SyntheticTree>(3, 4, 40);
  BacktrackApp app(topo, tree, 7, 1);

  SUBCASE("idle node answers a pairing with one request plus pairings") {
    std::vector<MsgOut> out;
    Json annot = Json::object();
    Envelope e;
    e.src = 1;
    e.dst = 2;
    e.payload.kind = PayloadKind::Pairing;
    app.on_message(2, e, out, annot);  // node 2 holds nothing
    REQUIRE(out.size() == 3);          // one per neighbor
    int requests = 0, pairings = 0;
    std::set<NodeId> dests;
    for (auto& m : out) {
      dests.insert(m.dest);
      if (m.payload.kind == PayloadKind::Request) ++requests;
      if (m.payload.kind == PayloadKind::Pairing) ++pairings;
    }
    CHECK(requests == 1);
    CHECK(pairings == 2);
    CHECK(dests.size() == 3);
    CHECK(!dests.count(2));
  }

  SUBCASE("busy node donates the shallowest half on request") {
    auto queens = std::make_shared<QueensTree>(5);
    BacktrackApp qapp(topo, queens, 7, 1);
    // seed node 3 with the five level-1 subproblems through a donation;
    // it branches the leftmost, leaving a shallowest tier of four
    std::vector<MsgOut> out;
    Json annot = Json::object();
    Envelope don;
    don.src = 1;
    don.dst = 3;
    don.payload.kind = PayloadKind::Donation;
    don.payload.paths = {{0}, {1}, {2}, {3}, {4}};
    qapp.on_message(3, don, out, annot);
    out.clear();
    annot = Json::object();
    Envelope req;
    req.src = 2;
    req.dst = 3;
    req.payload.kind = PayloadKind::Request;
    qapp.on_message(3, req, out, annot);
    std::vector<std::vector<int>> donated;
    for (auto& m : out)
      if (m.payload.kind == PayloadKind::Donation) {
        donated = m.payload.paths;
        CHECK(m.dest == 2);
      }
    // ceil(4/2) = 2, leftmost-first from the remaining tier {1},{2},{3},{4}
    REQUIRE(donated.size() == 2);
    CHECK(donated[0] == std::vector<int>{1});
    CHECK(donated[1] == std::vector<int>{2});
  }

  SUBCASE("a node with a single subproblem refuses but still branches") {
    BacktrackApp solo(topo, tree, 9, 4);  // node 4 holds the root alone
    std::vector<MsgOut> out;
    Json annot = Json::object();
    Envelope req;
    req.src = 1;
    req.dst = 4;
    req.payload.kind = PayloadKind::Request;
    solo.on_message(4, req, out, annot);
    for (auto& m : out) CHECK(m.payload.kind != PayloadKind::Donation);
    CHECK(annot.contains("br"));  // it branched the root anyway
  }
}

TEST_CASE("donation sizes follow the ceiling rule") {
  auto topo = make_complete(3);
  auto queens = std::make_shared<QueensTree>(5);
  for (size_t tier = 2; tier <= 5; ++tier) {
    BacktrackApp app(topo, queens, 1, 1);
    std::vector<MsgOut> out;
    Json annot = Json::object();
    Envelope don;
    don.src = 2;
    don.dst = 3;
    don.payload.kind = PayloadKind::Donation;
    for (size_t k = 0; k < tier; ++k) don.payload.paths.push_back({static_cast<int>(k)});
    app.on_message(3, don, out, annot);  // branches the leftmost, tier-1 remain
    out.clear();
    annot = Json::object();
    Envelope req;
    req.src = 2;
    req.dst = 3;
    req.payload.kind = PayloadKind::Request;
    app.on_message(3, req, out, annot);
    size_t donated = 0;
    for (auto& m : out)
      if (m.payload.kind == PayloadKind::Donation) donated = m.payload.paths.size();
    CHECK(donated == tier / 2);  // ceil((tier-1)/2)
  }
}

TEST_CASE("every leaf is solved exactly once across gates and seeds") {
  std::vector<std::string> topos = {R"({"kind": "complete", "n": 4})",
                                    R"({"kind": "ring", "n": 8})"};
  for (const auto& topo : topos) {
    for (uint64_t seed = 1; seed <= 6; ++seed) {
      for (auto [gate, mu] : std::vector<std::pair<std::string, std::string>>{
               {"fdc", "0"}, {"cdc", "0"}, {"rcdc", "\"kz\""}, {"rfdc", "2"}}) {
        auto cfg = parse_config_text(kz_config(seed, topo, gate, mu, 35, seed * 3 + 1));
        auto res = run(std::move(cfg));
        REQUIRE_MESSAGE(res.report.completed, res.report.error);
        SyntheticTree tree(seed * 3 + 1, 4, 35);
        auto census = branch_census(res.trace);
        auto leaves = enumerate_leaves(tree);
        CHECK(census.leaf_solves.size() == leaves.size());
        for (auto& p : leaves) {
          auto it = census.leaf_solves.find(p);
          REQUIRE(it != census.leaf_solves.end());
          CHECK(it->second == 1);
        }
        for (auto& [p, cnt] : census.branchings) CHECK(cnt == 1);
      }
    }
  }
}

TEST_CASE("an isolated node works the whole tree alone") {
  auto cfg = parse_config_text(R"({"seed": 4,
    "topology": {"kind": "explicit", "n": 1, "edges": []},
    "ordering": {"gate": "fdc"},
    "application": {"kind": "kz", "tree": "synthetic", "tree_seed": 5, "leaves": 23,
                    "max_branching": 4}})");
  auto res = run(std::move(cfg));
  REQUIRE_MESSAGE(res.report.completed, res.report.error);
  SyntheticTree tree(5, 4, 23);
  auto census = branch_census(res.trace);
  CHECK(static_cast<int64_t>(census.leaf_solves.size()) == 23);
  for (auto& [p, c] : census.leaf_solves) CHECK(c == 1);
  CHECK(res.report.sent == 0);
}

TEST_CASE("four queens distributed equals four queens sequential") {
  auto cfg = parse_config_text(R"({"seed": 2,
    "topology": {"kind": "complete", "n": 4},
    "latency": {"model": "uniform", "lo": 1, "hi": 15},
    "ordering": {"gate": "rcdc", "mu": "kz"},
    "application": {"kind": "kz", "tree": "queens", "queens": 4}})");
  auto res = run(std::move(cfg));
  REQUIRE_MESSAGE(res.report.completed, res.report.error);
  QueensTree tree(4);
  auto census = branch_census(res.trace);
  auto leaves = enumerate_leaves(tree);
  CHECK(census.leaf_solves.size() == leaves.size());
  for (auto& p : leaves) CHECK(census.leaf_solves.at(p) == 1);
}
