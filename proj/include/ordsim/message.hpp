#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ordsim/graph.hpp"
#include "ordsim/trace.hpp"

namespace ordsim {

enum class PayloadKind {
  Ping,        // synthetic traffic
  Pairing,     // backtrack: pairing message, no donation request
  Request,     // backtrack: pairing message with a donation request
  Donation,    // backtrack: frontier transfer
  Value,       // solver: approximation x_j
  ResPartial,  // solver: convergecast partial sum
  ResVerdict,  // solver: broadcast verdict
  Control      // pulse bookkeeping (rank + message count)
};

inline const char* to_string(PayloadKind k) {
  switch (k) {
    case PayloadKind::Ping: return "ping";
    case PayloadKind::Pairing: return "pairing";
    case PayloadKind::Request: return "request";
    case PayloadKind::Donation: return "donation";
    case PayloadKind::Value: return "value";
    case PayloadKind::ResPartial: return "res_partial";
    case PayloadKind::ResVerdict: return "res_verdict";
    case PayloadKind::Control: return "control";
  }
  return "?";
}

struct Payload {
  PayloadKind kind = PayloadKind::Ping;
  std::vector<std::vector<int>> paths;  // Donation: subproblem paths
  double value = 0.0;                   // Value: x_j; ResPartial: partial sum
  int64_t iter = 0;                     // solver iteration / traffic hop tag
  bool flag = false;                    // ResVerdict: converged
  int64_t count = 0;                    // Control: |MSG_j^i|

  Json tag() const {
    Json j;
    j["pl"] = to_string(kind);
    switch (kind) {
      case PayloadKind::Donation: j["n"] = static_cast<int64_t>(paths.size()); break;
      case PayloadKind::Value:
        j["x"] = value;
        j["k"] = iter;
        break;
      case PayloadKind::ResPartial:
        j["sum"] = value;
        j["k"] = iter;
        break;
      case PayloadKind::ResVerdict:
        j["ok"] = flag;
        j["k"] = iter;
        break;
      default: break;
    }
    return j;
  }
};

/// Ordering metadata riding on a message. Only the fields the active gate
/// needs are populated.
struct Attachments {
  int64_t mu = -1;      // tolerance; kMuInfinity = unbounded; -1 = absent
  int64_t s_own = -1;   // sender's s_j^{j->i} including this message
  std::vector<std::tuple<NodeId, NodeId, int64_t>> s_entries;  // (k, l, count)
  std::vector<std::pair<NodeId, int64_t>> clock_entries;       // (h, E_j^h)
  int64_t send_rank = -1;  // pulse framework: sender pulse rank
  int64_t rho = -1;        // pulse framework: minimum delay
  bool control = false;
  int64_t control_count = 0;

  int64_t scalar_count() const {
    int64_t c = 0;
    if (mu >= 0) ++c;
    if (s_own >= 0) ++c;
    c += static_cast<int64_t>(s_entries.size()) * 3;
    c += static_cast<int64_t>(clock_entries.size()) * 2;
    if (send_rank >= 0) ++c;
    if (rho >= 0) ++c;
    if (control) ++c;
    return c;
  }

  Json to_json() const {
    Json j = Json::object();
    if (s_own >= 0) j["own"] = s_own;
    if (!s_entries.empty()) {
      Json arr = Json::array();
      for (auto& [k, l, c] : s_entries) arr.push_back(Json::array({k, l, c}));
      j["s"] = arr;
    }
    if (!clock_entries.empty()) {
      Json arr = Json::array();
      for (auto& [h, v] : clock_entries) arr.push_back(Json::array({h, v}));
      j["E"] = arr;
    }
    if (control) {
      j["ctl"] = 1;
      j["cnt"] = control_count;
    }
    return j;
  }
};

struct Envelope {
  MsgId id = -1;
  NodeId src = 0;
  NodeId dst = 0;
  Payload payload;
  Attachments att;
  int64_t sender_time = 0;  // event time (event framework) or pulse rank
  int64_t send_tick = 0;
  int64_t arrival_tick = 0;
  uint64_t tiebreak = 0;
};

struct MsgOut {
  NodeId dest = 0;
  Payload payload;
};

enum class GateDecision { Accept, Postpone };

}  // namespace ordsim
