#pragma once

#include <cstdint>
#include <fstream>
#include <istream>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "ordsim/graph.hpp"

namespace ordsim {

using Json = nlohmann::ordered_json;
using MsgId = int64_t;
using Seq = int64_t;

/// Sentinel for an unbounded tolerance (the "unordered channel" setting).
constexpr int64_t kMuInfinity = std::numeric_limits<int64_t>::max();

enum class RecordKind { Send, Deliver, Postpone, Release, Pulse, Local };

inline const char* to_string(RecordKind k) {
  switch (k) {
    case RecordKind::Send: return "send";
    case RecordKind::Deliver: return "deliver";
    case RecordKind::Postpone: return "postpone";
    case RecordKind::Release: return "release";
    case RecordKind::Pulse: return "pulse";
    case RecordKind::Local: return "local";
  }
  return "?";
}

inline std::optional<RecordKind> record_kind_from(const std::string& s) {
  if (s == "send") return RecordKind::Send;
  if (s == "deliver") return RecordKind::Deliver;
  if (s == "postpone") return RecordKind::Postpone;
  if (s == "release") return RecordKind::Release;
  if (s == "pulse") return RecordKind::Pulse;
  if (s == "local") return RecordKind::Local;
  return std::nullopt;
}

/// One line of the execution log. Field use by kind:
///   send:     node=sender, peer=dest, msg, and t (event time) or rank (pulse).
///   deliver:  node=receiver, peer=origin, msg, t or rank of the receiving event.
///   postpone: node=receiver, peer=origin, msg (arrival rejected by the gate).
///   release:  node=receiver, peer=origin, msg (postponed message accepted).
///   pulse:    node, rank.
///   local:    node, t (an event with no input message, e.g. the initial one).
/// mu and rho carry the tolerance / minimum-delay attachments; everything else
/// rides in `attach` (counter entries, clock entries, payload tags).
struct TraceRecord {
  RecordKind kind = RecordKind::Local;
  Seq seq = 0;
  NodeId node = 0;
  NodeId peer = 0;
  MsgId msg = -1;
  int64_t t = -1;
  int64_t rank = -1;
  int64_t mu = -1;           // -1 = absent; kMuInfinity = unbounded
  int64_t rho = -1;          // -1 = absent
  Json attach;               // object or null

  Json to_json() const {
    Json j;
    j["kind"] = to_string(kind);
    j["seq"] = seq;
    j["node"] = node;
    if (peer != 0) j["peer"] = peer;
    if (msg >= 0) j["msg"] = msg;
    if (t >= 0) j["t"] = t;
    if (rank >= 0) j["rank"] = rank;
    if (mu >= 0) j["mu"] = (mu == kMuInfinity ? Json("inf") : Json(mu));
    if (rho >= 0) j["rho"] = rho;
    if (!attach.is_null()) j["attach"] = attach;
    return j;
  }

  static TraceRecord from_json(const Json& j) {
    TraceRecord r;
    auto k = record_kind_from(j.at("kind").get<std::string>());
    if (!k) throw ConfigError("trace: unknown record kind");
    r.kind = *k;
    r.seq = j.at("seq").get<Seq>();
    r.node = j.at("node").get<NodeId>();
    if (j.contains("peer")) r.peer = j["peer"].get<NodeId>();
    if (j.contains("msg")) r.msg = j["msg"].get<MsgId>();
    if (j.contains("t")) r.t = j["t"].get<int64_t>();
    if (j.contains("rank")) r.rank = j["rank"].get<int64_t>();
    if (j.contains("mu")) r.mu = j["mu"].is_string() ? kMuInfinity : j["mu"].get<int64_t>();
    if (j.contains("rho")) r.rho = j["rho"].get<int64_t>();
    if (j.contains("attach")) r.attach = j["attach"];
    return r;
  }
};

/// Append-only execution log, serialized as JSON Lines.
class Trace {
public:
  TraceRecord& append(TraceRecord r) {
    r.seq = static_cast<Seq>(records_.size());
    records_.push_back(std::move(r));
    return records_.back();
  }

  const std::vector<TraceRecord>& records() const { return records_; }
  size_t size() const { return records_.size(); }
  const TraceRecord& operator[](size_t i) const { return records_[i]; }
  bool empty() const { return records_.empty(); }

  void write(std::ostream& out) const {
    for (const auto& r : records_) out << r.to_json().dump() << '\n';
  }

  std::string to_jsonl() const {
    std::ostringstream os;
    write(os);
    return os.str();
  }

  static Trace read(std::istream& in) {
    Trace t;
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty()) continue;
      Json j;
      try {
        j = Json::parse(line);
      } catch (const std::exception& e) {
        throw ConfigError("trace: malformed JSON at line " + std::to_string(lineno) + ": " +
                          e.what());
      }
      try {
        t.records_.push_back(TraceRecord::from_json(j));
      } catch (const std::exception& e) {
        throw ConfigError("trace: bad record at line " + std::to_string(lineno) + ": " +
                          e.what());
      }
    }
    return t;
  }

  static Trace read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("trace: cannot open " + path);
    return read(in);
  }

private:
  std::vector<TraceRecord> records_;
};

}  // namespace ordsim
