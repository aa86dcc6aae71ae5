#include <doctest.h>

#include <sstream>

#include "ordsim/config.hpp"
#include "ordsim/verifier.hpp"

using namespace ordsim;

namespace {

SimConfig traffic(uint64_t seed, const char* gate, const char* mu, int64_t inject = 0) {
  std::string cfg = std::string(R"({"seed": )") + std::to_string(seed) +
                    R"(, "topology": {"kind": "complete", "n": 4},
                        "latency": {"model": "uniform", "lo": 1, "hi": 25},
                        "ordering": {"gate": ")" + gate + R"(", "mu": )" + mu + R"(},
                        "application": {"kind": "traffic", "credits": 5})" +
                    (inject > 0 ? std::string(R"(, "inject": {"force_accept_at": )") +
                                      std::to_string(inject) + "}"
                                : "") +
                    "}";
  return parse_config_text(cfg);
}

}  // namespace

TEST_CASE("fixture outcomes") {
  auto all = fixtures();
  SUBCASE("fig3 violates the causal condition at the chain's last delivery") {
    const auto& f = fixture("fig3", all);
    auto v = check(f.trace, Condition::Cdc);
    REQUIRE(v.has_value());
    CHECK(v->seq == 7);  // the delivery that closes the overtaking chain
    CHECK(!check(f.trace, Condition::Fdc).has_value());
  }
  SUBCASE("fig1 traces are causally clean") {
    CHECK(!check(fixture("fig1a", all).trace, Condition::Fdc).has_value());
    CHECK(!check(fixture("fig1b", all).trace, Condition::Fdc).has_value());
  }
  SUBCASE("fig6a shows an overtaking-attributed failure, fig6b does not") {
    auto a = scan_donation_overtaking(fixture("fig6a", all).trace);
    CHECK(a.failures == 1);
    auto b = scan_donation_overtaking(fixture("fig6b", all).trace);
    CHECK(b.failures == 0);
  }
}

TEST_CASE("gate-produced traces satisfy their own definitional conditions") {
  for (uint64_t seed = 1; seed <= 10; ++seed) {
    CHECK(!check(run(traffic(seed, "fdc", "0")).trace, Condition::Fdc).has_value());
    CHECK(!check(run(traffic(seed, "cdc", "0")).trace, Condition::Cdc).has_value());
    CHECK(!check(run(traffic(seed, "rfdc", "1")).trace, Condition::Rfdc).has_value());
    CHECK(!check(run(traffic(seed, "rcdc", "2")).trace, Condition::Rcdc).has_value());
  }
}

TEST_CASE("a forced early delivery is always detected") {
  int injected = 0;
  for (uint64_t seed = 1; seed <= 30; ++seed) {
    for (auto [gate, cond] : std::vector<std::pair<const char*, Condition>>{
             {"fdc", Condition::Fdc}, {"cdc", Condition::Cdc}}) {
      auto plain = run(traffic(seed, gate, "0"));
      if (plain.report.postponed_total == 0) continue;  // nothing to force
      auto res = run(traffic(seed, gate, "0", 1));
      ++injected;
      auto v = check(res.trace, cond);
      CHECK_MESSAGE(v.has_value(), "gate ", gate, " seed ", seed);
    }
  }
  CHECK(injected > 10);
}

TEST_CASE("verifier rejects malformed traces") {
  SUBCASE("delivery without a send") {
    Trace t;
    TraceRecord r;
    r.kind = RecordKind::Deliver;
    r.node = 1;
    r.peer = 2;
    r.msg = 7;
    r.t = 1;
    t.append(std::move(r));
    CHECK_THROWS_AS(check(t, Condition::Fdc), ConfigError);
  }
  SUBCASE("gapped event times") {
    Trace t;
    TraceRecord r;
    r.kind = RecordKind::Local;
    r.node = 1;
    r.t = 2;
    t.append(std::move(r));
    CHECK_THROWS_AS(check(t, Condition::Fdc), ConfigError);
  }
  SUBCASE("condition and framework mismatch") {
    Trace t;
    TraceRecord r;
    r.kind = RecordKind::Pulse;
    r.node = 1;
    r.rank = 1;
    t.append(std::move(r));
    CHECK_THROWS_AS(check(t, Condition::Fdc), ConfigError);
  }
}

TEST_CASE("trace serialization round-trips") {
  auto res = run(traffic(5, "rcdc", "1"));
  std::string text = res.trace.to_jsonl();
  std::istringstream in(text);
  Trace back = Trace::read(in);
  CHECK(back.to_jsonl() == text);
  CHECK(back.size() == res.trace.size());
}

TEST_CASE("relaxed conditions fail when checked against tighter tolerances") {
  // an rfdc(2) run generally admits transits a zero tolerance forbids
  int failures = 0;
  for (uint64_t seed = 1; seed <= 15; ++seed) {
    auto res = run(traffic(seed, "rfdc", "2"));
    CheckParams strict;
    strict.mu_override = 0;
    if (check(res.trace, Condition::Rfdc, strict)) ++failures;
  }
  CHECK(failures > 0);
}
