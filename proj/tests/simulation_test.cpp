#include <gtest/gtest.h>

#include <map>
#include <set>

#include "causalec/checker.hpp"
#include "causalec/simulation.hpp"

using namespace causalec;

namespace {

Scenario small_workload() {
  Scenario sc;
  sc.ops_per_client = 40;
  return sc;
}

std::vector<const OpRespond*> responds(const Trace& t) {
  std::vector<const OpRespond*> out;
  for (const auto& ev : t.events) {
    if (const auto* r = std::get_if<OpRespond>(&ev)) out.push_back(r);
  }
  return out;
}

}  // namespace

TEST(Rng, UniformStaysInBounds) {
  Rng rng(4);
  for (int i = 0; i < 10000; ++i) {
    const auto x = rng.uniform(-3, 7);
    ASSERT_GE(x, -3);
    ASSERT_LE(x, 7);
  }
  EXPECT_EQ(Rng(9).next(), Rng(9).next());
}

TEST(Simulation, SameSeedSameTrace) {
  const auto sc = small_workload();
  const auto a = to_jsonl(simulate(sc, 17));
  const auto b = to_jsonl(simulate(sc, 17));
  EXPECT_EQ(fnv1a(a), fnv1a(b));
  EXPECT_EQ(a, b);
  EXPECT_NE(a, to_jsonl(simulate(sc, 18)));
}

TEST(Simulation, ZeroDelaySingleWriterReadsItsOwnWrite) {
  const auto sc = scenario_from_json(nlohmann::json::parse(R"({
    "n": 5, "k": 3, "value_len": 4, "delay_min": 0, "delay_max": 0,
    "client_servers": [3],
    "script": [
      {"client": 0, "op": "write", "object": 0, "value": "abcd"},
      {"client": 0, "op": "read", "object": 0}
    ]
  })"));
  const auto t = simulate(sc, 1);
  EXPECT_EQ(t.footer.status, RunStatus::kQuiescent);
  const auto rs = responds(t);
  ASSERT_GE(rs.size(), 2u);
  EXPECT_EQ(rs[0]->tag, (Tag{1, 3}));
  EXPECT_EQ(rs[1]->tag, (Tag{1, 3}));
  EXPECT_EQ(rs[1]->value, (Bytes{'a', 'b', 'c', 'd'}));
  EXPECT_TRUE(check_trace(t).passed());
}

TEST(Simulation, ParityCrashStillPasses) {
  auto sc = small_workload();
  sc.max_crashes = 1;
  sc.crashes = {{4, 0}};
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto t = simulate(sc, seed);
    const auto report = check_trace(t);
    EXPECT_EQ(t.footer.status, RunStatus::kQuiescent) << seed;
    EXPECT_TRUE(report.passed()) << seed << "\n" << report_json(report).dump(2);
  }
}

TEST(Simulation, SystematicCrashForcesDecodedReads) {
  auto sc = small_workload();
  sc.clients = 2;
  sc.client_servers = {1, 3};
  sc.max_crashes = 1;
  sc.crashes = {{0, 0}};
  std::uint64_t decodes = 0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    Simulation sim(sc, seed);
    ASSERT_EQ(sim.run(), RunStatus::kQuiescent);
    const auto& t = sim.trace();
    EXPECT_TRUE(check_trace(t).passed()) << seed;
    EXPECT_GT(t.footer.stats.remote_reads, 0u);
    decodes += t.footer.stats.decodes;
    EXPECT_FALSE(sim.alive()[0]);
  }
  EXPECT_GT(decodes, 0u);
}

TEST(Simulation, CrashAfterQuiescenceChangesNoResults) {
  auto sc = small_workload();
  sc.probes = false;
  const auto base = simulate(sc, 5);
  ASSERT_EQ(base.footer.status, RunStatus::kQuiescent);
  sc.max_crashes = 1;
  sc.crashes = {{2, base.footer.end_step + 1000}};
  const auto crashed = simulate(sc, 5);
  const auto a = responds(base);
  const auto b = responds(crashed);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(*a[i], *b[i]);
}

// Every non-gossip message addressed to a server that never crashed is
// delivered exactly once.
TEST(Simulation, ReliableExactlyOnceDelivery) {
  auto sc = small_workload();
  sc.max_crashes = 1;
  sc.crashes = {{1, 150}};
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto t = simulate(sc, seed);
    std::map<std::uint64_t, int> delivered;
    std::set<std::uint64_t> sent;
    std::set<ServerId> crashed;
    for (const auto& ev : t.events) {
      if (const auto* c = std::get_if<CrashEvent>(&ev)) crashed.insert(c->server);
      const auto* m = std::get_if<MsgEvent>(&ev);
      if (!m) continue;
      if (m->what == MsgEvent::What::kSend) {
        EXPECT_TRUE(sent.insert(m->id).second);
      } else {
        EXPECT_TRUE(sent.contains(m->id));
        ++delivered[m->id];
        if (m->what == MsgEvent::What::kDrop) EXPECT_TRUE(crashed.contains(m->to.id));
      }
    }
    for (auto id : sent) EXPECT_EQ(delivered[id], 1) << "message " << id;
  }
}

TEST(Simulation, StepLimitIsReported) {
  auto sc = small_workload();
  sc.step_limit = 50;
  const auto t = simulate(sc, 2);
  EXPECT_EQ(t.footer.status, RunStatus::kStepLimit);
  EXPECT_LE(t.footer.end_step, 50);
  const auto report = check_trace(t);
  EXPECT_EQ(report.verdict(kConvergence), Verdict::kInconclusive);
  EXPECT_EQ(report.verdict(kStorageStable), Verdict::kInconclusive);
}

TEST(Simulation, FinalSnapshotsCoverAliveServers) {
  auto sc = small_workload();
  sc.n = 4;
  sc.k = 2;
  const auto t = simulate(sc, 8);
  ASSERT_EQ(t.footer.status, RunStatus::kQuiescent);
  std::size_t finals = 0;
  for (const auto& ev : t.events) {
    if (const auto* s = std::get_if<SnapshotEvent>(&ev); s && s->final) {
      ++finals;
      EXPECT_EQ(s->bytes_symbol, 64u);
      EXPECT_EQ(s->bytes_history, 0u);
    }
  }
  EXPECT_EQ(finals, 4u);
}

TEST(Simulation, IdentityCodeIsStable) {
  auto sc = small_workload();
  sc.n = 3;
  sc.k = 3;
  const auto t = simulate(sc, 4);
  EXPECT_TRUE(check_trace(t).passed());
}

TEST(Simulation, RecoverySetHelperFollowsAliveMask) {
  const auto spec = make_code(5, 3, 1);
  EXPECT_TRUE(has_alive_recovery_set(spec, 0, {true, true, true, true, true}));
  EXPECT_TRUE(has_alive_recovery_set(spec, 0, {false, true, true, true, false}));
  EXPECT_FALSE(has_alive_recovery_set(spec, 2, {true, true, false, false, false}));
}

TEST(Simulation, RandomCrashesFollowSeedParity) {
  Scenario sc;
  sc.max_crashes = 1;
  sc.random_crashes = RandomCrashes{1, 2, 10, 20};
  EXPECT_EQ(resolve_crashes(sc, 1).size(), 1u);
  EXPECT_TRUE(resolve_crashes(sc, 2).empty());
  const auto c = resolve_crashes(sc, 3);
  ASSERT_EQ(c.size(), 1u);
  EXPECT_GE(c[0].step, 10);
  EXPECT_LE(c[0].step, 20);
}

// Client 0 writes o0 then o1; client 1 reads o1 and then o0. Whenever the
// o1 read observes client 0's write, the o0 read must not go back in time.
TEST(Simulation, CanonicalCausalDependency) {
  const auto base = nlohmann::json::parse(R"({
    "n": 5, "k": 3, "value_len": 8, "delay_min": 1, "delay_max": 30,
    "client_servers": [0, 4],
    "script": [
      {"client": 0, "op": "write", "object": 0, "value": "first"},
      {"client": 0, "op": "write", "object": 1, "value": "second"},
      {"client": 1, "op": "read", "object": 1, "at": 0},
      {"client": 1, "op": "read", "object": 0}
    ]
  })");
  int observed = 0;
  for (std::uint64_t seed = 1; seed <= 200; ++seed) {
    const auto t = simulate(scenario_from_json(base), seed);
    ASSERT_TRUE(check_trace(t).passed()) << seed;
    std::map<std::uint64_t, const OpRespond*> by_op;
    for (const auto* r : responds(t)) by_op[r->op] = r;
    const auto* w0 = by_op.at(0);
    const auto* w1 = by_op.at(1);
    const auto* r1 = by_op.at((1ull << 32) | 0);
    const auto* r0 = by_op.at((1ull << 32) | 1);
    if (r1->tag == w1->tag) {
      ++observed;
      EXPECT_GE(r0->tag, w0->tag) << seed;
      EXPECT_EQ(r0->value, (Bytes{'f', 'i', 'r', 's', 't', 0, 0, 0}));
    }
  }
  EXPECT_GT(observed, 0);
}

TEST(Simulation, UnrecoverableObjectLeavesOnlyItsReadsPending) {
  const auto sc = load_scenario(std::string(CAUSALEC_SCENARIO_DIR) + "/unrecoverable_object.json");
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto t = simulate(sc, seed);
    const auto g = build_graph(t);
    for (const auto& o : g.ops) {
      if (!o.completed) {
        EXPECT_FALSE(o.is_write());
        EXPECT_EQ(o.object, 2u) << seed;
      }
    }
    const auto report = check_trace(t);
    EXPECT_EQ(report.verdict(kLiveness), Verdict::kPass) << seed;
    EXPECT_TRUE(report.passed()) << seed;
  }
}
