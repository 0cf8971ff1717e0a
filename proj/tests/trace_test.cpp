#include <gtest/gtest.h>

#include <sstream>

#include "causalec/simulation.hpp"
#include "causalec/trace.hpp"

using namespace causalec;

TEST(Fnv1a, ReferenceVectors) {
  EXPECT_EQ(fnv1a(""), 0xcbf29ce484222325ull);
  EXPECT_EQ(fnv1a("a"), 0xaf63dc4c8601ec8cull);
  EXPECT_EQ(fnv1a("foobar"), 0x85944171f73967e8ull);
}

TEST(TraceJson, HexRoundTrip) {
  const Bytes b{0x00, 0x0f, 0xa0, 0xff};
  EXPECT_EQ(trace_json::hex(b), "000fa0ff");
  EXPECT_EQ(trace_json::unhex("000fa0ff"), b);
  EXPECT_THROW(trace_json::unhex("abc"), TraceError);
  EXPECT_THROW(trace_json::unhex("zz"), TraceError);
}

TEST(TraceJson, EveryEventKindRoundTrips) {
  Trace t;
  t.header = TraceHeader{5, 3, 4, 2, 1, 99, true, false};
  t.events.emplace_back(OpInvoke{1, 0, 7, TraceOpKind::kWrite, 2, 1, Bytes{1, 2, 3, 4}, {{0, Tag{1, 1}}}});
  t.events.emplace_back(MsgEvent{1, MsgEvent::What::kSend, "WriteReq", Address::client(0), Address::server(2), 3, 40});
  t.events.emplace_back(MsgEvent{4, MsgEvent::What::kDeliver, "WriteReq", Address::client(0), Address::server(2), 3, 40});
  t.events.emplace_back(MsgEvent{5, MsgEvent::What::kDrop, "Propagate", Address::server(2), Address::server(4), 4, 60});
  t.events.emplace_back(OpRespond{6, 0, 7, Tag{2, 2}, Bytes{}, {{0, Tag{1, 1}}, {1, Tag{2, 2}}}});
  t.events.emplace_back(CrashEvent{8, 4});
  t.events.emplace_back(SnapshotEvent{9, 1, 4, 8, false});
  t.events.emplace_back(ProbePhaseEvent{10});
  t.events.emplace_back(OpInvoke{11, 2, 8, TraceOpKind::kProbe, 1, 0, Bytes{}, {}});
  t.events.emplace_back(ViolationEvent{12, 3, "boom"});
  t.footer.status = RunStatus::kViolation;
  t.footer.end_step = 12;
  t.footer.stats.writes = 1;
  t.footer.stats.gossip_messages = 17;

  const auto text = to_jsonl(t);
  std::istringstream in(text);
  const auto back = read_jsonl(in);
  EXPECT_EQ(back, t);
  EXPECT_EQ(to_jsonl(back), text);
}

TEST(TraceJson, FieldOrderIsCanonical) {
  Trace t;
  t.header = TraceHeader{4, 2, 8, 1, 0, 5, false, false};
  const auto text = to_jsonl(t);
  EXPECT_EQ(text.substr(0, text.find('\n')),
            R"({"ev":"header","n":4,"k":2,"value_len":8,"clients":1,"max_crashes":0,"seed":5,"fifo":false,"switch_servers":false})");
}

TEST(TraceJson, MalformedInputIsRejected) {
  const char* bad[] = {
      "",
      "not json\n",
      R"({"ev":"header","n":4})" "\n",
      R"({"ev":"mystery"})" "\n",
  };
  for (const char* text : bad) {
    std::istringstream in(text);
    EXPECT_THROW(read_jsonl(in), TraceError) << text;
  }
  Trace t;
  auto text = to_jsonl(t);
  text = text.substr(0, text.find('\n') + 1);  // header only
  std::istringstream in(text);
  EXPECT_THROW(read_jsonl(in), TraceError);
}

TEST(TraceJson, SimulatedTraceRoundTrips) {
  Scenario sc;
  sc.ops_per_client = 20;
  const auto t = simulate(sc, 3);
  std::istringstream in(to_jsonl(t));
  EXPECT_EQ(read_jsonl(in), t);
}

TEST(StorageCsv, OneRowPerSnapshot) {
  Trace t;
  t.events.emplace_back(SnapshotEvent{10, 0, 64, 128, false});
  t.events.emplace_back(CrashEvent{11, 1});
  t.events.emplace_back(SnapshotEvent{20, 0, 64, 0, true});
  std::ostringstream os;
  write_storage_csv(os, t);
  EXPECT_EQ(os.str(), "step,server,bytes_symbol,bytes_history\n10,0,64,128\n20,0,64,0\n");
}
