#pragma once

#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

#include "causalec/common.hpp"
#include "causalec/message.hpp"
#include "causalec/types.hpp"

namespace causalec {

class TraceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TraceHeader {
  std::size_t n = 0;
  std::size_t k = 0;
  std::size_t value_len = 0;
  std::uint32_t clients = 0;
  std::uint32_t max_crashes = 0;
  std::uint64_t seed = 0;
  bool fifo = false;
  bool switch_servers = false;

  friend bool operator==(const TraceHeader&, const TraceHeader&) = default;
};

enum class TraceOpKind : std::uint8_t { kWrite, kRead, kProbe };

struct OpInvoke {
  std::int64_t step = 0;
  ClientId client = 0;
  std::uint64_t op = 0;
  TraceOpKind kind = TraceOpKind::kWrite;
  ServerId server = 0;
  ObjectId object = 0;
  Bytes value;  // writes only
  DependencyContext ctx;  // session context when issued

  friend bool operator==(const OpInvoke&, const OpInvoke&) = default;
};

struct OpRespond {
  std::int64_t step = 0;
  ClientId client = 0;
  std::uint64_t op = 0;
  Tag tag;
  Bytes value;  // reads only
  DependencyContext ctx;  // session context after completion

  friend bool operator==(const OpRespond&, const OpRespond&) = default;
};

struct MsgEvent {
  enum class What : std::uint8_t { kSend, kDeliver, kDrop };
  std::int64_t step = 0;
  What what = What::kSend;
  std::string type;
  Address from;
  Address to;
  std::uint64_t id = 0;
  std::uint64_t bytes = 0;

  friend bool operator==(const MsgEvent&, const MsgEvent&) = default;
};

struct CrashEvent {
  std::int64_t step = 0;
  ServerId server = 0;
  friend bool operator==(const CrashEvent&, const CrashEvent&) = default;
};

struct SnapshotEvent {
  std::int64_t step = 0;
  ServerId server = 0;
  std::uint64_t bytes_symbol = 0;
  std::uint64_t bytes_history = 0;
  bool final = false;
  friend bool operator==(const SnapshotEvent&, const SnapshotEvent&) = default;
};

struct ViolationEvent {
  std::int64_t step = 0;
  ServerId server = 0;
  std::string what;
  friend bool operator==(const ViolationEvent&, const ViolationEvent&) = default;
};

/// Phase marker: operations after it are post-quiescence probes.
struct ProbePhaseEvent {
  std::int64_t step = 0;
  friend bool operator==(const ProbePhaseEvent&, const ProbePhaseEvent&) = default;
};

using TraceEvent = std::variant<OpInvoke, OpRespond, MsgEvent, CrashEvent, SnapshotEvent,
                                ViolationEvent, ProbePhaseEvent>;

enum class RunStatus : std::uint8_t { kQuiescent, kStalled, kStepLimit, kViolation };

struct RunStats {
  std::uint64_t writes = 0;
  std::uint64_t local_reads = 0;
  std::uint64_t remote_reads = 0;
  std::uint64_t deferred_reads = 0;
  std::uint64_t decodes = 0;  // workload reads completed by decoding
  std::uint64_t probe_decodes = 0;
  std::uint64_t fetches = 0;
  std::uint64_t fetch_decodes = 0;
  std::uint64_t highest_tag_violations = 0;
  std::uint64_t decode_tag_mismatches = 0;
  std::uint64_t messages = 0;
  std::uint64_t gossip_messages = 0;

  friend bool operator==(const RunStats&, const RunStats&) = default;
};

struct TraceFooter {
  RunStatus status = RunStatus::kQuiescent;
  std::int64_t end_step = 0;
  RunStats stats;

  friend bool operator==(const TraceFooter&, const TraceFooter&) = default;
};

struct Trace {
  TraceHeader header;
  std::vector<TraceEvent> events;
  TraceFooter footer;

  friend bool operator==(const Trace&, const Trace&) = default;
};

inline std::string_view to_string(TraceOpKind k) {
  switch (k) {
    case TraceOpKind::kWrite: return "write";
    case TraceOpKind::kRead: return "read";
    case TraceOpKind::kProbe: return "probe";
  }
  return "?";
}

inline std::string_view to_string(RunStatus s) {
  switch (s) {
    case RunStatus::kQuiescent: return "quiescent";
    case RunStatus::kStalled: return "stalled";
    case RunStatus::kStepLimit: return "step_limit";
    case RunStatus::kViolation: return "violation";
  }
  return "?";
}

// --- JSON-lines encoding ----------------------------------------------------
//
// One event per line; keys are emitted in a fixed order so identical runs
// produce byte-identical files.

namespace trace_json {

using ojson = nlohmann::ordered_json;

inline std::string hex(const Bytes& b) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string s;
  s.reserve(b.size() * 2);
  for (auto x : b) {
    s.push_back(kDigits[x >> 4]);
    s.push_back(kDigits[x & 0xF]);
  }
  return s;
}

inline Bytes unhex(std::string_view s) {
  if (s.size() % 2 != 0) throw TraceError("trace: odd-length hex");
  auto nibble = [](char c) -> std::uint8_t {
    if (c >= '0' && c <= '9') return static_cast<std::uint8_t>(c - '0');
    if (c >= 'a' && c <= 'f') return static_cast<std::uint8_t>(c - 'a' + 10);
    throw TraceError("trace: bad hex digit");
  };
  Bytes b(s.size() / 2);
  for (std::size_t i = 0; i < b.size(); ++i) {
    b[i] = static_cast<std::uint8_t>((nibble(s[2 * i]) << 4) | nibble(s[2 * i + 1]));
  }
  return b;
}

inline ojson tag(const Tag& t) { return ojson::array({t.seq, t.writer}); }
inline Tag tag(const nlohmann::ordered_json& j) {
  return Tag{j.at(0).get<std::uint64_t>(), j.at(1).get<ServerId>()};
}

inline ojson ctx(const DependencyContext& c) {
  auto a = ojson::array();
  for (const auto& [o, t] : c) a.push_back(ojson::array({o, t.seq, t.writer}));
  return a;
}
inline DependencyContext ctx(const nlohmann::ordered_json& j) {
  DependencyContext c;
  for (const auto& e : j) c[e.at(0).get<ObjectId>()] = Tag{e.at(1).get<std::uint64_t>(), e.at(2).get<ServerId>()};
  return c;
}

inline std::string address(const Address& a) {
  return (a.is_server() ? "s" : "c") + std::to_string(a.id);
}
inline Address address(const std::string& s) {
  if (s.size() < 2 || (s[0] != 's' && s[0] != 'c')) throw TraceError("trace: bad address " + s);
  const auto id = static_cast<std::uint32_t>(std::stoul(s.substr(1)));
  return s[0] == 's' ? Address::server(id) : Address::client(id);
}

inline TraceOpKind op_kind(const std::string& s) {
  if (s == "write") return TraceOpKind::kWrite;
  if (s == "read") return TraceOpKind::kRead;
  if (s == "probe") return TraceOpKind::kProbe;
  throw TraceError("trace: bad op kind " + s);
}

inline RunStatus run_status(const std::string& s) {
  if (s == "quiescent") return RunStatus::kQuiescent;
  if (s == "stalled") return RunStatus::kStalled;
  if (s == "step_limit") return RunStatus::kStepLimit;
  if (s == "violation") return RunStatus::kViolation;
  throw TraceError("trace: bad status " + s);
}

inline std::string_view msg_what(MsgEvent::What w) {
  switch (w) {
    case MsgEvent::What::kSend: return "send";
    case MsgEvent::What::kDeliver: return "deliver";
    case MsgEvent::What::kDrop: return "drop";
  }
  return "?";
}

inline ojson encode(const TraceHeader& h) {
  ojson j;
  j["ev"] = "header";
  j["n"] = h.n;
  j["k"] = h.k;
  j["value_len"] = h.value_len;
  j["clients"] = h.clients;
  j["max_crashes"] = h.max_crashes;
  j["seed"] = h.seed;
  j["fifo"] = h.fifo;
  j["switch_servers"] = h.switch_servers;
  return j;
}

inline ojson encode(const TraceEvent& ev) {
  ojson j;
  std::visit(
      [&j](const auto& e) {
        using T = std::decay_t<decltype(e)>;
        if constexpr (std::is_same_v<T, OpInvoke>) {
          j["ev"] = "invoke";
          j["step"] = e.step;
          j["client"] = e.client;
          j["op"] = e.op;
          j["kind"] = to_string(e.kind);
          j["server"] = e.server;
          j["object"] = e.object;
          j["value"] = hex(e.value);
          j["ctx"] = ctx(e.ctx);
        } else if constexpr (std::is_same_v<T, OpRespond>) {
          j["ev"] = "respond";
          j["step"] = e.step;
          j["client"] = e.client;
          j["op"] = e.op;
          j["tag"] = tag(e.tag);
          j["value"] = hex(e.value);
          j["ctx"] = ctx(e.ctx);
        } else if constexpr (std::is_same_v<T, MsgEvent>) {
          j["ev"] = msg_what(e.what);
          j["step"] = e.step;
          j["type"] = e.type;
          j["from"] = address(e.from);
          j["to"] = address(e.to);
          j["id"] = e.id;
          j["bytes"] = e.bytes;
        } else if constexpr (std::is_same_v<T, CrashEvent>) {
          j["ev"] = "crash";
          j["step"] = e.step;
          j["server"] = e.server;
        } else if constexpr (std::is_same_v<T, SnapshotEvent>) {
          j["ev"] = "snapshot";
          j["step"] = e.step;
          j["server"] = e.server;
          j["bytes_symbol"] = e.bytes_symbol;
          j["bytes_history"] = e.bytes_history;
          j["final"] = e.final;
        } else if constexpr (std::is_same_v<T, ViolationEvent>) {
          j["ev"] = "violation";
          j["step"] = e.step;
          j["server"] = e.server;
          j["what"] = e.what;
        } else if constexpr (std::is_same_v<T, ProbePhaseEvent>) {
          j["ev"] = "probe_phase";
          j["step"] = e.step;
        }
      },
      ev);
  return j;
}

inline ojson encode(const TraceFooter& f) {
  ojson j;
  j["ev"] = "end";
  j["status"] = to_string(f.status);
  j["end_step"] = f.end_step;
  const auto& s = f.stats;
  j["writes"] = s.writes;
  j["local_reads"] = s.local_reads;
  j["remote_reads"] = s.remote_reads;
  j["deferred_reads"] = s.deferred_reads;
  j["decodes"] = s.decodes;
  j["probe_decodes"] = s.probe_decodes;
  j["fetches"] = s.fetches;
  j["fetch_decodes"] = s.fetch_decodes;
  j["highest_tag_violations"] = s.highest_tag_violations;
  j["decode_tag_mismatches"] = s.decode_tag_mismatches;
  j["messages"] = s.messages;
  j["gossip_messages"] = s.gossip_messages;
  return j;
}

}  // namespace trace_json

inline void write_jsonl(std::ostream& os, const Trace& t) {
  os << trace_json::encode(t.header).dump() << '\n';
  for (const auto& ev : t.events) os << trace_json::encode(ev).dump() << '\n';
  os << trace_json::encode(t.footer).dump() << '\n';
}

inline std::string to_jsonl(const Trace& t) {
  std::ostringstream os;
  write_jsonl(os, t);
  return os.str();
}

inline Trace read_jsonl(std::istream& is) {
  using trace_json::ojson;
  Trace t;
  bool have_header = false;
  bool have_footer = false;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const auto j = ojson::parse(line);
      const auto ev = j.at("ev").get<std::string>();
      if (ev == "header") {
        auto& h = t.header;
        h.n = j.at("n").get<std::size_t>();
        h.k = j.at("k").get<std::size_t>();
        h.value_len = j.at("value_len").get<std::size_t>();
        h.clients = j.at("clients").get<std::uint32_t>();
        h.max_crashes = j.at("max_crashes").get<std::uint32_t>();
        h.seed = j.at("seed").get<std::uint64_t>();
        h.fifo = j.at("fifo").get<bool>();
        h.switch_servers = j.at("switch_servers").get<bool>();
        have_header = true;
      } else if (ev == "invoke") {
        OpInvoke e;
        e.step = j.at("step").get<std::int64_t>();
        e.client = j.at("client").get<ClientId>();
        e.op = j.at("op").get<std::uint64_t>();
        e.kind = trace_json::op_kind(j.at("kind").get<std::string>());
        e.server = j.at("server").get<ServerId>();
        e.object = j.at("object").get<ObjectId>();
        e.value = trace_json::unhex(j.at("value").get<std::string>());
        e.ctx = trace_json::ctx(j.at("ctx"));
        t.events.emplace_back(std::move(e));
      } else if (ev == "respond") {
        OpRespond e;
        e.step = j.at("step").get<std::int64_t>();
        e.client = j.at("client").get<ClientId>();
        e.op = j.at("op").get<std::uint64_t>();
        e.tag = trace_json::tag(j.at("tag"));
        e.value = trace_json::unhex(j.at("value").get<std::string>());
        e.ctx = trace_json::ctx(j.at("ctx"));
        t.events.emplace_back(std::move(e));
      } else if (ev == "send" || ev == "deliver" || ev == "drop") {
        MsgEvent e;
        e.what = ev == "send" ? MsgEvent::What::kSend
                 : ev == "deliver" ? MsgEvent::What::kDeliver
                                   : MsgEvent::What::kDrop;
        e.step = j.at("step").get<std::int64_t>();
        e.type = j.at("type").get<std::string>();
        e.from = trace_json::address(j.at("from").get<std::string>());
        e.to = trace_json::address(j.at("to").get<std::string>());
        e.id = j.at("id").get<std::uint64_t>();
        e.bytes = j.at("bytes").get<std::uint64_t>();
        t.events.emplace_back(std::move(e));
      } else if (ev == "crash") {
        t.events.emplace_back(CrashEvent{j.at("step").get<std::int64_t>(), j.at("server").get<ServerId>()});
      } else if (ev == "snapshot") {
        t.events.emplace_back(SnapshotEvent{j.at("step").get<std::int64_t>(), j.at("server").get<ServerId>(),
                                            j.at("bytes_symbol").get<std::uint64_t>(),
                                            j.at("bytes_history").get<std::uint64_t>(),
                                            j.at("final").get<bool>()});
      } else if (ev == "violation") {
        t.events.emplace_back(ViolationEvent{j.at("step").get<std::int64_t>(), j.at("server").get<ServerId>(),
                                             j.at("what").get<std::string>()});
      } else if (ev == "probe_phase") {
        t.events.emplace_back(ProbePhaseEvent{j.at("step").get<std::int64_t>()});
      } else if (ev == "end") {
        auto& f = t.footer;
        f.status = trace_json::run_status(j.at("status").get<std::string>());
        f.end_step = j.at("end_step").get<std::int64_t>();
        auto& s = f.stats;
        s.writes = j.at("writes").get<std::uint64_t>();
        s.local_reads = j.at("local_reads").get<std::uint64_t>();
        s.remote_reads = j.at("remote_reads").get<std::uint64_t>();
        s.deferred_reads = j.at("deferred_reads").get<std::uint64_t>();
        s.decodes = j.at("decodes").get<std::uint64_t>();
        s.probe_decodes = j.at("probe_decodes").get<std::uint64_t>();
        s.fetches = j.at("fetches").get<std::uint64_t>();
        s.fetch_decodes = j.at("fetch_decodes").get<std::uint64_t>();
        s.highest_tag_violations = j.at("highest_tag_violations").get<std::uint64_t>();
        s.decode_tag_mismatches = j.at("decode_tag_mismatches").get<std::uint64_t>();
        s.messages = j.at("messages").get<std::uint64_t>();
        s.gossip_messages = j.at("gossip_messages").get<std::uint64_t>();
        have_footer = true;
      } else {
        throw TraceError("unknown event '" + ev + "'");
      }
    } catch (const nlohmann::json::exception& e) {
      throw TraceError("trace line " + std::to_string(line_no) + ": " + e.what());
    } catch (const TraceError& e) {
      throw TraceError("trace line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (!have_header) throw TraceError("trace: missing header line");
  if (!have_footer) throw TraceError("trace: missing end line");
  return t;
}

/// Storage snapshots as CSV: step,server,bytes_symbol,bytes_history.
inline void write_storage_csv(std::ostream& os, const Trace& t) {
  os << "step,server,bytes_symbol,bytes_history\n";
  for (const auto& ev : t.events) {
    if (const auto* s = std::get_if<SnapshotEvent>(&ev)) {
      os << s->step << ',' << s->server << ',' << s->bytes_symbol << ',' << s->bytes_history << '\n';
    }
  }
}

/// 64-bit FNV-1a, used to compare trace files across runs.
inline std::uint64_t fnv1a(std::string_view data) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

}  // namespace causalec
