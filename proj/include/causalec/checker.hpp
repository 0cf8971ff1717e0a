#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <json.hpp>

#include "causalec/codec.hpp"
#include "causalec/simulation.hpp"
#include "causalec/trace.hpp"
#include "causalec/types.hpp"

namespace causalec {

enum class Verdict : std::uint8_t { kPass, kFail, kInconclusive };

inline std::string_view to_string(Verdict v) {
  switch (v) {
    case Verdict::kPass: return "pass";
    case Verdict::kFail: return "fail";
    case Verdict::kInconclusive: return "inconclusive";
  }
  return "?";
}

struct CheckResult {
  std::string name;
  Verdict verdict = Verdict::kPass;
  std::string detail;
};

// Check names, as they appear in reports.
inline constexpr std::string_view kUniqueTags = "unique_tags";
inline constexpr std::string_view kTimestampMonotone = "timestamp_monotone";
inline constexpr std::string_view kCausalReads = "causal_reads";
inline constexpr std::string_view kConvergence = "convergence";
inline constexpr std::string_view kLiveness = "liveness";
inline constexpr std::string_view kStorageStable = "storage_stable";
inline constexpr std::string_view kRuntimeAssertions = "runtime_assertions";
inline constexpr std::string_view kWellFormed = "well_formed";

struct Operation {
  ClientId client = 0;
  std::uint64_t op = 0;
  TraceOpKind kind = TraceOpKind::kWrite;
  ServerId server = 0;
  ObjectId object = 0;
  std::int64_t invoked = 0;
  Bytes written;
  DependencyContext ctx_before;

  bool completed = false;
  std::int64_t responded = 0;
  Tag tag;
  Bytes read;
  DependencyContext ctx_after;

  bool is_write() const { return kind == TraceOpKind::kWrite; }
};

/// Completed and pending operations, with session and reads-from edges
/// between completed ones. Causal order is the transitive closure.
struct ExecutionGraph {
  std::vector<Operation> ops;  // invocation order
  std::vector<std::vector<std::size_t>> succ;
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  std::vector<std::size_t> topo;  // empty when cyclic
  bool acyclic = true;
};

inline ExecutionGraph build_graph(const Trace& trace) {
  ExecutionGraph g;
  std::unordered_map<std::uint64_t, std::size_t> by_id;
  for (const auto& ev : trace.events) {
    if (const auto* inv = std::get_if<OpInvoke>(&ev)) {
      if (by_id.contains(inv->op)) throw TraceError("duplicate invocation of op " + std::to_string(inv->op));
      Operation o;
      o.client = inv->client;
      o.op = inv->op;
      o.kind = inv->kind;
      o.server = inv->server;
      o.object = inv->object;
      o.invoked = inv->step;
      o.written = inv->value;
      o.ctx_before = inv->ctx;
      by_id.emplace(inv->op, g.ops.size());
      g.ops.push_back(std::move(o));
    } else if (const auto* r = std::get_if<OpRespond>(&ev)) {
      auto it = by_id.find(r->op);
      if (it == by_id.end()) throw TraceError("response to unknown op " + std::to_string(r->op));
      auto& o = g.ops[it->second];
      if (o.completed) throw TraceError("op " + std::to_string(r->op) + " responded twice");
      if (o.client != r->client) throw TraceError("op " + std::to_string(r->op) + " answered to another client");
      o.completed = true;
      o.responded = r->step;
      o.tag = r->tag;
      o.read = r->value;
      o.ctx_after = r->ctx;
    }
  }

  const std::size_t n = g.ops.size();
  g.succ.assign(n, {});
  auto add_edge = [&g](std::size_t a, std::size_t b) {
    g.succ[a].push_back(b);
    g.edges.emplace_back(a, b);
  };
  std::map<ClientId, std::size_t> last_of_client;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& o = g.ops[i];
    if (!o.completed) continue;
    if (auto it = last_of_client.find(o.client); it != last_of_client.end()) add_edge(it->second, i);
    last_of_client[o.client] = i;
  }
  std::map<std::pair<ObjectId, Tag>, std::size_t> writer;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& o = g.ops[i];
    if (o.completed && o.is_write()) writer.try_emplace({o.object, o.tag}, i);
  }
  for (std::size_t i = 0; i < n; ++i) {
    const auto& o = g.ops[i];
    if (!o.completed || o.is_write() || o.tag == kInitialTag) continue;
    if (auto it = writer.find({o.object, o.tag}); it != writer.end()) add_edge(it->second, i);
  }

  // Kahn's algorithm; leftover nodes mean a cycle.
  std::vector<std::size_t> indeg(n, 0);
  for (const auto& [a, b] : g.edges) ++indeg[b];
  std::vector<std::size_t> ready;
  for (std::size_t i = n; i-- > 0;) {
    if (indeg[i] == 0) ready.push_back(i);
  }
  while (!ready.empty()) {
    const auto v = ready.back();
    ready.pop_back();
    g.topo.push_back(v);
    for (auto w : g.succ[v]) {
      if (--indeg[w] == 0) ready.push_back(w);
    }
  }
  if (g.topo.size() != n) {
    g.acyclic = false;
    g.topo.clear();
  }
  return g;
}

namespace detail {

inline std::string op_label(const Operation& o) {
  return std::string(to_string(o.kind)) + " op " + std::to_string(o.op) + " (client " + std::to_string(o.client) +
         ", object " + std::to_string(o.object) + ")";
}

inline bool quiescent(const Trace& t) { return t.footer.status == RunStatus::kQuiescent; }

inline std::vector<bool> final_alive(const Trace& t) {
  std::vector<bool> alive(t.header.n, true);
  for (const auto& ev : t.events) {
    if (const auto* c = std::get_if<CrashEvent>(&ev)) {
      if (c->server < alive.size()) alive[c->server] = false;
    }
  }
  return alive;
}

}  // namespace detail

inline CheckResult check_unique_tags(const ExecutionGraph& g) {
  std::map<std::pair<ObjectId, Tag>, const Operation*> seen;
  for (const auto& o : g.ops) {
    if (!o.completed || !o.is_write()) continue;
    if (o.tag == kInitialTag) {
      return {std::string(kUniqueTags), Verdict::kFail, detail::op_label(o) + " carries the initial tag"};
    }
    auto [it, fresh] = seen.emplace(std::pair{o.object, o.tag}, &o);
    if (!fresh) {
      return {std::string(kUniqueTags), Verdict::kFail,
              detail::op_label(*it->second) + " and " + detail::op_label(o) + " share tag " + to_string(o.tag)};
    }
  }
  return {std::string(kUniqueTags), Verdict::kPass, std::to_string(seen.size()) + " writes, all tags distinct"};
}

/// Along every edge the context after completion only grows, and every
/// operation's context covers its own tag.
inline CheckResult check_timestamp_monotone(const ExecutionGraph& g) {
  const std::string name(kTimestampMonotone);
  if (!g.acyclic) return {name, Verdict::kFail, "execution graph has a cycle"};
  for (const auto& o : g.ops) {
    if (!o.completed) continue;
    auto it = o.ctx_after.find(o.object);
    if (o.tag != kInitialTag && (it == o.ctx_after.end() || it->second < o.tag)) {
      return {name, Verdict::kFail, detail::op_label(o) + " context misses its own tag " + to_string(o.tag)};
    }
    if (!ctx_leq(o.ctx_before, o.ctx_after)) {
      return {name, Verdict::kFail, detail::op_label(o) + " context shrank across the operation"};
    }
  }
  for (const auto& [a, b] : g.edges) {
    if (!ctx_leq(g.ops[a].ctx_after, g.ops[b].ctx_after)) {
      return {name, Verdict::kFail,
              "context decreases from " + detail::op_label(g.ops[a]) + " to " + detail::op_label(g.ops[b])};
    }
  }
  return {name, Verdict::kPass, std::to_string(g.edges.size()) + " edges checked"};
}

/// A read returns a tag no older than any causally preceding write to its
/// object, and the (tag, value) pair was actually written.
inline CheckResult check_causal_reads(const ExecutionGraph& g, const TraceHeader& h) {
  const std::string name(kCausalReads);
  if (!g.acyclic) return {name, Verdict::kFail, "execution graph has a cycle"};
  std::map<std::pair<ObjectId, Tag>, const Operation*> writes;
  for (const auto& o : g.ops) {
    if (o.completed && o.is_write()) writes.emplace(std::pair{o.object, o.tag}, &o);
  }
  const Bytes initial(h.value_len, 0);
  std::size_t reads = 0;
  for (const auto& o : g.ops) {
    if (!o.completed || o.is_write()) continue;
    ++reads;
    if (o.object >= h.k) return {name, Verdict::kFail, detail::op_label(o) + " reads an unknown object"};
    if (o.tag == kInitialTag) {
      if (o.read != initial) return {name, Verdict::kFail, detail::op_label(o) + " returned a fabricated initial value"};
      continue;
    }
    auto it = writes.find({o.object, o.tag});
    if (it == writes.end()) {
      return {name, Verdict::kFail, detail::op_label(o) + " returned tag " + to_string(o.tag) + " that no write produced"};
    }
    if (it->second->written != o.read) {
      return {name, Verdict::kFail, detail::op_label(o) + " returned a value differing from write " +
                                        std::to_string(it->second->op)};
    }
  }

  // past[v][o]: newest write to o among v's strict causal predecessors.
  const std::size_t k = h.k;
  std::vector<std::vector<Tag>> past(g.ops.size(), std::vector<Tag>(k, kInitialTag));
  for (auto v : g.topo) {
    const auto& op = g.ops[v];
    if (!op.completed) continue;
    if (!op.is_write() && op.tag < past[v][op.object]) {
      return {name, Verdict::kFail,
              detail::op_label(op) + " returned " + to_string(op.tag) + " although write " +
                  to_string(past[v][op.object]) + " causally precedes it"};
    }
    auto mine = past[v];
    if (op.is_write() && op.object < k) mine[op.object] = std::max(mine[op.object], op.tag);
    for (auto w : g.succ[v]) {
      for (std::size_t x = 0; x < k; ++x) past[w][x] = std::max(past[w][x], mine[x]);
    }
  }
  return {name, Verdict::kPass, std::to_string(reads) + " reads checked"};
}

/// After quiescence every probe of an object returns one (tag, value).
inline CheckResult check_convergence(const ExecutionGraph& g, const Trace& t) {
  const std::string name(kConvergence);
  if (!detail::quiescent(t)) {
    return {name, Verdict::kInconclusive, "run ended " + std::string(to_string(t.footer.status)) + ", not quiescent"};
  }
  std::map<ObjectId, std::pair<Tag, Bytes>> agreed;
  std::size_t probes = 0;
  for (const auto& o : g.ops) {
    if (o.kind != TraceOpKind::kProbe) continue;
    if (!o.completed) return {name, Verdict::kFail, detail::op_label(o) + " never completed"};
    ++probes;
    auto [it, fresh] = agreed.try_emplace(o.object, o.tag, o.read);
    if (!fresh && (it->second.first != o.tag || it->second.second != o.read)) {
      return {name, Verdict::kFail,
              "probes of object " + std::to_string(o.object) + " disagree: " + to_string(it->second.first) +
                  " vs " + to_string(o.tag) + " at server " + std::to_string(o.server)};
    }
  }
  if (probes == 0) return {name, Verdict::kInconclusive, "no probe reads in trace"};
  return {name, Verdict::kPass, std::to_string(probes) + " probes agree"};
}

/// Writes at never-crashed servers are acked; reads there complete whenever
/// the surviving servers still hold a recovery set for the object.
inline CheckResult check_liveness(const ExecutionGraph& g, const Trace& t) {
  const std::string name(kLiveness);
  if (t.footer.status == RunStatus::kViolation) {
    return {name, Verdict::kInconclusive, "run stopped on a protocol violation"};
  }
  const auto alive = detail::final_alive(t);
  const auto spec = make_code(t.header.n, t.header.k, 1);
  std::vector<bool> readable(t.header.k);
  for (ObjectId o = 0; o < t.header.k; ++o) readable[o] = has_alive_recovery_set(spec, o, alive);
  std::size_t required = 0;
  std::size_t exempt = 0;
  for (const auto& o : g.ops) {
    if (o.server >= alive.size() || !alive[o.server] || (!o.is_write() && !readable[o.object])) {
      if (!o.completed) ++exempt;
      continue;
    }
    ++required;
    if (!o.completed) return {name, Verdict::kFail, detail::op_label(o) + " at server " + std::to_string(o.server) + " never completed"};
  }
  return {name, Verdict::kPass,
          std::to_string(required) + " ops required to complete, " + std::to_string(exempt) + " pending ops exempt"};
}

inline CheckResult check_storage_stable(const Trace& t) {
  const std::string name(kStorageStable);
  if (!detail::quiescent(t)) {
    return {name, Verdict::kInconclusive, "run ended " + std::string(to_string(t.footer.status)) + ", not quiescent"};
  }
  const auto alive = detail::final_alive(t);
  std::vector<bool> seen(t.header.n, false);
  for (const auto& ev : t.events) {
    const auto* s = std::get_if<SnapshotEvent>(&ev);
    if (!s || !s->final) continue;
    if (s->server >= seen.size()) return {name, Verdict::kFail, "snapshot of unknown server"};
    seen[s->server] = true;
    if (s->bytes_history != 0 || s->bytes_symbol != t.header.value_len) {
      return {name, Verdict::kFail,
              "server " + std::to_string(s->server) + " ends with symbol " + std::to_string(s->bytes_symbol) +
                  " bytes and history " + std::to_string(s->bytes_history) + " bytes"};
    }
  }
  for (ServerId s = 0; s < alive.size(); ++s) {
    if (alive[s] && !seen[s]) return {name, Verdict::kFail, "no final snapshot of server " + std::to_string(s)};
  }
  return {name, Verdict::kPass, "every alive server stores exactly one symbol"};
}

inline CheckResult check_runtime_assertions(const Trace& t) {
  const std::string name(kRuntimeAssertions);
  const auto& s = t.footer.stats;
  for (const auto& ev : t.events) {
    if (const auto* v = std::get_if<ViolationEvent>(&ev)) return {name, Verdict::kFail, v->what};
  }
  if (t.footer.status == RunStatus::kViolation || s.highest_tag_violations != 0 || s.decode_tag_mismatches != 0) {
    return {name, Verdict::kFail,
            "highest-tag violations " + std::to_string(s.highest_tag_violations) + ", decode tag mismatches " +
                std::to_string(s.decode_tag_mismatches)};
  }
  return {name, Verdict::kPass, "no assertion fired"};
}

struct Report {
  std::uint64_t seed = 0;
  RunStatus status = RunStatus::kQuiescent;
  std::vector<CheckResult> checks;
  RunStats stats;

  bool passed() const {
    return std::none_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.verdict == Verdict::kFail; });
  }
  const CheckResult* find(std::string_view name) const {
    for (const auto& c : checks) {
      if (c.name == name) return &c;
    }
    return nullptr;
  }
  Verdict verdict(std::string_view name) const {
    const auto* c = find(name);
    return c ? c->verdict : Verdict::kInconclusive;
  }
};

inline Report check_trace(const Trace& t) {
  Report r;
  r.seed = t.header.seed;
  r.status = t.footer.status;
  r.stats = t.footer.stats;
  ExecutionGraph g;
  try {
    g = build_graph(t);
  } catch (const TraceError& e) {
    r.checks.push_back({std::string(kWellFormed), Verdict::kFail, e.what()});
    return r;
  }
  r.checks.push_back(check_unique_tags(g));
  r.checks.push_back(check_timestamp_monotone(g));
  r.checks.push_back(check_causal_reads(g, t.header));
  r.checks.push_back(check_convergence(g, t));
  r.checks.push_back(check_liveness(g, t));
  r.checks.push_back(check_storage_stable(t));
  r.checks.push_back(check_runtime_assertions(t));
  return r;
}

inline nlohmann::ordered_json report_json(const Report& r) {
  nlohmann::ordered_json j;
  j["seed"] = r.seed;
  j["status"] = to_string(r.status);
  j["passed"] = r.passed();
  auto checks = nlohmann::ordered_json::array();
  for (const auto& c : r.checks) {
    nlohmann::ordered_json cj;
    cj["name"] = c.name;
    cj["verdict"] = to_string(c.verdict);
    cj["detail"] = c.detail;
    checks.push_back(std::move(cj));
  }
  j["checks"] = std::move(checks);
  const auto& s = r.stats;
  j["stats"] = {{"writes", s.writes},
                {"local_reads", s.local_reads},
                {"remote_reads", s.remote_reads},
                {"decodes", s.decodes},
                {"probe_decodes", s.probe_decodes},
                {"fetches", s.fetches},
                {"messages", s.messages}};
  return j;
}

// --- negative controls ---------------------------------------------------------
//
// Each control corrupts a healthy trace so that exactly the named check must
// fail. The base trace needs ordinary material: several writes per object,
// a client reading an object it wrote earlier, and probe reads.

struct NegativeControl {
  std::string check;
  Trace trace;
};

namespace detail {

inline OpRespond* find_respond(Trace& t, std::uint64_t op) {
  for (auto& ev : t.events) {
    if (auto* r = std::get_if<OpRespond>(&ev); r && r->op == op) return r;
  }
  return nullptr;
}

inline Trace corrupt_unique_tags(Trace t, const ExecutionGraph& g) {
  for (std::size_t i = 0; i < g.ops.size(); ++i) {
    const auto& a = g.ops[i];
    if (!a.completed || !a.is_write()) continue;
    for (std::size_t j = i + 1; j < g.ops.size(); ++j) {
      const auto& b = g.ops[j];
      if (b.completed && b.is_write() && b.object == a.object && b.tag != a.tag) {
        find_respond(t, b.op)->tag = a.tag;
        return t;
      }
    }
  }
  throw std::invalid_argument("negative control: trace lacks two writes to one object");
}

inline Trace corrupt_timestamp(Trace t, const ExecutionGraph& g) {
  for (const auto& [a, b] : g.edges) {
    if (!g.ops[a].ctx_after.empty()) {
      auto* r = find_respond(t, g.ops[b].op);
      r->ctx = {};
      return t;
    }
  }
  throw std::invalid_argument("negative control: trace lacks an edge");
}

inline Trace corrupt_causal(Trace t, const ExecutionGraph& g) {
  // A read that follows its own client's write to the object now returns the
  // initial version: a read-your-writes violation.
  for (std::size_t i = 0; i < g.ops.size(); ++i) {
    const auto& w = g.ops[i];
    if (!w.completed || !w.is_write()) continue;
    for (std::size_t j = i + 1; j < g.ops.size(); ++j) {
      const auto& r = g.ops[j];
      if (r.client == w.client && r.completed && r.kind == TraceOpKind::kRead && r.object == w.object) {
        auto* resp = find_respond(t, r.op);
        resp->tag = kInitialTag;
        resp->value.assign(t.header.value_len, 0);
        return t;
      }
    }
  }
  throw std::invalid_argument("negative control: trace lacks a read following a same-session write");
}

inline Trace corrupt_convergence(Trace t, const ExecutionGraph& g) {
  for (const auto& o : g.ops) {
    if (o.kind == TraceOpKind::kProbe && o.completed) {
      auto* r = find_respond(t, o.op);
      r->value.at(0) ^= 0xFF;
      return t;
    }
  }
  throw std::invalid_argument("negative control: trace lacks probe reads");
}

inline Trace corrupt_liveness(Trace t, const ExecutionGraph& g) {
  const auto alive = final_alive(t);
  for (const auto& o : g.ops) {
    if (o.completed && o.is_write() && alive[o.server]) {
      std::erase_if(t.events, [&](const TraceEvent& ev) {
        const auto* r = std::get_if<OpRespond>(&ev);
        return r && r->op == o.op;
      });
      return t;
    }
  }
  throw std::invalid_argument("negative control: trace lacks a completed write at a live server");
}

inline Trace corrupt_storage(Trace t) {
  for (auto& ev : t.events) {
    if (auto* s = std::get_if<SnapshotEvent>(&ev); s && s->final) {
      s->bytes_history += t.header.value_len;
      return t;
    }
  }
  throw std::invalid_argument("negative control: trace lacks final snapshots");
}

}  // namespace detail

inline std::vector<NegativeControl> negative_controls(const Trace& base) {
  const auto g = build_graph(base);
  std::vector<NegativeControl> out;
  out.push_back({std::string(kUniqueTags), detail::corrupt_unique_tags(base, g)});
  out.push_back({std::string(kTimestampMonotone), detail::corrupt_timestamp(base, g)});
  out.push_back({std::string(kCausalReads), detail::corrupt_causal(base, g)});
  out.push_back({std::string(kConvergence), detail::corrupt_convergence(base, g)});
  out.push_back({std::string(kLiveness), detail::corrupt_liveness(base, g)});
  out.push_back({std::string(kStorageStable), detail::corrupt_storage(base)});
  return out;
}

}  // namespace causalec
