#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "causalec/client.hpp"
#include "causalec/codec.hpp"
#include "causalec/common.hpp"
#include "causalec/message.hpp"
#include "causalec/scenario.hpp"
#include "causalec/server.hpp"
#include "causalec/trace.hpp"
#include "causalec/types.hpp"

namespace causalec {

/// Raw 64-bit Mersenne Twister output mapped by hand, so a seed yields the
/// same stream with every standard library.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next() { return gen_(); }

  std::int64_t uniform(std::int64_t lo, std::int64_t hi) {
    const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
    return lo + static_cast<std::int64_t>(gen_() % span);
  }

  double unit() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

 private:
  std::mt19937_64 gen_;
};

/// True iff the servers marked alive can still jointly decode `object`.
inline bool has_alive_recovery_set(const CodeSpec& spec, ObjectId object, const std::vector<bool>& alive) {
  std::vector<ServerId> servers;
  for (ServerId s = 0; s < spec.n(); ++s) {
    if (alive[s]) servers.push_back(s);
  }
  return is_decodable(spec, object, servers);
}

/// Crash schedule for one seed: the explicit list, or a draw from
/// `random_crashes` when this seed is selected.
inline std::vector<CrashSpec> resolve_crashes(const Scenario& sc, std::uint64_t seed) {
  if (!sc.random_crashes) return sc.crashes;
  const auto& r = *sc.random_crashes;
  if (r.count == 0) return {};
  if (r.every_nth_seed > 1 && seed % r.every_nth_seed != 1) return {};
  Rng rng(seed ^ 0x9e3779b97f4a7c15ull);
  std::vector<ServerId> pool(sc.n);
  for (ServerId s = 0; s < sc.n; ++s) pool[s] = s;
  std::vector<CrashSpec> out;
  for (std::uint32_t i = 0; i < r.count; ++i) {
    const auto pick = static_cast<std::size_t>(rng.next() % pool.size());
    out.push_back({pool[pick], rng.uniform(r.step_min, r.step_max)});
    pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(pick));
  }
  return out;
}

class Simulation {
 public:
  Simulation(Scenario scenario, std::uint64_t seed)
      : sc_(std::move(scenario)), seed_(seed), rng_(seed) {
    validate(sc_);
    spec_ = std::make_shared<const CodeSpec>(make_code(sc_.n, sc_.k, sc_.value_len));
    const std::vector<Bytes> initial(sc_.k, Bytes(sc_.value_len, 0));
    for (ServerId s = 0; s < sc_.n; ++s) servers_.emplace_back(s, spec_, initial);
    alive_.assign(sc_.n, true);

    for (ClientId c = 0; c < sc_.clients; ++c) {
      const ServerId home = sc_.client_servers.empty() ? static_cast<ServerId>(rng_.next() % sc_.n)
                                                       : sc_.client_servers[c];
      clients_.emplace_back(c, home);
      remaining_.push_back(sc_.scripted() ? 0 : sc_.ops_per_client);
    }
    if (!sc_.scripted() && sc_.object_skew > 0.0) {
      double total = 0.0;
      for (std::size_t o = 0; o < sc_.k; ++o) {
        total += 1.0 / std::pow(static_cast<double>(o + 1), sc_.object_skew);
        zipf_cdf_.push_back(total);
      }
      for (auto& x : zipf_cdf_) x /= total;
    }

    const std::int64_t longest = std::max({sc_.encode_period, sc_.gossip_period, sc_.gc_period});
    window_ = 2 * (longest + sc_.delay_max) + 2;
    monitor_period_ = std::max<std::int64_t>(1, window_ / 4);

    auto& h = trace_.header;
    h.n = sc_.n;
    h.k = sc_.k;
    h.value_len = sc_.value_len;
    h.clients = sc_.clients;
    h.max_crashes = sc_.max_crashes;
    h.seed = seed_;
    h.fifo = sc_.fifo;
    h.switch_servers = sc_.switch_servers;
  }

  const Scenario& scenario() const { return sc_; }
  const CodeSpec& spec() const { return *spec_; }
  const std::vector<Server>& servers() const { return servers_; }
  const std::vector<Client>& clients() const { return clients_; }
  const std::vector<bool>& alive() const { return alive_; }
  const Trace& trace() const { return trace_; }
  Trace take_trace() { return std::move(trace_); }

  /// Runs to quiescence, a stall, the step limit, or a protocol violation.
  RunStatus run() {
    for (ServerId s = 0; s < sc_.n; ++s) {
      schedule(rng_.uniform(0, sc_.encode_period - 1), Timer{Timer::kEncode, s});
      schedule(rng_.uniform(0, sc_.gossip_period - 1), Timer{Timer::kGossip, s});
      schedule(rng_.uniform(0, sc_.gc_period - 1), Timer{Timer::kGc, s});
    }
    for (const auto& c : resolve_crashes(sc_, seed_)) {
      ++crashes_scheduled_;
      schedule(c.step, Crash{c.server});
    }
    schedule(0, Monitor{});
    schedule(sc_.snapshot_every, Snapshot{});
    if (sc_.scripted()) {
      for (const auto& op : sc_.script) {
        if (op.at) schedule(*op.at, ScriptPoke{});
      }
      schedule(0, ScriptPoke{});
    } else {
      for (ClientId c = 0; c < sc_.clients; ++c) {
        if (remaining_[c] > 0) schedule_issue(c, rng_.uniform(sc_.think_min, sc_.think_max));
      }
    }

    RunStatus status = loop();
    if (status == RunStatus::kQuiescent && sc_.probes) {
      workload_stats_ = collect_stats();
      trace_.events.emplace_back(ProbePhaseEvent{now_});
      start_probes();
      schedule(now_ + monitor_period_, Monitor{});
      status = loop();
    }
    finish(status);
    return status;
  }

 private:
  struct Deliver {
    Address from;
    Address to;
    std::uint64_t id = 0;
    bool gossip = false;
    Bytes wire;
  };
  struct Timer {
    enum Kind : std::uint8_t { kEncode, kGossip, kGc } kind;
    ServerId server;
  };
  struct Crash {
    ServerId server;
  };
  struct Issue {
    ClientId client;
  };
  struct ScriptPoke {};
  struct Monitor {};
  struct Snapshot {};
  using Payload = std::variant<Deliver, Timer, Crash, Issue, ScriptPoke, Monitor, Snapshot>;

  struct Event {
    std::int64_t time = 0;
    std::uint64_t seq = 0;
    Payload payload;
  };
  struct Later {
    bool operator()(const Event& a, const Event& b) const {
      return a.time != b.time ? a.time > b.time : a.seq > b.seq;
    }
  };

  void schedule(std::int64_t at, Payload p) {
    queue_.push_back(Event{at, next_seq_++, std::move(p)});
    std::push_heap(queue_.begin(), queue_.end(), Later{});
  }

  void schedule_issue(ClientId c, std::int64_t delay) {
    ++issues_scheduled_;
    schedule(now_ + delay, Issue{c});
  }

  RunStatus loop() {
    last_change_ = now_;
    while (!queue_.empty()) {
      std::pop_heap(queue_.begin(), queue_.end(), Later{});
      Event ev = std::move(queue_.back());
      queue_.pop_back();
      if (ev.time > sc_.step_limit) {
        now_ = sc_.step_limit;
        return RunStatus::kStepLimit;
      }
      now_ = ev.time;
      try {
        if (auto* d = std::get_if<Deliver>(&ev.payload)) {
          deliver(std::move(*d));
        } else if (auto* t = std::get_if<Timer>(&ev.payload)) {
          fire_timer(*t);
        } else if (auto* c = std::get_if<Crash>(&ev.payload)) {
          --crashes_scheduled_;
          crash(c->server);
        } else if (auto* i = std::get_if<Issue>(&ev.payload)) {
          --issues_scheduled_;
          issue_next(i->client);
        } else if (std::holds_alternative<ScriptPoke>(ev.payload)) {
          poke_script();
        } else if (std::holds_alternative<Monitor>(ev.payload)) {
          if (auto done = check_settled()) return *done;
          schedule(now_ + monitor_period_, Monitor{});
        } else if (std::holds_alternative<Snapshot>(ev.payload)) {
          snapshot(false);
          schedule(now_ + sc_.snapshot_every, Snapshot{});
        }
      } catch (const ProtocolViolation& e) {
        trace_.events.emplace_back(ViolationEvent{now_, violating_server_, e.what()});
        return RunStatus::kViolation;
      }
    }
    return RunStatus::kStalled;
  }

  // --- network ---------------------------------------------------------------

  void send_all(Outbox&& out) {
    for (auto& env : out.messages) send(env);
  }

  void send(const Envelope& env) {
    const bool gossip = std::holds_alternative<EncodedUpTo>(env.message);
    Deliver d{env.from, env.to, next_msg_id_++, gossip, serialize(env.message)};
    std::int64_t at = now_ + rng_.uniform(sc_.delay_min, sc_.delay_max);
    if (sc_.fifo) {
      auto& last = channel_last_[{env.from, env.to}];
      at = std::max(at, last);
      last = at;
    }
    if (gossip) {
      ++gossip_sent_;
    } else {
      ++messages_sent_;
      ++inflight_;
      trace_.events.emplace_back(MsgEvent{now_, MsgEvent::What::kSend, std::string(message_name(env.message)),
                                          env.from, env.to, d.id, d.wire.size()});
    }
    schedule(at, std::move(d));
  }

  void deliver(Deliver d) {
    Message m = deserialize(d.wire);
    if (!d.gossip) {
      --inflight_;
      const bool dropped = d.to.is_server() && !alive_[d.to.id];
      trace_.events.emplace_back(MsgEvent{now_, dropped ? MsgEvent::What::kDrop : MsgEvent::What::kDeliver,
                                          std::string(message_name(m)), d.from, d.to, d.id, d.wire.size()});
      if (dropped) return;
    } else if (!alive_[d.to.id]) {
      return;
    }
    if (d.to.is_server()) {
      violating_server_ = d.to.id;
      send_all(servers_[d.to.id].handle(Envelope{d.from, d.to, std::move(m)}));
    } else {
      on_client_message(d.to.id, m);
    }
  }

  // --- servers ---------------------------------------------------------------

  void fire_timer(const Timer& t) {
    if (!alive_[t.server]) return;
    auto& srv = servers_[t.server];
    violating_server_ = t.server;
    std::int64_t period = 1;
    switch (t.kind) {
      case Timer::kEncode:
        send_all(srv.internal_encode());
        period = sc_.encode_period;
        break;
      case Timer::kGossip:
        send_all(srv.internal_gossip());
        period = sc_.gossip_period;
        break;
      case Timer::kGc:
        send_all(srv.garbage_collect(alive_));
        period = sc_.gc_period;
        break;
    }
    schedule(now_ + period, t);
  }

  void crash(ServerId s) {
    if (!alive_[s]) return;
    alive_[s] = false;
    servers_[s].halt();
    trace_.events.emplace_back(CrashEvent{now_, s});
  }

  std::uint64_t version_sum() const {
    std::uint64_t v = 0;
    for (const auto& s : servers_) v += s.version();
    return v;
  }

  bool client_blocked(ClientId c) const {
    const auto& p = clients_[c].pending();
    return p && !alive_[p->server];
  }

  /// Ends a phase once nothing has changed for a whole window: no message
  /// other than gossip in flight, no client about to act, no server state
  /// change. A window spans a gossip round, its delivery, and a GC pass.
  std::optional<RunStatus> check_settled() {
    const auto v = version_sum();
    if (v != last_version_ || inflight_ > 0 || issues_scheduled_ > 0 || crashes_scheduled_ > 0 ||
        script_waiting_for_time()) {
      last_version_ = v;
      last_change_ = now_;
      return std::nullopt;
    }
    if (now_ - last_change_ < window_) return std::nullopt;
    for (ServerId s = 0; s < sc_.n; ++s) {
      if (alive_[s] && !servers_[s].settled()) return RunStatus::kStalled;
    }
    for (ClientId c = 0; c < clients_.size(); ++c) {
      if (clients_[c].pending() && !client_blocked(c)) return RunStatus::kStalled;
    }
    if (sc_.scripted() && script_next_ < sc_.script.size()) {
      // Remaining script ops can only be held up by blocked clients.
      for (std::size_t i = script_next_; i < sc_.script.size(); ++i) {
        if (!client_blocked(sc_.script[i].client)) return RunStatus::kStalled;
      }
    }
    return RunStatus::kQuiescent;
  }

  // --- clients ---------------------------------------------------------------

  Bytes random_value() {
    Bytes v(sc_.value_len);
    for (std::size_t i = 0; i < v.size(); i += 8) {
      const auto r = rng_.next();
      for (std::size_t j = 0; j < 8 && i + j < v.size(); ++j) v[i + j] = static_cast<std::uint8_t>(r >> (8 * j));
    }
    return v;
  }

  ObjectId random_object() {
    if (zipf_cdf_.empty()) return static_cast<ObjectId>(rng_.next() % sc_.k);
    const double u = rng_.unit();
    const auto it = std::lower_bound(zipf_cdf_.begin(), zipf_cdf_.end(), u);
    return static_cast<ObjectId>(std::min<std::size_t>(it - zipf_cdf_.begin(), sc_.k - 1));
  }

  ServerId pick_switch_server() {
    std::vector<ServerId> live;
    for (ServerId s = 0; s < sc_.n; ++s) {
      if (alive_[s]) live.push_back(s);
    }
    if (live.empty()) return 0;
    return live[rng_.next() % live.size()];
  }

  void issue_next(ClientId c) {
    if (remaining_[c] == 0) return;
    --remaining_[c];
    auto& client = clients_[c];
    if (sc_.switch_servers) client.attach(pick_switch_server());
    const bool write = rng_.unit() < sc_.write_ratio;
    const ObjectId o = random_object();
    if (write) {
      issue_write(c, o, random_value(), TraceOpKind::kWrite);
    } else {
      issue_read(c, o, TraceOpKind::kRead);
    }
  }

  void issue_write(ClientId c, ObjectId o, Bytes value, TraceOpKind kind) {
    auto& client = clients_[c];
    const auto ctx = client.ctx();
    auto req = client.issue_write(o, std::move(value));
    trace_.events.emplace_back(OpInvoke{now_, c, req.op, kind, client.server(), o, req.value, ctx});
    send(Envelope{Address::client(c), Address::server(client.server()), std::move(req)});
  }

  void issue_read(ClientId c, ObjectId o, TraceOpKind kind) {
    auto& client = clients_[c];
    const auto ctx = client.ctx();
    auto req = client.issue_read(o);
    trace_.events.emplace_back(OpInvoke{now_, c, req.op, kind, client.server(), o, {}, ctx});
    send(Envelope{Address::client(c), Address::server(client.server()), std::move(req)});
  }

  void on_client_message(ClientId c, const Message& m) {
    auto& client = clients_.at(c);
    if (const auto* ack = std::get_if<WriteAck>(&m)) {
      client.on_write_ack(*ack);
      trace_.events.emplace_back(OpRespond{now_, c, ack->op, ack->tag, {}, client.ctx()});
    } else if (const auto* resp = std::get_if<ReadResp>(&m)) {
      client.on_read_resp(*resp);
      trace_.events.emplace_back(OpRespond{now_, c, resp->op, resp->tag, resp->value, client.ctx()});
    } else {
      throw std::logic_error("client received " + std::string(message_name(m)));
    }
    after_completion(c);
  }

  void after_completion(ClientId c) {
    if (c >= sc_.clients) {
      next_probe(c);
    } else if (sc_.scripted()) {
      poke_script();
    } else if (remaining_[c] > 0) {
      schedule_issue(c, rng_.uniform(sc_.think_min, sc_.think_max));
    }
  }

  // Script ops are issued strictly in order; see ScriptedOp::at.
  bool script_waiting_for_time() const {
    return sc_.scripted() && script_next_ < sc_.script.size() && sc_.script[script_next_].at &&
           *sc_.script[script_next_].at > now_;
  }

  void poke_script() {
    while (script_next_ < sc_.script.size()) {
      const auto& op = sc_.script[script_next_];
      auto& client = clients_[op.client];
      if (client.pending()) return;
      if (op.at) {
        if (*op.at > now_) return;
      } else {
        for (const auto& other : clients_) {
          if (other.pending()) return;
        }
      }
      if (op.server) client.attach(*op.server);
      if (op.write) {
        Bytes value(sc_.value_len, 0);
        std::copy(op.value.begin(), op.value.end(), value.begin());
        issue_write(op.client, op.object, std::move(value), TraceOpKind::kWrite);
      } else {
        issue_read(op.client, op.object, TraceOpKind::kRead);
      }
      ++script_next_;
    }
  }

  // --- probes ----------------------------------------------------------------

  void start_probes() {
    for (ServerId s = 0; s < sc_.n; ++s) {
      if (!alive_[s]) continue;
      const auto c = static_cast<ClientId>(clients_.size());
      clients_.emplace_back(c, s);
      probe_next_.push_back(0);
      next_probe(c);
    }
  }

  void next_probe(ClientId c) {
    auto& next = probe_next_[c - sc_.clients];
    while (next < sc_.k && !has_alive_recovery_set(*spec_, next, alive_)) ++next;
    if (next >= sc_.k) return;
    issue_read(c, next++, TraceOpKind::kProbe);
  }

  // --- bookkeeping -----------------------------------------------------------

  void snapshot(bool final) {
    for (ServerId s = 0; s < sc_.n; ++s) {
      if (!alive_[s]) continue;
      trace_.events.emplace_back(
          SnapshotEvent{now_, s, servers_[s].bytes_symbol(), servers_[s].bytes_history(), final});
    }
  }

  ServerStats collect_stats() const {
    ServerStats t;
    for (const auto& s : servers_) {
      const auto& x = s.stats();
      t.writes += x.writes;
      t.local_reads += x.local_reads;
      t.remote_reads += x.remote_reads;
      t.deferred_reads += x.deferred_reads;
      t.plain_completions += x.plain_completions;
      t.decodes += x.decodes;
      t.fetches += x.fetches;
      t.fetch_decodes += x.fetch_decodes;
      t.encodes += x.encodes;
      t.gc_dropped += x.gc_dropped;
      t.highest_tag_violations += x.highest_tag_violations;
      t.decode_tag_mismatches += x.decode_tag_mismatches;
    }
    return t;
  }

  void finish(RunStatus status) {
    snapshot(true);
    const auto total = collect_stats();
    const auto workload = workload_stats_.value_or(total);
    auto& f = trace_.footer;
    f.status = status;
    f.end_step = now_;
    auto& s = f.stats;
    s.writes = total.writes;
    s.local_reads = total.local_reads;
    s.remote_reads = total.remote_reads;
    s.deferred_reads = total.deferred_reads;
    s.decodes = workload.decodes;
    s.probe_decodes = total.decodes - workload.decodes;
    s.fetches = total.fetches;
    s.fetch_decodes = total.fetch_decodes;
    s.highest_tag_violations = total.highest_tag_violations;
    s.decode_tag_mismatches = total.decode_tag_mismatches;
    s.messages = messages_sent_;
    s.gossip_messages = gossip_sent_;
  }

  Scenario sc_;
  std::uint64_t seed_;
  Rng rng_;
  std::shared_ptr<const CodeSpec> spec_;
  std::vector<Server> servers_;
  std::vector<Client> clients_;
  std::vector<bool> alive_;
  std::vector<std::uint32_t> remaining_;
  std::vector<double> zipf_cdf_;
  std::vector<std::size_t> probe_next_;
  std::size_t script_next_ = 0;

  std::vector<Event> queue_;
  std::uint64_t next_seq_ = 0;
  std::uint64_t next_msg_id_ = 0;
  std::map<std::pair<Address, Address>, std::int64_t> channel_last_;
  std::int64_t now_ = 0;

  std::int64_t window_ = 0;
  std::int64_t monitor_period_ = 1;
  std::int64_t last_change_ = 0;
  std::uint64_t last_version_ = 0;
  std::uint64_t inflight_ = 0;
  std::uint64_t issues_scheduled_ = 0;
  std::uint64_t crashes_scheduled_ = 0;
  std::uint64_t messages_sent_ = 0;
  std::uint64_t gossip_sent_ = 0;
  ServerId violating_server_ = 0;
  std::optional<ServerStats> workload_stats_;

  Trace trace_;
};

/// Convenience wrapper: one complete run.
inline Trace simulate(const Scenario& scenario, std::uint64_t seed) {
  Simulation sim(scenario, seed);
  sim.run();
  return sim.take_trace();
}

}  // namespace causalec
