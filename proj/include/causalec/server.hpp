#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "causalec/codec.hpp"
#include "causalec/common.hpp"
#include "causalec/gf256.hpp"
#include "causalec/message.hpp"
#include "causalec/types.hpp"

namespace causalec {

/// Raised when a runtime protocol assertion fails. The simulator records it
/// in the trace and stops the run.
class ProtocolViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

struct Outbox {
  std::vector<Envelope> messages;

  void send(Address from, Address to, Message m) {
    messages.push_back(Envelope{from, to, std::move(m)});
  }
  void append(Outbox&& other) {
    for (auto& e : other.messages) messages.push_back(std::move(e));
  }
};

struct ServerStats {
  std::uint64_t writes = 0;
  std::uint64_t local_reads = 0;
  std::uint64_t remote_reads = 0;
  std::uint64_t deferred_reads = 0;
  std::uint64_t plain_completions = 0;
  std::uint64_t decodes = 0;
  std::uint64_t fetches = 0;
  std::uint64_t fetch_decodes = 0;
  std::uint64_t encodes = 0;
  std::uint64_t reencodes = 0;
  std::uint64_t gc_dropped = 0;
  std::uint64_t highest_tag_violations = 0;
  std::uint64_t decode_tag_mismatches = 0;
};

/// A read (or an old-value fetch for re-encoding) waiting on remote symbols.
struct PendingRead {
  enum class Kind : std::uint8_t { kClient, kFetch };

  std::uint64_t read_id = 0;
  Kind kind = Kind::kClient;
  ClientId client = 0;
  std::uint64_t op = 0;
  ObjectId object = 0;
  // Client reads accept any tag >= target; fetches need exactly target.
  Tag target;
  std::map<ServerId, CodewordSymbol> collected;
  std::optional<HistoryEntry> best_plain;
};

/// One CausalEC server. A deterministic single-threaded state machine: every
/// method is one transition and returns the messages it emits. A server's role
/// follows from its generator row alone; unit rows serve their object locally.
class Server {
 public:
  Server(ServerId id, std::shared_ptr<const CodeSpec> spec, std::span<const Bytes> initial_values)
      : id_(id), spec_(std::move(spec)) {
    if (!spec_) throw std::invalid_argument("Server: null code spec");
    if (id_ >= spec_->n()) throw std::out_of_range("Server: id out of range");
    const auto k = spec_->k();
    symbol_.server = id_;
    symbol_.payload = encode_symbol(*spec_, id_, initial_values);
    symbol_.encoded_tags.assign(k, kInitialTag);
    symbol_.encoded_deps.assign(k, {});
    history_.resize(k);
    applied_.assign(k, kInitialTag);
    gc_frontier_.assign(k, kInitialTag);
    encoded_up_to_.assign(spec_->n(), std::vector<Tag>(k, kInitialTag));
    systematic_ = spec_->systematic_object(id_);
  }

  ServerId id() const { return id_; }
  const CodeSpec& spec() const { return *spec_; }
  bool halted() const { return halted_; }
  const CodewordSymbol& symbol() const { return symbol_; }
  const std::vector<Tag>& applied() const { return applied_; }
  const std::map<Tag, HistoryEntry>& history(ObjectId o) const { return history_.at(o); }
  const std::vector<HistoryEntry>& parked() const { return parked_; }
  const std::map<std::uint64_t, PendingRead>& read_list() const { return read_list_; }
  const std::vector<std::vector<Tag>>& encoded_up_to() const { return encoded_up_to_; }
  const ServerStats& stats() const { return stats_; }
  std::uint64_t version() const { return version_; }
  std::size_t deferred_read_count() const { return waiting_.size(); }
  std::size_t registration_count() const { return registrations_.size() + tombstones_.size(); }

  std::size_t bytes_symbol() const { return symbol_.payload.size(); }
  std::size_t bytes_history() const {
    std::size_t total = 0;
    for (const auto& h : history_) {
      for (const auto& [t, e] : h) total += e.value.size();
    }
    for (const auto& e : parked_) total += e.value.size();
    for (const auto& [o, cached] : fetch_cache_) total += cached.second.size();
    return total;
  }

  /// Nothing buffered, nothing pending, symbol encodes everything applied.
  bool settled() const {
    if (!read_list_.empty() || !waiting_.empty() || !parked_.empty() || !registrations_.empty() ||
        !tombstones_.empty() || !fetch_cache_.empty()) {
      return false;
    }
    return symbol_.encoded_tags == applied_;
  }

  void halt() {
    halted_ = true;
    ++version_;
  }

  Outbox handle(const Envelope& env) {
    if (halted_) return {};
    return std::visit(
        [&](const auto& m) -> Outbox {
          using T = std::decay_t<decltype(m)>;
          if constexpr (std::is_same_v<T, WriteReq>) {
            return on_client_write(env.from.id, m);
          } else if constexpr (std::is_same_v<T, ReadReq>) {
            return on_client_read(env.from.id, m);
          } else if constexpr (std::is_same_v<T, Propagate>) {
            return on_propagate(m.entry);
          } else if constexpr (std::is_same_v<T, ReadHelpReq>) {
            return on_read_help_req(env.from.id, m);
          } else if constexpr (std::is_same_v<T, ReadHelpResp>) {
            return on_read_help_resp(env.from.id, m);
          } else if constexpr (std::is_same_v<T, ReadDone>) {
            on_read_done(m);
            return {};
          } else if constexpr (std::is_same_v<T, EncodedUpTo>) {
            on_encoded_up_to(m);
            return {};
          } else {
            throw std::invalid_argument("Server: unexpected message " +
                                        std::string(message_name(env.message)));
          }
        },
        env.message);
  }

  // --- input actions from clients -----------------------------------------

  /// Local write: tag, apply, ack and propagate in one transition.
  Outbox on_client_write(ClientId client, const WriteReq& req) {
    Outbox out;
    if (halted_) return out;
    check_object(req.object);
    if (req.value.size() != spec_->value_len()) {
      throw std::invalid_argument("on_client_write: value length must equal value_len");
    }
    std::uint64_t seq = applied_[req.object].seq;
    if (auto it = req.ctx.find(req.object); it != req.ctx.end()) seq = std::max(seq, it->second.seq);
    HistoryEntry entry{req.object, Tag{seq + 1, id_}, req.value, req.ctx};
    apply(entry);
    ++stats_.writes;
    out.send(self(), Address::client(client), WriteAck{req.op, req.object, entry.tag});
    broadcast(out, Propagate{entry});
    release_parked();
    out.append(serve_waiting());
    return out;
  }

  /// Serves locally when the object is stored systematically or buffered in
  /// history; otherwise asks every other server for help.
  Outbox on_client_read(ClientId client, const ReadReq& req) {
    Outbox out;
    if (halted_) return out;
    check_object(req.object);
    Tag min = kInitialTag;
    if (auto it = req.ctx.find(req.object); it != req.ctx.end()) min = it->second;
    Waiting w{client, req.op, req.object, min};
    switch (try_serve_local(w, out)) {
      case LocalResult::kServed:
        break;
      case LocalResult::kWait:
        ++stats_.deferred_reads;
        waiting_.push_back(w);
        ++version_;
        break;
      case LocalResult::kRemote:
        start_remote_read(PendingRead::Kind::kClient, w, out);
        break;
    }
    return out;
  }

  // --- input actions from other servers ------------------------------------

  Outbox on_propagate(const HistoryEntry& entry) {
    Outbox out;
    if (halted_) return out;
    check_object(entry.object);
    if (entry.value.size() != spec_->value_len()) {
      throw std::invalid_argument("on_propagate: value length must equal value_len");
    }
    auto& h = history_[entry.object];
    if (h.contains(entry.tag)) return out;
    for (const auto& p : parked_) {
      if (p.object == entry.object && p.tag == entry.tag) return out;
    }
    // Already superseded at every live server: nobody needs the value.
    if (entry.tag < gc_frontier_[entry.object]) return out;
    if (ctx_satisfied(entry.deps, applied_)) {
      apply(entry);
      release_parked();
    } else {
      parked_.push_back(entry);
      ++version_;
    }
    out.append(serve_waiting());
    return out;
  }

  Outbox on_read_help_req(ServerId from, const ReadHelpReq& req) {
    Outbox out;
    if (halted_) return out;
    check_object(req.object);
    if (tombstones_.erase(req.read_id) > 0) {
      ++version_;
      return out;
    }
    registrations_[req.read_id] = Registration{from, req.object};
    ++version_;
    out.send(self(), Address::server(from), help_response(req.read_id, req.object));
    return out;
  }

  Outbox on_read_help_resp(ServerId from, const ReadHelpResp& resp) {
    Outbox out;
    if (halted_) return out;
    auto it = read_list_.find(resp.read_id);
    if (it == read_list_.end()) return out;
    auto& read = it->second;
    auto slot = read.collected.find(from);
    if (slot == read.collected.end()) {
      read.collected.emplace(from, resp.symbol);
    } else if (pointwise_leq(slot->second.encoded_tags, resp.symbol.encoded_tags)) {
      slot->second = resp.symbol;
    }
    for (const auto& e : resp.values) consider_plain(read, e);
    if (spec_->systematic_object(from) == read.object) {
      const auto& sym = resp.symbol;
      consider_plain(read, HistoryEntry{read.object, sym.encoded_tags[read.object], sym.payload,
                                        sym.encoded_deps[read.object]});
    }
    ++version_;
    try_complete(it, out);
    return out;
  }

  void on_read_done(const ReadDone& m) {
    if (halted_) return;
    if (registrations_.erase(m.read_id) == 0) tombstones_.insert(m.read_id);
    ++version_;
  }

  void on_encoded_up_to(const EncodedUpTo& m) {
    if (halted_ || m.server >= spec_->n() || m.tags.size() != spec_->k()) return;
    auto& known = encoded_up_to_[m.server];
    for (std::size_t o = 0; o < known.size(); ++o) {
      if (known[o] < m.tags[o]) {
        known[o] = m.tags[o];
        ++version_;
      }
    }
  }

  // --- internal actions ------------------------------------------------------

  /// Folds the newest applied version of every object into the symbol,
  /// incrementally: payload ^= c_o * (new_o ^ old_o). The old value comes from
  /// the payload itself on a unit row, else from history or a completed fetch.
  /// Objects whose old value is unknown are folded in together by re-encoding
  /// the symbol from plain values, once every other object it combines is
  /// known at its encoded version. Whatever is missing for either route is
  /// fetched.
  Outbox internal_encode() {
    Outbox out;
    if (halted_) return out;
    const auto k = spec_->k();
    const auto before = symbol_.encoded_tags;
    bool support_changed = false;
    std::vector<ObjectId> stuck;
    for (ObjectId o = 0; o < k; ++o) {
      if (!(symbol_.encoded_tags[o] < applied_[o])) continue;
      const auto c = spec_->coeff(id_, o);
      if (c == 0) {
        symbol_.encoded_tags[o] = applied_[o];
        continue;
      }
      const auto& fresh = applied_entry(o);
      const Tag old_tag = symbol_.encoded_tags[o];
      const Bytes* old_value = known_value(o, old_tag);
      if (!old_value) {
        stuck.push_back(o);
        continue;
      }
      Bytes delta = fresh.value;
      for (std::size_t i = 0; i < delta.size(); ++i) delta[i] ^= (*old_value)[i];
      if (systematic_ == o) {
        // Parity servers still encoding the old version may fetch it from here.
        history_[o].try_emplace(old_tag, HistoryEntry{o, old_tag, symbol_.payload, symbol_.encoded_deps[o]});
      }
      gf256::mul_add(symbol_.payload, delta, c);
      symbol_.encoded_tags[o] = fresh.tag;
      symbol_.encoded_deps[o] = fresh.deps;
      support_changed = true;
      ++stats_.encodes;
    }

    std::vector<std::optional<Tag>> needed(k);
    if (!stuck.empty()) {
      bool complete = true;
      for (ObjectId x = 0; x < k; ++x) {
        if (spec_->coeff(id_, x) == 0) continue;
        needed[x] = symbol_.encoded_tags[x];
        const bool is_stuck = std::find(stuck.begin(), stuck.end(), x) != stuck.end();
        if (!is_stuck && !known_value(x, symbol_.encoded_tags[x])) complete = false;
      }
      if (complete) {
        reencode(stuck);
        support_changed = true;
        needed.assign(k, std::nullopt);
      } else {
        for (ObjectId x = 0; x < k; ++x) {
          if (needed[x] && !known_value(x, *needed[x])) start_fetch(x, *needed[x], out);
        }
      }
    }
    drop_unneeded_fetches(needed, out);

    if (symbol_.encoded_tags != before) ++version_;
    if (support_changed) {
      for (const auto& [read_id, reg] : registrations_) {
        out.send(self(), Address::server(reg.requester), help_response(read_id, reg.object));
      }
      for (auto it = read_list_.begin(); it != read_list_.end();) {
        auto next = std::next(it);
        it->second.collected[id_] = symbol_;
        try_complete(it, out);
        it = next;
      }
    }
    return out;
  }

  Outbox internal_gossip() const {
    Outbox out;
    if (halted_) return out;
    for (ServerId s = 0; s < spec_->n(); ++s) {
      if (s != id_) out.send(self(), Address::server(s), EncodedUpTo{id_, symbol_.encoded_tags});
    }
    return out;
  }

  /// Drops history entries every live server has encoded past. The entry at
  /// the frontier itself is kept while something newer is applied, because
  /// servers still encoding it need it as the old value of their next update.
  Outbox garbage_collect(const std::vector<bool>& alive) {
    Outbox out;
    if (halted_) return out;
    if (alive.size() != spec_->n()) throw std::invalid_argument("garbage_collect: alive mask size");
    for (ObjectId o = 0; o < spec_->k(); ++o) {
      if (object_busy(o)) continue;
      Tag frontier = symbol_.encoded_tags[o];
      for (ServerId s = 0; s < spec_->n(); ++s) {
        if (s == id_ || !alive[s]) continue;
        frontier = std::min(frontier, encoded_up_to_[s][o]);
      }
      if (gc_frontier_[o] < frontier) gc_frontier_[o] = frontier;
      auto& h = history_[o];
      for (auto it = h.begin(); it != h.end();) {
        const bool stale = it->first < frontier || (it->first == frontier && it->first == applied_[o]);
        if (!stale) break;  // map is tag-ordered
        it = h.erase(it);
        ++stats_.gc_dropped;
        ++version_;
      }
    }
    for (auto it = registrations_.begin(); it != registrations_.end();) {
      if (!alive.at(it->second.requester)) {
        it = registrations_.erase(it);
        ++version_;
      } else {
        ++it;
      }
    }
    for (auto it = tombstones_.begin(); it != tombstones_.end();) {
      if (!alive.at(requester_of(*it))) {
        it = tombstones_.erase(it);
        ++version_;
      } else {
        ++it;
      }
    }
    out.append(serve_waiting());
    return out;
  }

 private:
  struct Registration {
    ServerId requester = 0;
    ObjectId object = 0;
  };
  struct Waiting {
    ClientId client = 0;
    std::uint64_t op = 0;
    ObjectId object = 0;
    Tag min;
  };
  enum class LocalResult { kServed, kWait, kRemote };

  Address self() const { return Address::server(id_); }

  static constexpr int kReadIdShift = 40;
  static ServerId requester_of(std::uint64_t read_id) {
    return static_cast<ServerId>(read_id >> kReadIdShift);
  }

  void check_object(ObjectId o) const {
    if (o >= spec_->k()) throw std::out_of_range("object id out of range");
  }

  template <typename M>
  void broadcast(Outbox& out, const M& m) const {
    for (ServerId s = 0; s < spec_->n(); ++s) {
      if (s != id_) out.send(self(), Address::server(s), m);
    }
  }

  static bool pointwise_leq(const std::vector<Tag>& a, const std::vector<Tag>& b) {
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (b[i] < a[i]) return false;
    }
    return true;
  }

  bool object_busy(ObjectId o) const {
    for (const auto& [id, r] : read_list_) {
      if (r.object == o) return true;
    }
    for (const auto& w : waiting_) {
      if (w.object == o) return true;
    }
    return false;
  }

  void apply(const HistoryEntry& entry) {
    history_[entry.object].emplace(entry.tag, entry);
    if (applied_[entry.object] < entry.tag) applied_[entry.object] = entry.tag;
    ++version_;
  }

  void release_parked() {
    bool progress = true;
    while (progress) {
      progress = false;
      for (auto it = parked_.begin(); it != parked_.end();) {
        if (ctx_satisfied(it->deps, applied_)) {
          apply(*it);
          it = parked_.erase(it);
          progress = true;
        } else {
          ++it;
        }
      }
    }
  }

  ReadHelpResp help_response(std::uint64_t read_id, ObjectId o) const {
    ReadHelpResp r;
    r.read_id = read_id;
    r.symbol = symbol_;
    r.values.reserve(history_[o].size());
    for (const auto& [t, e] : history_[o]) r.values.push_back(e);
    return r;
  }

  LocalResult try_serve_local(const Waiting& w, Outbox& out) {
    const HistoryEntry* best = nullptr;
    HistoryEntry from_symbol;
    const auto& h = history_[w.object];
    if (!h.empty()) best = &h.rbegin()->second;
    if (systematic_ == w.object) {
      const Tag t = symbol_.encoded_tags[w.object];
      if (!best || best->tag < t) {
        from_symbol = HistoryEntry{w.object, t, symbol_.payload, symbol_.encoded_deps[w.object]};
        best = &from_symbol;
      }
    }
    if (!best) return LocalResult::kRemote;
    if (best->tag < w.min) return LocalResult::kWait;
    // Every local read returns the highest version this server has applied.
    if (best->tag != applied_[w.object]) {
      ++stats_.highest_tag_violations;
      throw ProtocolViolation("local read at server " + std::to_string(id_) + " returned " +
                              to_string(best->tag) + " below applied " +
                              to_string(applied_[w.object]));
    }
    ++stats_.local_reads;
    out.send(self(), Address::client(w.client),
             ReadResp{w.op, w.object, best->tag, best->value, best->deps});
    return LocalResult::kServed;
  }

  Outbox serve_waiting() {
    Outbox out;
    for (auto it = waiting_.begin(); it != waiting_.end();) {
      const Waiting w = *it;
      const auto r = try_serve_local(w, out);
      if (r == LocalResult::kWait) {
        ++it;
        continue;
      }
      it = waiting_.erase(it);
      ++version_;
      if (r == LocalResult::kRemote) start_remote_read(PendingRead::Kind::kClient, w, out);
    }
    return out;
  }

  void start_remote_read(PendingRead::Kind kind, const Waiting& w, Outbox& out) {
    PendingRead read;
    read.read_id = (static_cast<std::uint64_t>(id_) << kReadIdShift) | next_read_seq_++;
    read.kind = kind;
    read.client = w.client;
    read.op = w.op;
    read.object = w.object;
    read.target = w.min;
    read.collected.emplace(id_, symbol_);
    if (kind == PendingRead::Kind::kClient) {
      ++stats_.remote_reads;
    } else {
      ++stats_.fetches;
    }
    auto [it, inserted] = read_list_.emplace(read.read_id, std::move(read));
    ++version_;
    broadcast(out, ReadHelpReq{it->first, w.object});
  }

  void start_fetch(ObjectId o, const Tag& tag, Outbox& out) {
    for (const auto& [id, r] : read_list_) {
      if (r.kind == PendingRead::Kind::kFetch && r.object == o && r.target == tag) return;
    }
    start_remote_read(PendingRead::Kind::kFetch, Waiting{0, 0, o, tag}, out);
  }

  /// Cancels fetches and forgets fetched values that no pending update needs.
  void drop_unneeded_fetches(const std::vector<std::optional<Tag>>& needed, Outbox& out) {
    for (auto it = read_list_.begin(); it != read_list_.end();) {
      const auto& r = it->second;
      if (r.kind == PendingRead::Kind::kFetch && needed[r.object] != r.target) {
        broadcast(out, ReadDone{r.read_id});
        it = read_list_.erase(it);
        ++version_;
      } else {
        ++it;
      }
    }
    for (auto it = fetch_cache_.begin(); it != fetch_cache_.end();) {
      if (needed[it->first] != it->second.first) {
        it = fetch_cache_.erase(it);
        ++version_;
      } else {
        ++it;
      }
    }
  }

  const HistoryEntry& applied_entry(ObjectId o) const {
    auto it = history_[o].find(applied_[o]);
    if (it == history_[o].end()) {
      throw ProtocolViolation("internal_encode: applied version of object " + std::to_string(o) +
                              " missing from history at server " + std::to_string(id_));
    }
    return it->second;
  }

  /// A locally available plain value of object o at exactly tag t.
  const Bytes* known_value(ObjectId o, const Tag& t) const {
    if (systematic_ == o && symbol_.encoded_tags[o] == t) return &symbol_.payload;
    if (auto h = history_[o].find(t); h != history_[o].end()) return &h->second.value;
    if (auto f = fetch_cache_.find(o); f != fetch_cache_.end() && f->second.first == t) return &f->second.second;
    return nullptr;
  }

  /// Rebuilds the payload from plain values: applied versions of `stuck`,
  /// the currently encoded versions of everything else.
  void reencode(const std::vector<ObjectId>& stuck) {
    const auto k = spec_->k();
    Bytes payload(spec_->value_len(), 0);
    auto tags = symbol_.encoded_tags;
    auto deps = symbol_.encoded_deps;
    for (ObjectId x = 0; x < k; ++x) {
      const auto c = spec_->coeff(id_, x);
      if (c == 0) continue;
      if (std::find(stuck.begin(), stuck.end(), x) != stuck.end()) {
        const auto& fresh = applied_entry(x);
        gf256::mul_add(payload, fresh.value, c);
        tags[x] = fresh.tag;
        deps[x] = fresh.deps;
      } else {
        gf256::mul_add(payload, *known_value(x, tags[x]), c);
      }
    }
    symbol_.payload = std::move(payload);
    symbol_.encoded_tags = std::move(tags);
    symbol_.encoded_deps = std::move(deps);
    ++stats_.reencodes;
  }

  void consider_plain(PendingRead& read, const HistoryEntry& e) {
    if (e.object != read.object) return;
    if (read.kind == PendingRead::Kind::kFetch) {
      if (e.tag == read.target) read.best_plain = e;
      return;
    }
    if (e.tag < read.target) return;
    if (!read.best_plain || read.best_plain->tag < e.tag) read.best_plain = e;
  }

  bool acceptable(const PendingRead& read, const Tag& t) const {
    return read.kind == PendingRead::Kind::kFetch ? t == read.target : !(t < read.target);
  }

  // Two symbols may be combined iff they agree on every object both encode.
  bool compatible(const CodewordSymbol& a, const CodewordSymbol& b) const {
    for (ObjectId o = 0; o < spec_->k(); ++o) {
      if (spec_->coeff(a.server, o) != 0 && spec_->coeff(b.server, o) != 0 &&
          a.encoded_tags[o] != b.encoded_tags[o]) {
        return false;
      }
    }
    return true;
  }

  /// Searches the collected symbols for a mutually consistent group that spans
  /// the target object at an acceptable version. Plain values this server
  /// holds for the other objects the group combines join as unit rows, so a
  /// parity symbol can be decoded by subtracting known objects.
  std::optional<HistoryEntry> try_decode(const PendingRead& read) {
    const ObjectId o = read.object;
    const std::size_t k = spec_->k();
    for (const auto& [anchor_id, anchor] : read.collected) {
      if (spec_->coeff(anchor_id, o) == 0) continue;
      if (!acceptable(read, anchor.encoded_tags[o])) continue;
      std::vector<const CodewordSymbol*> group{&anchor};
      for (const auto& [sid, sym] : read.collected) {
        if (sid == anchor_id) continue;
        bool ok = true;
        for (const auto* g : group) {
          if (!compatible(*g, sym)) {
            ok = false;
            break;
          }
        }
        if (ok) group.push_back(&sym);
      }

      std::vector<std::vector<std::uint8_t>> rows;
      std::vector<const Bytes*> payloads;
      std::vector<std::optional<Tag>> fixed(k);
      for (const auto* g : group) {
        const auto row = spec_->row(g->server);
        rows.emplace_back(row.begin(), row.end());
        payloads.push_back(&g->payload);
        for (ObjectId x = 0; x < k; ++x) {
          if (row[x] != 0 && !fixed[x]) fixed[x] = g->encoded_tags[x];
        }
      }
      for (ObjectId x = 0; x < k; ++x) {
        if (x == o || !fixed[x]) continue;
        auto h = history_[x].find(*fixed[x]);
        if (h == history_[x].end()) continue;
        rows.emplace_back(k, 0);
        rows.back()[x] = 1;
        payloads.push_back(&h->second.value);
      }
      const auto lambda = solve_coefficients(rows, k, o);
      if (!lambda) continue;

      // Every object folded into more than one member must carry one tag.
      for (ObjectId x = 0; x < k; ++x) {
        std::optional<Tag> seen;
        for (const auto* g : group) {
          if (spec_->coeff(g->server, x) == 0) continue;
          if (seen && *seen != g->encoded_tags[x]) {
            ++stats_.decode_tag_mismatches;
            throw ProtocolViolation("decode at server " + std::to_string(id_) +
                                    " over mismatched tags of object " + std::to_string(x));
          }
          seen = g->encoded_tags[x];
        }
      }
      Bytes value(spec_->value_len(), 0);
      for (std::size_t j = 0; j < rows.size(); ++j) gf256::mul_add(value, *payloads[j], (*lambda)[j]);
      return HistoryEntry{o, anchor.encoded_tags[o], std::move(value), anchor.encoded_deps[o]};
    }
    return std::nullopt;
  }

  void try_complete(std::map<std::uint64_t, PendingRead>::iterator it, Outbox& out) {
    auto& read = it->second;
    std::optional<HistoryEntry> result;
    bool decoded = false;
    if (read.best_plain) {
      result = read.best_plain;
    } else {
      result = try_decode(read);
      decoded = result.has_value();
    }
    if (!result) return;
    if (read.kind == PendingRead::Kind::kClient) {
      if (decoded) {
        ++stats_.decodes;
      } else {
        ++stats_.plain_completions;
      }
      out.send(self(), Address::client(read.client),
               ReadResp{read.op, read.object, result->tag, result->value, result->deps});
    } else {
      if (decoded) ++stats_.fetch_decodes;
      fetch_cache_[read.object] = {result->tag, std::move(result->value)};
    }
    broadcast(out, ReadDone{read.read_id});
    read_list_.erase(it);
    ++version_;
  }

  ServerId id_;
  std::shared_ptr<const CodeSpec> spec_;
  std::optional<ObjectId> systematic_;
  bool halted_ = false;

  CodewordSymbol symbol_;
  std::vector<std::map<Tag, HistoryEntry>> history_;
  std::vector<Tag> applied_;
  std::vector<Tag> gc_frontier_;
  std::vector<HistoryEntry> parked_;
  std::vector<std::vector<Tag>> encoded_up_to_;

  std::map<std::uint64_t, PendingRead> read_list_;
  std::vector<Waiting> waiting_;
  std::map<ObjectId, std::pair<Tag, Bytes>> fetch_cache_;
  std::map<std::uint64_t, Registration> registrations_;
  std::set<std::uint64_t> tombstones_;
  std::uint64_t next_read_seq_ = 0;

  ServerStats stats_;
  std::uint64_t version_ = 0;
};

}  // namespace causalec
