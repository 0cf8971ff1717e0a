#pragma once

#include <cstdint>
#include <cstring>
#include <span>
#include <stdexcept>
#include <string_view>
#include <type_traits>
#include <variant>
#include <vector>

#include "causalec/common.hpp"
#include "causalec/types.hpp"

namespace causalec {

struct WriteReq {
  std::uint64_t op = 0;
  ObjectId object = 0;
  Bytes value;
  DependencyContext ctx;
  friend bool operator==(const WriteReq&, const WriteReq&) = default;
};

struct WriteAck {
  std::uint64_t op = 0;
  ObjectId object = 0;
  Tag tag;
  friend bool operator==(const WriteAck&, const WriteAck&) = default;
};

struct ReadReq {
  std::uint64_t op = 0;
  ObjectId object = 0;
  DependencyContext ctx;
  friend bool operator==(const ReadReq&, const ReadReq&) = default;
};

struct ReadResp {
  std::uint64_t op = 0;
  ObjectId object = 0;
  Tag tag;
  Bytes value;
  DependencyContext deps;
  friend bool operator==(const ReadResp&, const ReadResp&) = default;
};

struct Propagate {
  HistoryEntry entry;
  friend bool operator==(const Propagate&, const Propagate&) = default;
};

struct ReadHelpReq {
  std::uint64_t read_id = 0;
  ObjectId object = 0;
  friend bool operator==(const ReadHelpReq&, const ReadHelpReq&) = default;
};

struct ReadHelpResp {
  std::uint64_t read_id = 0;
  CodewordSymbol symbol;
  std::vector<HistoryEntry> values;  // plain history values of the requested object
  friend bool operator==(const ReadHelpResp&, const ReadHelpResp&) = default;
};

/// Tells responders to stop re-sending symbols for a completed read.
struct ReadDone {
  std::uint64_t read_id = 0;
  friend bool operator==(const ReadDone&, const ReadDone&) = default;
};

struct EncodedUpTo {
  ServerId server = 0;
  std::vector<Tag> tags;
  friend bool operator==(const EncodedUpTo&, const EncodedUpTo&) = default;
};

using Message = std::variant<WriteReq, WriteAck, ReadReq, ReadResp, Propagate, ReadHelpReq,
                             ReadHelpResp, ReadDone, EncodedUpTo>;

inline std::string_view message_name(const Message& m) {
  static constexpr std::string_view kNames[] = {
      "WriteReq",    "WriteAck",     "ReadReq",  "ReadResp",   "Propagate",
      "ReadHelpReq", "ReadHelpResp", "ReadDone", "EncodedUpTo"};
  return kNames[m.index()];
}

struct Address {
  enum class Role : std::uint8_t { kServer = 0, kClient = 1 };
  Role role = Role::kServer;
  std::uint32_t id = 0;

  static Address server(ServerId s) { return {Role::kServer, s}; }
  static Address client(ClientId c) { return {Role::kClient, c}; }
  bool is_server() const { return role == Role::kServer; }

  friend auto operator<=>(const Address&, const Address&) = default;
};

struct Envelope {
  Address from;
  Address to;
  Message message;
};

class WireError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace wire {

// Canonical encoding: one kind byte, a u32 body length, then the body.
// Integers are little-endian; variable-size fields carry a u32 length prefix.

class Writer {
 public:
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void bytes(std::span<const std::uint8_t> b) {
    u32(static_cast<std::uint32_t>(b.size()));
    out_.insert(out_.end(), b.begin(), b.end());
  }
  void tag(const Tag& t) {
    u64(t.seq);
    u32(t.writer);
  }
  void tags(const std::vector<Tag>& ts) {
    u32(static_cast<std::uint32_t>(ts.size()));
    for (const auto& t : ts) tag(t);
  }
  void ctx(const DependencyContext& c) {
    u32(static_cast<std::uint32_t>(c.size()));
    for (const auto& [o, t] : c) {
      u32(o);
      tag(t);
    }
  }
  void entry(const HistoryEntry& e) {
    u32(e.object);
    tag(e.tag);
    bytes(e.value);
    ctx(e.deps);
  }
  void symbol(const CodewordSymbol& s) {
    u32(s.server);
    bytes(s.payload);
    tags(s.encoded_tags);
    u32(static_cast<std::uint32_t>(s.encoded_deps.size()));
    for (const auto& d : s.encoded_deps) ctx(d);
  }

  Bytes take() { return std::move(out_); }
  std::size_t size() const { return out_.size(); }
  Bytes& buffer() { return out_; }

 private:
  Bytes out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> in) : in_(in) {}

  std::uint8_t u8() {
    need(1);
    return in_[pos_++];
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(in_[pos_++]) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(in_[pos_++]) << (8 * i);
    return v;
  }
  Bytes bytes() {
    const auto n = u32();
    need(n);
    Bytes b(in_.begin() + static_cast<std::ptrdiff_t>(pos_),
            in_.begin() + static_cast<std::ptrdiff_t>(pos_ + n));
    pos_ += n;
    return b;
  }
  Tag tag() {
    Tag t;
    t.seq = u64();
    t.writer = u32();
    return t;
  }
  std::vector<Tag> tags() {
    const auto n = count(12);
    std::vector<Tag> ts;
    ts.reserve(n);
    for (std::uint32_t i = 0; i < n; ++i) ts.push_back(tag());
    return ts;
  }
  DependencyContext ctx() {
    const auto n = count(16);
    DependencyContext c;
    for (std::uint32_t i = 0; i < n; ++i) {
      const auto o = u32();
      c[o] = tag();
    }
    return c;
  }
  HistoryEntry entry() {
    HistoryEntry e;
    e.object = u32();
    e.tag = tag();
    e.value = bytes();
    e.deps = ctx();
    return e;
  }
  CodewordSymbol symbol() {
    CodewordSymbol s;
    s.server = u32();
    s.payload = bytes();
    s.encoded_tags = tags();
    const auto n = count(4);
    s.encoded_deps.reserve(n);
    for (std::uint32_t i = 0; i < n; ++i) s.encoded_deps.push_back(ctx());
    return s;
  }

  bool done() const { return pos_ == in_.size(); }
  std::size_t position() const { return pos_; }

 private:
  void need(std::size_t n) const {
    if (in_.size() - pos_ < n) throw WireError("wire: truncated input");
  }
  // Element counts are bounded by the remaining input to reject garbage early.
  std::uint32_t count(std::size_t min_elem_size) {
    const auto n = u32();
    if (static_cast<std::size_t>(n) * min_elem_size > in_.size() - pos_) {
      throw WireError("wire: element count exceeds input");
    }
    return n;
  }

  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

inline void write_body(Writer& w, const WriteReq& m) {
  w.u64(m.op);
  w.u32(m.object);
  w.bytes(m.value);
  w.ctx(m.ctx);
}
inline void write_body(Writer& w, const WriteAck& m) {
  w.u64(m.op);
  w.u32(m.object);
  w.tag(m.tag);
}
inline void write_body(Writer& w, const ReadReq& m) {
  w.u64(m.op);
  w.u32(m.object);
  w.ctx(m.ctx);
}
inline void write_body(Writer& w, const ReadResp& m) {
  w.u64(m.op);
  w.u32(m.object);
  w.tag(m.tag);
  w.bytes(m.value);
  w.ctx(m.deps);
}
inline void write_body(Writer& w, const Propagate& m) { w.entry(m.entry); }
inline void write_body(Writer& w, const ReadHelpReq& m) {
  w.u64(m.read_id);
  w.u32(m.object);
}
inline void write_body(Writer& w, const ReadHelpResp& m) {
  w.u64(m.read_id);
  w.symbol(m.symbol);
  w.u32(static_cast<std::uint32_t>(m.values.size()));
  for (const auto& e : m.values) w.entry(e);
}
inline void write_body(Writer& w, const ReadDone& m) { w.u64(m.read_id); }
inline void write_body(Writer& w, const EncodedUpTo& m) {
  w.u32(m.server);
  w.tags(m.tags);
}

template <typename T>
T read_body(Reader& r);

template <>
inline WriteReq read_body<WriteReq>(Reader& r) {
  WriteReq m;
  m.op = r.u64();
  m.object = r.u32();
  m.value = r.bytes();
  m.ctx = r.ctx();
  return m;
}
template <>
inline WriteAck read_body<WriteAck>(Reader& r) {
  WriteAck m;
  m.op = r.u64();
  m.object = r.u32();
  m.tag = r.tag();
  return m;
}
template <>
inline ReadReq read_body<ReadReq>(Reader& r) {
  ReadReq m;
  m.op = r.u64();
  m.object = r.u32();
  m.ctx = r.ctx();
  return m;
}
template <>
inline ReadResp read_body<ReadResp>(Reader& r) {
  ReadResp m;
  m.op = r.u64();
  m.object = r.u32();
  m.tag = r.tag();
  m.value = r.bytes();
  m.deps = r.ctx();
  return m;
}
template <>
inline Propagate read_body<Propagate>(Reader& r) {
  return Propagate{r.entry()};
}
template <>
inline ReadHelpReq read_body<ReadHelpReq>(Reader& r) {
  ReadHelpReq m;
  m.read_id = r.u64();
  m.object = r.u32();
  return m;
}
template <>
inline ReadHelpResp read_body<ReadHelpResp>(Reader& r) {
  ReadHelpResp m;
  m.read_id = r.u64();
  m.symbol = r.symbol();
  const auto n = r.u32();
  for (std::uint32_t i = 0; i < n; ++i) m.values.push_back(r.entry());
  return m;
}
template <>
inline ReadDone read_body<ReadDone>(Reader& r) {
  return ReadDone{r.u64()};
}
template <>
inline EncodedUpTo read_body<EncodedUpTo>(Reader& r) {
  EncodedUpTo m;
  m.server = r.u32();
  m.tags = r.tags();
  return m;
}

template <std::size_t I = 0>
Message read_variant(std::size_t index, Reader& r) {
  if constexpr (I < std::variant_size_v<Message>) {
    if (index == I) return Message{std::in_place_index<I>, read_body<std::variant_alternative_t<I, Message>>(r)};
    return read_variant<I + 1>(index, r);
  } else {
    throw WireError("wire: unknown message kind");
  }
}

}  // namespace wire

inline Bytes serialize(const Message& m) {
  wire::Writer w;
  w.u8(static_cast<std::uint8_t>(m.index()));
  w.u32(0);  // body length, patched below
  std::visit([&w](const auto& body) { wire::write_body(w, body); }, m);
  auto& buf = w.buffer();
  const auto body_len = static_cast<std::uint32_t>(buf.size() - 5);
  for (int i = 0; i < 4; ++i) buf[1 + i] = static_cast<std::uint8_t>(body_len >> (8 * i));
  return w.take();
}

inline Message deserialize(std::span<const std::uint8_t> bytes) {
  wire::Reader head(bytes);
  const auto kind = head.u8();
  const auto body_len = head.u32();
  if (bytes.size() - 5 != body_len) throw WireError("wire: body length mismatch");
  wire::Reader body(bytes.subspan(5));
  auto m = wire::read_variant(kind, body);
  if (!body.done()) throw WireError("wire: trailing bytes in body");
  return m;
}

}  // namespace causalec
