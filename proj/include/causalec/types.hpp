#pragma once

#include <compare>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "causalec/common.hpp"

namespace causalec {

/// Version identifier of one write. Ordered by (seq, writer); the writer id
/// breaks ties between concurrent writes that picked the same counter.
struct Tag {
  std::uint64_t seq = 0;
  ServerId writer = 0;

  friend constexpr auto operator<=>(const Tag&, const Tag&) = default;
};

/// Tag of the initial value of every object.
inline constexpr Tag kInitialTag{0, 0};

inline std::string to_string(const Tag& t) {
  return "(" + std::to_string(t.seq) + ",s" + std::to_string(t.writer) + ")";
}

enum class Ordering { kLess, kEqual, kGreater };

constexpr Ordering tag_compare(const Tag& a, const Tag& b) {
  const auto c = a <=> b;
  if (c < 0) return Ordering::kLess;
  if (c > 0) return Ordering::kGreater;
  return Ordering::kEqual;
}

/// Causal metadata: the latest known tag per object. An absent object means
/// no dependency on it.
using DependencyContext = std::map<ObjectId, Tag>;

inline void ctx_merge_into(DependencyContext& into, const DependencyContext& from) {
  for (const auto& [o, t] : from) {
    auto [it, inserted] = into.try_emplace(o, t);
    if (!inserted && it->second < t) it->second = t;
  }
}

inline void ctx_merge_into(DependencyContext& into, ObjectId o, const Tag& t) {
  auto [it, inserted] = into.try_emplace(o, t);
  if (!inserted && it->second < t) it->second = t;
}

inline DependencyContext ctx_merge(DependencyContext a, const DependencyContext& b) {
  ctx_merge_into(a, b);
  return a;
}

/// True iff every dependency is covered by the applied tag of its object.
inline bool ctx_satisfied(const DependencyContext& ctx, const std::vector<Tag>& applied) {
  for (const auto& [o, t] : ctx) {
    if (o >= applied.size() || applied[o] < t) return false;
  }
  return true;
}

inline bool ctx_satisfied(const DependencyContext& ctx, const std::map<ObjectId, Tag>& applied) {
  for (const auto& [o, t] : ctx) {
    auto it = applied.find(o);
    if (it == applied.end() || it->second < t) return false;
  }
  return true;
}

/// Pointwise a <= b, with a missing entry in b read as "no version".
inline bool ctx_leq(const DependencyContext& a, const DependencyContext& b) {
  for (const auto& [o, t] : a) {
    auto it = b.find(o);
    if (it == b.end() || it->second < t) return false;
  }
  return true;
}

struct HistoryEntry {
  ObjectId object = 0;
  Tag tag;
  Bytes value;
  DependencyContext deps;

  friend bool operator==(const HistoryEntry&, const HistoryEntry&) = default;
};

/// One server's stored codeword symbol. encoded_tags[o] is the version of
/// object o folded into the payload; encoded_deps[o] is that version's
/// dependency context, returned alongside any value decoded from it. Objects
/// with a zero generator coefficient carry the server's applied tag instead,
/// which only feeds garbage collection.
struct CodewordSymbol {
  ServerId server = 0;
  Bytes payload;
  std::vector<Tag> encoded_tags;
  std::vector<DependencyContext> encoded_deps;

  friend bool operator==(const CodewordSymbol&, const CodewordSymbol&) = default;
};

}  // namespace causalec
