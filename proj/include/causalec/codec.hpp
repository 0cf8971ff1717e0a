#pragma once

#include <algorithm>
#include <bit>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "causalec/common.hpp"
#include "causalec/gf256.hpp"

namespace causalec {

class DecodeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Linear cross-object code: server s stores sum_o generator[s][o] * value[o].
///
/// Objects are never split; every symbol has the full value length. make_code()
/// builds the systematic MDS instance (identity on top of Cauchy rows), but any
/// generator can be supplied through from_generator().
class CodeSpec {
 public:
  static CodeSpec from_generator(std::vector<std::vector<std::uint8_t>> generator,
                                 std::size_t value_len) {
    if (generator.empty()) throw std::invalid_argument("CodeSpec: empty generator");
    const std::size_t k = generator.front().size();
    if (k == 0 || generator.size() < k) throw std::invalid_argument("CodeSpec: need N >= K >= 1");
    for (const auto& row : generator) {
      if (row.size() != k) throw std::invalid_argument("CodeSpec: ragged generator");
    }
    if (value_len == 0) throw std::invalid_argument("CodeSpec: value_len must be positive");
    CodeSpec spec;
    spec.generator_ = std::move(generator);
    spec.k_ = k;
    spec.value_len_ = value_len;
    return spec;
  }

  std::size_t n() const { return generator_.size(); }
  std::size_t k() const { return k_; }
  std::size_t value_len() const { return value_len_; }
  const std::vector<std::vector<std::uint8_t>>& generator() const { return generator_; }
  std::span<const std::uint8_t> row(ServerId s) const { return generator_.at(s); }
  std::uint8_t coeff(ServerId s, ObjectId o) const { return generator_.at(s).at(o); }

  /// If row s is a unit vector, the object it stores verbatim.
  std::optional<ObjectId> systematic_object(ServerId s) const {
    std::optional<ObjectId> found;
    for (std::size_t o = 0; o < k_; ++o) {
      const auto c = generator_.at(s)[o];
      if (c == 0) continue;
      if (c != 1 || found) return std::nullopt;
      found = static_cast<ObjectId>(o);
    }
    return found;
  }

 private:
  CodeSpec() = default;

  std::vector<std::vector<std::uint8_t>> generator_;
  std::size_t k_ = 0;
  std::size_t value_len_ = 0;
};

/// Systematic MDS code: K identity rows followed by N-K Cauchy rows
/// 1 / (x + y) with x the server index and y the object index.
inline CodeSpec make_code(std::size_t n, std::size_t k, std::size_t value_len) {
  if (k < 1) throw std::invalid_argument("make_code: k must be at least 1");
  if (k > n) throw std::invalid_argument("make_code: k must not exceed n");
  if (n > 255) throw std::invalid_argument("make_code: n exceeds the GF(2^8) bound of 255");
  std::vector<std::vector<std::uint8_t>> g(n, std::vector<std::uint8_t>(k, 0));
  for (std::size_t i = 0; i < k; ++i) g[i][i] = 1;
  for (std::size_t i = k; i < n; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      g[i][j] = gf256::inv(static_cast<std::uint8_t>(i ^ j));
    }
  }
  return CodeSpec::from_generator(std::move(g), value_len);
}

/// Byte-wise inner product of generator row `server` with the K object values.
inline Bytes encode_symbol(const CodeSpec& spec, ServerId server,
                           std::span<const Bytes> values) {
  if (values.size() != spec.k()) throw std::invalid_argument("encode_symbol: need K values");
  for (const auto& v : values) {
    if (v.size() != spec.value_len()) throw std::invalid_argument("encode_symbol: length mismatch");
  }
  if (server >= spec.n()) throw std::out_of_range("encode_symbol: server out of range");
  Bytes out(spec.value_len(), 0);
  const auto row = spec.row(server);
  for (std::size_t o = 0; o < spec.k(); ++o) gf256::mul_add(out, values[o], row[o]);
  return out;
}

/// Rank of a set of K-wide rows over GF(2^8).
inline std::size_t rank(std::vector<std::vector<std::uint8_t>> rows) {
  if (rows.empty()) return 0;
  const std::size_t cols = rows.front().size();
  std::size_t r = 0;
  for (std::size_t c = 0; c < cols && r < rows.size(); ++c) {
    std::size_t p = r;
    while (p < rows.size() && rows[p][c] == 0) ++p;
    if (p == rows.size()) continue;
    std::swap(rows[p], rows[r]);
    const auto pinv = gf256::inv(rows[r][c]);
    for (auto& x : rows[r]) x = gf256::mul(x, pinv);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (i == r || rows[i][c] == 0) continue;
      const auto f = rows[i][c];
      for (std::size_t j = 0; j < cols; ++j) rows[i][j] ^= gf256::mul(f, rows[r][j]);
    }
    ++r;
  }
  return r;
}

/// Coefficients lambda with sum_j lambda_j * rows[j] = e_object, or nullopt
/// when e_object is outside the span of the K-wide rows.
inline std::optional<std::vector<std::uint8_t>> solve_coefficients(
    const std::vector<std::vector<std::uint8_t>>& rows, std::size_t k, ObjectId object) {
  const std::size_t m = rows.size();
  if (object >= k) throw std::out_of_range("decode: object out of range");
  // Augmented system A^T lambda = e_object: K equations, m unknowns.
  std::vector<std::vector<std::uint8_t>> a(k, std::vector<std::uint8_t>(m + 1, 0));
  for (std::size_t j = 0; j < m; ++j) {
    if (rows[j].size() != k) throw std::invalid_argument("decode: row width must equal k");
    for (std::size_t i = 0; i < k; ++i) a[i][j] = rows[j][i];
  }
  a[object][m] = 1;

  std::vector<std::size_t> pivot_col;
  std::size_t r = 0;
  for (std::size_t c = 0; c < m && r < k; ++c) {
    std::size_t p = r;
    while (p < k && a[p][c] == 0) ++p;
    if (p == k) continue;
    std::swap(a[p], a[r]);
    const auto pinv = gf256::inv(a[r][c]);
    for (auto& x : a[r]) x = gf256::mul(x, pinv);
    for (std::size_t i = 0; i < k; ++i) {
      if (i == r || a[i][c] == 0) continue;
      const auto f = a[i][c];
      for (std::size_t j = 0; j <= m; ++j) a[i][j] ^= gf256::mul(f, a[r][j]);
    }
    pivot_col.push_back(c);
    ++r;
  }
  for (std::size_t i = r; i < k; ++i) {
    if (a[i][m] != 0) return std::nullopt;
  }
  std::vector<std::uint8_t> lambda(m, 0);
  for (std::size_t i = 0; i < r; ++i) lambda[pivot_col[i]] = a[i][m];
  return lambda;
}

/// Same, with the generator rows of `servers`.
inline std::optional<std::vector<std::uint8_t>> decode_coefficients(
    const CodeSpec& spec, ObjectId object, std::span<const ServerId> servers) {
  std::vector<std::vector<std::uint8_t>> rows;
  rows.reserve(servers.size());
  for (auto s : servers) {
    const auto row = spec.row(s);
    rows.emplace_back(row.begin(), row.end());
  }
  return solve_coefficients(rows, spec.k(), object);
}

inline bool is_decodable(const CodeSpec& spec, ObjectId object, std::span<const ServerId> servers) {
  return decode_coefficients(spec, object, servers).has_value();
}

/// Recovers `object` from the payloads of the servers in `symbols`. Every
/// payload must encode the same versions of the objects it combines; that is
/// the caller's obligation.
inline Bytes decode(const CodeSpec& spec, ObjectId object,
                    const std::map<ServerId, Bytes>& symbols) {
  std::vector<ServerId> servers;
  servers.reserve(symbols.size());
  for (const auto& [s, payload] : symbols) {
    if (payload.size() != spec.value_len()) throw std::invalid_argument("decode: length mismatch");
    servers.push_back(s);
  }
  const auto lambda = decode_coefficients(spec, object, servers);
  if (!lambda) throw DecodeError("decode: not a recovery set for object " + std::to_string(object));
  Bytes out(spec.value_len(), 0);
  std::size_t j = 0;
  for (const auto& [s, payload] : symbols) gf256::mul_add(out, payload, (*lambda)[j++]);
  return out;
}

struct RecoverySet {
  ObjectId object = 0;
  std::vector<ServerId> servers;  // sorted ascending

  friend bool operator==(const RecoverySet&, const RecoverySet&) = default;
};

/// All inclusion-minimal server sets from which `object` is decodable,
/// ordered by size and then lexicographically. Exhaustive over subsets.
inline std::vector<RecoverySet> recovery_sets(const CodeSpec& spec, ObjectId object) {
  const std::size_t n = spec.n();
  if (object >= spec.k()) throw std::out_of_range("recovery_sets: object out of range");
  if (n > 24) throw std::invalid_argument("recovery_sets: exhaustive search limited to n <= 24");
  auto servers_of = [n](std::uint32_t mask) {
    std::vector<ServerId> out;
    for (std::size_t s = 0; s < n; ++s) {
      if (mask & (1u << s)) out.push_back(static_cast<ServerId>(s));
    }
    return out;
  };
  const std::uint32_t full = (1u << n) - 1;
  std::vector<char> decodable(static_cast<std::size_t>(full) + 1, 0);
  for (std::uint32_t mask = 1; mask <= full; ++mask) {
    decodable[mask] = is_decodable(spec, object, servers_of(mask)) ? 1 : 0;
  }
  std::vector<RecoverySet> out;
  for (std::uint32_t mask = 1; mask <= full; ++mask) {
    if (!decodable[mask]) continue;
    bool minimal = true;
    for (std::uint32_t rest = mask; rest; rest &= rest - 1) {
      const std::uint32_t without = mask & ~(rest & -rest);
      if (without != 0 && decodable[without]) {
        minimal = false;
        break;
      }
    }
    if (minimal) out.push_back({object, servers_of(mask)});
  }
  std::sort(out.begin(), out.end(), [](const RecoverySet& a, const RecoverySet& b) {
    if (a.servers.size() != b.servers.size()) return a.servers.size() < b.servers.size();
    return a.servers < b.servers;
  });
  return out;
}

}  // namespace causalec
