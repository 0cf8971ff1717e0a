#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>

namespace causalec::gf256 {

// GF(2^8) with reduction polynomial x^8 + x^4 + x^3 + x^2 + 1 (0x11D).
inline constexpr unsigned kPolynomial = 0x11D;

struct Element {
  std::uint8_t value = 0;

  friend constexpr bool operator==(Element, Element) = default;
};

namespace detail {

struct Tables {
  std::array<std::uint8_t, 512> exp{};
  std::array<std::uint8_t, 256> log{};
};

constexpr Tables make_tables() {
  Tables t;
  unsigned x = 1;
  for (unsigned i = 0; i < 255; ++i) {
    t.exp[i] = static_cast<std::uint8_t>(x);
    t.log[x] = static_cast<std::uint8_t>(i);
    x <<= 1;
    if (x & 0x100) x ^= kPolynomial;
  }
  // Doubled so exp[log a + log b] never needs a modulo.
  for (unsigned i = 255; i < 512; ++i) t.exp[i] = t.exp[i - 255];
  return t;
}

inline constexpr Tables kTables = make_tables();

}  // namespace detail

constexpr std::uint8_t add(std::uint8_t a, std::uint8_t b) { return a ^ b; }

constexpr std::uint8_t mul(std::uint8_t a, std::uint8_t b) {
  if (a == 0 || b == 0) return 0;
  return detail::kTables.exp[detail::kTables.log[a] + detail::kTables.log[b]];
}

constexpr std::uint8_t inv(std::uint8_t a) {
  if (a == 0) throw std::domain_error("gf256: zero has no inverse");
  return detail::kTables.exp[255 - detail::kTables.log[a]];
}

constexpr std::uint8_t div(std::uint8_t a, std::uint8_t b) { return mul(a, inv(b)); }

constexpr Element operator+(Element a, Element b) { return {add(a.value, b.value)}; }
constexpr Element operator*(Element a, Element b) { return {mul(a.value, b.value)}; }

constexpr Element field_mul(Element a, Element b) { return a * b; }

// dst ^= coeff * src, byte-wise.
inline void mul_add(std::span<std::uint8_t> dst, std::span<const std::uint8_t> src,
                    std::uint8_t coeff) {
  if (dst.size() != src.size()) throw std::invalid_argument("gf256::mul_add: length mismatch");
  if (coeff == 0) return;
  if (coeff == 1) {
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] ^= src[i];
    return;
  }
  const unsigned lc = detail::kTables.log[coeff];
  for (std::size_t i = 0; i < dst.size(); ++i) {
    if (src[i] != 0) dst[i] ^= detail::kTables.exp[lc + detail::kTables.log[src[i]]];
  }
}

}  // namespace causalec::gf256
