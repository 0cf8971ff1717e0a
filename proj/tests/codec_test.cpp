#include <gtest/gtest.h>

#include <algorithm>
#include <map>
#include <random>
#include <vector>

#include "causalec/codec.hpp"
#include "oracles.hpp"

using causalec::Bytes;
using causalec::CodeSpec;
using causalec::ObjectId;
using causalec::ServerId;

namespace {

std::vector<ServerId> members(std::uint32_t mask, std::size_t n) {
  std::vector<ServerId> out;
  for (std::size_t s = 0; s < n; ++s) {
    if (mask & (1u << s)) out.push_back(static_cast<ServerId>(s));
  }
  return out;
}

oracle::Matrix rows_of(const CodeSpec& spec, const std::vector<ServerId>& servers) {
  oracle::Matrix m;
  for (auto s : servers) m.push_back(spec.generator()[s]);
  return m;
}

// Minimal decodable sets found with the oracle's own elimination.
std::vector<std::vector<ServerId>> oracle_recovery_sets(const CodeSpec& spec, ObjectId o) {
  const std::size_t n = spec.n();
  std::vector<char> ok(1u << n, 0);
  for (std::uint32_t m = 1; m < (1u << n); ++m) ok[m] = oracle::spans_unit(rows_of(spec, members(m, n)), spec.k(), o);
  std::vector<std::vector<ServerId>> out;
  for (std::uint32_t m = 1; m < (1u << n); ++m) {
    if (!ok[m]) continue;
    bool minimal = true;
    for (std::size_t s = 0; s < n; ++s) {
      const std::uint32_t sub = m & ~(1u << s);
      if ((m & (1u << s)) && sub != 0 && ok[sub]) minimal = false;
    }
    if (minimal) out.push_back(members(m, n));
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    return a.size() != b.size() ? a.size() < b.size() : a < b;
  });
  return out;
}

std::vector<Bytes> random_values(std::mt19937_64& rng, std::size_t k, std::size_t len) {
  std::vector<Bytes> v(k, Bytes(len));
  for (auto& b : v) {
    for (auto& x : b) x = static_cast<std::uint8_t>(rng());
  }
  return v;
}

}  // namespace

TEST(Codec, GeneratorIsSystematicOnTop) {
  const auto spec = causalec::make_code(7, 4, 8);
  for (ServerId s = 0; s < 4; ++s) {
    ASSERT_EQ(spec.systematic_object(s), s);
    for (ObjectId o = 0; o < 4; ++o) EXPECT_EQ(spec.coeff(s, o), s == o ? 1 : 0);
  }
  for (ServerId s = 4; s < 7; ++s) {
    EXPECT_FALSE(spec.systematic_object(s).has_value());
    for (ObjectId o = 0; o < 4; ++o) EXPECT_NE(spec.coeff(s, o), 0);
  }
}

// MDS: every K x K submatrix of the generator has nonzero Leibniz determinant.
TEST(Codec, EveryKSubsetIsInvertibleUpToN8) {
  for (std::size_t n = 1; n <= 8; ++n) {
    for (std::size_t k = 1; k <= n; ++k) {
      const auto spec = causalec::make_code(n, k, 1);
      for (std::uint32_t m = 1; m < (1u << n); ++m) {
        if (static_cast<std::size_t>(std::popcount(m)) != k) continue;
        const auto sub = rows_of(spec, members(m, n));
        ASSERT_NE(oracle::determinant(sub), 0) << "n=" << n << " k=" << k << " mask=" << m;
        ASSERT_EQ(causalec::rank(sub), k);
      }
    }
  }
}

TEST(Codec, RecoverySetsMatchOracleUpToN8) {
  for (std::size_t n = 1; n <= 8; ++n) {
    for (std::size_t k = 1; k <= n; ++k) {
      const auto spec = causalec::make_code(n, k, 1);
      for (ObjectId o = 0; o < k; ++o) {
        const auto got = causalec::recovery_sets(spec, o);
        const auto want = oracle_recovery_sets(spec, o);
        ASSERT_EQ(got.size(), want.size()) << "n=" << n << " k=" << k << " o=" << o;
        for (std::size_t i = 0; i < got.size(); ++i) {
          EXPECT_EQ(got[i].object, o);
          EXPECT_EQ(got[i].servers, want[i]);
        }
      }
    }
  }
}

TEST(Codec, HandDerivedRecoverySetsFor5x3) {
  const auto spec = causalec::make_code(5, 3, 4);
  std::vector<std::vector<ServerId>> want = {{0}, {1, 2, 3}, {1, 2, 4}, {1, 3, 4}, {2, 3, 4}};
  const auto got = causalec::recovery_sets(spec, 0);
  ASSERT_EQ(got.size(), want.size());
  for (std::size_t i = 0; i < want.size(); ++i) EXPECT_EQ(got[i].servers, want[i]);
}

TEST(Codec, ReplicationHasSingletonSets) {
  const auto spec = causalec::make_code(3, 1, 4);
  const auto sets = causalec::recovery_sets(spec, 0);
  ASSERT_EQ(sets.size(), 3u);
  for (ServerId s = 0; s < 3; ++s) EXPECT_EQ(sets[s].servers, std::vector<ServerId>{s});
}

TEST(Codec, RoundTripFromEveryRecoverySet) {
  std::mt19937_64 rng(5);
  for (auto [n, k] : {std::pair<std::size_t, std::size_t>{4, 2}, {5, 3}, {6, 3}, {7, 4}}) {
    const auto spec = causalec::make_code(n, k, 32);
    for (int trial = 0; trial < 20; ++trial) {
      const auto values = random_values(rng, k, 32);
      for (ObjectId o = 0; o < k; ++o) {
        for (const auto& rs : causalec::recovery_sets(spec, o)) {
          std::map<ServerId, Bytes> symbols;
          for (auto s : rs.servers) symbols[s] = causalec::encode_symbol(spec, s, values);
          ASSERT_EQ(causalec::decode(spec, o, symbols), values[o]);
        }
      }
    }
  }
}

TEST(Codec, EncodeMatchesOracleInnerProduct) {
  std::mt19937_64 rng(9);
  const auto spec = causalec::make_code(6, 3, 16);
  const auto values = random_values(rng, 3, 16);
  for (ServerId s = 0; s < 6; ++s) {
    Bytes want(16, 0);
    for (ObjectId o = 0; o < 3; ++o) {
      for (std::size_t i = 0; i < 16; ++i) want[i] ^= oracle::gf_mul(spec.coeff(s, o), values[o][i]);
    }
    EXPECT_EQ(causalec::encode_symbol(spec, s, values), want);
  }
}

TEST(Codec, EncodingIsLinear) {
  std::mt19937_64 rng(13);
  const auto spec = causalec::make_code(5, 3, 24);
  const auto a = random_values(rng, 3, 24);
  const auto b = random_values(rng, 3, 24);
  std::vector<Bytes> sum = a;
  for (std::size_t o = 0; o < 3; ++o) {
    for (std::size_t i = 0; i < 24; ++i) sum[o][i] ^= b[o][i];
  }
  for (ServerId s = 0; s < 5; ++s) {
    auto lhs = causalec::encode_symbol(spec, s, a);
    const auto rb = causalec::encode_symbol(spec, s, b);
    for (std::size_t i = 0; i < 24; ++i) lhs[i] ^= rb[i];
    EXPECT_EQ(lhs, causalec::encode_symbol(spec, s, sum));
  }
}

TEST(Codec, NonRecoverySetFailsToDecode) {
  const auto spec = causalec::make_code(5, 3, 4);
  std::mt19937_64 rng(1);
  const auto values = random_values(rng, 3, 4);
  std::map<ServerId, Bytes> symbols;
  for (ServerId s : {1, 2}) symbols[s] = causalec::encode_symbol(spec, s, values);
  EXPECT_THROW(causalec::decode(spec, 0, symbols), causalec::DecodeError);
  const std::vector<ServerId> pair{1, 2};
  EXPECT_FALSE(causalec::is_decodable(spec, 0, pair));
  EXPECT_TRUE(causalec::is_decodable(spec, 1, pair));
}

TEST(Codec, SolveCoefficientsHandlesMixedRows) {
  // A parity row plus unit rows for the other objects isolates object 0.
  const auto spec = causalec::make_code(5, 3, 1);
  std::vector<std::vector<std::uint8_t>> rows = {spec.generator()[3], {0, 1, 0}, {0, 0, 1}};
  const auto lambda = causalec::solve_coefficients(rows, 3, 0);
  ASSERT_TRUE(lambda.has_value());
  std::vector<std::uint8_t> combo(3, 0);
  for (std::size_t j = 0; j < rows.size(); ++j) {
    for (std::size_t c = 0; c < 3; ++c) combo[c] ^= oracle::gf_mul((*lambda)[j], rows[j][c]);
  }
  EXPECT_EQ(combo, (std::vector<std::uint8_t>{1, 0, 0}));
  EXPECT_FALSE(causalec::solve_coefficients({{0, 1, 0}, {0, 0, 1}}, 3, 0).has_value());
}

TEST(Codec, InvalidParametersAreRejected) {
  EXPECT_THROW(causalec::make_code(3, 0, 4), std::invalid_argument);
  EXPECT_THROW(causalec::make_code(2, 3, 4), std::invalid_argument);
  EXPECT_THROW(causalec::make_code(256, 3, 4), std::invalid_argument);
  EXPECT_THROW(causalec::make_code(4, 2, 0), std::invalid_argument);
  const auto spec = causalec::make_code(4, 2, 4);
  std::vector<Bytes> short_values = {Bytes(4), Bytes(3)};
  EXPECT_THROW(causalec::encode_symbol(spec, 0, short_values), std::invalid_argument);
  std::vector<Bytes> one_value = {Bytes(4)};
  EXPECT_THROW(causalec::encode_symbol(spec, 0, one_value), std::invalid_argument);
  EXPECT_THROW(causalec::recovery_sets(spec, 2), std::out_of_range);
}

TEST(Codec, CustomGeneratorWithRepeatedColumnIsNotMds) {
  const auto spec = CodeSpec::from_generator({{1, 1}, {1, 1}, {1, 0}}, 2);
  const std::vector<ServerId> both{0, 1};
  EXPECT_FALSE(causalec::is_decodable(spec, 0, both));
  const std::vector<ServerId> mixed{0, 2};
  EXPECT_TRUE(causalec::is_decodable(spec, 1, mixed));
}
