#include <gtest/gtest.h>

#include <random>

#include "causalec/types.hpp"

using causalec::DependencyContext;
using causalec::Tag;

namespace {

DependencyContext random_ctx(std::mt19937_64& rng) {
  DependencyContext c;
  const int entries = static_cast<int>(rng() % 4);
  for (int i = 0; i < entries; ++i) {
    c[static_cast<causalec::ObjectId>(rng() % 4)] = Tag{rng() % 5, static_cast<causalec::ServerId>(rng() % 3)};
  }
  return c;
}

}  // namespace

TEST(Tag, OrdersBySeqThenWriter) {
  EXPECT_LT((Tag{1, 4}), (Tag{2, 0}));
  EXPECT_LT((Tag{2, 0}), (Tag{2, 1}));
  EXPECT_EQ(causalec::tag_compare(Tag{3, 1}, Tag{3, 1}), causalec::Ordering::kEqual);
  EXPECT_EQ(causalec::tag_compare(Tag{3, 2}, Tag{3, 1}), causalec::Ordering::kGreater);
  EXPECT_EQ(causalec::to_string(Tag{7, 2}), "(7,s2)");
  EXPECT_EQ(causalec::kInitialTag, (Tag{0, 0}));
}

TEST(Context, MergeIsPointwiseMax) {
  const DependencyContext a{{0, Tag{2, 1}}, {1, Tag{5, 0}}};
  const DependencyContext b{{0, Tag{3, 0}}, {2, Tag{1, 1}}};
  const DependencyContext want{{0, Tag{3, 0}}, {1, Tag{5, 0}}, {2, Tag{1, 1}}};
  EXPECT_EQ(causalec::ctx_merge(a, b), want);
}

TEST(Context, MergeIsCommutativeAssociativeIdempotentAndAnUpperBound) {
  std::mt19937_64 rng(21);
  for (int i = 0; i < 2000; ++i) {
    const auto a = random_ctx(rng);
    const auto b = random_ctx(rng);
    const auto c = random_ctx(rng);
    const auto ab = causalec::ctx_merge(a, b);
    ASSERT_EQ(ab, causalec::ctx_merge(b, a));
    ASSERT_EQ(causalec::ctx_merge(ab, c), causalec::ctx_merge(a, causalec::ctx_merge(b, c)));
    ASSERT_EQ(causalec::ctx_merge(a, a), a);
    ASSERT_TRUE(causalec::ctx_leq(a, ab));
    ASSERT_TRUE(causalec::ctx_leq(b, ab));
  }
}

TEST(Context, SatisfiedAgainstAppliedVector) {
  const std::vector<Tag> applied{Tag{2, 0}, Tag{0, 0}, Tag{4, 1}};
  EXPECT_TRUE(causalec::ctx_satisfied({}, applied));
  EXPECT_TRUE(causalec::ctx_satisfied({{0, Tag{2, 0}}, {2, Tag{3, 2}}}, applied));
  EXPECT_FALSE(causalec::ctx_satisfied({{0, Tag{2, 1}}}, applied));
  EXPECT_FALSE(causalec::ctx_satisfied({{5, Tag{0, 0}}}, applied));
  const std::map<causalec::ObjectId, Tag> as_map{{0, Tag{2, 0}}};
  EXPECT_TRUE(causalec::ctx_satisfied({{0, Tag{1, 3}}}, as_map));
  EXPECT_FALSE(causalec::ctx_satisfied({{1, Tag{0, 0}}}, as_map));
}

TEST(Context, MergeIntoSingleEntryNeverLowers) {
  DependencyContext c{{1, Tag{4, 0}}};
  causalec::ctx_merge_into(c, 1, Tag{3, 9});
  EXPECT_EQ(c.at(1), (Tag{4, 0}));
  causalec::ctx_merge_into(c, 1, Tag{4, 1});
  EXPECT_EQ(c.at(1), (Tag{4, 1}));
}
