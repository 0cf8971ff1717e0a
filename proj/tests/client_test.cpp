#include <gtest/gtest.h>

#include "causalec/client.hpp"

using namespace causalec;

TEST(Client, OpIdsEncodeClientAndCounter) {
  Client c(5, 1);
  const auto w = c.issue_write(0, Bytes{1});
  EXPECT_EQ(w.op, (5ull << 32) | 0);
  c.on_write_ack(WriteAck{w.op, 0, Tag{1, 1}});
  const auto r = c.issue_read(1);
  EXPECT_EQ(r.op, (5ull << 32) | 1);
}

TEST(Client, ContextGrowsWithAcksAndReadDeps) {
  Client c(0, 0);
  const auto w = c.issue_write(0, Bytes{1});
  EXPECT_TRUE(w.ctx.empty());
  c.on_write_ack(WriteAck{w.op, 0, Tag{1, 0}});
  EXPECT_EQ(c.ctx(), (DependencyContext{{0, Tag{1, 0}}}));

  const auto r = c.issue_read(1);
  EXPECT_EQ(r.ctx, c.ctx());
  c.on_read_resp(ReadResp{r.op, 1, Tag{3, 2}, Bytes{7}, {{0, Tag{2, 2}}, {2, Tag{1, 1}}}});
  EXPECT_EQ(c.ctx(), (DependencyContext{{0, Tag{2, 2}}, {1, Tag{3, 2}}, {2, Tag{1, 1}}}));
  EXPECT_FALSE(c.pending().has_value());
}

TEST(Client, OneOutstandingOpAtATime) {
  Client c(0, 2);
  const auto w = c.issue_write(0, Bytes{1});
  ASSERT_TRUE(c.pending().has_value());
  EXPECT_EQ(c.pending()->server, 2u);
  EXPECT_THROW(c.issue_read(0), std::logic_error);
  EXPECT_THROW(c.attach(1), std::logic_error);
  EXPECT_THROW(c.on_read_resp(ReadResp{w.op, 0, Tag{}, {}, {}}), std::logic_error);
  EXPECT_THROW(c.on_write_ack(WriteAck{w.op + 1, 0, Tag{1, 2}}), std::logic_error);
  c.on_write_ack(WriteAck{w.op, 0, Tag{1, 2}});
  c.attach(1);
  EXPECT_EQ(c.server(), 1u);
  EXPECT_EQ(c.ctx().at(0), (Tag{1, 2}));
}
