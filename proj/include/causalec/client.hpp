#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>

#include "causalec/common.hpp"
#include "causalec/message.hpp"
#include "causalec/types.hpp"

namespace causalec {

enum class OpKind : std::uint8_t { kWrite, kRead };

struct OutstandingOp {
  std::uint64_t op = 0;
  OpKind kind = OpKind::kWrite;
  ObjectId object = 0;
  ServerId server = 0;
};

/// Client session: at most one outstanding operation, and a dependency
/// context that only ever grows.
class Client {
 public:
  Client(ClientId id, ServerId server) : id_(id), server_(server) {}

  ClientId id() const { return id_; }
  ServerId server() const { return server_; }
  const DependencyContext& ctx() const { return ctx_; }
  const std::optional<OutstandingOp>& pending() const { return pending_; }
  std::uint64_t next_op() const { return next_op_; }

  /// Moves the session to another server; ctx travels with it.
  void attach(ServerId server) {
    if (pending_) throw std::logic_error("Client: cannot switch server with an outstanding op");
    server_ = server;
  }

  WriteReq issue_write(ObjectId object, Bytes value) {
    begin(OpKind::kWrite, object);
    return WriteReq{pending_->op, object, std::move(value), ctx_};
  }

  ReadReq issue_read(ObjectId object) {
    begin(OpKind::kRead, object);
    return ReadReq{pending_->op, object, ctx_};
  }

  void on_write_ack(const WriteAck& ack) {
    expect(ack.op, OpKind::kWrite);
    ctx_merge_into(ctx_, ack.object, ack.tag);
    pending_.reset();
  }

  /// The value's own dependencies are merged too, so ctx stays closed under
  /// the causal past of everything observed.
  void on_read_resp(const ReadResp& resp) {
    expect(resp.op, OpKind::kRead);
    ctx_merge_into(ctx_, resp.deps);
    ctx_merge_into(ctx_, resp.object, resp.tag);
    pending_.reset();
  }

 private:
  void begin(OpKind kind, ObjectId object) {
    if (pending_) throw std::logic_error("Client: operation already outstanding");
    pending_ = OutstandingOp{(static_cast<std::uint64_t>(id_) << 32) | next_op_++, kind, object, server_};
  }

  void expect(std::uint64_t op, OpKind kind) const {
    if (!pending_ || pending_->op != op || pending_->kind != kind) {
      throw std::logic_error("Client: response does not match the outstanding op");
    }
  }

  ClientId id_;
  ServerId server_;
  DependencyContext ctx_;
  std::optional<OutstandingOp> pending_;
  std::uint64_t next_op_ = 0;
};

}  // namespace causalec
