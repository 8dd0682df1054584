#ifndef TARDIS_MESH_HPP
#define TARDIS_MESH_HPP

#include <cassert>
#include <cstdint>
#include <functional>
#include <utility>

#include "tardis/config.hpp"
#include "tardis/event_queue.hpp"
#include "tardis/message.hpp"
#include "tardis/stats.hpp"

namespace tardis {

// Latency-only 2D mesh with dimension-ordered routing: a message from a to b
// takes manhattan_hops * hop_cycles cycles; contention is not modeled.
// Per-pair FIFO order follows from the fixed latency plus the event queue's
// insertion-order tie-break. Every send is schema-validated and counted.
class Mesh {
 public:
  Mesh(const RunConfig& cfg, SchemaProfile profile, EventQueue& q, SimStats& stats)
      : rows_(cfg.mesh_rows),
        cols_(cfg.mesh_cols),
        hop_cycles_(cfg.hop_cycles),
        flit_bits_(cfg.flit_bits),
        profile_(profile),
        q_(q),
        stats_(stats) {
    assert(rows_ && cols_);
  }

  void set_deliver(std::function<void(const Message&)> fn) {
    deliver_ = std::move(fn);
  }

  // When set, every send appends one record (in injection order).
  void set_msg_log(std::vector<MsgLogRecord>* log) { msg_log_ = log; }

  unsigned hops(std::uint32_t a, std::uint32_t b) const {
    int ra = int(a / cols_), ca = int(a % cols_);
    int rb = int(b / cols_), cb = int(b % cols_);
    int dr = ra > rb ? ra - rb : rb - ra;
    int dc = ca > cb ? ca - cb : cb - ca;
    return unsigned(dr + dc);
  }

  std::uint64_t latency(std::uint32_t a, std::uint32_t b) const {
    return std::uint64_t(hops(a, b)) * hop_cycles_;
  }

  // Queues msg for delivery at send_cycle + latency. Returns the flit count.
  unsigned send(const Message& msg, std::uint64_t send_cycle) {
    SchemaCheck chk = validate(msg, profile_);
    assert(chk.ok && "message violates the active schema");
    (void)chk;
    if (profile_ != SchemaProfile::Msi)
      assert(is_tardis_kind(msg.kind) && "invalidation kinds are unrepresentable here");

    unsigned flits = wire_flits(msg, flit_bits_);
    auto k = static_cast<unsigned>(msg.kind);
    stats_.msgs_by_kind[k]++;
    stats_.flits_by_kind[k] += flits;
    stats_.total_msgs++;
    stats_.total_flits += flits;

    if (msg_log_)
      msg_log_->push_back(
          {send_cycle, msg.kind, msg.src, msg.dst, msg.addr, flits});

    std::uint64_t at = send_cycle + latency(msg.src, msg.dst);
    q_.schedule(at, [this, msg] { deliver_(msg); });
    return flits;
  }

  unsigned flit_bits() const { return flit_bits_; }

 private:
  unsigned rows_, cols_, hop_cycles_, flit_bits_;
  SchemaProfile profile_;
  EventQueue& q_;
  SimStats& stats_;
  std::function<void(const Message&)> deliver_;
  std::vector<MsgLogRecord>* msg_log_ = nullptr;
};

}  // namespace tardis

#endif  // TARDIS_MESH_HPP
