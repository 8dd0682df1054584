#ifndef TARDIS_CORE_HPP
#define TARDIS_CORE_HPP

#include <cassert>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "tardis/config.hpp"
#include "tardis/message.hpp"
#include "tardis/private_cache.hpp"
#include "tardis/sc_checker.hpp"
#include "tardis/stats.hpp"
#include "tardis/workload.hpp"

namespace tardis {

// A small reorder-buffer core: fetch -> execute (single issue) -> in-order
// commit with a commit-time validity check against the cache line. Two
// flavors share the machinery:
//   - in_order: the next op is fetched only when everything older has
//     committed or is an open lease renewal (value speculation may run
//     ahead of renewals, nothing else).
//   - ooo_commit_check: fetch fills the buffer freely; loads may execute
//     past older store misses to other addresses; the in-order commit check
//     restarts anything the protocol no longer vouches for.
// Speculation toggles whether an expired line's value may be consumed while
// its renewal is outstanding; a failed renewal then squashes the consumer
// and everything younger.
template <class L1>
class CoreEngine {
 public:
  CoreEngine(const RunConfig& cfg, std::uint32_t core, L1* l1, SimStats* stats)
      : cfg_(cfg),
        core_(core),
        l1_(l1),
        stats_(stats),
        rng_(cfg.seed * 2654435761ULL + core) {}

  void set_send(std::function<void(const Message&, std::uint64_t)> fn) {
    send_ = std::move(fn);
  }
  // The record's idx is assigned by the logger.
  void set_commit(std::function<void(LogRecord, std::uint64_t)> fn) {
    commit_ = std::move(fn);
  }
  void set_wake(std::function<void(std::uint64_t)> fn) { wake_ = std::move(fn); }

  void push_op(const Op& op) { program_.push_back(op); }

  bool done() const { return program_.empty() && rob_.empty(); }
  Timestamp pts() const { return pts_; }

  // One-line dump of buffered ops and their states, for test diagnostics.
  std::string debug_state() const {
    static const char* st_names[] = {"need_exec", "wait_reply", "pend_renew",
                                     "executed"};
    std::string s = "pts=" + std::to_string(pts_) +
                    " program_left=" + std::to_string(program_.size());
    for (const RobEntry& e : rob_) {
      s += " [kind=" + std::to_string(static_cast<int>(e.op.kind)) +
           " addr=" + std::to_string(e.op.addr) +
           " st=" + st_names[static_cast<int>(e.st)] +
           " gen=" + std::to_string(e.gen) +
           (e.spec_sample ? " spec" : "") + (e.from_msg ? " from_msg" : "") +
           " restarts=" + std::to_string(e.restarts) + "]";
    }
    return s;
  }

  // Does any buffered op still make progress without an external reply?
  bool self_propelled() const {
    for (const RobEntry& e : rob_)
      if (e.st == St::NeedExecute || e.st == St::Executed) return true;
    return !program_.empty() && rob_.size() < cfg_.rob_entries && fetch_gate();
  }

  void arm(std::uint64_t cycle) {
    if (armed_ && armed_cycle_ == cycle) return;
    armed_ = true;
    armed_cycle_ = cycle;
    wake_(cycle);
  }

  void step(std::uint64_t now) {
    if (stepped_ && last_step_ == now) return;
    stepped_ = true;
    last_step_ = now;
    commit_pass(now);
    fetch_pass(now);
    execute_pass(now);
    if (self_propelled()) arm(now + 1);
  }

  void on_reply(const Message& rep, std::uint64_t now) {
    InstallResult ins = l1_->install_reply(rep, pts_, now);
    for (const Message& m : ins.out) send_(m, now);
    RobEntry* e = find_waiting(rep.addr);
    if (e) resolve(*e, rep, ins, now);
    arm(now + 1);
  }

  // Externally forwarded request (write-back, flush, or invalidation).
  // A line freshly granted to the op at the buffer head is kept until that
  // op commits once: surrendering it immediately would let two contending
  // cores steal each other's lines forever without either committing.
  // Only the head's grant is shielded, so every deferral sits on an op that
  // commits at the next step, and the probe is answered right after.
  void on_probe(const Message& m, std::uint64_t now) {
    if (!rob_.empty() && rob_.front().pending_grant &&
        rob_.front().op.addr == m.addr) {
      deferred_probes_[m.addr].push_back(m);
      return;
    }
    dispatch_probe(m, now);
  }

 private:
  enum class St : std::uint8_t { NeedExecute, WaitReply, PendingRenewal, Executed };

  struct RobEntry {
    Op op;
    St st = St::NeedExecute;
    std::uint64_t ready_cycle = 0;
    std::uint64_t value = 0;
    std::uint32_t gen = 0;
    bool from_msg = false;  // commit straight from reply fields (line not kept)
    Timestamp msg_wts = 0, msg_rts = 0;
    bool spec_sample = false;  // a stale value is exposed under this renewal
    bool pending_grant = false;  // granted line unused; shield it at the head
    unsigned restarts = 0;
  };

  static bool is_read(OpKind k) {
    return k == OpKind::Load || k == OpKind::Print || k == OpKind::SpinLoad;
  }

  // ---- commit ------------------------------------------------------------
  void commit_pass(std::uint64_t now) {
    while (!rob_.empty()) {
      RobEntry& e = rob_.front();
      if (e.st != St::Executed) return;
      if (e.op.kind == OpKind::Nop) {
        if (stats_) stats_->committed_ops++;
        rob_.pop_front();
        continue;
      }
      CommitResult res = try_commit(e, now);
      if (res.r != CommitResult::R::Ok) {
        if (stats_) {
          stats_->restarts++;
          if (++e.restarts > 100) stats_->livelock = true;
        }
        e.st = St::NeedExecute;
        e.from_msg = false;
        e.spec_sample = false;
        drop_shield(e, now);
        return;
      }
      retire(e, res, now);
      rob_.pop_front();
    }
  }

  CommitResult try_commit(RobEntry& e, std::uint64_t now) {
    if (e.op.kind == OpKind::Store)
      return l1_->commit_store(e.op.addr, pts_, e.op.value, now);
    if (e.from_msg) {
      CommitResult res;
      if (pts_ > e.msg_rts) {
        res.r = CommitResult::R::Expired;
        return res;
      }
      res.r = CommitResult::R::Ok;
      res.new_pts = std::max(pts_, e.msg_wts);
      res.value = e.value;
      return res;
    }
    return l1_->commit_load(e.op.addr, e.gen, pts_, now);
  }

  void retire(RobEntry& e, const CommitResult& res, std::uint64_t now) {
    Timestamp advance = res.new_pts > pts_ ? res.new_pts - pts_ : 0;
    pts_ = std::max(pts_, res.new_pts);
    if (stats_) {
      stats_->committed_ops++;
      if (e.op.kind == OpKind::Store)
        stats_->pts_advance_store[core_] += advance;
      else
        stats_->pts_advance_load[core_] += advance;
    }
    LogRecord rec;
    rec.core = core_;
    rec.op = e.op.kind;
    rec.addr = e.op.addr;
    rec.value = res.value;
    rec.ts = pts_;
    commit_(rec, now);
    // A data access ticks the self-increment counter: progress in physical
    // time drags logical time along, bounding lease staleness.
    ++accesses_;
    if (cfg_.self_inc_period && accesses_ % cfg_.self_inc_period == 0) {
      pts_ += 1;
      if (stats_) stats_->pts_advance_self[core_] += 1;
    }
    if (e.op.kind == OpKind::SpinLoad && res.value != e.op.value)
      program_.push_front(e.op);  // spin again
    drop_shield(e, now);
  }

  // The grant has served its one guaranteed access (or its op bailed);
  // answer whatever was knocking.
  void drop_shield(RobEntry& e, std::uint64_t now) {
    if (!e.pending_grant) return;
    e.pending_grant = false;
    release_deferred(e.op.addr, now);
  }

  void release_deferred(std::uint64_t addr, std::uint64_t now) {
    auto it = deferred_probes_.find(addr);
    if (it == deferred_probes_.end()) return;
    std::vector<Message> probes = std::move(it->second);
    deferred_probes_.erase(it);
    for (const Message& m : probes) dispatch_probe(m, now);
  }

  void dispatch_probe(const Message& m, std::uint64_t now) {
    std::optional<Message> rep = l1_->handle_probe(m, now);
    if (rep) send_(*rep, now + 1);
  }

  // ---- fetch ---------------------------------------------------------------
  bool fetch_gate() const {
    if (cfg_.core_mode == CoreMode::OooCommitCheck) return true;
    for (const RobEntry& e : rob_)
      if (e.st != St::PendingRenewal) return false;
    return true;
  }

  void fetch_pass(std::uint64_t now) {
    while (rob_.size() < cfg_.rob_entries && !program_.empty() && fetch_gate()) {
      RobEntry e;
      e.op = program_.front();
      program_.pop_front();
      std::uint64_t jitter =
          cfg_.op_jitter_max ? rng_() % (cfg_.op_jitter_max + 1) : 0;
      e.ready_cycle = now + jitter;
      rob_.push_back(e);
    }
  }

  // ---- execute -------------------------------------------------------------
  bool blocked_by_older_store(std::size_t i) const {
    for (std::size_t j = 0; j < i; ++j)
      if (rob_[j].op.kind == OpKind::Store && rob_[j].op.addr == rob_[i].op.addr)
        return true;
    return false;
  }

  void execute_pass(std::uint64_t now) {
    for (std::size_t i = 0; i < rob_.size(); ++i) {
      RobEntry& e = rob_[i];
      if (e.st != St::NeedExecute || now < e.ready_cycle) continue;
      if (is_read(e.op.kind) && blocked_by_older_store(i)) continue;
      execute(e, now);
      return;  // single issue
    }
  }

  void execute(RobEntry& e, std::uint64_t now) {
    if (e.op.kind == OpKind::Nop) {
      e.st = St::Executed;
      return;
    }
    if (e.op.kind == OpKind::Store) {
      ProbeResult pr = l1_->probe_store(e.op.addr);
      if (pr.r == ProbeResult::R::Hit) {
        e.st = St::Executed;
      } else if (pr.r == ProbeResult::R::Miss) {
        send_(*pr.request, now);
        e.st = St::WaitReply;
      }
      return;  // Blocked: stay NeedExecute and retry
    }
    ProbeResult pr = l1_->probe_load(e.op.addr, pts_);
    switch (pr.r) {
      case ProbeResult::R::Hit:
        e.value = pr.value;
        e.gen = pr.fill_gen;
        e.st = St::Executed;
        return;
      case ProbeResult::R::Miss:
        send_(*pr.request, now);
        e.st = St::WaitReply;
        return;
      case ProbeResult::R::Expired:
        send_(*pr.request, now);
        e.value = pr.value;
        e.gen = pr.fill_gen;
        if (cfg_.speculation) {
          // Consume the stale value now; the renewal decides its fate.
          e.spec_sample = true;
          e.st = St::PendingRenewal;
        } else if (cfg_.core_mode == CoreMode::OooCommitCheck) {
          e.st = St::PendingRenewal;  // younger ops proceed, no value exposed
        } else {
          e.st = St::WaitReply;  // plain stall
        }
        return;
      case ProbeResult::R::Blocked:
        return;
    }
  }

  // ---- replies -------------------------------------------------------------
  RobEntry* find_waiting(std::uint64_t addr) {
    for (RobEntry& e : rob_)
      if (e.op.addr == addr && e.op.kind != OpKind::Nop &&
          (e.st == St::WaitReply || e.st == St::PendingRenewal))
        return &e;
    return nullptr;
  }

  void resolve(RobEntry& e, const Message& rep, const InstallResult& ins,
               std::uint64_t now) {
    if (e.op.kind == OpKind::Store) {
      // Exclusive permission (or the whole line) just arrived; re-probe.
      assert(rep.kind == MsgKind::EX_REP || rep.kind == MsgKind::UPGRADE_REP);
      e.st = St::NeedExecute;
      e.pending_grant = ins.gen != 0;
      return;
    }
    switch (rep.kind) {
      case MsgKind::RENEW_REP:
        // The lease got extended and the value never changed; whatever was
        // sampled (or the untouched line) commits normally.
        e.st = St::Executed;
        return;
      case MsgKind::SH_REP:
      case MsgKind::EX_REP:
        if (e.st == St::PendingRenewal && e.spec_sample) {
          // Renewal failed: the line changed under the sampled value.
          if (stats_) stats_->misspeculations++;
          squash_from(&e, now);
          return;
        }
        e.st = St::Executed;
        e.spec_sample = false;
        if (ins.gen != 0) {
          e.gen = ins.gen;
          e.from_msg = false;
          e.pending_grant = true;
        } else {
          // The line was not retained; commit from the reply itself.
          e.from_msg = true;
          e.value = *rep.payload;
          e.msg_wts = *rep.wts;
          e.msg_rts = *rep.rts;
        }
        return;
      default:
        assert(false && "reply kind does not answer a read");
    }
  }

  void squash_from(RobEntry* first, std::uint64_t now) {
    bool seen = false;
    for (RobEntry& e : rob_) {
      if (&e == first) seen = true;
      if (!seen) continue;
      if (stats_) stats_->squashed_ops++;
      e.st = St::NeedExecute;
      e.from_msg = false;
      e.spec_sample = false;
      drop_shield(e, now);
    }
  }

  RunConfig cfg_;
  std::uint32_t core_;
  L1* l1_;
  SimStats* stats_;
  std::mt19937_64 rng_;
  std::function<void(const Message&, std::uint64_t)> send_;
  std::function<void(LogRecord, std::uint64_t)> commit_;
  std::function<void(std::uint64_t)> wake_;

  std::deque<Op> program_;
  std::deque<RobEntry> rob_;
  std::map<std::uint64_t, std::vector<Message>> deferred_probes_;
  Timestamp pts_ = 0;
  std::uint64_t accesses_ = 0;
  bool armed_ = false;
  std::uint64_t armed_cycle_ = 0;
  bool stepped_ = false;
  std::uint64_t last_step_ = 0;
};

}  // namespace tardis

#endif  // TARDIS_CORE_HPP
