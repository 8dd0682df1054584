#ifndef TARDIS_SIMULATOR_HPP
#define TARDIS_SIMULATOR_HPP

#include <cassert>
#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <random>
#include <type_traits>
#include <utility>
#include <vector>

#include "tardis/config.hpp"
#include "tardis/core.hpp"
#include "tardis/event_queue.hpp"
#include "tardis/mesh.hpp"
#include "tardis/message.hpp"
#include "tardis/msi.hpp"
#include "tardis/private_cache.hpp"
#include "tardis/sc_checker.hpp"
#include "tardis/stats.hpp"
#include "tardis/tsman.hpp"
#include "tardis/workload.hpp"

namespace tardis {

// ---------------------------------------------------------------------------
// Full-system wiring: one tile per core (core + private cache + one slice of
// the shared cache), a 2D mesh between tiles, and memory controllers at a
// few tiles. Which component at a tile consumes a message follows from its
// kind. Timing: private-cache work is 1 cycle, a slice serves a message
// llc_access_cycles after arrival (later if it is mid-rebase), DRAM answers
// dram_ns after the request reaches the controller.
// ---------------------------------------------------------------------------

template <class L1T, class SliceT>
class SimT {
 public:
  explicit SimT(RunConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.resolve_mesh();
    assert(cfg_.validate().empty());
    stats_.init_cores(cfg_.cores);
    profile_ = std::is_same_v<L1T, MsiL1>
                   ? SchemaProfile::Msi
                   : (cfg_.mode == SimMode::NoPrivateCache
                          ? SchemaProfile::NoPrivateCache
                          : SchemaProfile::Tardis);
    mesh_ = std::make_unique<Mesh>(cfg_, profile_, q_, stats_);
    mesh_->set_deliver([this](const Message& m) { deliver(m); });
    for (std::uint32_t c = 0; c < cfg_.cores; ++c) {
      l1s_.push_back(std::make_unique<L1T>(cfg_, c, &stats_));
      slices_.push_back(std::make_unique<SliceT>(cfg_, c, &stats_));
    }
    if (cfg_.mode == SimMode::NoPrivateCache) {
      ucores_.resize(cfg_.cores);
      for (std::uint32_t c = 0; c < cfg_.cores; ++c) {
        ucores_[c].id = c;
        ucores_[c].rng.seed(cfg_.seed * 2654435761ULL + c);
      }
    } else {
      for (std::uint32_t c = 0; c < cfg_.cores; ++c) {
        auto eng =
            std::make_unique<CoreEngine<L1T>>(cfg_, c, l1s_[c].get(), &stats_);
        eng->set_send([this](const Message& m, std::uint64_t at) {
          mesh_->send(m, at);
        });
        eng->set_commit([this](LogRecord rec, std::uint64_t at) {
          append_log(rec, at);
        });
        eng->set_wake([this, c](std::uint64_t cycle) {
          q_.schedule(cycle, [this, c] { cores_[c]->step(q_.now()); });
        });
        cores_.push_back(std::move(eng));
      }
    }
  }

  void capture_messages(bool on) {
    mesh_->set_msg_log(on ? &msg_log_ : nullptr);
  }

  // Load a whole program and start every core at its seed-drawn skew.
  void set_program(const Program& prog) {
    program_ = prog;
    program_.per_core.resize(cfg_.cores);
    for (std::uint32_t c = 0; c < cfg_.cores; ++c) {
      for (const Op& op : program_.per_core[c]) feed(c, op);
      start(c, start_skew(c));
    }
  }

  // Scripted mode: push one op and run the system to quiescence.
  void feed_op(std::uint32_t core, const Op& op) {
    assert(core < cfg_.cores);
    feed(core, op);
    start(core, q_.now() + 1);  // past the already-stepped current cycle
    run_to_quiescence();
  }

  void run_to_quiescence() {
    while (!q_.empty()) {
      if (q_.next_cycle() > cfg_.max_cycles) {
        stats_.budget_exceeded = true;
        return;
      }
      q_.run_next();
    }
  }

  void run() { run_to_quiescence(); }

  bool finished() const {
    if (stats_.budget_exceeded) return false;
    if (cfg_.mode == SimMode::NoPrivateCache) {
      for (const auto& u : ucores_)
        if (!u.program.empty() || u.waiting) return false;
      return true;
    }
    for (const auto& c : cores_)
      if (!c->done()) return false;
    return true;
  }

  Outcome outcome() const {
    Outcome out;
    out.loads.resize(cfg_.cores);
    for (const LogRecord& r : log_)
      if (r.op != OpKind::Store) out.loads[r.core].push_back(r.value);
    return out;
  }

  // DRAM contents overlaid with every line still resident in the hierarchy;
  // a core-owned line is read from its owner's private cache.
  std::map<std::uint64_t, std::uint64_t> final_memory() const {
    std::map<std::uint64_t, std::uint64_t> mem = memory_;
    for (std::uint32_t s = 0; s < cfg_.cores; ++s) {
      slices_[s]->for_each_line([&](std::uint64_t addr, std::uint64_t data,
                                    bool owned, std::uint32_t owner) {
        if (owned) {
          auto view = l1s_[owner]->line(addr);
          mem[addr] = view ? view->data : data;
        } else {
          mem[addr] = data;
        }
      });
    }
    return mem;
  }

  CheckVerdict verify() const {
    CheckVerdict v;
    v.terminated = q_.empty() && finished();
    v.audit = audit_physiological(log_);
    v.oracle = oracle_sc(program_, outcome());
    return v;
  }

  SimStats& stats() {
    if (cfg_.mode != SimMode::NoPrivateCache) {
      for (std::uint32_t c = 0; c < cfg_.cores; ++c)
        stats_.pts_final[c] = cores_[c]->pts();
    } else {
      for (std::uint32_t c = 0; c < cfg_.cores; ++c)
        stats_.pts_final[c] = ucores_[c].pts;
    }
    return stats_;
  }

  const std::vector<LogRecord>& log() const { return log_; }
  const std::vector<MsgLogRecord>& msg_log() const { return msg_log_; }
  const RunConfig& config() const { return cfg_; }
  EventQueue& queue() { return q_; }
  L1T& l1(std::uint32_t c) { return *l1s_[c]; }
  SliceT& slice(std::uint32_t s) { return *slices_[s]; }
  CoreEngine<L1T>& core(std::uint32_t c) { return *cores_[c]; }
  std::uint64_t dram_word(std::uint64_t addr) const {
    auto it = memory_.find(addr);
    return it == memory_.end() ? 0 : it->second;
  }

 private:
  // A core without a private cache: every access is a round trip to the
  // line's slice, which applies the timestamp rules itself.
  struct UncachedCore {
    std::uint32_t id = 0;
    std::deque<Op> program;
    Timestamp pts = 0;
    bool waiting = false;
    std::uint64_t accesses = 0;
    std::mt19937_64 rng;
  };

  void feed(std::uint32_t core, const Op& op) {
    if (cfg_.mode == SimMode::NoPrivateCache)
      ucores_[core].program.push_back(op);
    else
      cores_[core]->push_op(op);
  }

  void start(std::uint32_t core, std::uint64_t cycle) {
    if (cfg_.mode == SimMode::NoPrivateCache) {
      q_.schedule(cycle, [this, core] { ustep(core); });
    } else {
      cores_[core]->arm(cycle);
    }
  }

  std::uint64_t start_skew(std::uint32_t core) {
    if (!cfg_.start_skew_max) return 0;
    std::mt19937_64 r(cfg_.seed * 2654435761ULL + 1000003ULL + core);
    return r() % (cfg_.start_skew_max + 1);
  }

  void append_log(LogRecord rec, std::uint64_t at) {
    rec.idx = log_.size();
    log_.push_back(rec);
    if (at > stats_.cycles) stats_.cycles = at;
  }

  // ---- uncached driver ----------------------------------------------------
  void ustep(std::uint32_t c) {
    UncachedCore& u = ucores_[c];
    if (u.waiting || u.program.empty()) return;
    const Op& op = u.program.front();
    if (op.kind == OpKind::Nop) {
      stats_.committed_ops++;
      u.program.pop_front();
      q_.schedule(q_.now() + 1, [this, c] { ustep(c); });
      return;
    }
    Message m;
    m.src = c;
    m.dst = op.addr % cfg_.cores;
    m.addr = op.addr;
    m.pts = u.pts;
    if (op.kind == OpKind::Store) {
      m.kind = MsgKind::EX_REQ;
      m.payload = op.value;
    } else {
      m.kind = MsgKind::SH_REQ;
    }
    u.waiting = true;
    mesh_->send(m, q_.now());
  }

  void ureply(const Message& rep) {
    UncachedCore& u = ucores_[rep.dst];
    assert(u.waiting && !u.program.empty());
    Op op = u.program.front();
    u.waiting = false;
    std::uint64_t value;
    Timestamp advance_from = u.pts;
    if (op.kind == OpKind::Store) {
      u.pts = std::max(u.pts, *rep.wts);
      value = op.value;
      stats_.pts_advance_store[rep.dst] += u.pts - advance_from;
    } else {
      u.pts = std::max(u.pts, *rep.wts);
      value = *rep.payload;
      stats_.pts_advance_load[rep.dst] += u.pts - advance_from;
    }
    LogRecord rec;
    rec.core = rep.dst;
    rec.op = op.kind;
    rec.addr = op.addr;
    rec.value = value;
    rec.ts = u.pts;
    append_log(rec, q_.now());
    stats_.committed_ops++;
    ++u.accesses;
    if (cfg_.self_inc_period && u.accesses % cfg_.self_inc_period == 0) {
      u.pts += 1;
      stats_.pts_advance_self[rep.dst] += 1;
    }
    bool retry = op.kind == OpKind::SpinLoad && value != op.value;
    if (!retry) u.program.pop_front();
    std::uint64_t jitter =
        cfg_.op_jitter_max ? u.rng() % (cfg_.op_jitter_max + 1) : 0;
    std::uint32_t c = rep.dst;
    q_.schedule(q_.now() + 1 + jitter, [this, c] { ustep(c); });
  }

  // ---- message routing ------------------------------------------------
  void deliver(const Message& m) {
    const std::uint64_t now = q_.now();
    switch (m.kind) {
      // Consumed by the slice at the destination tile.
      case MsgKind::SH_REQ:
      case MsgKind::EX_REQ:
      case MsgKind::FLUSH_REP:
      case MsgKind::WB_REP:
      case MsgKind::DRAM_LD_REP:
      case MsgKind::INV_ACK:
      case MsgKind::EVICT_NOTIFY: {
        SliceT& sl = *slices_[m.dst];
        std::uint64_t at = std::max(now, sl.busy_until()) + cfg_.llc_access_cycles;
        q_.schedule(at, [this, m] {
          SliceT& s = *slices_[m.dst];
          for (const Message& o : s.handle(m, q_.now())) route_out(o);
        });
        return;
      }
      // Replies consumed by the requesting core.
      case MsgKind::SH_REP:
      case MsgKind::EX_REP:
      case MsgKind::UPGRADE_REP:
      case MsgKind::RENEW_REP:
        if (cfg_.mode == SimMode::NoPrivateCache)
          ureply(m);
        else
          cores_[m.dst]->on_reply(m, now);
        return;
      // Requests forwarded to a private cache; the core engine may shield a
      // freshly granted line briefly, otherwise the answer leaves next cycle.
      case MsgKind::WB_REQ:
      case MsgKind::FLUSH_REQ:
      case MsgKind::INV_REQ: {
        assert(cfg_.mode != SimMode::NoPrivateCache &&
               "nothing to probe without private caches");
        cores_[m.dst]->on_probe(m, now);
        poke_core(m.dst, now + 1);
        return;
      }
      // Memory controller at this tile.
      case MsgKind::DRAM_ST_REQ:
        memory_[m.addr] = *m.payload;
        return;
      case MsgKind::DRAM_LD_REQ: {
        q_.schedule(now + cfg_.dram_ns, [this, m] {
          Message rep;
          rep.kind = MsgKind::DRAM_LD_REP;
          rep.src = m.dst;
          rep.dst = m.src;
          rep.addr = m.addr;
          auto it = memory_.find(m.addr);
          rep.payload = it == memory_.end() ? 0 : it->second;
          mesh_->send(rep, q_.now());
        });
        return;
      }
    }
  }

  void route_out(const Message& m) { mesh_->send(m, q_.now()); }

  // A line-state change at the private cache may unblock the local core.
  void poke_core(std::uint32_t c, std::uint64_t cycle) {
    if (cfg_.mode != SimMode::NoPrivateCache) cores_[c]->arm(cycle);
  }

  RunConfig cfg_;
  SchemaProfile profile_ = SchemaProfile::Tardis;
  SimStats stats_;
  EventQueue q_;
  std::unique_ptr<Mesh> mesh_;
  std::vector<std::unique_ptr<L1T>> l1s_;
  std::vector<std::unique_ptr<SliceT>> slices_;
  std::vector<std::unique_ptr<CoreEngine<L1T>>> cores_;
  std::vector<UncachedCore> ucores_;
  std::map<std::uint64_t, std::uint64_t> memory_;
  std::vector<LogRecord> log_;
  std::vector<MsgLogRecord> msg_log_;
  Program program_;
};

using TardisSim = SimT<TardisL1, TmSlice>;
using MsiSim = SimT<MsiL1, MsiDir>;

// ---------------------------------------------------------------------------
// One-call convenience driver used by the CLI and most tests.
// ---------------------------------------------------------------------------

struct RunOutput {
  SimStats stats;
  std::vector<LogRecord> log;
  std::vector<MsgLogRecord> msg_log;
  Outcome outcome;
  std::map<std::uint64_t, std::uint64_t> final_mem;
  CheckVerdict verdict;
};

template <class SimType>
inline RunOutput run_sim(const RunConfig& cfg, const Program& prog,
                         bool capture_msgs) {
  SimType sim(cfg);
  if (capture_msgs) sim.capture_messages(true);
  sim.set_program(prog);
  sim.run();
  RunOutput out;
  out.verdict = sim.verify();
  out.stats = sim.stats();
  out.log = sim.log();
  out.msg_log = sim.msg_log();
  out.outcome = sim.outcome();
  out.final_mem = sim.final_memory();
  return out;
}

inline RunOutput simulate(const RunConfig& cfg, const Program& prog,
                          bool capture_msgs = false) {
  if (cfg.protocol == Protocol::Msi)
    return run_sim<MsiSim>(cfg, prog, capture_msgs);
  return run_sim<TardisSim>(cfg, prog, capture_msgs);
}

}  // namespace tardis

#endif  // TARDIS_SIMULATOR_HPP
