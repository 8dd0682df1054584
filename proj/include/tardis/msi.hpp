#ifndef TARDIS_MSI_HPP
#define TARDIS_MSI_HPP

#include <algorithm>
#include <cassert>
#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <set>
#include <vector>

#include "tardis/cache_array.hpp"
#include "tardis/config.hpp"
#include "tardis/message.hpp"
#include "tardis/private_cache.hpp"  // shared probe/commit/install result types
#include "tardis/stats.hpp"

namespace tardis {

// ---------------------------------------------------------------------------
// Invalidation-based baseline: private MSI caches under a full-map directory
// embedded in the shared-cache slices. Messages carry no timestamps; loads
// and stores commit at logical time zero, so the consistency audit reduces
// to commit order, which the invalidation protocol keeps coherent.
// ---------------------------------------------------------------------------

struct MsiLine {
  bool valid = false;
  std::uint64_t addr = 0;
  std::uint64_t lru = 0;
  PState state = PState::Invalid;  // Shared/Exclusive = MSI S/M
  std::uint64_t data = 0;
  bool dirty = false;
  std::uint32_t fill_gen = 0;
};

class MsiL1 {
 public:
  MsiL1(const RunConfig& cfg, std::uint32_t core, SimStats* stats)
      : cfg_(cfg), core_(core), stats_(stats),
        array_(cfg.l1_sets(), cfg.l1_ways) {}

  std::uint32_t slice_of(std::uint64_t addr) const { return addr % cfg_.cores; }

  ProbeResult probe_load(std::uint64_t addr, Timestamp /*pts*/) {
    ProbeResult res;
    MsiLine* ln = array_.find(addr);
    if (ln) {
      array_.touch(*ln);
      res.r = ProbeResult::R::Hit;
      res.value = ln->data;
      res.fill_gen = ln->fill_gen;
      return res;
    }
    if (mshr_.count(addr)) { res.r = ProbeResult::R::Blocked; return res; }
    res.r = ProbeResult::R::Miss;
    res.request = request(MsgKind::SH_REQ, addr);
    return res;
  }

  ProbeResult probe_store(std::uint64_t addr) {
    ProbeResult res;
    MsiLine* ln = array_.find(addr);
    if (ln && ln->state == PState::Exclusive) {
      array_.touch(*ln);
      res.r = ProbeResult::R::Hit;
      res.fill_gen = ln->fill_gen;
      return res;
    }
    if (mshr_.count(addr)) { res.r = ProbeResult::R::Blocked; return res; }
    if (ln) array_.touch(*ln);
    res.r = ProbeResult::R::Miss;
    res.request = request(MsgKind::EX_REQ, addr);
    return res;
  }

  CommitResult commit_load(std::uint64_t addr, std::uint32_t gen,
                           Timestamp /*pts*/, std::uint64_t /*now*/) {
    CommitResult res;
    MsiLine* ln = array_.find(addr);
    if (!ln || ln->fill_gen != gen) { res.r = CommitResult::R::Retry; return res; }
    res.r = CommitResult::R::Ok;
    res.value = ln->data;
    res.new_pts = 0;
    return res;
  }

  CommitResult commit_store(std::uint64_t addr, Timestamp /*pts*/,
                            std::uint64_t value, std::uint64_t /*now*/) {
    CommitResult res;
    MsiLine* ln = array_.find(addr);
    if (!ln || ln->state != PState::Exclusive) {
      res.r = CommitResult::R::Retry;
      return res;
    }
    ln->data = value;
    ln->dirty = true;
    array_.touch(*ln);
    res.r = CommitResult::R::Ok;
    res.new_pts = 0;
    res.value = value;
    return res;
  }

  InstallResult install_reply(const Message& rep, Timestamp /*pts*/,
                              std::uint64_t /*now*/) {
    InstallResult res;
    mshr_.erase(rep.addr);
    switch (rep.kind) {
      case MsgKind::SH_REP: {
        MsiLine* ln = array_.find(rep.addr);
        if (!ln) ln = make_room(rep.addr, res.out);
        fill(*ln, PState::Shared, *rep.payload);
        res.gen = ln->fill_gen;
        return res;
      }
      case MsgKind::EX_REP: {
        MsiLine* ln = array_.find(rep.addr);
        if (!rep.payload) {
          // Upgrade grant: the directory confirmed we still share the line.
          assert(ln && ln->state == PState::Shared);
          ln->state = PState::Exclusive;
          res.gen = ln->fill_gen;
          return res;
        }
        if (!ln) ln = make_room(rep.addr, res.out);
        fill(*ln, PState::Exclusive, *rep.payload);
        res.gen = ln->fill_gen;
        return res;
      }
      default:
        assert(false && "unexpected reply kind at an MSI private cache");
        return res;
    }
  }

  // Directory-forwarded traffic.
  std::optional<Message> handle_inv_req(const Message& req) {
    MsiLine* ln = array_.find(req.addr);
    if (ln) invalidate(*ln);  // may have left already; ack regardless
    Message ack;
    ack.kind = MsgKind::INV_ACK;
    ack.src = core_;
    ack.dst = req.src;
    ack.addr = req.addr;
    return ack;
  }

  std::optional<Message> handle_wb_req(const Message& req, std::uint64_t /*now*/) {
    MsiLine* ln = array_.find(req.addr);
    if (!ln || ln->state != PState::Exclusive) {
      note_crossed_request(req.addr);
      return std::nullopt;
    }
    ln->state = PState::Shared;
    ln->dirty = false;
    Message rep;
    rep.kind = MsgKind::WB_REP;
    rep.src = core_;
    rep.dst = req.src;
    rep.addr = req.addr;
    rep.payload = ln->data;
    return rep;
  }

  std::optional<Message> handle_flush_req(const Message& req) {
    MsiLine* ln = array_.find(req.addr);
    if (!ln || ln->state != PState::Exclusive) {
      note_crossed_request(req.addr);
      return std::nullopt;
    }
    Message rep = flush_rep(*ln);
    invalidate(*ln);
    return rep;
  }

  // Single entry point for externally forwarded requests.
  std::optional<Message> handle_probe(const Message& req, std::uint64_t now) {
    switch (req.kind) {
      case MsgKind::INV_REQ:
        return handle_inv_req(req);
      case MsgKind::WB_REQ:
        return handle_wb_req(req, now);
      case MsgKind::FLUSH_REQ:
        return handle_flush_req(req);
      default:
        assert(false && "not a probe this cache answers");
        return std::nullopt;
    }
  }

  // Voluntary eviction: Shared departures are announced (the directory keeps
  // an exact sharer map), Exclusive lines flush their data home.
  std::optional<Message> evict(std::uint64_t addr) {
    MsiLine* ln = array_.find(addr);
    if (!ln) return std::nullopt;
    std::optional<Message> out;
    if (ln->state == PState::Exclusive) {
      out = flush_rep(*ln);
      evict_inflight_[addr]++;
    } else {
      out = notify(*ln);
    }
    invalidate(*ln);
    return out;
  }

  std::optional<LineView> line(std::uint64_t addr) const {
    const MsiLine* ln = array_.find(addr);
    if (!ln) return std::nullopt;
    LineView v;
    v.state = ln->state;
    v.data = ln->data;
    v.modified = ln->dirty;
    v.fill_gen = ln->fill_gen;
    return v;
  }

  bool mshr_busy(std::uint64_t addr) const { return mshr_.count(addr) != 0; }

 private:
  Message request(MsgKind kind, std::uint64_t addr) {
    Message m;
    m.kind = kind;
    m.src = core_;
    m.dst = slice_of(addr);
    m.addr = addr;
    mshr_[addr] = kind;
    return m;
  }

  Message flush_rep(MsiLine& ln) {
    Message rep;
    rep.kind = MsgKind::FLUSH_REP;
    rep.src = core_;
    rep.dst = slice_of(ln.addr);
    rep.addr = ln.addr;
    rep.payload = ln.data;
    return rep;
  }

  Message notify(MsiLine& ln) {
    Message m;
    m.kind = MsgKind::EVICT_NOTIFY;
    m.src = core_;
    m.dst = slice_of(ln.addr);
    m.addr = ln.addr;
    return m;
  }

  void invalidate(MsiLine& ln) {
    ln.valid = false;
    ln.state = PState::Invalid;
    ln.dirty = false;
  }

  void note_crossed_request(std::uint64_t addr) {
    auto it = evict_inflight_.find(addr);
    assert(it != evict_inflight_.end() &&
           "forwarded request for a line this cache never flushed");
    if (it != evict_inflight_.end() && --it->second == 0)
      evict_inflight_.erase(it);
  }

  MsiLine* make_room(std::uint64_t addr, std::vector<Message>& out) {
    auto rank = [](const MsiLine& ln) -> std::uint64_t {
      return ln.state == PState::Shared ? 0 : 1;
    };
    auto pinned = [this](const MsiLine& ln) {
      return mshr_.count(ln.addr) != 0;
    };
    MsiLine* slot = array_.fill_slot(addr, rank, pinned);
    assert(slot && "every way pinned by outstanding requests");
    if (slot->valid) {
      if (slot->state == PState::Exclusive) {
        out.push_back(flush_rep(*slot));
        evict_inflight_[slot->addr]++;
      } else {
        out.push_back(notify(*slot));
      }
      invalidate(*slot);
    }
    slot->addr = addr;
    return slot;
  }

  void fill(MsiLine& ln, PState st, std::uint64_t data) {
    ln.valid = true;
    ln.state = st;
    ln.data = data;
    ln.dirty = false;
    ln.fill_gen = ++fill_gen_;
    array_.touch(ln);
  }

  RunConfig cfg_;
  std::uint32_t core_;
  SimStats* stats_;
  CacheArray<MsiLine> array_;
  std::uint32_t fill_gen_ = 0;
  std::map<std::uint64_t, MsgKind> mshr_;
  std::map<std::uint64_t, unsigned> evict_inflight_;
};

// ---------------------------------------------------------------------------
// Full-map directory in the shared-cache slice. Entry presence means the
// data is here; Invalid state with a present entry means no core holds it.
// Invalidation acks are collected at the directory.
// ---------------------------------------------------------------------------

enum class DirTransient : std::uint8_t {
  None,
  AwaitOwnerRep,
  AwaitInvAcks,
  EvictFlush,
};

struct DirEntry {
  bool valid = false;
  std::uint64_t addr = 0;
  std::uint64_t lru = 0;
  PState state = PState::Invalid;
  DirTransient transient = DirTransient::None;
  std::set<std::uint32_t> sharers;
  std::uint32_t owner = 0;
  std::uint64_t data = 0;
  bool dirty = false;
};

struct DirView {
  PState state = PState::Invalid;
  DirTransient transient = DirTransient::None;
  std::set<std::uint32_t> sharers;
  std::uint32_t owner = 0;
  std::uint64_t data = 0;
  bool dirty = false;
};

class MsiDir {
 public:
  MsiDir(const RunConfig& cfg, std::uint32_t slice, SimStats* stats)
      : cfg_(cfg), slice_(slice), stats_(stats),
        array_(cfg.l2_sets(), cfg.l2_ways, cfg.cores) {}

  std::vector<Message> handle(const Message& msg, std::uint64_t now) {
    std::vector<Message> out;
    switch (msg.kind) {
      case MsgKind::SH_REQ:
      case MsgKind::EX_REQ:
        if (stats_) stats_->llc_accesses++;
        process_request(msg, now, out);
        break;
      case MsgKind::INV_ACK:
        on_inv_ack(msg, now, out);
        break;
      case MsgKind::WB_REP:
      case MsgKind::FLUSH_REP:
        on_owner_rep(msg, now, out);
        break;
      case MsgKind::EVICT_NOTIFY:
        on_notify(msg);
        break;
      case MsgKind::DRAM_LD_REP:
        assert(dram_pending_.count(msg.addr));
        dram_pending_.erase(msg.addr);
        complete_fill(msg.addr, *msg.payload, now, out);
        break;
      default:
        assert(false && "unexpected message kind at the directory");
    }
    return out;
  }

  std::vector<Message> llc_evict(std::uint64_t addr, std::uint64_t now) {
    std::vector<Message> out;
    DirEntry* e = array_.find(addr);
    if (!e || e->transient != DirTransient::None) return out;
    // Either gone immediately, or a flush/invalidation round is now pending
    // with nothing parked on it.
    evict_entry(*e, ParkedFill{}, out);
    (void)now;
    return out;
  }

  std::optional<DirView> entry(std::uint64_t addr) const {
    const DirEntry* e = array_.find(addr);
    if (!e) return std::nullopt;
    DirView v;
    v.state = e->state;
    v.transient = e->transient;
    v.sharers = e->sharers;
    v.owner = e->owner;
    v.data = e->data;
    v.dirty = e->dirty;
    return v;
  }

  bool quiescent() const {
    return waiting_.empty() && dram_pending_.empty() && parked_fills_.empty() &&
           pending_inv_.empty();
  }

  std::uint64_t busy_until() const { return 0; }  // no slice-local busy work

  // Iterate resident lines: fn(addr, data, owned_by_core, owner).
  template <class Fn>
  void for_each_line(Fn&& fn) const {
    const_cast<CacheArray<DirEntry>&>(array_).for_each_valid([&](DirEntry& e) {
      fn(e.addr, e.data, e.state == PState::Exclusive, e.owner);
    });
  }

 private:
  struct ParkedFill {
    bool has_fill = false;
    std::uint64_t addr = 0;
    std::uint64_t data = 0;
  };
  struct PendingInv {
    bool for_evict = false;
    std::uint32_t req_src = 0;
    bool was_sharer = false;
    unsigned acks_left = 0;
  };

  bool addr_busy(std::uint64_t addr) const {
    if (dram_pending_.count(addr) || parked_addrs_.count(addr)) return true;
    const DirEntry* e = array_.find(addr);
    return e && e->transient != DirTransient::None;
  }

  void process_request(const Message& req, [[maybe_unused]] std::uint64_t now,
                       std::vector<Message>& out) {
    const std::uint64_t addr = req.addr;
    if (addr_busy(addr)) {
      waiting_[addr].push_back(req);
      return;
    }
    DirEntry* e = array_.find(addr);
    if (!e) {
      waiting_[addr].push_front(req);  // oldest waiter for this address
      dram_pending_.insert(addr);
      Message ld;
      ld.kind = MsgKind::DRAM_LD_REQ;
      ld.src = slice_;
      ld.dst = cfg_.mc_node(addr);
      ld.addr = addr;
      out.push_back(ld);
      if (stats_) stats_->dram_loads++;
      return;
    }
    array_.touch(*e);
    if (e->state == PState::Exclusive) {
      assert(req.src != e->owner && "owner re-request cannot happen in order");
      Message fwd;
      fwd.kind = req.kind == MsgKind::SH_REQ ? MsgKind::WB_REQ
                                             : MsgKind::FLUSH_REQ;
      fwd.src = slice_;
      fwd.dst = e->owner;
      fwd.addr = addr;
      out.push_back(fwd);
      e->transient = DirTransient::AwaitOwnerRep;
      waiting_[addr].push_front(req);
      return;
    }
    if (req.kind == MsgKind::SH_REQ) {
      e->sharers.insert(req.src);
      e->state = PState::Shared;
      out.push_back(data_reply(MsgKind::SH_REP, *e, req.src));
      return;
    }
    // EX_REQ over Invalid (no copies) or Shared (invalidation round).
    if (e->state == PState::Invalid || e->sharers.empty()) {
      e->state = PState::Exclusive;
      e->owner = req.src;
      e->sharers.clear();
      out.push_back(data_reply(MsgKind::EX_REP, *e, req.src));
      return;
    }
    bool was_sharer = e->sharers.count(req.src) != 0;
    if (was_sharer && e->sharers.size() == 1) {
      // Sole sharer upgrades in place: no invalidations, no data.
      e->state = PState::Exclusive;
      e->owner = req.src;
      e->sharers.clear();
      Message rep;
      rep.kind = MsgKind::EX_REP;
      rep.src = slice_;
      rep.dst = req.src;
      rep.addr = addr;
      out.push_back(rep);
      return;
    }
    unsigned count = 0;
    for (std::uint32_t s : e->sharers) {
      if (s == req.src) continue;
      Message inv;
      inv.kind = MsgKind::INV_REQ;
      inv.src = slice_;
      inv.dst = s;
      inv.addr = addr;
      out.push_back(inv);
      ++count;
    }
    if (stats_) stats_->invalidations_sent += count;
    e->sharers.clear();
    e->transient = DirTransient::AwaitInvAcks;
    pending_inv_[addr] = {false, req.src, was_sharer, count};
  }

  void on_inv_ack(const Message& msg, std::uint64_t now,
                  std::vector<Message>& out) {
    auto it = pending_inv_.find(msg.addr);
    assert(it != pending_inv_.end() && it->second.acks_left > 0);
    if (--it->second.acks_left > 0) return;
    PendingInv pi = it->second;
    pending_inv_.erase(it);
    DirEntry* e = array_.find(msg.addr);
    assert(e && e->transient == DirTransient::AwaitInvAcks);
    e->transient = DirTransient::None;
    if (pi.for_evict) {
      finish_eviction(*e, out);
      retire_parked(msg.addr, now, out);
      return;
    }
    e->state = PState::Exclusive;
    e->owner = pi.req_src;
    if (pi.was_sharer) {
      Message rep;  // requester still shares the line: grant without data
      rep.kind = MsgKind::EX_REP;
      rep.src = slice_;
      rep.dst = pi.req_src;
      rep.addr = msg.addr;
      out.push_back(rep);
    } else {
      out.push_back(data_reply(MsgKind::EX_REP, *e, pi.req_src));
    }
    drain(msg.addr, now, out);
  }

  void on_owner_rep(const Message& msg, std::uint64_t now,
                    std::vector<Message>& out) {
    DirEntry* e = array_.find(msg.addr);
    assert(e && e->state == PState::Exclusive &&
           "write-back or flush for a line no core owns");
    if (!e) return;
    if (e->transient == DirTransient::EvictFlush) {
      e->data = *msg.payload;
      e->dirty = true;
      e->transient = DirTransient::None;
      finish_eviction(*e, out);
      retire_parked(msg.addr, now, out);
      return;
    }
    e->data = *msg.payload;
    e->dirty = true;
    e->transient = DirTransient::None;
    if (msg.kind == MsgKind::WB_REP) {
      e->state = PState::Shared;
      e->sharers = {e->owner};
    } else {
      e->state = PState::Invalid;
      e->sharers.clear();
    }
    e->owner = 0;
    array_.touch(*e);
    drain(msg.addr, now, out);
  }

  void on_notify(const Message& msg) {
    DirEntry* e = array_.find(msg.addr);
    if (!e) return;  // raced with this entry's own eviction
    auto it = pending_inv_.find(msg.addr);
    if (it != pending_inv_.end()) {
      // Mid-round departures were already dropped from the sharer set; only
      // the requester's own copy matters for whether data must be resent.
      if (!it->second.for_evict && it->second.req_src == msg.src)
        it->second.was_sharer = false;
      return;
    }
    if (e->state == PState::Shared) {
      e->sharers.erase(msg.src);
      if (e->sharers.empty()) e->state = PState::Invalid;
    }
  }

  void complete_fill(std::uint64_t addr, std::uint64_t data, std::uint64_t now,
                     std::vector<Message>& out) {
    auto rank = [](const DirEntry& e) -> std::uint64_t {
      if (e.state == PState::Invalid) return 0;
      return e.state == PState::Shared ? 1 : 2;
    };
    auto pinned = [](const DirEntry& e) {
      return e.transient != DirTransient::None;
    };
    DirEntry* slot = array_.fill_slot(addr, rank, pinned);
    assert(slot && "every way of the set is mid-transaction");
    if (slot->valid) {
      if (!evict_entry(*slot, ParkedFill{true, addr, data}, out)) {
        // Eviction is waiting on remote copies; the fill is parked.
        parked_addrs_.insert(addr);
        return;
      }
    }
    slot->valid = true;
    slot->addr = addr;
    slot->state = PState::Invalid;  // present, no private copies
    slot->transient = DirTransient::None;
    slot->sharers.clear();
    slot->owner = 0;
    slot->data = data;
    slot->dirty = false;
    array_.touch(*slot);
    drain(addr, now, out);
  }

  // Returns true when the entry is gone immediately; false when a flush or
  // invalidation round is now pending (parked passed along for later).
  bool evict_entry(DirEntry& e, ParkedFill parked, std::vector<Message>& out) {
    if (e.state == PState::Exclusive) {
      Message fl;
      fl.kind = MsgKind::FLUSH_REQ;
      fl.src = slice_;
      fl.dst = e.owner;
      fl.addr = e.addr;
      out.push_back(fl);
      e.transient = DirTransient::EvictFlush;
      parked_fills_[e.addr] = parked;
      return false;
    }
    if (e.state == PState::Shared && !e.sharers.empty()) {
      unsigned count = 0;
      for (std::uint32_t s : e.sharers) {
        Message inv;
        inv.kind = MsgKind::INV_REQ;
        inv.src = slice_;
        inv.dst = s;
        inv.addr = e.addr;
        out.push_back(inv);
        ++count;
      }
      if (stats_) stats_->invalidations_sent += count;
      e.sharers.clear();
      e.transient = DirTransient::AwaitInvAcks;
      pending_inv_[e.addr] = {true, 0, false, count};
      parked_fills_[e.addr] = parked;
      return false;
    }
    finish_eviction(e, out);
    return true;
  }

  void finish_eviction(DirEntry& e, std::vector<Message>& out) {
    if (e.dirty) {
      Message st;
      st.kind = MsgKind::DRAM_ST_REQ;
      st.src = slice_;
      st.dst = cfg_.mc_node(e.addr);
      st.addr = e.addr;
      st.payload = e.data;
      out.push_back(st);
      if (stats_) stats_->dram_stores++;
    }
    e.valid = false;
    e.sharers.clear();
    e.transient = DirTransient::None;
  }

  // After an eviction completes: install the fill that was parked on the
  // victim (if any) and wake the victim's own waiters.
  void retire_parked(std::uint64_t victim, std::uint64_t now,
                     std::vector<Message>& out) {
    auto pf = parked_fills_.find(victim);
    assert(pf != parked_fills_.end());
    ParkedFill parked = pf->second;
    parked_fills_.erase(pf);
    if (parked.has_fill) {
      parked_addrs_.erase(parked.addr);
      complete_fill(parked.addr, parked.data, now, out);
    }
    drain(victim, now, out);
  }

  void drain(std::uint64_t addr, std::uint64_t now, std::vector<Message>& out) {
    auto it = waiting_.find(addr);
    if (it == waiting_.end()) return;
    while (!it->second.empty() && !addr_busy(addr)) {
      Message req = it->second.front();
      it->second.pop_front();
      process_request(req, now, out);
      it = waiting_.find(addr);
      if (it == waiting_.end()) return;
    }
    if (it->second.empty()) waiting_.erase(it);
  }

  Message data_reply(MsgKind kind, const DirEntry& e, std::uint32_t dst) {
    Message m;
    m.kind = kind;
    m.src = slice_;
    m.dst = dst;
    m.addr = e.addr;
    m.payload = e.data;
    return m;
  }

  RunConfig cfg_;
  std::uint32_t slice_;
  SimStats* stats_;
  CacheArray<DirEntry> array_;
  std::map<std::uint64_t, std::deque<Message>> waiting_;
  std::set<std::uint64_t> dram_pending_;
  std::map<std::uint64_t, ParkedFill> parked_fills_;  // keyed by victim addr
  std::set<std::uint64_t> parked_addrs_;
  std::map<std::uint64_t, PendingInv> pending_inv_;
};

}  // namespace tardis

#endif  // TARDIS_MSI_HPP
