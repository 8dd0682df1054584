#ifndef TARDIS_TSMAN_HPP
#define TARDIS_TSMAN_HPP

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
#include "tardis/stats.hpp"
#include "tardis/timestamp.hpp"

namespace tardis {

enum class TmState : std::uint8_t { Shared, Exclusive };
enum class TmTransient : std::uint8_t { None, AwaitOwnerRep, EvictFlush };

struct TmEntry {
  bool valid = false;
  std::uint64_t addr = 0;
  std::uint64_t lru = 0;
  TmState state = TmState::Shared;
  TmTransient transient = TmTransient::None;
  Timestamp dwts = 0, drts = 0;  // deltas against the slice base
  std::uint32_t owner = 0;       // meaningful in Exclusive state
  std::uint64_t data = 0;        // stale while a core owns the line
  bool dirty = false;
};

struct TmView {
  TmState state = TmState::Shared;
  TmTransient transient = TmTransient::None;
  Timestamp wts = 0, rts = 0;
  std::uint32_t owner = 0;
  std::uint64_t data = 0;
  bool dirty = false;
};

// One slice of the shared last-level cache plus its timestamp manager.
// Grants leases, renews them, and hands lines over for writing without ever
// sending an invalidation; expired sharers are simply left behind in logical
// time. Pure state machine: timing and transport live in the simulation.
class TmSlice {
 public:
  TmSlice(const RunConfig& cfg, std::uint32_t slice, SimStats* stats)
      : cfg_(cfg),
        slice_(slice),
        stats_(stats),
        array_(cfg.l2_sets(), cfg.l2_ways, cfg.cores) {}

  // Deliver one message addressed to this slice. Returns messages to send.
  std::vector<Message> handle(const Message& msg, std::uint64_t now) {
    std::vector<Message> out;
    switch (msg.kind) {
      case MsgKind::SH_REQ:
      case MsgKind::EX_REQ:
        if (stats_) {
          stats_->llc_accesses++;
          if (msg.kind == MsgKind::SH_REQ && msg.holds_copy)
            stats_->renew_requests++;
        }
        process_request(msg, now, out);
        break;
      case MsgKind::FLUSH_REP:
      case MsgKind::WB_REP:
        on_owner_rep(msg, now, out);
        break;
      case MsgKind::DRAM_LD_REP: {
        assert(dram_pending_.count(msg.addr));
        dram_pending_.erase(msg.addr);
        complete_fill(msg.addr, *msg.payload, now, out);
        break;
      }
      default:
        assert(false && "unexpected message kind at an LLC slice");
    }
    return out;
  }

  // Force an eviction (used by tests; demand evictions use the same rules).
  std::vector<Message> llc_evict(std::uint64_t addr, std::uint64_t now) {
    std::vector<Message> out;
    TmEntry* e = array_.find(addr);
    if (!e || e->transient != TmTransient::None) return out;
    if (e->state == TmState::Shared) {
      evict_shared(*e, out);
    } else {
      out.push_back(flush_req(*e));
      e->transient = TmTransient::EvictFlush;
      parked_fills_[addr] = ParkedFill{};  // eviction only, nothing to install
    }
    (void)now;
    return out;
  }

  std::optional<TmView> entry(std::uint64_t addr) const {
    const TmEntry* e = array_.find(addr);
    if (!e) return std::nullopt;
    TmView v;
    v.state = e->state;
    v.transient = e->transient;
    v.wts = wts_of(*e);
    v.rts = rts_of(*e);
    v.owner = e->owner;
    v.data = e->data;
    v.dirty = e->dirty;
    return v;
  }

  Timestamp mts() const { return mts_; }
  Timestamp bts() const { return bts_; }
  std::uint64_t busy_until() const { return busy_until_; }
  std::uint64_t rebase_count() const { return rebases_; }

  // Iterate resident lines: fn(addr, data, owned_by_core, owner).
  template <class Fn>
  void for_each_line(Fn&& fn) const {
    const_cast<CacheArray<TmEntry>&>(array_).for_each_valid([&](TmEntry& e) {
      fn(e.addr, e.data, e.state == TmState::Exclusive, e.owner);
    });
  }
  bool quiescent() const {
    return waiting_.empty() && dram_pending_.empty() && parked_fills_.empty();
  }

 private:
  struct ParkedFill {
    bool has_fill = false;
    std::uint64_t addr = 0;
    std::uint64_t data = 0;
  };

  Timestamp wts_of(const TmEntry& e) const { return decode_delta(bts_, e.dwts); }
  Timestamp rts_of(const TmEntry& e) const { return decode_delta(bts_, e.drts); }

  bool addr_busy(std::uint64_t addr) const {
    if (dram_pending_.count(addr) || parked_addrs_.count(addr)) return true;
    const TmEntry* e = array_.find(addr);
    return e && e->transient != TmTransient::None;
  }

  void process_request(const Message& req, std::uint64_t now,
                       std::vector<Message>& out) {
    const std::uint64_t addr = req.addr;
    if (addr_busy(addr)) {
      waiting_[addr].push_back(req);
      return;
    }
    TmEntry* e = array_.find(addr);
    if (!e) {
      // The request being processed is the oldest for this address; younger
      // arrivals queue behind it (push_front matters on drain replays).
      waiting_[addr].push_front(req);
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
    if (cfg_.mode == SimMode::NoPrivateCache) {
      serve_uncached(*e, req, now, out);
      return;
    }
    if (e->state == TmState::Shared) {
      if (req.kind == MsgKind::SH_REQ) {
        // Lease the current version out to the reader.
        Timestamp new_rts =
            std::max({rts_of(*e), wts_of(*e) + cfg_.lease, *req.pts + cfg_.lease});
        set_rts(*e, new_rts, now);
        if (req.holds_copy && req.wts && *req.wts == wts_of(*e)) {
          out.push_back(reply(MsgKind::RENEW_REP, *e, req.src, false));
          if (stats_) stats_->renew_success++;
        } else {
          out.push_back(reply(MsgKind::SH_REP, *e, req.src, true));
        }
      } else {
        // Instant exclusive handover: the writer jumps past the lease in
        // logical time, so nobody needs to be invalidated. The reply carries
        // the lease end unextended.
        if (req.holds_copy && req.wts && *req.wts == wts_of(*e)) {
          out.push_back(reply(MsgKind::UPGRADE_REP, *e, req.src, false));
        } else {
          out.push_back(reply(MsgKind::EX_REP, *e, req.src, true));
        }
        e->state = TmState::Exclusive;
        e->owner = req.src;
      }
      return;
    }
    // Exclusive at the manager.
    if (req.src == e->owner) {
      // The owner can only be asking again if its copy was lost before the
      // grant took effect; it has written nothing, so our snapshot stands.
      out.push_back(reply(MsgKind::EX_REP, *e, req.src, true));
      return;
    }
    if (req.kind == MsgKind::SH_REQ) {
      Message wb;
      wb.kind = MsgKind::WB_REQ;
      wb.src = slice_;
      wb.dst = e->owner;
      wb.addr = addr;
      wb.rts = *req.pts + cfg_.lease;
      out.push_back(wb);
    } else {
      out.push_back(flush_req(*e));
    }
    e->transient = TmTransient::AwaitOwnerRep;
    waiting_[addr].push_front(req);  // oldest waiter; see the miss path
  }

  // Table-mode service when cores have no private caches: the manager applies
  // the load/store timestamp rules itself and returns the outcome.
  void serve_uncached(TmEntry& e, const Message& req, std::uint64_t now,
                      std::vector<Message>& out) {
    if (req.kind == MsgKind::SH_REQ) {
      Timestamp pts2 = std::max(*req.pts, wts_of(e));
      set_rts(e, std::max(rts_of(e), pts2), now);
      out.push_back(reply(MsgKind::SH_REP, e, req.src, true));
    } else {
      Timestamp pts2 = std::max(*req.pts, rts_of(e) + 1);
      store_ts(e, pts2, pts2, now);
      e.data = *req.payload;
      e.dirty = true;
      Message rep = reply(MsgKind::EX_REP, e, req.src, false);
      out.push_back(rep);
    }
  }

  void on_owner_rep(const Message& msg, std::uint64_t now,
                    std::vector<Message>& out) {
    TmEntry* e = array_.find(msg.addr);
    assert(e && e->state == TmState::Exclusive &&
           "flush or write-back for a line no core owns");
    if (!e) return;
    if (e->transient == TmTransient::EvictFlush) {
      // A victim's flush: fold its lease into the watermark, write back,
      // free the slot, then complete whatever fill was parked on it.
      mts_ = std::max(mts_, *msg.rts);
      dram_store(msg.addr, *msg.payload, out);
      e->valid = false;
      e->transient = TmTransient::None;
      auto pf = parked_fills_.find(msg.addr);
      assert(pf != parked_fills_.end());
      ParkedFill parked = pf->second;
      parked_fills_.erase(pf);
      if (parked.has_fill) {
        parked_addrs_.erase(parked.addr);
        complete_fill(parked.addr, parked.data, now, out);
      }
      drain(msg.addr, now, out);
      return;
    }
    // Solicited downgrade/flush, or a voluntary eviction by the owner that
    // crossed with (and therefore answers) our forwarded request.
    e->state = TmState::Shared;
    e->owner = 0;
    e->transient = TmTransient::None;
    store_ts(*e, *msg.wts, *msg.rts, now);
    e->data = *msg.payload;
    e->dirty = true;
    array_.touch(*e);
    drain(msg.addr, now, out);
  }

  void complete_fill(std::uint64_t addr, std::uint64_t data, std::uint64_t now,
                     std::vector<Message>& out) {
    auto rank = [](const TmEntry& e) -> std::uint64_t {
      return e.state == TmState::Shared ? 0 : 1;
    };
    auto pinned = [](const TmEntry& e) {
      return e.transient != TmTransient::None;
    };
    TmEntry* slot = array_.fill_slot(addr, rank, pinned);
    assert(slot && "every way of the set is mid-transaction");
    if (slot->valid) {
      if (slot->state == TmState::Shared) {
        evict_shared(*slot, out);
      } else {
        // The victim is owned by a core: fetch it back first and park the
        // fill until the flush lands.
        out.push_back(flush_req(*slot));
        slot->transient = TmTransient::EvictFlush;
        parked_fills_[slot->addr] = ParkedFill{true, addr, data};
        parked_addrs_.insert(addr);
        return;
      }
    }
    slot->valid = true;
    slot->addr = addr;
    slot->state = TmState::Shared;
    slot->transient = TmTransient::None;
    slot->owner = 0;
    slot->data = data;
    slot->dirty = false;
    array_.touch(*slot);
    // Memory carries no timestamps: the watermark stands in for everything
    // ever evicted, so a fresh fill starts at (mts, mts).
    store_ts(*slot, mts_, mts_, now);
    drain(addr, now, out);
  }

  // Shared lines leave silently: their leases simply expire. The watermark
  // keeps later fills above any lease granted on the departed line.
  void evict_shared(TmEntry& e, std::vector<Message>& out) {
    mts_ = std::max(mts_, rts_of(e));
    if (e.dirty) dram_store(e.addr, e.data, out);
    e.valid = false;
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

  Message reply(MsgKind kind, const TmEntry& e, std::uint32_t dst,
                bool with_wts_data) {
    Message m;
    m.kind = kind;
    m.src = slice_;
    m.dst = dst;
    m.addr = e.addr;
    m.rts = rts_of(e);
    if (with_wts_data) {
      m.wts = wts_of(e);
      m.payload = e.data;
    }
    if (kind == MsgKind::EX_REP && cfg_.mode == SimMode::NoPrivateCache) {
      m.wts = wts_of(e);
      m.payload.reset();
    }
    return m;
  }

  Message flush_req(const TmEntry& e) {
    Message m;
    m.kind = MsgKind::FLUSH_REQ;
    m.src = slice_;
    m.dst = e.owner;
    m.addr = e.addr;
    return m;
  }

  void dram_store(std::uint64_t addr, std::uint64_t data,
                  std::vector<Message>& out) {
    Message st;
    st.kind = MsgKind::DRAM_ST_REQ;
    st.src = slice_;
    st.dst = cfg_.mc_node(addr);
    st.addr = addr;
    st.payload = data;
    out.push_back(st);
    if (stats_) stats_->dram_stores++;
  }

  void store_ts(TmEntry& e, Timestamp wts, Timestamp rts, std::uint64_t now) {
    EncodeResult ew = encode_delta(wts, bts_, cfg_.delta_ts_width);
    EncodeResult er = encode_delta(rts, bts_, cfg_.delta_ts_width);
    if (ew.status == EncodeStatus::Overflow || er.status == EncodeStatus::Overflow) {
      bool was_valid = e.valid;
      e.valid = false;  // rewritten wholesale below; exclude from the sweep
      rebase(std::max(wts, rts), now);
      e.valid = was_valid;
      ew = encode_delta(wts, bts_, cfg_.delta_ts_width);
      er = encode_delta(rts, bts_, cfg_.delta_ts_width);
    }
    // Underflow at the manager is absorbed by raising to the base: the
    // manager is the authority on leases, so raising is always safe here.
    if (ew.status == EncodeStatus::Negative) ew = {EncodeStatus::Ok, 0};
    if (er.status == EncodeStatus::Negative) er = {EncodeStatus::Ok, 0};
    assert(ew.status == EncodeStatus::Ok && er.status == EncodeStatus::Ok);
    e.dwts = ew.delta;
    e.drts = er.delta;
  }

  void set_rts(TmEntry& e, Timestamp rts, std::uint64_t now) {
    store_ts(e, wts_of(e), rts, now);
  }

  void rebase(Timestamp must_fit, std::uint64_t now) {
    Timestamp shift = default_rebase_shift(cfg_.delta_ts_width);
    if (must_fit > bts_) {
      Timestamp span = Timestamp{1} << (cfg_.delta_ts_width >= 64
                                            ? 63
                                            : cfg_.delta_ts_width);
      Timestamp over = must_fit - bts_;
      if (over >= span && over - span + 1 > shift) shift = over - span + 1;
    }
    RebaseReport rep;
    rep.shift = shift;
    array_.for_each_valid([&](TmEntry& e) {
      LineClass cls = e.state == TmState::Exclusive ? LineClass::LlcExclusive
                                                    : LineClass::LlcShared;
      LineFate fate = rebase_line(cls, e.dwts, e.drts, shift);
      if (fate == LineFate::Clamped) rep.clamped++;
      assert(fate != LineFate::Invalidated);
    });
    bts_ += shift;
    ++rebases_;
    busy_until_ = std::max(busy_until_, now) + cfg_.l2_rebase_ns;
    if (stats_) {
      stats_->rebases++;
      stats_->rebase_clamped += rep.clamped;
    }
  }

  RunConfig cfg_;
  std::uint32_t slice_;
  SimStats* stats_;
  CacheArray<TmEntry> array_;
  Timestamp bts_ = 0;
  Timestamp mts_ = 0;  // full-width memory watermark for this slice
  std::uint64_t rebases_ = 0;
  std::uint64_t busy_until_ = 0;
  std::map<std::uint64_t, std::deque<Message>> waiting_;
  std::set<std::uint64_t> dram_pending_;
  std::map<std::uint64_t, ParkedFill> parked_fills_;  // keyed by victim addr
  std::set<std::uint64_t> parked_addrs_;
};

}  // namespace tardis

#endif  // TARDIS_TSMAN_HPP
