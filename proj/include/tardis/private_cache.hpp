#ifndef TARDIS_PRIVATE_CACHE_HPP
#define TARDIS_PRIVATE_CACHE_HPP

#include <algorithm>
#include <cassert>
#include <cstdint>
#include <map>
#include <optional>
#include <vector>

#include "tardis/cache_array.hpp"
#include "tardis/config.hpp"
#include "tardis/message.hpp"
#include "tardis/stats.hpp"
#include "tardis/timestamp.hpp"

namespace tardis {

enum class PState : std::uint8_t { Invalid, Shared, Exclusive };

struct PrivateLine {
  bool valid = false;
  std::uint64_t addr = 0;
  std::uint64_t lru = 0;
  PState state = PState::Invalid;
  Timestamp dwts = 0, drts = 0;  // deltas against the cache base
  std::uint64_t data = 0;
  bool modified = false;  // written while exclusive (repeated-write shortcut)
  bool dirty = false;
  // A rebase could not represent this shared line's lease anymore but an
  // outstanding request pins it; it never serves hits until re-leased.
  bool force_expired = false;
  std::uint32_t fill_gen = 0;  // bumped per fill; 0 is reserved (no line)
};

// Read-only decoded view of a line, for the core engine and for tests.
struct LineView {
  PState state = PState::Invalid;
  Timestamp wts = 0, rts = 0;
  std::uint64_t data = 0;
  bool modified = false;
  bool force_expired = false;
  std::uint32_t fill_gen = 0;
};

struct ProbeResult {
  enum class R : std::uint8_t { Hit, Miss, Expired, Blocked } r = R::Miss;
  std::uint64_t value = 0;
  Timestamp wts = 0, rts = 0;
  std::uint32_t fill_gen = 0;
  std::optional<Message> request;
};

struct CommitResult {
  enum class R : std::uint8_t { Ok, Expired, Retry } r = R::Ok;
  Timestamp new_pts = 0;
  std::uint64_t value = 0;
};

struct InstallResult {
  std::vector<Message> out;  // victim flushes
  std::uint32_t gen = 0;     // fill generation of the retained line, 0 if not kept
};

// The per-core L1 of the timestamp protocol: lease checks, renewals, the
// instant write-after-shared jump, and delta-compressed timestamp storage.
// Pure state machine; the simulation layer owns timing and transport.
class TardisL1 {
 public:
  TardisL1(const RunConfig& cfg, std::uint32_t core, SimStats* stats)
      : cfg_(cfg),
        core_(core),
        stats_(stats),
        array_(cfg.l1_sets(), cfg.l1_ways),
        bts_(0) {}

  std::uint32_t slice_of(std::uint64_t addr) const { return addr % cfg_.cores; }

  // --- core-side probes (execution stage) --------------------------------
  ProbeResult probe_load(std::uint64_t addr, Timestamp pts) {
    ProbeResult res;
    PrivateLine* ln = array_.find(addr);
    if (!ln) {
      if (mshr_.count(addr)) { res.r = ProbeResult::R::Blocked; return res; }
      res.r = ProbeResult::R::Miss;
      res.request = request(MsgKind::SH_REQ, addr, pts, 0, false);
      return res;
    }
    array_.touch(*ln);
    res.wts = wts_of(*ln);
    res.rts = rts_of(*ln);
    res.value = ln->data;
    res.fill_gen = ln->fill_gen;
    if (ln->state == PState::Exclusive ||
        (pts <= res.rts && !ln->force_expired)) {
      res.r = ProbeResult::R::Hit;
      return res;
    }
    // Shared and expired: the stale value is exposed for speculation while
    // a renewal races to extend the lease.
    if (mshr_.count(addr)) { res.r = ProbeResult::R::Blocked; return res; }
    res.r = ProbeResult::R::Expired;
    res.request = request(MsgKind::SH_REQ, addr, pts, res.wts, true);
    return res;
  }

  ProbeResult probe_store(std::uint64_t addr) {
    ProbeResult res;
    PrivateLine* ln = array_.find(addr);
    if (ln && ln->state == PState::Exclusive) {
      array_.touch(*ln);
      res.r = ProbeResult::R::Hit;
      res.wts = wts_of(*ln);
      res.rts = rts_of(*ln);
      res.fill_gen = ln->fill_gen;
      return res;
    }
    if (mshr_.count(addr)) { res.r = ProbeResult::R::Blocked; return res; }
    if (ln) array_.touch(*ln);
    res.r = ProbeResult::R::Miss;
    res.request = request(MsgKind::EX_REQ, addr, 0, ln ? wts_of(*ln) : 0,
                          ln != nullptr);
    return res;
  }

  // --- commit stage -------------------------------------------------------
  // A load commits against the current line: same fill generation, and for a
  // Shared line the lease must still cover pts. An Exclusive hit also
  // reserves the line up to the new pts.
  CommitResult commit_load(std::uint64_t addr, std::uint32_t gen, Timestamp pts,
                           std::uint64_t now) {
    CommitResult res;
    PrivateLine* ln = array_.find(addr);
    if (!ln || ln->fill_gen != gen) { res.r = CommitResult::R::Retry; return res; }
    res.value = ln->data;
    if (ln->state == PState::Exclusive) {
      res.new_pts = std::max(pts, wts_of(*ln));
      set_rts(*ln, std::max(res.new_pts, rts_of(*ln)), now);
      res.r = CommitResult::R::Ok;
      return res;
    }
    if (pts > rts_of(*ln) || ln->force_expired) {
      res.r = CommitResult::R::Expired;
      return res;
    }
    res.new_pts = std::max(pts, wts_of(*ln));
    res.r = CommitResult::R::Ok;
    return res;
  }

  CommitResult commit_store(std::uint64_t addr, Timestamp pts, std::uint64_t value,
                            std::uint64_t now) {
    CommitResult res;
    PrivateLine* ln = array_.find(addr);
    if (!ln || ln->state != PState::Exclusive) {
      res.r = CommitResult::R::Retry;
      return res;
    }
    Timestamp ts;
    if (ln->modified && cfg_.private_write_opt) {
      // Repeated private write: stamp at max(pts, rts); pts stops climbing.
      ts = std::max(pts, rts_of(*ln));
    } else {
      ts = std::max(pts, rts_of(*ln) + 1);
    }
    store_ts(*ln, ts, ts, now);
    ln->data = value;
    ln->modified = true;
    ln->dirty = true;
    array_.touch(*ln);
    res.r = CommitResult::R::Ok;
    res.new_pts = ts;
    res.value = value;
    return res;
  }

  // --- replies ------------------------------------------------------------
  InstallResult install_reply(const Message& rep, Timestamp pts, std::uint64_t now) {
    InstallResult res;
    mshr_.erase(rep.addr);
    switch (rep.kind) {
      case MsgKind::RENEW_REP: {
        PrivateLine* ln = array_.find(rep.addr);
        // The line can be gone (replaced or rebased away) by the time the
        // renewal lands; the extension is then moot.
        if (ln && ln->state == PState::Shared) {
          ln->force_expired = false;
          set_rts(*ln, *rep.rts, now);
          if (ln->valid) res.gen = ln->fill_gen;
        }
        return res;
      }
      case MsgKind::UPGRADE_REP: {
        PrivateLine* ln = array_.find(rep.addr);
        assert(ln && ln->state == PState::Shared &&
               "upgrade reply needs the shared copy it was granted for");
        ln->state = PState::Exclusive;
        ln->force_expired = false;
        set_rts(*ln, *rep.rts, now);
        res.gen = ln->fill_gen;
        return res;
      }
      case MsgKind::SH_REP:
      case MsgKind::EX_REP: {
        PrivateLine* ln = array_.find(rep.addr);
        if (!ln) ln = make_room(rep.addr, pts, res.out);
        fill(*ln, rep, now);
        if (ln->valid) res.gen = ln->fill_gen;
        return res;
      }
      default:
        assert(false && "unexpected reply kind at a private cache");
        return res;
    }
  }

  // --- requests forwarded by the timestamp manager ------------------------
  // Write-back request: extend the lease to cover the remote reader, ship
  // the data, and drop to Shared. Returns nothing when the request crossed
  // with this cache's own eviction of the line.
  std::optional<Message> handle_wb_req(const Message& req, std::uint64_t now) {
    PrivateLine* ln = array_.find(req.addr);
    if (!ln || ln->state != PState::Exclusive) {
      note_crossed_request(req.addr);
      return std::nullopt;
    }
    Timestamp new_rts =
        std::max({rts_of(*ln), wts_of(*ln) + cfg_.lease, *req.rts});
    set_rts(*ln, new_rts, now);
    ln->state = PState::Shared;
    ln->modified = false;
    ln->dirty = false;
    Message rep;
    rep.kind = MsgKind::WB_REP;
    rep.src = core_;
    rep.dst = req.src;
    rep.addr = req.addr;
    rep.wts = wts_of(*ln);
    rep.rts = rts_of(*ln);
    rep.payload = ln->data;
    return rep;
  }

  std::optional<Message> handle_flush_req(const Message& req) {
    PrivateLine* ln = array_.find(req.addr);
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
      case MsgKind::WB_REQ:
        return handle_wb_req(req, now);
      case MsgKind::FLUSH_REQ:
        return handle_flush_req(req);
      default:
        assert(false && "not a probe this cache answers");
        return std::nullopt;
    }
  }

  // Explicit eviction (tests; victims use the same rules). Shared lines
  // leave silently; Exclusive lines flush their timestamps and data.
  std::optional<Message> evict(std::uint64_t addr) {
    PrivateLine* ln = array_.find(addr);
    if (!ln) return std::nullopt;
    std::optional<Message> out;
    if (ln->state == PState::Exclusive) {
      out = flush_rep(*ln);
      evict_inflight_[addr]++;
    }
    invalidate(*ln);
    return out;
  }

  // --- inspection ---------------------------------------------------------
  std::optional<LineView> line(std::uint64_t addr) const {
    const PrivateLine* ln = array_.find(addr);
    if (!ln) return std::nullopt;
    LineView v;
    v.state = ln->state;
    v.wts = wts_of(*ln);
    v.rts = rts_of(*ln);
    v.data = ln->data;
    v.modified = ln->modified;
    v.force_expired = ln->force_expired;
    v.fill_gen = ln->fill_gen;
    return v;
  }

  bool mshr_busy(std::uint64_t addr) const { return mshr_.count(addr) != 0; }
  Timestamp bts() const { return bts_; }
  std::uint64_t busy_until() const { return busy_until_; }
  std::uint64_t rebase_count() const { return rebases_; }

 private:
  Timestamp wts_of(const PrivateLine& ln) const { return decode_delta(bts_, ln.dwts); }
  Timestamp rts_of(const PrivateLine& ln) const { return decode_delta(bts_, ln.drts); }

  Message request(MsgKind kind, std::uint64_t addr, Timestamp pts, Timestamp wts,
                  bool holds) {
    Message m;
    m.kind = kind;
    m.src = core_;
    m.dst = slice_of(addr);
    m.addr = addr;
    if (kind == MsgKind::SH_REQ) m.pts = pts;
    m.wts = wts;
    m.holds_copy = holds;
    mshr_[addr] = kind;
    return m;
  }

  Message flush_rep(PrivateLine& ln) {
    Message rep;
    rep.kind = MsgKind::FLUSH_REP;
    rep.src = core_;
    rep.dst = slice_of(ln.addr);
    rep.addr = ln.addr;
    rep.wts = wts_of(ln);
    rep.rts = rts_of(ln);
    rep.payload = ln.data;
    return rep;
  }

  void invalidate(PrivateLine& ln) {
    ln.valid = false;
    ln.state = PState::Invalid;
    ln.modified = false;
    ln.force_expired = false;
  }

  // A WB/FLUSH_REQ found no exclusive line: legal only when our eviction of
  // that line is still in flight toward the manager.
  void note_crossed_request(std::uint64_t addr) {
    auto it = evict_inflight_.find(addr);
    assert(it != evict_inflight_.end() &&
           "forwarded request for a line this cache never flushed");
    if (it != evict_inflight_.end() && --it->second == 0)
      evict_inflight_.erase(it);
  }

  PrivateLine* make_room(std::uint64_t addr, Timestamp pts,
                         std::vector<Message>& out) {
    // Expired shared lines first, then shared, then exclusive; LRU ties.
    auto rank = [this, pts](const PrivateLine& ln) -> std::uint64_t {
      if (ln.state == PState::Shared)
        return (pts > rts_of(ln) || ln.force_expired) ? 0 : 1;
      return 2;
    };
    auto pinned = [this](const PrivateLine& ln) {
      return mshr_.count(ln.addr) != 0;
    };
    PrivateLine* slot = array_.fill_slot(addr, rank, pinned);
    assert(slot && "every way pinned by outstanding requests");
    if (slot->valid) {
      if (slot->state == PState::Exclusive) {
        out.push_back(flush_rep(*slot));
        evict_inflight_[slot->addr]++;
      }
      invalidate(*slot);
    }
    slot->addr = addr;
    return slot;
  }

  void fill(PrivateLine& ln, const Message& rep, std::uint64_t now) {
    ln.valid = true;
    ln.addr = rep.addr;
    ln.state = rep.kind == MsgKind::EX_REP ? PState::Exclusive : PState::Shared;
    ln.data = *rep.payload;
    ln.modified = false;
    ln.dirty = false;
    ln.force_expired = false;
    ln.fill_gen = ++fill_gen_;
    array_.touch(ln);
    store_ts(ln, *rep.wts, *rep.rts, now);
  }

  // Encode a (wts, rts) pair into the line, rebasing on overflow and
  // applying the private-line underflow rules.
  void store_ts(PrivateLine& ln, Timestamp wts, Timestamp rts, std::uint64_t now) {
    EncodeResult ew = encode_delta(wts, bts_, cfg_.delta_ts_width);
    EncodeResult er = encode_delta(rts, bts_, cfg_.delta_ts_width);
    if (ew.status == EncodeStatus::Overflow || er.status == EncodeStatus::Overflow) {
      // The line is rewritten wholesale below; exclude it from the sweep.
      bool was_valid = ln.valid;
      ln.valid = false;
      rebase(std::max(wts, rts), now);
      ln.valid = was_valid;
      ew = encode_delta(wts, bts_, cfg_.delta_ts_width);
      er = encode_delta(rts, bts_, cfg_.delta_ts_width);
    }
    if (er.status == EncodeStatus::Negative) {
      if (ln.state == PState::Shared) {
        // The lease ends before this cache's base; the copy is useless.
        invalidate(ln);
        return;
      }
      er = {EncodeStatus::Ok, 0};  // exclusive: raise to base
    }
    if (ew.status == EncodeStatus::Negative) ew = {EncodeStatus::Ok, 0};
    assert(ew.status == EncodeStatus::Ok && er.status == EncodeStatus::Ok);
    ln.dwts = ew.delta;
    ln.drts = er.delta;
  }

  void set_rts(PrivateLine& ln, Timestamp rts, std::uint64_t now) {
    store_ts(ln, wts_of(ln), rts, now);
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
    array_.for_each_valid([&](PrivateLine& ln) {
      LineClass cls = ln.state == PState::Exclusive ? LineClass::PrivExclusive
                                                    : LineClass::PrivShared;
      LineFate fate = rebase_line(cls, ln.dwts, ln.drts, shift);
      if (fate == LineFate::Clamped) rep.clamped++;
      if (fate == LineFate::Invalidated) {
        if (mshr_.count(ln.addr)) {
          // An outstanding upgrade or renewal pins the line: keep the data
          // but never serve hits from it again until a fresh lease lands.
          ln.dwts = ln.drts = 0;
          ln.force_expired = true;
          rep.clamped++;
        } else {
          rep.invalidated++;
          invalidate(ln);
        }
      }
    });
    bts_ += shift;
    ++rebases_;
    busy_until_ = std::max(busy_until_, now) + cfg_.l1_rebase_ns;
    if (stats_) {
      stats_->rebases++;
      stats_->rebase_clamped += rep.clamped;
      stats_->rebase_invalidated += rep.invalidated;
    }
  }

  RunConfig cfg_;
  std::uint32_t core_;
  SimStats* stats_;
  CacheArray<PrivateLine> array_;
  Timestamp bts_;
  std::uint32_t fill_gen_ = 0;
  std::uint64_t rebases_ = 0;
  std::uint64_t busy_until_ = 0;
  std::map<std::uint64_t, MsgKind> mshr_;
  std::map<std::uint64_t, unsigned> evict_inflight_;
};

}  // namespace tardis

#endif  // TARDIS_PRIVATE_CACHE_HPP
