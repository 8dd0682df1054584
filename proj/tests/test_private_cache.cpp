#include <catch2/catch_amalgamated.hpp>

#include "tardis/private_cache.hpp"

using namespace tardis;

namespace {

RunConfig base_cfg() {
  RunConfig cfg;
  cfg.cores = 64;
  cfg.lease = 10;
  cfg.delta_ts_width = 20;
  return cfg;
}

// One set, two ways: every address collides, evictions are forced.
RunConfig tiny_cfg() {
  RunConfig cfg = base_cfg();
  cfg.line_bytes = 512;
  cfg.l1_ways = 2;
  cfg.l1_kb = 1;
  return cfg;
}

Message reply(MsgKind kind, std::uint64_t addr, Timestamp wts, Timestamp rts,
              std::uint64_t data, std::uint32_t dst = 0) {
  Message m;
  m.kind = kind;
  m.src = addr % 64;
  m.dst = dst;
  m.addr = addr;
  if (kind != MsgKind::UPGRADE_REP && kind != MsgKind::RENEW_REP) {
    m.wts = wts;
    m.payload = data;
  }
  m.rts = rts;
  return m;
}

void check_ts_order(const TardisL1& l1, std::uint64_t addr) {
  auto v = l1.line(addr);
  REQUIRE(v.has_value());
  REQUIRE(v->wts <= v->rts);
}

}  // namespace

TEST_CASE("cold load misses and emits a share request with no copy held") {
  RunConfig cfg = base_cfg();
  TardisL1 l1(cfg, /*core=*/2, nullptr);

  ProbeResult pr = l1.probe_load(70, /*pts=*/4);
  REQUIRE(pr.r == ProbeResult::R::Miss);
  REQUIRE(pr.request.has_value());
  const Message& req = *pr.request;
  CHECK(req.kind == MsgKind::SH_REQ);
  CHECK(req.src == 2);
  CHECK(req.dst == 70 % 64);  // home slice by address interleaving
  CHECK(req.addr == 70);
  REQUIRE(req.pts.has_value());
  CHECK(*req.pts == 4);
  REQUIRE(req.wts.has_value());
  CHECK(*req.wts == 0);
  CHECK_FALSE(req.holds_copy);
  CHECK(validate(req, SchemaProfile::Tardis).ok);

  // The miss parks in the MSHR: further probes to the line stall.
  CHECK(l1.mshr_busy(70));
  CHECK(l1.probe_load(70, 4).r == ProbeResult::R::Blocked);
  CHECK(l1.probe_store(70).r == ProbeResult::R::Blocked);
}

TEST_CASE("share reply installs a leased copy that serves covered loads") {
  RunConfig cfg = base_cfg();
  TardisL1 l1(cfg, 0, nullptr);
  (void)l1.probe_load(5, 0);

  InstallResult ins = l1.install_reply(reply(MsgKind::SH_REP, 5, 3, 13, 42), 0, 0);
  REQUIRE(ins.gen == 1);
  REQUIRE(ins.out.empty());
  CHECK_FALSE(l1.mshr_busy(5));

  auto v = l1.line(5);
  REQUIRE(v.has_value());
  CHECK(v->state == PState::Shared);
  CHECK(v->wts == 3);
  CHECK(v->rts == 13);
  CHECK(v->data == 42);
  CHECK_FALSE(v->modified);

  // pts within the lease: hit, and the commit bumps pts to at least wts.
  ProbeResult pr = l1.probe_load(5, 5);
  REQUIRE(pr.r == ProbeResult::R::Hit);
  CHECK(pr.value == 42);
  CHECK(pr.fill_gen == 1);

  CommitResult cr = l1.commit_load(5, 1, 5, 0);
  REQUIRE(cr.r == CommitResult::R::Ok);
  CHECK(cr.value == 42);
  CHECK(cr.new_pts == 5);

  // pts below wts: the commit raises it to the line's write timestamp.
  cr = l1.commit_load(5, 1, 1, 0);
  REQUIRE(cr.r == CommitResult::R::Ok);
  CHECK(cr.new_pts == 3);

  // Wrong fill generation: the sampled line is gone, retry from scratch.
  CHECK(l1.commit_load(5, 7, 5, 0).r == CommitResult::R::Retry);
  check_ts_order(l1, 5);
}

TEST_CASE("expired shared load exposes the stale value and asks to renew") {
  RunConfig cfg = base_cfg();
  TardisL1 l1(cfg, 1, nullptr);
  (void)l1.probe_load(5, 0);
  (void)l1.install_reply(reply(MsgKind::SH_REP, 5, 3, 13, 42), 0, 0);

  ProbeResult pr = l1.probe_load(5, 20);
  REQUIRE(pr.r == ProbeResult::R::Expired);
  CHECK(pr.value == 42);  // stale sample for speculation
  CHECK(pr.wts == 3);
  CHECK(pr.rts == 13);
  REQUIRE(pr.request.has_value());
  CHECK(pr.request->kind == MsgKind::SH_REQ);
  REQUIRE(pr.request->wts.has_value());
  CHECK(*pr.request->wts == 3);
  CHECK(pr.request->holds_copy);
  REQUIRE(pr.request->pts.has_value());
  CHECK(*pr.request->pts == 20);

  // While the renewal is outstanding the line cannot be re-probed.
  CHECK(l1.probe_load(5, 20).r == ProbeResult::R::Blocked);
  // And a commit beyond the lease fails.
  CHECK(l1.commit_load(5, 1, 20, 0).r == CommitResult::R::Expired);

  // Timestamp-only renewal: same generation, extended lease, same data.
  InstallResult ins = l1.install_reply(reply(MsgKind::RENEW_REP, 5, 0, 30, 0), 20, 1);
  CHECK(ins.gen == 1);
  auto v = l1.line(5);
  REQUIRE(v.has_value());
  CHECK(v->rts == 30);
  CHECK(v->wts == 3);
  CHECK(v->data == 42);
  CHECK(l1.probe_load(5, 20).r == ProbeResult::R::Hit);
  CHECK(l1.commit_load(5, 1, 20, 1).r == CommitResult::R::Ok);
  check_ts_order(l1, 5);
}

TEST_CASE("renewal landing after the copy vanished is dropped harmlessly") {
  RunConfig cfg = base_cfg();
  TardisL1 l1(cfg, 0, nullptr);
  (void)l1.probe_load(5, 0);
  (void)l1.install_reply(reply(MsgKind::SH_REP, 5, 3, 13, 42), 0, 0);
  (void)l1.probe_load(5, 20);        // renewal now outstanding
  (void)l1.evict(5);                  // shared: silent drop
  InstallResult ins = l1.install_reply(reply(MsgKind::RENEW_REP, 5, 0, 30, 0), 20, 0);
  CHECK(ins.gen == 0);  // nothing was retained
  CHECK_FALSE(l1.line(5).has_value());
  CHECK_FALSE(l1.mshr_busy(5));
}

TEST_CASE("store miss asks for exclusive, reporting any copy it still holds") {
  RunConfig cfg = base_cfg();
  TardisL1 l1(cfg, 0, nullptr);

  SECTION("no copy at all") {
    ProbeResult pr = l1.probe_store(9);
    REQUIRE(pr.r == ProbeResult::R::Miss);
    REQUIRE(pr.request.has_value());
    CHECK(pr.request->kind == MsgKind::EX_REQ);
    REQUIRE(pr.request->wts.has_value());
    CHECK(*pr.request->wts == 0);
    CHECK_FALSE(pr.request->holds_copy);
    CHECK_FALSE(pr.request->pts.has_value());
    CHECK(validate(*pr.request, SchemaProfile::Tardis).ok);
  }

  SECTION("shared copy present: upgrade path advertises the held version") {
    (void)l1.probe_load(9, 0);
    (void)l1.install_reply(reply(MsgKind::SH_REP, 9, 7, 17, 5), 0, 0);
    ProbeResult pr = l1.probe_store(9);
    REQUIRE(pr.r == ProbeResult::R::Miss);
    REQUIRE(pr.request.has_value());
    CHECK(pr.request->kind == MsgKind::EX_REQ);
    CHECK(*pr.request->wts == 7);
    CHECK(pr.request->holds_copy);
  }
}

TEST_CASE("exclusive reply fills the line and the store stamps past the lease") {
  RunConfig cfg = base_cfg();
  TardisL1 l1(cfg, 0, nullptr);
  (void)l1.probe_store(9);
  InstallResult ins = l1.install_reply(reply(MsgKind::EX_REP, 9, 3, 13, 42), 0, 0);
  REQUIRE(ins.gen == 1);
  auto v = l1.line(9);
  REQUIRE(v.has_value());
  CHECK(v->state == PState::Exclusive);

  // Store at pts=2 against rts=13: the write lands at rts+1 = 14.
  CommitResult cr = l1.commit_store(9, 2, 77, 0);
  REQUIRE(cr.r == CommitResult::R::Ok);
  CHECK(cr.new_pts == 14);
  CHECK(cr.value == 77);
  v = l1.line(9);
  CHECK(v->wts == 14);
  CHECK(v->rts == 14);
  CHECK(v->data == 77);
  CHECK(v->modified);

  // Exclusive hits ignore leases entirely, even for huge pts.
  ProbeResult pr = l1.probe_load(9, 1'000'000);
  CHECK(pr.r == ProbeResult::R::Hit);
  // A committed load on an exclusive line reserves it up to the new pts.
  cr = l1.commit_load(9, 1, 1'000'000, 0);
  REQUIRE(cr.r == CommitResult::R::Ok);
  CHECK(cr.new_pts == 1'000'000);
  CHECK(l1.line(9)->rts == 1'000'000);
  check_ts_order(l1, 9);
}

TEST_CASE("repeated private writes reuse the timestamp when the shortcut is on") {
  RunConfig cfg = base_cfg();

  SECTION("shortcut on: pts stops climbing after the first write") {
    cfg.private_write_opt = true;
    TardisL1 l1(cfg, 0, nullptr);
    (void)l1.probe_store(9);
    (void)l1.install_reply(reply(MsgKind::EX_REP, 9, 0, 0, 0), 0, 0);
    CommitResult first = l1.commit_store(9, 0, 1, 0);
    REQUIRE(first.new_pts == 1);
    CommitResult second = l1.commit_store(9, first.new_pts, 2, 0);
    CHECK(second.new_pts == 1);  // max(pts, rts), not rts + 1
    CommitResult third = l1.commit_store(9, second.new_pts, 3, 0);
    CHECK(third.new_pts == 1);
    CHECK(l1.line(9)->wts == 1);
    CHECK(l1.line(9)->data == 3);
  }

  SECTION("shortcut off: every write advances past the line's rts") {
    cfg.private_write_opt = false;
    TardisL1 l1(cfg, 0, nullptr);
    (void)l1.probe_store(9);
    (void)l1.install_reply(reply(MsgKind::EX_REP, 9, 0, 0, 0), 0, 0);
    CommitResult first = l1.commit_store(9, 0, 1, 0);
    REQUIRE(first.new_pts == 1);
    CommitResult second = l1.commit_store(9, first.new_pts, 2, 0);
    CHECK(second.new_pts == 2);
    CommitResult third = l1.commit_store(9, second.new_pts, 3, 0);
    CHECK(third.new_pts == 3);
  }
}

TEST_CASE("store commit without exclusive ownership retries") {
  RunConfig cfg = base_cfg();
  TardisL1 l1(cfg, 0, nullptr);
  CHECK(l1.commit_store(9, 0, 1, 0).r == CommitResult::R::Retry);
  (void)l1.probe_load(9, 0);
  (void)l1.install_reply(reply(MsgKind::SH_REP, 9, 0, 10, 0), 0, 0);
  CHECK(l1.commit_store(9, 0, 1, 0).r == CommitResult::R::Retry);
}

TEST_CASE("upgrade reply promotes the shared copy in place") {
  RunConfig cfg = base_cfg();
  TardisL1 l1(cfg, 0, nullptr);
  (void)l1.probe_load(9, 0);
  (void)l1.install_reply(reply(MsgKind::SH_REP, 9, 7, 17, 5), 0, 0);
  (void)l1.probe_store(9);

  InstallResult ins = l1.install_reply(reply(MsgKind::UPGRADE_REP, 9, 0, 17, 0), 0, 0);
  CHECK(ins.gen == 1);  // same copy, no refill
  auto v = l1.line(9);
  REQUIRE(v.has_value());
  CHECK(v->state == PState::Exclusive);
  CHECK(v->wts == 7);
  CHECK(v->rts == 17);
  CHECK(v->data == 5);

  CommitResult cr = l1.commit_store(9, 0, 8, 0);
  CHECK(cr.new_pts == 18);  // jumps the write past the granted lease
  check_ts_order(l1, 9);
}

TEST_CASE("write-back request extends the lease and drops to shared") {
  RunConfig cfg = base_cfg();  // lease = 10
  TardisL1 l1(cfg, 4, nullptr);
  (void)l1.probe_store(9);
  (void)l1.install_reply(reply(MsgKind::EX_REP, 9, 5, 5, 0), 0, 0);
  (void)l1.commit_store(9, 0, 1, 0);  // wts = rts = 6

  Message wb;
  wb.kind = MsgKind::WB_REQ;
  wb.src = 9 % 64;
  wb.dst = 4;
  wb.addr = 9;
  wb.rts = 18;
  auto rep = l1.handle_wb_req(wb, 0);
  REQUIRE(rep.has_value());
  CHECK(rep->kind == MsgKind::WB_REP);
  CHECK(rep->dst == 9 % 64);
  REQUIRE(rep->wts.has_value());
  CHECK(*rep->wts == 6);
  // max(own rts=6, wts+lease=16, requested 18) = 18
  REQUIRE(rep->rts.has_value());
  CHECK(*rep->rts == 18);
  REQUIRE(rep->payload.has_value());
  CHECK(*rep->payload == 1);
  CHECK(validate(*rep, SchemaProfile::Tardis).ok);

  auto v = l1.line(9);
  REQUIRE(v.has_value());
  CHECK(v->state == PState::Shared);
  CHECK(v->rts == 18);
  CHECK(v->data == 1);
  CHECK_FALSE(v->modified);

  SECTION("the local lease term dominates when the request asks for less") {
    Message wb2 = wb;
    wb2.rts = 3;
    // Line is Shared now; re-acquire exclusivity first.
    (void)l1.probe_store(9);
    (void)l1.install_reply(reply(MsgKind::UPGRADE_REP, 9, 0, 18, 0), 0, 0);
    (void)l1.commit_store(9, 18, 2, 0);  // wts = rts = 19
    auto rep2 = l1.handle_wb_req(wb2, 0);
    REQUIRE(rep2.has_value());
    CHECK(*rep2->rts == 29);  // wts + lease = 19 + 10
  }
}

TEST_CASE("flush request surrenders the line with its timestamps") {
  RunConfig cfg = base_cfg();
  TardisL1 l1(cfg, 0, nullptr);
  (void)l1.probe_store(9);
  (void)l1.install_reply(reply(MsgKind::EX_REP, 9, 5, 5, 0), 0, 0);
  (void)l1.commit_store(9, 0, 33, 0);

  Message fl;
  fl.kind = MsgKind::FLUSH_REQ;
  fl.src = 9 % 64;
  fl.dst = 0;
  fl.addr = 9;
  auto rep = l1.handle_probe(fl, 0);
  REQUIRE(rep.has_value());
  CHECK(rep->kind == MsgKind::FLUSH_REP);
  CHECK(*rep->wts == 6);
  CHECK(*rep->rts == 6);
  CHECK(*rep->payload == 33);
  CHECK_FALSE(l1.line(9).has_value());
}

TEST_CASE("forwarded requests that cross an eviction in flight are dropped") {
  RunConfig cfg = base_cfg();
  TardisL1 l1(cfg, 0, nullptr);
  (void)l1.probe_store(9);
  (void)l1.install_reply(reply(MsgKind::EX_REP, 9, 5, 5, 0), 0, 0);

  auto flushed = l1.evict(9);
  REQUIRE(flushed.has_value());
  CHECK(flushed->kind == MsgKind::FLUSH_REP);
  CHECK_FALSE(l1.line(9).has_value());

  // The manager's forward raced with our flush: answer nothing.
  Message wb;
  wb.kind = MsgKind::WB_REQ;
  wb.addr = 9;
  wb.rts = 50;
  CHECK_FALSE(l1.handle_wb_req(wb, 0).has_value());
}

TEST_CASE("shared lines evict silently") {
  RunConfig cfg = base_cfg();
  TardisL1 l1(cfg, 0, nullptr);
  (void)l1.probe_load(5, 0);
  (void)l1.install_reply(reply(MsgKind::SH_REP, 5, 3, 13, 42), 0, 0);
  CHECK_FALSE(l1.evict(5).has_value());
  CHECK_FALSE(l1.line(5).has_value());
}

TEST_CASE("victim choice prefers expired shared, then shared, then exclusive") {
  RunConfig cfg = tiny_cfg();
  TardisL1 l1(cfg, 0, nullptr);

  SECTION("expired shared goes before a live shared line") {
    (void)l1.probe_load(1, 0);
    (void)l1.install_reply(reply(MsgKind::SH_REP, 1, 0, 4, 10), 0, 0);   // expires at 4
    (void)l1.probe_load(2, 0);
    (void)l1.install_reply(reply(MsgKind::SH_REP, 2, 0, 50, 20), 0, 0);  // live long
    (void)l1.probe_load(3, 8);  // pts 8: line 1 is past its lease
    InstallResult ins = l1.install_reply(reply(MsgKind::SH_REP, 3, 8, 18, 30), 8, 0);
    CHECK(ins.out.empty());  // shared victims leave silently
    CHECK_FALSE(l1.line(1).has_value());
    CHECK(l1.line(2).has_value());
    CHECK(l1.line(3).has_value());
  }

  SECTION("live shared goes before exclusive; LRU breaks ties") {
    (void)l1.probe_store(1);
    (void)l1.install_reply(reply(MsgKind::EX_REP, 1, 0, 0, 10), 0, 0);
    (void)l1.probe_load(2, 0);
    (void)l1.install_reply(reply(MsgKind::SH_REP, 2, 0, 50, 20), 0, 0);
    (void)l1.probe_load(3, 0);
    InstallResult ins = l1.install_reply(reply(MsgKind::SH_REP, 3, 0, 50, 30), 0, 0);
    CHECK(ins.out.empty());
    CHECK(l1.line(1).has_value());       // exclusive survives
    CHECK_FALSE(l1.line(2).has_value());  // shared victim
    CHECK(l1.line(3).has_value());
  }

  SECTION("an exclusive victim is flushed out with the fill") {
    (void)l1.probe_store(1);
    (void)l1.install_reply(reply(MsgKind::EX_REP, 1, 2, 2, 10), 0, 0);
    (void)l1.commit_store(1, 0, 11, 0);  // wts = rts = 3, data 11
    (void)l1.probe_store(2);
    (void)l1.install_reply(reply(MsgKind::EX_REP, 2, 0, 0, 20), 0, 0);
    (void)l1.probe_load(3, 0);
    InstallResult ins = l1.install_reply(reply(MsgKind::SH_REP, 3, 0, 50, 30), 0, 0);
    REQUIRE(ins.out.size() == 1);
    CHECK(ins.out[0].kind == MsgKind::FLUSH_REP);
    CHECK(ins.out[0].addr == 1);  // older exclusive is the LRU victim
    CHECK(*ins.out[0].payload == 11);
    CHECK(*ins.out[0].wts == 3);
    // A forward chasing the flushed line is recognized as crossed.
    Message fl;
    fl.kind = MsgKind::FLUSH_REQ;
    fl.addr = 1;
    CHECK_FALSE(l1.handle_flush_req(fl).has_value());
  }

  SECTION("recently touched lines win LRU ties") {
    (void)l1.probe_load(1, 0);
    (void)l1.install_reply(reply(MsgKind::SH_REP, 1, 0, 50, 10), 0, 0);
    (void)l1.probe_load(2, 0);
    (void)l1.install_reply(reply(MsgKind::SH_REP, 2, 0, 50, 20), 0, 0);
    (void)l1.probe_load(1, 3);  // refresh line 1
    (void)l1.probe_load(3, 0);
    (void)l1.install_reply(reply(MsgKind::SH_REP, 3, 0, 50, 30), 0, 0);
    CHECK(l1.line(1).has_value());
    CHECK_FALSE(l1.line(2).has_value());
  }
}

TEST_CASE("timestamp overflow rebases the cache and sweeps stale leases") {
  RunConfig cfg = base_cfg();
  cfg.delta_ts_width = 8;  // window of 256, shift of 128
  SimStats stats;
  TardisL1 l1(cfg, 0, &stats);

  (void)l1.probe_load(5, 0);
  (void)l1.install_reply(reply(MsgKind::SH_REP, 5, 0, 5, 42), 0, 0);
  (void)l1.probe_store(9);
  (void)l1.install_reply(reply(MsgKind::EX_REP, 9, 0, 0, 0), 0, 0);

  // Stamping 300 does not fit the 8-bit window above base 0: rebase first.
  CommitResult cr = l1.commit_store(9, 300, 1, /*now=*/50);
  REQUIRE(cr.r == CommitResult::R::Ok);
  CHECK(cr.new_pts == 300);
  CHECK(l1.bts() == 128);
  CHECK(l1.rebase_count() == 1);
  CHECK(l1.busy_until() == 50 + cfg.l1_rebase_ns);
  CHECK(stats.rebases == 1);

  // The stamped line survives with its full value.
  auto v = l1.line(9);
  REQUIRE(v.has_value());
  CHECK(v->wts == 300);
  CHECK(v->rts == 300);

  // The shared line's lease ended before the new base: swept away.
  CHECK_FALSE(l1.line(5).has_value());
  CHECK(stats.rebase_invalidated == 1);
}

TEST_CASE("a pinned shared line survives the sweep but never serves hits") {
  RunConfig cfg = base_cfg();
  cfg.delta_ts_width = 8;
  SimStats stats;
  TardisL1 l1(cfg, 0, &stats);

  (void)l1.probe_load(5, 0);
  (void)l1.install_reply(reply(MsgKind::SH_REP, 5, 0, 5, 42), 0, 0);
  ProbeResult pr = l1.probe_load(5, 8);  // expired: renewal goes out
  REQUIRE(pr.r == ProbeResult::R::Expired);
  REQUIRE(l1.mshr_busy(5));

  (void)l1.probe_store(9);
  (void)l1.install_reply(reply(MsgKind::EX_REP, 9, 0, 0, 0), 0, 0);
  (void)l1.commit_store(9, 300, 1, 0);  // forces the rebase

  // Pinned by the outstanding renewal: data retained, hits refused.
  auto v = l1.line(5);
  REQUIRE(v.has_value());
  CHECK(v->force_expired);
  CHECK(v->data == 42);
  CHECK(stats.rebase_clamped >= 1);
  CHECK(l1.probe_load(5, 0).r == ProbeResult::R::Blocked);  // mshr still set
  CHECK(l1.commit_load(5, v->fill_gen, 0, 0).r == CommitResult::R::Expired);

  // The renewal lands with a lease the new base can represent: line revives.
  (void)l1.install_reply(reply(MsgKind::RENEW_REP, 5, 0, 300, 0), 8, 0);
  v = l1.line(5);
  REQUIRE(v.has_value());
  CHECK_FALSE(v->force_expired);
  CHECK(v->rts == 300);
  CHECK(l1.probe_load(5, 200).r == ProbeResult::R::Hit);
  CHECK(l1.line(5)->data == 42);
}

TEST_CASE("refill replaces the line in place with a fresh generation") {
  RunConfig cfg = base_cfg();
  TardisL1 l1(cfg, 0, nullptr);
  (void)l1.probe_load(5, 0);
  InstallResult a = l1.install_reply(reply(MsgKind::SH_REP, 5, 0, 5, 1), 0, 0);
  (void)l1.probe_load(5, 9);
  InstallResult b = l1.install_reply(reply(MsgKind::SH_REP, 5, 6, 19, 2), 9, 0);
  CHECK(a.gen == 1);
  CHECK(b.gen == 2);
  auto v = l1.line(5);
  CHECK(v->data == 2);
  CHECK(v->wts == 6);
  CHECK(v->fill_gen == 2);
}
