#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "tardis/timestamp.hpp"

using namespace tardis;

TEST_CASE("delta encoding round-trips values inside the window") {
  auto r = encode_delta(11, 0, 20);
  REQUIRE(r.status == EncodeStatus::Ok);
  REQUIRE(r.delta == 11);
  REQUIRE(decode_delta(0, r.delta) == 11);

  r = encode_delta(0, 0, 20);
  REQUIRE(r.status == EncodeStatus::Ok);
  REQUIRE(r.delta == 0);

  r = encode_delta(1'000'000, 999'000, 20);
  REQUIRE(r.status == EncodeStatus::Ok);
  REQUIRE(decode_delta(999'000, r.delta) == 1'000'000);
}

TEST_CASE("encoding boundaries at the window edge") {
  const Timestamp top = Timestamp{1} << 20;
  REQUIRE(encode_delta(top - 1, 0, 20).status == EncodeStatus::Ok);
  REQUIRE(encode_delta(top, 0, 20).status == EncodeStatus::Overflow);
  REQUIRE(encode_delta(5, 6, 20).status == EncodeStatus::Negative);
  // Width 64 never overflows.
  REQUIRE(encode_delta(~Timestamp{0}, 0, 64).status == EncodeStatus::Ok);
}

TEST_CASE("default rebase shift is half the window") {
  REQUIRE(default_rebase_shift(8) == 128);
  REQUIRE(default_rebase_shift(20) == (Timestamp{1} << 19));
  REQUIRE(default_rebase_shift(64) == (Timestamp{1} << 63));
}

TEST_CASE("rebase keeps, clamps, or drops lines by class") {
  // Both deltas stay expressible: plain subtraction.
  Timestamp dwts = 10, drts = 12;
  REQUIRE(rebase_line(LineClass::PrivShared, dwts, drts, 4) == LineFate::Kept);
  REQUIRE(dwts == 6);
  REQUIRE(drts == 8);

  // A shared private line whose rts falls under the new base must go: keeping
  // it with a made-up rts would let stale reads slip past the lease check.
  dwts = 1;
  drts = 2;
  REQUIRE(rebase_line(LineClass::PrivShared, dwts, drts, 4) ==
          LineFate::Invalidated);

  // Only wts underflows: clamping wts up toward the base is harmless
  // (wts <= rts still holds and hits compare pts against rts only).
  dwts = 2;
  drts = 9;
  REQUIRE(rebase_line(LineClass::PrivShared, dwts, drts, 4) == LineFate::Clamped);
  REQUIRE(dwts == 0);
  REQUIRE(drts == 5);

  // The home slice owns the authoritative copy; clamping both is safe there.
  dwts = 1;
  drts = 2;
  REQUIRE(rebase_line(LineClass::LlcShared, dwts, drts, 4) == LineFate::Clamped);
  REQUIRE(dwts == 0);
  REQUIRE(drts == 0);

  // Exclusive-at-owner: the slice entry carries no live timestamps.
  dwts = 1;
  drts = 1;
  REQUIRE(rebase_line(LineClass::LlcExclusive, dwts, drts, 4) == LineFate::Kept);
  REQUIRE(dwts == 1);

  // A private exclusive line clamps like the slice's shared entry.
  dwts = 3;
  drts = 3;
  REQUIRE(rebase_line(LineClass::PrivExclusive, dwts, drts, 8) ==
          LineFate::Clamped);
  REQUIRE(dwts == 0);
  REQUIRE(drts == 0);
}

TEST_CASE("rebased values never exceed their shadow 64-bit copies") {
  // Property: decode(bts + shift, rebased delta) <= original value, and a
  // Kept line decodes to exactly the original value.
  std::mt19937_64 rng(42);
  for (int iter = 0; iter < 2000; ++iter) {
    const unsigned width = 4 + rng() % 17;
    const Timestamp window = Timestamp{1} << width;
    Timestamp bts = rng() % 1000;
    Timestamp wts_full = bts + rng() % window;
    Timestamp rts_full = wts_full + rng() % (window / 2);
    if (rts_full - bts >= window) rts_full = bts + window - 1;
    Timestamp dwts = wts_full - bts;
    Timestamp drts = rts_full - bts;
    Timestamp shift = 1 + rng() % window;
    auto cls = static_cast<LineClass>(rng() % 4);

    LineFate fate = rebase_line(cls, dwts, drts, shift);
    if (fate == LineFate::Invalidated || cls == LineClass::LlcExclusive) continue;
    Timestamp nbts = bts + shift;
    REQUIRE(decode_delta(nbts, dwts) >= nbts);
    if (fate == LineFate::Kept) {
      REQUIRE(decode_delta(nbts, dwts) == wts_full);
      REQUIRE(decode_delta(nbts, drts) == rts_full);
    } else {
      // Clamped deltas only ever move a timestamp toward the new base.
      REQUIRE(decode_delta(nbts, dwts) <= std::max(wts_full, nbts));
      REQUIRE(decode_delta(nbts, drts) <= std::max(rts_full, nbts));
    }
    REQUIRE(dwts <= drts);
  }
}
