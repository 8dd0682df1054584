#ifndef TARDIS_TIMESTAMP_HPP
#define TARDIS_TIMESTAMP_HPP

#include <cstdint>

namespace tardis {

// Logical timestamps are 64-bit monotone counters. Caches store them
// compressed as (per-cache base + per-line delta); the wire always carries
// the full 64-bit value.
using Timestamp = std::uint64_t;

enum class EncodeStatus : std::uint8_t { Ok, Overflow, Negative };

struct EncodeResult {
  EncodeStatus status;
  Timestamp delta;  // valid only when status == Ok
};

inline bool delta_fits(Timestamp delta, unsigned width) {
  return width >= 64 || delta < (Timestamp{1} << width);
}

inline EncodeResult encode_delta(Timestamp ts, Timestamp bts, unsigned width) {
  if (ts < bts) return {EncodeStatus::Negative, 0};
  Timestamp d = ts - bts;
  if (!delta_fits(d, width)) return {EncodeStatus::Overflow, 0};
  return {EncodeStatus::Ok, d};
}

inline Timestamp decode_delta(Timestamp bts, Timestamp delta) {
  return bts + delta;
}

inline Timestamp default_rebase_shift(unsigned width) {
  return width >= 64 ? (Timestamp{1} << 63) : (Timestamp{1} << (width - 1));
}

// What a line is, for the purpose of the underflow rules applied when a
// rebase would drive its deltas negative.
enum class LineClass : std::uint8_t {
  LlcShared,      // deltas clamp to 0 (logically re-writes the same data later)
  LlcExclusive,   // timestamps live at the owner; nothing stored here
  PrivShared,     // negative rts: line must be dropped; negative wts alone: clamp
  PrivExclusive,  // deltas clamp to 0
};

enum class LineFate : std::uint8_t { Kept, Clamped, Invalidated };

// Applies one rebase step to a single line's deltas. The caller has already
// decided to advance the cache base by `shift`.
inline LineFate rebase_line(LineClass cls, Timestamp& dwts, Timestamp& drts,
                            Timestamp shift) {
  switch (cls) {
    case LineClass::LlcExclusive:
      return LineFate::Kept;
    case LineClass::LlcShared:
    case LineClass::PrivExclusive: {
      bool clamped = false;
      if (dwts < shift) { dwts = 0; clamped = true; } else { dwts -= shift; }
      if (drts < shift) { drts = 0; clamped = true; } else { drts -= shift; }
      return clamped ? LineFate::Clamped : LineFate::Kept;
    }
    case LineClass::PrivShared:
      // A shared line whose rts would fall below the new base has expired in
      // a way the encoding can no longer express; drop it (still SC-safe, the
      // data simply has to be re-fetched).
      if (drts < shift) return LineFate::Invalidated;
      drts -= shift;
      if (dwts < shift) {
        dwts = 0;  // raising wts toward rts keeps wts <= rts legal
        return LineFate::Clamped;
      }
      dwts -= shift;
      return LineFate::Kept;
  }
  return LineFate::Kept;
}

struct RebaseReport {
  Timestamp shift = 0;
  unsigned clamped = 0;
  unsigned invalidated = 0;
};

}  // namespace tardis

#endif  // TARDIS_TIMESTAMP_HPP
