#ifndef TARDIS_MESSAGE_HPP
#define TARDIS_MESSAGE_HPP

#include <cstdint>
#include <optional>

#include "tardis/timestamp.hpp"

namespace tardis {

// Coherence message vocabulary. The first thirteen kinds are the timestamp
// protocol's complete vocabulary; note there is no invalidation in it. The
// last three exist only for the MSI directory baseline.
enum class MsgKind : std::uint8_t {
  SH_REQ,
  EX_REQ,
  FLUSH_REQ,
  WB_REQ,
  SH_REP,
  EX_REP,
  UPGRADE_REP,
  RENEW_REP,
  FLUSH_REP,
  WB_REP,
  DRAM_ST_REQ,
  DRAM_LD_REQ,
  DRAM_LD_REP,
  INV_REQ,       // MSI only
  INV_ACK,       // MSI only
  EVICT_NOTIFY,  // MSI only: non-silent eviction of a Shared private line
};

constexpr unsigned kNumMsgKinds = 16;

inline const char* to_string(MsgKind k) {
  switch (k) {
    case MsgKind::SH_REQ:       return "SH_REQ";
    case MsgKind::EX_REQ:       return "EX_REQ";
    case MsgKind::FLUSH_REQ:    return "FLUSH_REQ";
    case MsgKind::WB_REQ:       return "WB_REQ";
    case MsgKind::SH_REP:       return "SH_REP";
    case MsgKind::EX_REP:       return "EX_REP";
    case MsgKind::UPGRADE_REP:  return "UPGRADE_REP";
    case MsgKind::RENEW_REP:    return "RENEW_REP";
    case MsgKind::FLUSH_REP:    return "FLUSH_REP";
    case MsgKind::WB_REP:       return "WB_REP";
    case MsgKind::DRAM_ST_REQ:  return "DRAM_ST_REQ";
    case MsgKind::DRAM_LD_REQ:  return "DRAM_LD_REQ";
    case MsgKind::DRAM_LD_REP:  return "DRAM_LD_REP";
    case MsgKind::INV_REQ:      return "INV_REQ";
    case MsgKind::INV_ACK:      return "INV_ACK";
    case MsgKind::EVICT_NOTIFY: return "EVICT_NOTIFY";
  }
  return "?";
}

inline bool is_tardis_kind(MsgKind k) {
  return static_cast<unsigned>(k) <= static_cast<unsigned>(MsgKind::DRAM_LD_REP);
}

struct Message {
  MsgKind kind = MsgKind::SH_REQ;
  std::uint32_t src = 0;  // node id
  std::uint32_t dst = 0;  // node id
  std::uint64_t addr = 0; // cacheline address

  std::optional<Timestamp> pts;
  std::optional<Timestamp> rts;
  std::optional<Timestamp> wts;
  std::optional<std::uint64_t> payload;  // one 64-byte block, modeled as a word

  // Header metadata: the requester holds a valid (possibly expired) copy of
  // the line, so a timestamp-only reply is usable. One bit of the header
  // budget; not a timestamp field.
  bool holds_copy = false;
};

// Which schema the run validates against. The full timestamp protocol is the
// strict one; the no-private-cache mode lets EX_REQ carry the core's pts
// (the manager applies the store rule itself); MSI messages carry no
// timestamps at all.
enum class SchemaProfile : std::uint8_t { Tardis, NoPrivateCache, Msi };

struct SchemaCheck {
  bool ok;
  const char* field;  // offending field name when !ok
};

namespace detail {
enum FieldRule : std::uint8_t { FA = 0, FR = 1, FO = 2 };  // absent/required/optional

struct KindSchema {
  FieldRule pts, rts, wts, data;
  bool allowed;
};

inline KindSchema schema_for(MsgKind k, SchemaProfile p) {
  if (p == SchemaProfile::Msi) {
    switch (k) {
      case MsgKind::SH_REQ:       return {FA, FA, FA, FA, true};
      case MsgKind::EX_REQ:       return {FA, FA, FA, FA, true};
      case MsgKind::FLUSH_REQ:    return {FA, FA, FA, FA, true};
      case MsgKind::WB_REQ:       return {FA, FA, FA, FA, true};
      case MsgKind::SH_REP:       return {FA, FA, FA, FR, true};
      case MsgKind::EX_REP:       return {FA, FA, FA, FO, true};  // no data on upgrade
      case MsgKind::FLUSH_REP:    return {FA, FA, FA, FR, true};
      case MsgKind::WB_REP:       return {FA, FA, FA, FR, true};
      case MsgKind::DRAM_ST_REQ:  return {FA, FA, FA, FR, true};
      case MsgKind::DRAM_LD_REQ:  return {FA, FA, FA, FA, true};
      case MsgKind::DRAM_LD_REP:  return {FA, FA, FA, FR, true};
      case MsgKind::INV_REQ:      return {FA, FA, FA, FA, true};
      case MsgKind::INV_ACK:      return {FA, FA, FA, FA, true};
      case MsgKind::EVICT_NOTIFY: return {FA, FA, FA, FA, true};
      default:                    return {FA, FA, FA, FA, false};
    }
  }
  // Timestamp protocol: exact field presence, two timestamps at most.
  // Without private caches there is nothing to renew or upgrade: requests
  // carry the core's pts (and the store value), replies return the updated
  // line timestamps, and no data block flows back on a store.
  switch (k) {
    case MsgKind::SH_REQ:
      if (p == SchemaProfile::NoPrivateCache) return {FR, FA, FA, FA, true};
      return {FR, FA, FR, FA, true};
    case MsgKind::EX_REQ:
      if (p == SchemaProfile::NoPrivateCache) return {FR, FA, FA, FR, true};
      return {FA, FA, FR, FA, true};
    case MsgKind::FLUSH_REQ:   return {FA, FA, FA, FA, true};
    case MsgKind::WB_REQ:      return {FA, FR, FA, FA, true};
    case MsgKind::SH_REP:      return {FA, FR, FR, FR, true};
    case MsgKind::EX_REP:
      if (p == SchemaProfile::NoPrivateCache) return {FA, FR, FR, FA, true};
      return {FA, FR, FR, FR, true};
    case MsgKind::UPGRADE_REP: return {FA, FR, FA, FA, true};
    case MsgKind::RENEW_REP:   return {FA, FR, FA, FA, true};
    case MsgKind::FLUSH_REP:   return {FA, FR, FR, FR, true};
    case MsgKind::WB_REP:      return {FA, FR, FR, FR, true};
    case MsgKind::DRAM_ST_REQ: return {FA, FA, FA, FR, true};
    case MsgKind::DRAM_LD_REQ: return {FA, FA, FA, FA, true};
    case MsgKind::DRAM_LD_REP: return {FA, FA, FA, FR, true};
    default:                   return {FA, FA, FA, FA, false};
  }
}

inline bool field_ok(FieldRule r, bool present) {
  return r == FO || (r == FR) == present;
}
}  // namespace detail

inline SchemaCheck validate(const Message& m, SchemaProfile p) {
  const auto s = detail::schema_for(m.kind, p);
  if (!s.allowed) return {false, "kind"};
  if (!detail::field_ok(s.pts, m.pts.has_value())) return {false, "pts"};
  if (!detail::field_ok(s.rts, m.rts.has_value())) return {false, "rts"};
  if (!detail::field_ok(s.wts, m.wts.has_value())) return {false, "wts"};
  if (!detail::field_ok(s.data, m.payload.has_value())) return {false, "data"};
  unsigned nts = unsigned(m.pts.has_value()) + unsigned(m.rts.has_value()) +
                 unsigned(m.wts.has_value());
  if (nts > 2) return {false, "timestamps"};
  return {true, nullptr};
}

// Wire cost: 64-bit header, 64 bits per timestamp carried, 512 bits for a
// data block. Messages are sized by what they actually carry, so MSI and
// timestamp-protocol traffic are each charged their own content.
constexpr unsigned kHeaderBits = 64;
constexpr unsigned kTimestampBits = 64;
constexpr unsigned kDataBits = 512;

inline unsigned wire_bits(const Message& m) {
  unsigned bits = kHeaderBits;
  bits += kTimestampBits * (unsigned(m.pts.has_value()) +
                            unsigned(m.rts.has_value()) +
                            unsigned(m.wts.has_value()));
  if (m.payload.has_value()) bits += kDataBits;
  return bits;
}

inline unsigned wire_flits(const Message& m, unsigned flit_bits) {
  return (wire_bits(m) + flit_bits - 1) / flit_bits;
}

}  // namespace tardis

#endif  // TARDIS_MESSAGE_HPP
