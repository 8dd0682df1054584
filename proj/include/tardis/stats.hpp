#ifndef TARDIS_STATS_HPP
#define TARDIS_STATS_HPP

#include <array>
#include <cstdint>
#include <cstdio>
#include <ostream>
#include <string>
#include <vector>

#include "tardis/config.hpp"
#include "tardis/message.hpp"

namespace tardis {

// Counters accumulated during one run. Rates are derived at reporting time.
struct SimStats {
  std::array<std::uint64_t, kNumMsgKinds> msgs_by_kind{};
  std::array<std::uint64_t, kNumMsgKinds> flits_by_kind{};
  std::uint64_t total_msgs = 0;
  std::uint64_t total_flits = 0;

  std::uint64_t llc_accesses = 0;     // SH_REQ + EX_REQ serviced at the LLC
  std::uint64_t renew_requests = 0;   // SH_REQ from a core holding the line
  std::uint64_t renew_success = 0;    // answered with RENEW_REP
  std::uint64_t misspeculations = 0;  // failed renewals whose stale value was used
  std::uint64_t squashed_ops = 0;
  std::uint64_t restarts = 0;         // commit-time restarts / re-executions
  std::uint64_t rebases = 0;
  std::uint64_t rebase_clamped = 0;
  std::uint64_t rebase_invalidated = 0;
  std::uint64_t invalidations_sent = 0;  // INV_REQ count (MSI)
  std::uint64_t dram_loads = 0;
  std::uint64_t dram_stores = 0;

  std::uint64_t committed_ops = 0;  // committed loads+stores (incl. prints/spins)
  std::uint64_t cycles = 0;         // last commit cycle
  bool budget_exceeded = false;
  bool livelock = false;

  // per-core pts advance, split by cause
  std::vector<std::uint64_t> pts_final;
  std::vector<std::uint64_t> pts_advance_store;
  std::vector<std::uint64_t> pts_advance_load;
  std::vector<std::uint64_t> pts_advance_self;

  void init_cores(unsigned n) {
    pts_final.assign(n, 0);
    pts_advance_store.assign(n, 0);
    pts_advance_load.assign(n, 0);
    pts_advance_self.assign(n, 0);
  }

  std::uint64_t pts_advance_total() const {
    std::uint64_t t = 0;
    for (std::size_t i = 0; i < pts_final.size(); ++i)
      t += pts_advance_store[i] + pts_advance_load[i] + pts_advance_self[i];
    return t;
  }
  std::uint64_t self_advance_total() const {
    std::uint64_t t = 0;
    for (auto v : pts_advance_self) t += v;
    return t;
  }

  double renew_rate() const {
    return llc_accesses ? double(renew_requests) / double(llc_accesses) : 0.0;
  }
  double misspec_rate() const {
    return llc_accesses ? double(misspeculations) / double(llc_accesses) : 0.0;
  }
  // average cycles per +1 of a core's pts
  double ts_incr_rate() const {
    if (pts_final.empty()) return 0.0;
    double mean = double(pts_advance_total()) / double(pts_final.size());
    return mean > 0.0 ? double(cycles) / mean : 0.0;
  }
  double self_inc_perc() const {
    std::uint64_t t = pts_advance_total();
    return t ? 100.0 * double(self_advance_total()) / double(t) : 0.0;
  }
};

// One delivered message, as written to the message log.
struct MsgLogRecord {
  std::uint64_t cycle;
  MsgKind kind;
  std::uint32_t src;
  std::uint32_t dst;
  std::uint64_t addr;
  std::uint32_t flits;
};

inline void write_msg_log(std::ostream& os, const std::vector<MsgLogRecord>& log) {
  for (const auto& r : log)
    os << r.cycle << " " << to_string(r.kind) << " " << r.src << " " << r.dst
       << " " << r.addr << " " << r.flits << "\n";
}

// Fixed, versioned CSV schema: one row per run.
inline std::string stats_csv_header() {
  std::string h =
      "schema,protocol,workload,seed,cores,core_mode,speculation,lease,"
      "self_inc_period,delta_width,cycles,committed_ops,llc_accesses,"
      "renew_requests,renew_success,renew_rate,misspec_count,misspec_rate,"
      "ts_incr_rate,self_inc_perc,inv_count,restarts,rebase_count,"
      "dram_loads,dram_stores,msgs_total,flits_total";
  for (unsigned k = 0; k < kNumMsgKinds; ++k) {
    h += ",flits_";
    h += to_string(static_cast<MsgKind>(k));
  }
  h += ",sc_pass";
  return h;
}

inline std::string stats_csv_row(const RunConfig& cfg, const std::string& workload,
                                 const SimStats& s, bool sc_pass) {
  char buf[64];
  std::string row = "1,";
  row += to_string(cfg.protocol);
  row += "," + workload;
  row += "," + std::to_string(cfg.seed);
  row += "," + std::to_string(cfg.cores);
  row += ",";
  row += to_string(cfg.core_mode);
  row += cfg.speculation ? ",on" : ",off";
  row += "," + std::to_string(cfg.lease);
  row += "," + std::to_string(cfg.self_inc_period);
  row += "," + std::to_string(cfg.delta_ts_width);
  row += "," + std::to_string(s.cycles);
  row += "," + std::to_string(s.committed_ops);
  row += "," + std::to_string(s.llc_accesses);
  row += "," + std::to_string(s.renew_requests);
  row += "," + std::to_string(s.renew_success);
  std::snprintf(buf, sizeof buf, ",%.6f", s.renew_rate());
  row += buf;
  row += "," + std::to_string(s.misspeculations);
  std::snprintf(buf, sizeof buf, ",%.6f", s.misspec_rate());
  row += buf;
  std::snprintf(buf, sizeof buf, ",%.3f", s.ts_incr_rate());
  row += buf;
  std::snprintf(buf, sizeof buf, ",%.3f", s.self_inc_perc());
  row += buf;
  row += "," + std::to_string(s.invalidations_sent);
  row += "," + std::to_string(s.restarts);
  row += "," + std::to_string(s.rebases);
  row += "," + std::to_string(s.dram_loads);
  row += "," + std::to_string(s.dram_stores);
  row += "," + std::to_string(s.total_msgs);
  row += "," + std::to_string(s.total_flits);
  for (unsigned k = 0; k < kNumMsgKinds; ++k)
    row += "," + std::to_string(s.flits_by_kind[k]);
  row += sc_pass ? ",1" : ",0";
  return row;
}

}  // namespace tardis

#endif  // TARDIS_STATS_HPP
