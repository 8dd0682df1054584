#ifndef TARDIS_CONFIG_HPP
#define TARDIS_CONFIG_HPP

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

namespace tardis {

enum class Protocol : std::uint8_t { Tardis, Msi };
enum class CoreMode : std::uint8_t { InOrder, OooCommitCheck };
enum class SimMode : std::uint8_t { Full, NoPrivateCache };

inline const char* to_string(Protocol p) {
  return p == Protocol::Tardis ? "tardis" : "msi";
}
inline const char* to_string(CoreMode m) {
  return m == CoreMode::InOrder ? "in_order" : "ooo_commit_check";
}

// One simulated cycle is 1 ns (1 GHz), so latencies given in ns are cycles.
struct RunConfig {
  Protocol protocol = Protocol::Tardis;
  SimMode mode = SimMode::Full;
  unsigned cores = 64;
  std::uint64_t seed = 1;

  // caches (sizes per core / per slice)
  unsigned line_bytes = 64;
  unsigned l1_kb = 32;
  unsigned l1_ways = 4;
  unsigned l2_kb_per_core = 256;
  unsigned l2_ways = 8;

  // timestamp protocol
  std::uint64_t lease = 10;
  std::uint64_t self_inc_period = 100;  // data-cache accesses; 0 disables
  bool private_write_opt = true;
  unsigned delta_ts_width = 20;
  unsigned base_ts_width = 64;  // fixed
  std::uint64_t l1_rebase_ns = 128;
  std::uint64_t l2_rebase_ns = 1024;

  // core engine
  CoreMode core_mode = CoreMode::InOrder;
  bool speculation = true;
  unsigned rob_entries = 8;

  // interconnect: 2D mesh, XY routing, latency-only
  unsigned mesh_rows = 0;  // 0 = choose automatically
  unsigned mesh_cols = 0;
  unsigned hop_cycles = 2;
  unsigned flit_bits = 128;

  // memory
  std::uint64_t dram_ns = 100;
  unsigned num_mem_ctrl = 8;

  // timing model details
  unsigned llc_access_cycles = 5;
  std::uint64_t max_cycles = 10'000'000;

  // seed-driven interleaving exploration (0 disables)
  unsigned start_skew_max = 16;
  unsigned op_jitter_max = 3;

  unsigned l1_sets() const {
    return (l1_kb * 1024) / (line_bytes * l1_ways);
  }
  unsigned l2_sets() const {
    return (l2_kb_per_core * 1024) / (line_bytes * l2_ways);
  }

  // Memory controllers sit at evenly spaced mesh nodes; lines interleave
  // across them. Node ids coincide with core ids (one tile per core).
  std::uint32_t mc_node(std::uint64_t addr) const {
    unsigned n = num_mem_ctrl > cores ? cores : num_mem_ctrl;
    if (n == 0) n = 1;
    auto idx = static_cast<std::uint32_t>((addr / cores) % n);
    return static_cast<std::uint32_t>(std::uint64_t(idx) * cores / n);
  }

  void resolve_mesh() {
    if (mesh_rows && mesh_cols) return;
    unsigned r = unsigned(std::sqrt(double(cores)));
    while (r > 1 && cores % r) --r;
    mesh_rows = r ? r : 1;
    mesh_cols = cores / mesh_rows;
  }

  std::vector<std::string> validate() const {
    std::vector<std::string> errs;
    if (cores == 0) errs.push_back("cores must be >= 1");
    if (flit_bits == 0) errs.push_back("flit_bits must be > 0");
    if (line_bytes == 0) errs.push_back("line_bytes must be > 0");
    if (l1_ways == 0 || l2_ways == 0) errs.push_back("cache ways must be > 0");
    if (l1_kb * 1024 < line_bytes * l1_ways)
      errs.push_back("l1 smaller than one set");
    if (l2_kb_per_core * 1024 < line_bytes * l2_ways)
      errs.push_back("l2 slice smaller than one set");
    if (delta_ts_width < 4 || delta_ts_width > 64)
      errs.push_back("delta_ts_width must be in [4, 64]");
    if (base_ts_width != 64) errs.push_back("base_ts_width is fixed at 64");
    if (rob_entries == 0) errs.push_back("rob_entries must be >= 1");
    if (mesh_rows && mesh_cols && std::uint64_t(mesh_rows) * mesh_cols != cores)
      errs.push_back("mesh_rows * mesh_cols must equal cores");
    if (num_mem_ctrl == 0) errs.push_back("num_mem_ctrl must be >= 1");
    if (mode == SimMode::NoPrivateCache && protocol != Protocol::Tardis)
      errs.push_back("no_private_cache mode applies to the timestamp protocol only");
    return errs;
  }
};

}  // namespace tardis

#endif  // TARDIS_CONFIG_HPP
