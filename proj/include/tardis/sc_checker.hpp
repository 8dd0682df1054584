#ifndef TARDIS_SC_CHECKER_HPP
#define TARDIS_SC_CHECKER_HPP

#include <algorithm>
#include <cstdint>
#include <map>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "tardis/timestamp.hpp"
#include "tardis/workload.hpp"

namespace tardis {

// One committed memory operation. `idx` is the global physical commit order;
// `ts` is the operation's logical timestamp (0 for every op under MSI, which
// reduces the logical order below to plain commit order).
struct LogRecord {
  std::uint64_t idx = 0;
  std::uint32_t core = 0;
  OpKind op = OpKind::Load;  // any kind but Nop; non-stores are reads
  std::uint64_t addr = 0;
  std::uint64_t value = 0;
  Timestamp ts = 0;
};

// Execution log, one committed op per line: `idx core op addr value ts`.
inline void write_exec_log(std::ostream& os, const std::vector<LogRecord>& log) {
  static const char* names[] = {"L", "S", "P", "N", "SP"};
  for (const auto& r : log)
    os << r.idx << " " << r.core << " " << names[static_cast<int>(r.op)] << " "
       << r.addr << " " << r.value << " " << r.ts << "\n";
}

struct AuditResult {
  bool ok = true;
  std::uint64_t bad_idx = 0;  // idx of the offending record when !ok
  std::string detail;
};

// Checks the two sequential-consistency rules over the log's logical order:
// operations are ordered by (ts, commit idx); per core, timestamps must be
// non-decreasing in program order; every load must observe the latest store
// to its address in that order (memory starts zeroed).
inline AuditResult audit_physiological(const std::vector<LogRecord>& log) {
  AuditResult res;

  std::map<std::uint32_t, Timestamp> last_core_ts;
  for (const auto& r : log) {
    auto it = last_core_ts.find(r.core);
    if (it != last_core_ts.end() && r.ts < it->second) {
      res.ok = false;
      res.bad_idx = r.idx;
      std::ostringstream os;
      os << "core " << r.core << " timestamp decreased: " << it->second
         << " -> " << r.ts << " at commit " << r.idx;
      res.detail = os.str();
      return res;
    }
    last_core_ts[r.core] = r.ts;
  }

  std::vector<std::size_t> order(log.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&log](std::size_t a, std::size_t b) {
    if (log[a].ts != log[b].ts) return log[a].ts < log[b].ts;
    return log[a].idx < log[b].idx;
  });

  std::map<std::uint64_t, std::uint64_t> mem;
  for (std::size_t i : order) {
    const auto& r = log[i];
    if (r.op == OpKind::Store) {
      mem[r.addr] = r.value;
      continue;
    }
    std::uint64_t expect = 0;
    auto it = mem.find(r.addr);
    if (it != mem.end()) expect = it->second;
    if (r.value != expect) {
      res.ok = false;
      res.bad_idx = r.idx;
      std::ostringstream os;
      os << "core " << r.core << " load of addr " << r.addr << " at ts "
         << r.ts << " (commit " << r.idx << ") observed " << r.value
         << " but the latest store in logical order wrote " << expect;
      res.detail = os.str();
      return res;
    }
  }
  return res;
}

// ---------------------------------------------------------------------------
// Interleaving oracle: is the observed outcome (the per-core sequence of
// load/print values) producible by some sequentially consistent interleaving
// of the program? Exhaustive search, so it is limited to small programs.

struct Outcome {
  // loads[c][k] = value observed by core c's k-th load/print in program order
  std::vector<std::vector<std::uint64_t>> loads;
};

enum class Feasibility : std::uint8_t { Feasible, Infeasible, BudgetExceeded };

constexpr unsigned kOracleMaxCores = 3;
constexpr unsigned kOracleMaxOps = 12;

namespace detail {

struct OracleState {
  const Program* prog;
  const Outcome* out;
  std::vector<std::size_t> pc;
  std::vector<std::size_t> nload;
  std::map<std::uint64_t, std::uint64_t> mem;
};

inline bool oracle_dfs(OracleState& st) {
  bool all_done = true;
  for (std::size_t c = 0; c < st.prog->num_cores(); ++c) {
    if (st.pc[c] >= st.prog->per_core[c].size()) continue;
    all_done = false;
    const Op& o = st.prog->per_core[c][st.pc[c]];

    if (o.kind == OpKind::Nop) {
      // Order-irrelevant; advance in place instead of branching.
      ++st.pc[c];
      bool r = oracle_dfs(st);
      --st.pc[c];
      return r;
    }

    if (o.kind == OpKind::Load || o.kind == OpKind::Print) {
      std::uint64_t v = 0;
      auto it = st.mem.find(o.addr);
      if (it != st.mem.end()) v = it->second;
      if (st.nload[c] >= (*st.out).loads[c].size()) continue;
      if (v != (*st.out).loads[c][st.nload[c]]) continue;  // prune
      ++st.pc[c];
      ++st.nload[c];
      if (oracle_dfs(st)) return true;
      --st.nload[c];
      --st.pc[c];
    } else {  // Store
      auto it = st.mem.find(o.addr);
      bool had = it != st.mem.end();
      std::uint64_t old = had ? it->second : 0;
      st.mem[o.addr] = o.value;
      ++st.pc[c];
      if (oracle_dfs(st)) return true;
      --st.pc[c];
      if (had) st.mem[o.addr] = old; else st.mem.erase(o.addr);
    }
  }
  if (!all_done) return false;
  for (std::size_t c = 0; c < st.prog->num_cores(); ++c)
    if (st.nload[c] != (*st.out).loads[c].size()) return false;
  return true;
}

}  // namespace detail

inline Feasibility oracle_sc(const Program& prog, const Outcome& out) {
  if (prog.num_cores() > kOracleMaxCores) return Feasibility::BudgetExceeded;
  if (prog.has_spin()) return Feasibility::BudgetExceeded;
  std::size_t real_ops = 0;
  for (const auto& c : prog.per_core)
    for (const auto& o : c)
      if (o.kind != OpKind::Nop) ++real_ops;
  if (real_ops > kOracleMaxOps) return Feasibility::BudgetExceeded;
  if (out.loads.size() != prog.num_cores()) return Feasibility::Infeasible;

  detail::OracleState st;
  st.prog = &prog;
  st.out = &out;
  st.pc.assign(prog.num_cores(), 0);
  st.nload.assign(prog.num_cores(), 0);
  return detail::oracle_dfs(st) ? Feasibility::Feasible : Feasibility::Infeasible;
}

// Combined verdict over one finished run.
struct CheckVerdict {
  bool terminated = false;
  AuditResult audit;
  Feasibility oracle = Feasibility::BudgetExceeded;
  bool pass() const {
    return terminated && audit.ok && oracle != Feasibility::Infeasible;
  }
};

}  // namespace tardis

#endif  // TARDIS_SC_CHECKER_HPP
