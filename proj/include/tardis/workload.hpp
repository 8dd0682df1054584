#ifndef TARDIS_WORKLOAD_HPP
#define TARDIS_WORKLOAD_HPP

#include <cstdint>
#include <fstream>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace tardis {

// Print is a Load whose observed value lands in the run outcome. SpinLoad
// re-executes until the observed value equals `value` (used by spin_flag).
enum class OpKind : std::uint8_t { Load, Store, Print, Nop, SpinLoad };

struct Op {
  OpKind kind = OpKind::Nop;
  std::uint64_t addr = 0;
  std::uint64_t value = 0;
};

inline Op op_load(std::uint64_t a) { return {OpKind::Load, a, 0}; }
inline Op op_store(std::uint64_t a, std::uint64_t v) { return {OpKind::Store, a, v}; }
inline Op op_print(std::uint64_t a) { return {OpKind::Print, a, 0}; }
inline Op op_nop() { return {OpKind::Nop, 0, 0}; }
inline Op op_spin(std::uint64_t a, std::uint64_t v) { return {OpKind::SpinLoad, a, v}; }

struct Program {
  std::vector<std::vector<Op>> per_core;

  std::size_t num_cores() const { return per_core.size(); }
  std::size_t total_ops() const {
    std::size_t n = 0;
    for (const auto& c : per_core) n += c.size();
    return n;
  }
  bool has_spin() const {
    for (const auto& c : per_core)
      for (const auto& o : c)
        if (o.kind == OpKind::SpinLoad) return true;
    return false;
  }
};

// ---------------------------------------------------------------------------
// Built-in litmus and demonstration programs. Addresses are cacheline ids.

inline Program builtin_dekker() {
  Program p;
  p.per_core = {
      {op_store(0, 1), op_print(1)},
      {op_store(1, 1), op_print(0)},
  };
  return p;
}

// Two cores over addresses A=0, B=1; core 1 leads with a nop.
inline Program builtin_case_study() {
  Program p;
  p.per_core = {
      {op_load(1), op_store(0, 1), op_load(0), op_load(1), op_store(0, 3)},
      {op_nop(), op_store(1, 2), op_load(0), op_store(1, 4)},
  };
  return p;
}

// Core 1 caches the flag, then spins on its private copy; core 0 updates it
// after a short delay. Without periodic self-increment the spinning core
// never sees the update (its lease never expires).
inline Program builtin_spin_flag() {
  Program p;
  p.per_core = {
      {op_nop(), op_nop(), op_nop(), op_nop(), op_store(0, 1)},
      {op_spin(0, 1)},
  };
  return p;
}

// One core streams stores to its own line; exercises the repeated-private-
// write path (modified bit).
inline Program builtin_private_stream() {
  Program p;
  p.per_core.resize(1);
  for (std::uint64_t i = 1; i <= 150; ++i) p.per_core[0].push_back(op_store(0, i));
  return p;
}

// ---------------------------------------------------------------------------
// Synthetic programs. Address pools: a private range per core, a shared
// read-only range, and a shared read-write range; only the last is ever
// written by more than one core.

struct SyntheticSpec {
  unsigned cores = 16;
  unsigned ops_per_core = 200;
  unsigned private_addrs_per_core = 4;
  unsigned shared_ro_addrs = 8;
  unsigned shared_rw_addrs = 4;
  double ratio_private = 0.5;
  double ratio_shared_ro = 0.3;
  double ratio_shared_rw = 0.2;
  std::uint64_t seed = 1;
};

inline Program generate(const SyntheticSpec& s) {
  double sum = s.ratio_private + s.ratio_shared_ro + s.ratio_shared_rw;
  if (sum < 0.999999 || sum > 1.000001)
    throw std::invalid_argument("synthetic mix ratios must sum to 1");
  if (s.cores == 0 || s.ops_per_core == 0)
    throw std::invalid_argument("synthetic spec needs cores and ops");

  const std::uint64_t ro_base = std::uint64_t(s.cores) * s.private_addrs_per_core;
  const std::uint64_t rw_base = ro_base + s.shared_ro_addrs;

  Program p;
  p.per_core.resize(s.cores);
  for (unsigned c = 0; c < s.cores; ++c) {
    // Dedicated stream per core keeps generation order-independent.
    std::mt19937_64 rng(s.seed * 0x9e3779b97f4a7c15ULL + c + 1);
    auto pick = [&rng](std::uint64_t n) { return n ? rng() % n : 0; };
    for (unsigned i = 0; i < s.ops_per_core; ++i) {
      double r = double(rng() % 1000000) / 1000000.0;
      std::uint64_t addr;
      bool writable;
      if (r < s.ratio_private && s.private_addrs_per_core > 0) {
        addr = std::uint64_t(c) * s.private_addrs_per_core +
               pick(s.private_addrs_per_core);
        writable = true;
      } else if (r < s.ratio_private + s.ratio_shared_ro && s.shared_ro_addrs > 0) {
        addr = ro_base + pick(s.shared_ro_addrs);
        writable = false;
      } else if (s.shared_rw_addrs > 0) {
        addr = rw_base + pick(s.shared_rw_addrs);
        writable = true;
      } else {
        addr = std::uint64_t(c) * s.private_addrs_per_core +
               pick(s.private_addrs_per_core ? s.private_addrs_per_core : 1);
        writable = true;
      }
      if (writable && (rng() & 1))
        p.per_core[c].push_back(op_store(addr, rng() % 1000 + 1));
      else
        p.per_core[c].push_back(op_load(addr));
    }
  }
  return p;
}

// Small random programs for oracle-checked litmus campaigns.
inline Program random_litmus(std::uint64_t seed, unsigned max_cores = 3,
                             unsigned max_total_ops = 10,
                             unsigned num_addrs = 3) {
  std::mt19937_64 rng(seed * 0x2545f4914f6cdd1dULL + 17);
  unsigned cores = 2 + (max_cores > 2 ? rng() % (max_cores - 1) : 0);
  unsigned total = 4 + rng() % (max_total_ops - 3);
  Program p;
  p.per_core.resize(cores);
  for (unsigned i = 0; i < total; ++i) {
    unsigned c = rng() % cores;
    std::uint64_t addr = rng() % num_addrs;
    if (rng() & 1)
      p.per_core[c].push_back(op_store(addr, rng() % 9 + 1));
    else
      p.per_core[c].push_back(op_load(addr));
  }
  for (auto& ops : p.per_core)
    if (ops.empty()) ops.push_back(op_load(0));
  return p;
}

// ---------------------------------------------------------------------------
// Trace file format (.tardis-trace): one op per line, `core op addr [value]`,
// ops L/S/P/N, '#' starts a comment.

inline Program parse_trace(std::istream& in) {
  Program p;
  std::string line;
  unsigned lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::uint64_t core;
    std::string op;
    if (!(ls >> core >> op)) {
      if (ls.eof() && op.empty()) continue;  // blank/comment line
      throw std::runtime_error("trace line " + std::to_string(lineno) +
                               ": expected `core op addr [value]`");
    }
    if (core >= 1024)
      throw std::runtime_error("trace line " + std::to_string(lineno) +
                               ": core id out of range");
    if (p.per_core.size() <= core) p.per_core.resize(core + 1);
    auto need_addr = [&](Op& o) {
      std::string a;
      if (!(ls >> a))
        throw std::runtime_error("trace line " + std::to_string(lineno) +
                                 ": missing address");
      o.addr = std::stoull(a, nullptr, 0);
    };
    Op o;
    if (op == "L") {
      o.kind = OpKind::Load;
      need_addr(o);
    } else if (op == "S") {
      o.kind = OpKind::Store;
      need_addr(o);
      std::string v;
      if (!(ls >> v))
        throw std::runtime_error("trace line " + std::to_string(lineno) +
                                 ": store needs a value");
      o.value = std::stoull(v, nullptr, 0);
    } else if (op == "P") {
      o.kind = OpKind::Print;
      need_addr(o);
    } else if (op == "N") {
      o.kind = OpKind::Nop;
    } else {
      throw std::runtime_error("trace line " + std::to_string(lineno) +
                               ": unknown op `" + op + "`");
    }
    p.per_core[core].push_back(o);
  }
  if (p.per_core.empty()) throw std::runtime_error("trace has no operations");
  return p;
}

inline Program load_trace(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open trace file: " + path);
  return parse_trace(in);
}

inline void write_trace(std::ostream& out, const Program& p) {
  for (std::size_t c = 0; c < p.per_core.size(); ++c) {
    for (const auto& o : p.per_core[c]) {
      switch (o.kind) {
        case OpKind::Load:  out << c << " L " << o.addr << "\n"; break;
        case OpKind::Store: out << c << " S " << o.addr << " " << o.value << "\n"; break;
        case OpKind::Print: out << c << " P " << o.addr << "\n"; break;
        case OpKind::Nop:   out << c << " N\n"; break;
        case OpKind::SpinLoad:
          throw std::runtime_error("spin ops are builtin-only, not serializable");
      }
    }
  }
}

}  // namespace tardis

#endif  // TARDIS_WORKLOAD_HPP
