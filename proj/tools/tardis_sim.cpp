// Command-line driver: run one deterministic simulation (or a two-protocol
// comparison) over a builtin, synthetic, or trace-file workload, and emit
// the run statistics as CSV plus optional message/execution logs.
//
//   tardis_sim run --protocol tardis --workload dekker --seed 7 --out run.csv
//   tardis_sim compare --workload synth_rw_heavy --cores 16
//
// Exit code 0 only if every executed run passes the sequential-consistency
// checks (commit-log audit; small programs also face the exhaustive oracle).

#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "tardis/simulator.hpp"

namespace {

struct CliOptions {
  std::string protocol = "tardis";
  std::string workload = "dekker";
  std::string core_mode = "in_order";
  std::string speculation = "on";
  std::string private_write_opt = "on";
  unsigned cores = 64;
  std::uint64_t seed = 1;
  tardis::Timestamp lease = 10;
  std::uint64_t self_inc_period = 100;
  unsigned delta_width = 20;
  bool no_private_cache = false;
  std::uint64_t max_cycles = 10'000'000;
  std::string out_csv;
  std::string msg_log_path;
  std::string exec_log_path;
  // Synthetic workload shape (used by the synth* workload names).
  unsigned synth_ops = 200;
  unsigned synth_private_addrs = 4;
  unsigned synth_ro_addrs = 8;
  unsigned synth_rw_addrs = 4;
};

void add_common_options(CLI::App* cmd, CliOptions& o) {
  cmd->add_option("--protocol", o.protocol, "Coherence protocol")
      ->check(CLI::IsMember({"tardis", "msi"}))
      ->capture_default_str();
  cmd->add_option("--workload", o.workload,
                  "Builtin name (dekker, case_study, spin_flag, "
                  "private_stream, synth, synth_private, synth_shared_ro, "
                  "synth_rw_heavy) or a .tardis-trace file path")
      ->capture_default_str();
  cmd->add_option("--cores", o.cores, "Simulated core count")
      ->check(CLI::Range(1u, 1024u))
      ->capture_default_str();
  cmd->add_option("--seed", o.seed, "Interleaving seed (start skew + op jitter)")
      ->capture_default_str();
  cmd->add_option("--lease", o.lease, "Read lease length added to rts")
      ->capture_default_str();
  cmd->add_option("--self-inc-period", o.self_inc_period,
                  "Data accesses per +1 self-increment of a core's timestamp "
                  "(0 disables)")
      ->capture_default_str();
  cmd->add_option("--delta-width", o.delta_width,
                  "Delta-timestamp width in bits (64 = uncompressed)")
      ->check(CLI::Range(2u, 64u))
      ->capture_default_str();
  cmd->add_option("--core-mode", o.core_mode, "Core pipeline model")
      ->check(CLI::IsMember({"in_order", "ooo_commit_check"}))
      ->capture_default_str();
  cmd->add_option("--speculation", o.speculation,
                  "Consume expired values while their renewal is in flight")
      ->check(CLI::IsMember({"on", "off"}))
      ->capture_default_str();
  cmd->add_option("--private-write-opt", o.private_write_opt,
                  "Repeated private stores reuse the line's timestamp")
      ->check(CLI::IsMember({"on", "off"}))
      ->capture_default_str();
  cmd->add_flag("--no-private-cache", o.no_private_cache,
                "Timestamped shared cache only; cores issue straight to it");
  cmd->add_option("--max-cycles", o.max_cycles, "Simulation cycle budget")
      ->capture_default_str();
  cmd->add_option("--out", o.out_csv, "Write stats CSV (header + one row per run)");
  cmd->add_option("--msg-log", o.msg_log_path, "Write every delivered message");
  cmd->add_option("--exec-log", o.exec_log_path, "Write the commit log");
  cmd->add_option("--synth-ops", o.synth_ops, "Synthetic: ops per core")
      ->capture_default_str();
  cmd->add_option("--synth-private-addrs", o.synth_private_addrs,
                  "Synthetic: private lines per core")
      ->capture_default_str();
  cmd->add_option("--synth-ro-addrs", o.synth_ro_addrs,
                  "Synthetic: shared read-only lines")
      ->capture_default_str();
  cmd->add_option("--synth-rw-addrs", o.synth_rw_addrs,
                  "Synthetic: shared read-write lines")
      ->capture_default_str();
}

tardis::RunConfig to_config(const CliOptions& o) {
  tardis::RunConfig cfg;
  cfg.protocol =
      o.protocol == "msi" ? tardis::Protocol::Msi : tardis::Protocol::Tardis;
  cfg.cores = o.cores;
  cfg.seed = o.seed;
  cfg.lease = o.lease;
  cfg.self_inc_period = o.self_inc_period;
  cfg.delta_ts_width = o.delta_width;
  cfg.core_mode = o.core_mode == "ooo_commit_check"
                      ? tardis::CoreMode::OooCommitCheck
                      : tardis::CoreMode::InOrder;
  cfg.speculation = o.speculation == "on";
  cfg.private_write_opt = o.private_write_opt == "on";
  cfg.mode = o.no_private_cache ? tardis::SimMode::NoPrivateCache
                                : tardis::SimMode::Full;
  cfg.max_cycles = o.max_cycles;
  return cfg;
}

tardis::Program make_workload(const CliOptions& o) {
  using namespace tardis;
  SyntheticSpec s;
  s.cores = o.cores;
  s.ops_per_core = o.synth_ops;
  s.private_addrs_per_core = o.synth_private_addrs;
  s.shared_ro_addrs = o.synth_ro_addrs;
  s.shared_rw_addrs = o.synth_rw_addrs;
  s.seed = o.seed;

  if (o.workload == "dekker") return builtin_dekker();
  if (o.workload == "case_study") return builtin_case_study();
  if (o.workload == "spin_flag") return builtin_spin_flag();
  if (o.workload == "private_stream") return builtin_private_stream();
  if (o.workload == "synth") return generate(s);
  if (o.workload == "synth_private") {
    s.ratio_private = 1.0;
    s.ratio_shared_ro = 0.0;
    s.ratio_shared_rw = 0.0;
    return generate(s);
  }
  if (o.workload == "synth_shared_ro") {
    s.ratio_private = 0.0;
    s.ratio_shared_ro = 1.0;
    s.ratio_shared_rw = 0.0;
    return generate(s);
  }
  if (o.workload == "synth_rw_heavy") {
    s.ratio_private = 0.1;
    s.ratio_shared_ro = 0.1;
    s.ratio_shared_rw = 0.8;
    return generate(s);
  }
  return load_trace(o.workload);  // anything else is a trace file path
}

const char* verdict_word(const tardis::CheckVerdict& v) {
  if (!v.terminated) return "FAIL(termination)";
  if (!v.audit.ok) return "FAIL(audit)";
  if (v.oracle == tardis::Feasibility::Infeasible) return "FAIL(oracle)";
  return "PASS";
}

void print_summary(const tardis::RunConfig& cfg, const std::string& workload,
                   const tardis::RunOutput& out) {
  const tardis::SimStats& s = out.stats;
  std::printf("%s  %s  seed=%llu  cores=%u\n", tardis::to_string(cfg.protocol),
              workload.c_str(), static_cast<unsigned long long>(cfg.seed),
              cfg.cores);
  std::printf("  cycles=%llu  committed=%llu  restarts=%llu  sc=%s\n",
              static_cast<unsigned long long>(s.cycles),
              static_cast<unsigned long long>(s.committed_ops),
              static_cast<unsigned long long>(s.restarts),
              verdict_word(out.verdict));
  std::printf(
      "  traffic: msgs=%llu flits=%llu  llc=%llu  renewals=%llu (%.4f rate)  "
      "misspec=%llu  inv=%llu  rebases=%llu\n",
      static_cast<unsigned long long>(s.total_msgs),
      static_cast<unsigned long long>(s.total_flits),
      static_cast<unsigned long long>(s.llc_accesses),
      static_cast<unsigned long long>(s.renew_requests), s.renew_rate(),
      static_cast<unsigned long long>(s.misspeculations),
      static_cast<unsigned long long>(s.invalidations_sent),
      static_cast<unsigned long long>(s.rebases));
  std::printf("  ts: incr_rate=%.3f cycles/+1  self_inc=%.2f%%\n",
              s.ts_incr_rate(), s.self_inc_perc());
  if (!out.verdict.audit.ok)
    std::printf("  audit: %s\n", out.verdict.audit.detail.c_str());
  if (s.budget_exceeded) std::printf("  note: cycle budget exceeded\n");
  if (s.livelock) std::printf("  note: commit livelock detected\n");
}

bool write_logs(const CliOptions& o, const tardis::RunOutput& out) {
  if (!o.msg_log_path.empty()) {
    std::ofstream f(o.msg_log_path);
    if (!f) {
      std::fprintf(stderr, "cannot open %s\n", o.msg_log_path.c_str());
      return false;
    }
    tardis::write_msg_log(f, out.msg_log);
  }
  if (!o.exec_log_path.empty()) {
    std::ofstream f(o.exec_log_path);
    if (!f) {
      std::fprintf(stderr, "cannot open %s\n", o.exec_log_path.c_str());
      return false;
    }
    tardis::write_exec_log(f, out.log);
  }
  return true;
}

int do_run(const CliOptions& o) {
  tardis::RunConfig cfg = to_config(o);
  for (const std::string& err : cfg.validate()) {
    std::fprintf(stderr, "config: %s\n", err.c_str());
    return 2;
  }
  tardis::Program prog = make_workload(o);
  bool capture = !o.msg_log_path.empty();
  tardis::RunOutput out = tardis::simulate(cfg, prog, capture);
  print_summary(cfg, o.workload, out);
  if (!o.out_csv.empty()) {
    std::ofstream f(o.out_csv);
    if (!f) {
      std::fprintf(stderr, "cannot open %s\n", o.out_csv.c_str());
      return 2;
    }
    f << tardis::stats_csv_header() << "\n"
      << tardis::stats_csv_row(cfg, o.workload, out.stats, out.verdict.pass())
      << "\n";
  }
  if (!write_logs(o, out)) return 2;
  return out.verdict.pass() ? 0 : 1;
}

int do_compare(const CliOptions& o) {
  tardis::RunConfig cfg = to_config(o);
  for (const std::string& err : cfg.validate()) {
    std::fprintf(stderr, "config: %s\n", err.c_str());
    return 2;
  }
  tardis::Program prog = make_workload(o);

  tardis::RunConfig tcfg = cfg;
  tcfg.protocol = tardis::Protocol::Tardis;
  tardis::RunConfig mcfg = cfg;
  mcfg.protocol = tardis::Protocol::Msi;
  mcfg.mode = tardis::SimMode::Full;  // the baseline has no uncached variant

  tardis::RunOutput t = tardis::simulate(tcfg, prog, false);
  tardis::RunOutput m = tardis::simulate(mcfg, prog, false);
  print_summary(tcfg, o.workload, t);
  print_summary(mcfg, o.workload, m);

  auto ratio = [](std::uint64_t a, std::uint64_t b) {
    return b ? static_cast<double>(a) / static_cast<double>(b) : 0.0;
  };
  std::printf("normalized to the MSI baseline (same workload, seed %llu):\n",
              static_cast<unsigned long long>(cfg.seed));
  std::printf("  metric            tardis        msi     ratio\n");
  std::printf("  cycles       %10llu %10llu  %8.4f\n",
              static_cast<unsigned long long>(t.stats.cycles),
              static_cast<unsigned long long>(m.stats.cycles),
              ratio(t.stats.cycles, m.stats.cycles));
  std::printf("  flits        %10llu %10llu  %8.4f\n",
              static_cast<unsigned long long>(t.stats.total_flits),
              static_cast<unsigned long long>(m.stats.total_flits),
              ratio(t.stats.total_flits, m.stats.total_flits));
  std::printf("  messages     %10llu %10llu  %8.4f\n",
              static_cast<unsigned long long>(t.stats.total_msgs),
              static_cast<unsigned long long>(m.stats.total_msgs),
              ratio(t.stats.total_msgs, m.stats.total_msgs));

  if (!o.out_csv.empty()) {
    std::ofstream f(o.out_csv);
    if (!f) {
      std::fprintf(stderr, "cannot open %s\n", o.out_csv.c_str());
      return 2;
    }
    f << tardis::stats_csv_header() << "\n"
      << tardis::stats_csv_row(tcfg, o.workload, t.stats, t.verdict.pass())
      << "\n"
      << tardis::stats_csv_row(mcfg, o.workload, m.stats, m.verdict.pass())
      << "\n";
  }
  return t.verdict.pass() && m.verdict.pass() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Deterministic event-driven simulator of a timestamp-based "
      "cache-coherence protocol and a full-map directory MSI baseline"};
  CliOptions opt;

  CLI::App* run_cmd =
      app.add_subcommand("run", "Simulate one protocol over one workload");
  CLI::App* cmp_cmd = app.add_subcommand(
      "compare", "Run both protocols on the same workload and normalize");
  add_common_options(run_cmd, opt);
  add_common_options(cmp_cmd, opt);
  add_common_options(&app, opt);  // bare invocation behaves like `run`
  app.require_subcommand(0, 1);

  CLI11_PARSE(app, argc, argv);

  try {
    if (cmp_cmd->parsed()) return do_compare(opt);
    return do_run(opt);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
}
