#include <catch2/catch_amalgamated.hpp>

#include <sstream>

#include "tardis/workload.hpp"

using namespace tardis;

TEST_CASE("builtin programs have the documented shape") {
  Program d = builtin_dekker();
  REQUIRE(d.num_cores() == 2);
  REQUIRE(d.per_core[0][0].kind == OpKind::Store);
  REQUIRE(d.per_core[0][1].kind == OpKind::Print);
  REQUIRE(d.per_core[0][0].addr != d.per_core[0][1].addr);
  REQUIRE_FALSE(d.has_spin());

  Program c = builtin_case_study();
  REQUIRE(c.num_cores() == 2);
  REQUIRE(c.total_ops() == 9);

  Program s = builtin_spin_flag();
  REQUIRE(s.has_spin());

  Program p = builtin_private_stream();
  REQUIRE(p.num_cores() == 1);
  for (const Op& o : p.per_core[0]) REQUIRE(o.kind == OpKind::Store);
}

TEST_CASE("synthetic generation is deterministic and respects pools") {
  SyntheticSpec s;
  s.cores = 4;
  s.ops_per_core = 100;
  s.seed = 9;
  Program a = generate(s);
  Program b = generate(s);
  REQUIRE(a.num_cores() == 4);
  for (unsigned c = 0; c < 4; ++c) {
    REQUIRE(a.per_core[c].size() == 100);
    for (std::size_t i = 0; i < 100; ++i) {
      REQUIRE(a.per_core[c][i].kind == b.per_core[c][i].kind);
      REQUIRE(a.per_core[c][i].addr == b.per_core[c][i].addr);
      REQUIRE(a.per_core[c][i].value == b.per_core[c][i].value);
    }
  }

  // Address-pool discipline: stores never land in the shared read-only
  // range, and private addresses stay with their core.
  const std::uint64_t ro_base = std::uint64_t(s.cores) * s.private_addrs_per_core;
  const std::uint64_t rw_base = ro_base + s.shared_ro_addrs;
  for (unsigned c = 0; c < 4; ++c)
    for (const Op& o : a.per_core[c]) {
      if (o.kind == OpKind::Store) {
        bool in_ro = o.addr >= ro_base && o.addr < rw_base;
        REQUIRE_FALSE(in_ro);
      }
      if (o.addr < ro_base) {
        REQUIRE(o.addr / s.private_addrs_per_core == c);
      }
    }

  REQUIRE_THROWS_AS(
      [] {
        SyntheticSpec bad;
        bad.ratio_private = 0.9;  // sums to 1.4
        return generate(bad);
      }(),
      std::invalid_argument);
}

TEST_CASE("random litmus programs fit the oracle budget") {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Program p = random_litmus(seed);
    REQUIRE(p.num_cores() >= 2);
    REQUIRE(p.num_cores() <= 3);
    REQUIRE(p.total_ops() <= 10 + p.num_cores());  // padding loads included
    REQUIRE_FALSE(p.has_spin());
  }
}

TEST_CASE("trace round-trip preserves every op") {
  Program p = builtin_case_study();
  std::ostringstream out;
  write_trace(out, p);
  std::istringstream in(out.str());
  Program q = parse_trace(in);
  REQUIRE(q.num_cores() == p.num_cores());
  for (std::size_t c = 0; c < p.per_core.size(); ++c) {
    REQUIRE(q.per_core[c].size() == p.per_core[c].size());
    for (std::size_t i = 0; i < p.per_core[c].size(); ++i) {
      REQUIRE(q.per_core[c][i].kind == p.per_core[c][i].kind);
      REQUIRE(q.per_core[c][i].addr == p.per_core[c][i].addr);
      REQUIRE(q.per_core[c][i].value == p.per_core[c][i].value);
    }
  }
}

TEST_CASE("trace parser accepts comments and reports bad lines by number") {
  std::istringstream good(
      "# header comment\n"
      "0 S 0x10 3   # hex address\n"
      "\n"
      "1 L 16\n"
      "0 N\n"
      "2 P 1\n");
  Program p = parse_trace(good);
  REQUIRE(p.num_cores() == 3);
  REQUIRE(p.per_core[0][0].addr == 16);
  REQUIRE(p.per_core[0][0].value == 3);
  REQUIRE(p.per_core[1][0].addr == 16);

  auto throws_mentioning = [](const std::string& text, const std::string& what) {
    std::istringstream in(text);
    try {
      parse_trace(in);
      return false;
    } catch (const std::runtime_error& e) {
      return std::string(e.what()).find(what) != std::string::npos;
    }
  };
  REQUIRE(throws_mentioning("0 S 5\n", "line 1"));          // store missing value
  REQUIRE(throws_mentioning("0 L 1\n0 X 2\n", "line 2"));   // unknown op
  REQUIRE(throws_mentioning("0 L\n", "missing address"));
  REQUIRE(throws_mentioning("# only comments\n", "no operations"));
}
