#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <set>
#include <string>

#include "symsum/gen.hpp"
#include "symsum/interp.hpp"
#include "symsum/summary.hpp"

using namespace symsum;

namespace {

ExploreConfig config(int width) {
  ExploreConfig cfg;
  cfg.solver.width = width;
  return cfg;
}

std::uint32_t eval_with(const TermPtr& t,
                        const std::map<SymId, std::uint32_t>& env) {
  std::unordered_map<SymId, std::uint32_t> m(env.begin(), env.end());
  return eval_term(t, m);
}

bool alpha_holds(const SummaryEntry& e,
                 const std::map<SymId, std::uint32_t>& env) {
  for (const TermPtr& c : e.alpha)
    if (eval_with(c, env) == 0) return false;
  return true;
}

std::set<std::pair<int, std::string>> bug_pairs(const Report& r) {
  std::set<std::pair<int, std::string>> out;
  for (const BugReport& b : r.bugs) out.emplace(int(b.kind), b.function);
  return out;
}

const char* kSign =
    "fn sign {\n"
    "  const t0, 0\n"
    "  blt t0, a0, POS\n"
    "  const rv, 0\n"
    "  ret\n"
    "POS:\n"
    "  const rv, 1\n"
    "  ret\n"
    "}\n";

}  // namespace

TEST_CASE("sign function summarizes to exactly two exclusive entries") {
  Program p = parse_program(std::string(kSign) +
                            "fn main {\n"
                            "  input a0\n"
                            "  call sign\n"
                            "  output rv\n"
                            "  halt\n"
                            "}\n");
  ExploreConfig cfg = config(8);
  SummaryTable table;
  Summary s = summarize_function(p, "sign", cfg, table);
  REQUIRE(s.entries.size() == 2);
  CHECK(s.params.arity == 1);
  CHECK(!s.partial);
  const SymId a0 = s.reg_inputs[kRegA0];
  REQUIRE(a0 != 0);
  for (const SummaryEntry& e : s.entries) {
    CHECK(e.theta.empty());
    CHECK(e.end == EndKind::Return);
    CHECK(e.alpha.size() == 1);
    REQUIRE(e.omega);
    CHECK(e.omega->is_const());
  }
  // Fallthrough (not taken) completes first: a0 <= 0 yields 0.
  CHECK(s.entries[0].omega->value == 0);
  CHECK(s.entries[1].omega->value == 1);

  // 256-case brute force: the preconditions are exclusive, exhaustive, and
  // each entry returns what signed comparison demands.
  for (std::uint32_t v = 0; v < 256; ++v) {
    const std::map<SymId, std::uint32_t> env{{a0, v}};
    int holds = 0;
    std::uint32_t rv = 0;
    for (const SummaryEntry& e : s.entries)
      if (alpha_holds(e, env)) {
        ++holds;
        rv = eval_with(e.omega, env);
      }
    REQUIRE(holds == 1);
    const bool positive = v >= 1 && v <= 127;  // signed 8-bit > 0
    CHECK(rv == (positive ? 1u : 0u));
  }
}

TEST_CASE("identity function yields one entry with empty precondition") {
  Program p = parse_program(
      "fn id {\n"
      "  mov rv, a0\n"
      "  ret\n"
      "}\n"
      "fn main {\n"
      "  input a0\n"
      "  call id\n"
      "  output rv\n"
      "  halt\n"
      "}\n");
  ExploreConfig cfg = config(16);
  SummaryTable table;
  Summary s = summarize_function(p, "id", cfg, table);
  REQUIRE(s.entries.size() == 1);
  const SummaryEntry& e = s.entries[0];
  CHECK(e.alpha.empty());
  CHECK(e.theta.empty());
  REQUIRE(e.omega);
  CHECK(e.omega->is_sym());
  CHECK(e.omega->sym == s.reg_inputs[kRegA0]);
  // Solver-level equivalence, not just structural identity.
  TermPtr arg = make_input(s.reg_inputs[kRegA0], "a0", 16);
  CHECK(equivalent(e.omega, arg, {}, cfg.solver) == Tri::True);
}

TEST_CASE("allocating function carries its chunk base as a fresh symbol") {
  Program p = parse_program(
      "fn mk {\n"
      "  const a0, 4\n"
      "  alloc rv, a0\n"
      "  ret\n"
      "}\n"
      "fn main {\n"
      "  call mk\n"
      "  halt\n"
      "}\n");
  ExploreConfig cfg = config(16);
  SummaryTable table;
  Summary s = summarize_function(p, "mk", cfg, table);
  REQUIRE(s.entries.size() == 1);
  const SummaryEntry& e = s.entries[0];
  REQUIRE(e.theta.size() == 1);
  CHECK(e.theta[0].op == EffectOp::Malloc);
  CHECK(e.theta[0].size_concrete == 4);
  REQUIRE(e.malloc_bases.size() == 1);
  REQUIRE(e.omega);
  CHECK(e.omega->is_sym());
  CHECK(e.omega->sym == e.malloc_bases[0]);
  bool listed = false;
  for (const CarriedSym& c : e.carried)
    if (c.sym == e.malloc_bases[0]) {
      listed = true;
      CHECK(!c.input_kind);
    }
  CHECK(listed);
}

TEST_CASE("application replays Malloc in the caller and binds the base") {
  Program p = parse_program(
      "fn mk {\n"
      "  const a0, 4\n"
      "  alloc rv, a0\n"
      "  ret\n"
      "}\n"
      "fn main {\n"
      "  call mk\n"
      "  free rv\n"
      "  halt\n"
      "}\n");
  ExploreConfig cfg = config(16);
  SummaryTable table;
  Report r = run_compositional(p, cfg, table);
  CHECK(r.metrics.paths_completed == 1);
  CHECK(r.bugs.empty());  // the freed chunk really exists in the caller
  REQUIRE(r.paths.size() == 1);
  int mallocs = 0, frees = 0;
  for (const SideEffect& e : r.paths[0].log) {
    if (e.op == EffectOp::Malloc) ++mallocs;
    if (e.op == EffectOp::Free) ++frees;
  }
  CHECK(mallocs == 1);
  CHECK(frees == 1);
}

TEST_CASE("concrete argument selects exactly one sign entry") {
  Program p = parse_program(std::string(kSign) +
                            "fn main {\n"
                            "  const a0, 5\n"
                            "  call sign\n"
                            "  output rv\n"
                            "  halt\n"
                            "}\n");
  ExploreConfig cfg = config(8);
  SummaryTable table;
  Report r = run_compositional(p, cfg, table);
  CHECK(r.metrics.paths_completed == 1);
  REQUIRE(r.paths.size() == 1);
  REQUIRE(r.paths[0].outputs.size() == 1);
  CHECK(r.paths[0].outputs[0]->is_const());
  CHECK(r.paths[0].outputs[0]->value == 1);
}

TEST_CASE("symbolic argument forks the caller across both sign entries") {
  Program p = parse_program(std::string(kSign) +
                            "fn main {\n"
                            "  input a0\n"
                            "  call sign\n"
                            "  output rv\n"
                            "  halt\n"
                            "}\n");
  ExploreConfig cfg = config(8);
  SummaryTable table;
  Report r = run_compositional(p, cfg, table);
  CHECK(r.metrics.paths_completed == 2);
  std::set<std::uint32_t> outs;
  for (const PathOutcome& po : r.paths) {
    REQUIRE(po.outputs.size() == 1);
    REQUIRE(po.outputs[0]->is_const());
    outs.insert(po.outputs[0]->value);
  }
  CHECK(outs == std::set<std::uint32_t>{0, 1});
  CHECK(table.hits == 0);
  CHECK(table.misses == 1);
  CHECK(table.summarizations == 1);
}

TEST_CASE("freeing through a reference parameter defers to the caller") {
  Program p = parse_program(
      "fn rel {\n"
      "  free a0\n"
      "  ret\n"
      "}\n"
      "fn main {\n"
      "  const t0, 4\n"
      "  alloc a0, t0\n"
      "  call rel\n"
      "  call rel\n"
      "  halt\n"
      "}\n");
  ExploreConfig cfg = config(16);
  SummaryTable table;
  Summary s = summarize_function(p, "rel", cfg, table);
  REQUIRE(s.params.arity == 1);
  CHECK(s.params.kinds[0] == ParamKind::Reference);
  REQUIRE(s.entries.size() == 1);
  REQUIRE(s.entries[0].theta.size() == 1);
  CHECK(s.entries[0].theta[0].op == EffectOp::Free);
  // The freed address is the parameter itself.
  REQUIRE(s.entries[0].theta[0].addr);
  CHECK(s.entries[0].theta[0].addr->is_sym());
  CHECK(s.entries[0].theta[0].addr->sym == s.reg_inputs[kRegA0]);

  Report r = run_compositional(p, cfg, table);
  const auto pairs = bug_pairs(r);
  // The second application frees an already-freed chunk, inside rel's code.
  CHECK(pairs.count({int(BugKind::DoubleFree), "rel"}) == 1);
  CHECK(table.hits >= 1);
  CHECK(table.summarizations == 1);
}

TEST_CASE("nested calls summarize lazily, once per function") {
  Program p = parse_program(
      "fn g {\n"
      "  const rv, 3\n"
      "  ret\n"
      "}\n"
      "fn f {\n"
      "  call g\n"
      "  add rv, rv, rv\n"
      "  ret\n"
      "}\n"
      "fn main {\n"
      "  call f\n"
      "  mov t0, rv\n"
      "  call f\n"
      "  add rv, rv, t0\n"
      "  output rv\n"
      "  halt\n"
      "}\n");
  ExploreConfig cfg = config(16);
  SummaryTable table;
  Report r = run_compositional(p, cfg, table);
  CHECK(table.summaries.size() == 2);
  CHECK(table.summarizations == 2);
  CHECK(table.misses == 2);
  CHECK(table.hits == 1);  // second call to f
  REQUIRE(r.paths.size() == 1);
  REQUIRE(r.paths[0].outputs.size() == 1);
  CHECK(r.paths[0].outputs[0]->is_const());
  CHECK(r.paths[0].outputs[0]->value == 12);
  // Work accounting: the caller's own run is one state; the two summarizing
  // runs (one state each) are reported as separate, amortizable work.
  CHECK(r.metrics.states_explored == 1);
  CHECK(r.summary_work.states_explored == 2);
}

TEST_CASE("self-recursion falls back to a havoc result and terminates") {
  Program p = parse_program(
      "fn r {\n"
      "  call r\n"
      "  ret\n"
      "}\n"
      "fn main {\n"
      "  call r\n"
      "  output rv\n"
      "  halt\n"
      "}\n");
  ExploreConfig cfg = config(16);
  SummaryTable table;
  Report r = run_compositional(p, cfg, table);
  CHECK(table.havoc_calls >= 1);
  CHECK(table.summarizations == 1);
  CHECK(r.metrics.paths_completed == 1);
  REQUIRE(r.paths.size() == 1);
  REQUIRE(r.paths[0].outputs.size() == 1);
  CHECK(r.paths[0].outputs[0]->is_sym());  // unconstrained, not a made-up const
}

TEST_CASE("summary soundness: single-argument function vs interpreter") {
  const std::string fsrc =
      "fn tri {\n"
      "  const t0, 10\n"
      "  blt a0, t0, SMALL\n"
      "  mul rv, a0, a0\n"
      "  ret\n"
      "SMALL:\n"
      "  add rv, a0, a0\n"
      "  ret\n"
      "}\n";
  Program p = parse_program(fsrc +
                            "fn main {\n"
                            "  input a0\n"
                            "  call tri\n"
                            "  output rv\n"
                            "  halt\n"
                            "}\n");
  ExploreConfig cfg = config(8);
  SummaryTable table;
  Summary s = summarize_function(p, "tri", cfg, table);
  const SymId a0 = s.reg_inputs[kRegA0];
  for (std::uint32_t v = 0; v < 256; ++v) {
    InterpResult ir = interpret(p, {v}, 8);
    REQUIRE(ir.outputs.size() == 1);
    int holds = 0;
    std::uint32_t rv = 0;
    for (const SummaryEntry& e : s.entries)
      if (alpha_holds(e, {{a0, v}})) {
        ++holds;
        rv = eval_with(e.omega, {{a0, v}});
      }
    REQUIRE(holds >= 1);  // disjunction of preconditions covers every input
    CHECK(holds == 1);
    CHECK(rv == ir.outputs[0]);
  }
}

TEST_CASE("summary soundness: two-argument function vs interpreter") {
  Program p = parse_program(
      "fn mix {\n"
      "  blt a0, a1, LT\n"
      "  sub rv, a0, a1\n"
      "  ret\n"
      "LT:\n"
      "  sub rv, a1, a0\n"
      "  ret\n"
      "}\n"
      "fn main {\n"
      "  input a0\n"
      "  input a1\n"
      "  call mix\n"
      "  output rv\n"
      "  halt\n"
      "}\n");
  ExploreConfig cfg = config(8);
  SummaryTable table;
  Summary s = summarize_function(p, "mix", cfg, table);
  CHECK(s.params.arity == 2);
  const SymId a0 = s.reg_inputs[kRegA0];
  const SymId a1 = s.reg_inputs[kRegA0 + 1];
  for (std::uint32_t x = 0; x < 256; ++x) {
    for (std::uint32_t y = 0; y < 256; ++y) {
      InterpResult ir = interpret(p, {x, y}, 8);
      int holds = 0;
      std::uint32_t rv = 0;
      for (const SummaryEntry& e : s.entries)
        if (alpha_holds(e, {{a0, x}, {a1, y}})) {
          ++holds;
          rv = eval_with(e.omega, {{a0, x}, {a1, y}});
        }
      REQUIRE(holds == 1);
      REQUIRE(rv == ir.outputs.at(0));
    }
  }
}

TEST_CASE("halting inside a callee halts the caller with its outputs") {
  Program p = parse_program(
      "fn maybe_stop {\n"
      "  const t8, 7\n"
      "  bne a0, t8, GO\n"
      "  output a0\n"
      "  halt\n"
      "GO:\n"
      "  const rv, 1\n"
      "  ret\n"
      "}\n"
      "fn main {\n"
      "  input a0\n"
      "  call maybe_stop\n"
      "  output rv\n"
      "  halt\n"
      "}\n");
  ExploreConfig cfg = config(16);
  SummaryTable table;
  Report r = run_compositional(p, cfg, table);
  CHECK(r.metrics.paths_completed == 2);
  bool saw_halting = false, saw_returning = false;
  for (const PathOutcome& po : r.paths) {
    REQUIRE(po.outputs.size() == 1);
    if (po.outputs[0]->is_const()) {
      CHECK(po.outputs[0]->value == 1);
      saw_returning = true;
    } else {
      // The halting path emits the callee's input read; the caller records
      // that read in its own input order for differential replay.
      REQUIRE(po.input_order.size() == 1);
      CHECK(po.outputs[0]->sym == po.input_order[0]);
      saw_halting = true;
    }
  }
  CHECK(saw_halting);
  CHECK(saw_returning);
}

TEST_CASE("global writes replay into the caller's memory") {
  Program p = parse_program(
      "fn setg {\n"
      "  const t9, 0x100\n"
      "  const t8, 7\n"
      "  store t9, 0, t8\n"
      "  ret\n"
      "}\n"
      "fn main {\n"
      "  call setg\n"
      "  const t9, 0x100\n"
      "  load t0, t9, 0\n"
      "  output t0\n"
      "  halt\n"
      "}\n");
  ExploreConfig cfg = config(16);
  SummaryTable table;
  Summary s = summarize_function(p, "setg", cfg, table);
  REQUIRE(s.entries.size() == 1);
  REQUIRE(s.entries[0].theta.size() == 1);
  CHECK(s.entries[0].theta[0].op == EffectOp::GlobalWrite);

  Report r = run_compositional(p, cfg, table);
  REQUIRE(r.paths.size() == 1);
  REQUIRE(r.paths[0].outputs.size() == 1);
  REQUIRE(r.paths[0].outputs[0]->is_const());
  CHECK(r.paths[0].outputs[0]->value == 7);
}

TEST_CASE("reference-parameter reads bind to caller memory and writes land") {
  Program p = parse_program(
      "fn dbl {\n"
      "  load t0, a0, 0\n"
      "  add t0, t0, t0\n"
      "  store a0, 0, t0\n"
      "  mov rv, t0\n"
      "  ret\n"
      "}\n"
      "fn main {\n"
      "  const t0, 4\n"
      "  alloc a0, t0\n"
      "  const t1, 21\n"
      "  store a0, 0, t1\n"
      "  call dbl\n"
      "  load t2, a0, 0\n"
      "  add t3, rv, t2\n"
      "  output t3\n"
      "  halt\n"
      "}\n");
  ExploreConfig cfg = config(16);
  SummaryTable table;
  Summary s = summarize_function(p, "dbl", cfg, table);
  REQUIRE(s.params.arity == 1);
  CHECK(s.params.kinds[0] == ParamKind::Reference);
  REQUIRE(s.entries.size() == 1);
  REQUIRE(s.entries[0].reads.size() == 1);
  CHECK(s.entries[0].reads[0].src == EntryRead::Src::RefParam);
  CHECK(s.entries[0].reads[0].param == 0);
  CHECK(s.entries[0].reads[0].offset == 0);

  Report r = run_compositional(p, cfg, table);
  REQUIRE(r.paths.size() == 1);
  REQUIRE(r.paths[0].outputs.size() == 1);
  REQUIRE(r.paths[0].outputs[0]->is_const());
  CHECK(r.paths[0].outputs[0]->value == 84);  // rv 42 + cell 42
}

TEST_CASE("compositional equals baseline on a call-free program") {
  GenSpec spec;
  spec.depth = 1;
  spec.iters = 8;
  Program p = parse_program(gen_nested_loops(spec));
  ExploreConfig cfg = config(16);
  Report base = explore(p, cfg);
  Report comp = run_compositional(p, cfg);
  CHECK(comp.metrics.states_explored == base.metrics.states_explored);
  CHECK(comp.metrics.paths_completed == base.metrics.paths_completed);
  CHECK(comp.metrics.states_explored == 17);
}

TEST_CASE("interprocedural canary smash survives summarization") {
  Program p = parse_program(
      "fn g {\n"
      "  const t9, 0x77\n"
      "  store sp, 0, t9\n"
      "  ret\n"
      "}\n"
      "fn f {\n"
      "  call g\n"
      "  ret\n"
      "}\n"
      "fn main {\n"
      "  call f\n"
      "  halt\n"
      "}\n");
  ExploreConfig cfg = config(16);
  Report base = explore(p, cfg);
  Report comp = run_compositional(p, cfg);
  const auto bp = bug_pairs(base);
  const auto cp = bug_pairs(comp);
  CHECK(bp.count({int(BugKind::StackSmash), "g"}) == 1);
  for (const auto& pr : bp) CHECK(cp.count(pr) == 1);
}

TEST_CASE("combine_side_effects pairs frees and uses across one path") {
  Program p = parse_program(
      "fn main {\n"
      "  const t0, 4\n"
      "  alloc t1, t0\n"
      "  free t1\n"
      "  input t2\n"
      "  add t3, t1, t2\n"
      "  const t4, 9\n"
      "  store t3, 0, t4\n"
      "  free t1\n"
      "  halt\n"
      "}\n");
  ExploreConfig cfg = config(16);
  Report r = explore(p, cfg);
  std::vector<BugReport> findings = combine_side_effects(r, cfg.solver);
  bool uaf = false, dfree = false;
  for (const BugReport& b : findings) {
    if (b.kind == BugKind::UAF) {
      uaf = true;
      // The witness satisfies the pairing: the symbolic write aliases the
      // freed chunk when the input offset is zero.
      REQUIRE(b.witness.has_value());
      for (const TermPtr& c : b.pc)
        CHECK(eval_term(c, b.witness->as_map()) == 1);
    }
    if (b.kind == BugKind::DoubleFree) dfree = true;
  }
  CHECK(uaf);
  CHECK(dfree);
}

TEST_CASE("combine_side_effects stays quiet for disjoint chunks") {
  Program p = parse_program(
      "fn main {\n"
      "  const t0, 4\n"
      "  alloc t1, t0\n"
      "  free t1\n"
      "  alloc t2, t0\n"
      "  const t4, 9\n"
      "  store t2, 0, t4\n"
      "  free t2\n"
      "  halt\n"
      "}\n");
  ExploreConfig cfg = config(16);
  Report r = explore(p, cfg);
  std::vector<BugReport> findings = combine_side_effects(r, cfg.solver);
  CHECK(findings.empty());  // distinct bases never alias
}

TEST_CASE("summary cache round-trips and suppresses resummarization") {
  Program p = parse_program(
      "fn rel {\n"
      "  free a0\n"
      "  ret\n"
      "}\n"
      "fn main {\n"
      "  const t0, 4\n"
      "  alloc a0, t0\n"
      "  call rel\n"
      "  call rel\n"
      "  halt\n"
      "}\n");
  ExploreConfig cfg = config(16);
  SummaryTable warm;
  Report first = run_compositional(p, cfg, warm);
  const std::string json = table_to_json(warm, p, cfg);

  SummaryTable cold;
  REQUIRE(table_from_json(json, p, cfg, cold));
  CHECK(cold.summaries.size() == warm.summaries.size());
  Report second = run_compositional(p, cfg, cold);
  CHECK(cold.summarizations == 0);
  CHECK(cold.hits == 2);
  CHECK(bug_pairs(first) == bug_pairs(second));

  // A different program (or bounds) must invalidate the cache.
  Program q = parse_program(
      "fn main {\n"
      "  halt\n"
      "}\n");
  SummaryTable stale;
  CHECK(!table_from_json(json, q, cfg, stale));
  ExploreConfig other = cfg;
  other.loop_limit = cfg.loop_limit + 1;
  CHECK(!table_from_json(json, p, other, stale));
}

TEST_CASE("loop-limit pruning marks the summary partial without a catch-all") {
  // The loop limit applies identically when the callee is explored inline, so
  // the bounded entries already match an inline run; no havoc entry appears.
  Program p = parse_program(
      "fn spin {\n"
      "  const t0, 0\n"
      "L:\n"
      "  beq t0, a0, DONE\n"
      "  const t9, 1\n"
      "  add t0, t0, t9\n"
      "  jmp L\n"
      "DONE:\n"
      "  mov rv, t0\n"
      "  ret\n"
      "}\n"
      "fn main {\n"
      "  input a0\n"
      "  call spin\n"
      "  output rv\n"
      "  halt\n"
      "}\n");
  ExploreConfig cfg = config(16);
  cfg.loop_limit = 4;
  SummaryTable table;
  Summary s = summarize_function(p, "spin", cfg, table);
  CHECK(s.partial);
  REQUIRE(s.entries.size() == 5);  // trip counts 0..4
  for (const SummaryEntry& e : s.entries) {
    CHECK(!e.havoc);
    REQUIRE(e.omega);
    CHECK(e.omega->is_const());
  }
  Report r = run_compositional(p, cfg, table);
  CHECK(r.metrics.paths_completed == 5);
}

TEST_CASE("state-budget truncation appends a havoc catch-all entry") {
  Program p = parse_program(
      "fn spin {\n"
      "  const t0, 0\n"
      "L:\n"
      "  beq t0, a0, DONE\n"
      "  const t9, 1\n"
      "  add t0, t0, t9\n"
      "  jmp L\n"
      "DONE:\n"
      "  mov rv, t0\n"
      "  ret\n"
      "}\n"
      "fn main {\n"
      "  call spin\n"
      "  halt\n"
      "}\n");
  ExploreConfig cfg = config(16);
  cfg.max_states = 3;
  SummaryTable table;
  Summary s = summarize_function(p, "spin", cfg, table);
  CHECK(s.partial);
  REQUIRE(!s.entries.empty());
  const SummaryEntry& last = s.entries.back();
  CHECK(last.havoc);
  CHECK(last.alpha.empty());
  CHECK(last.theta.empty());
  REQUIRE(last.omega);
  CHECK(last.omega->is_sym());
}
