#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <set>
#include <string>
#include <vector>

#include "symsum/gen.hpp"
#include "symsum/interp.hpp"
#include "symsum/outline.hpp"
#include "symsum/summary.hpp"

using namespace symsum;

namespace {

Program gen_program(int depth, int iters, bool with_bug = false) {
  GenSpec spec;
  spec.depth = depth;
  spec.iters = iters;
  spec.with_bug = with_bug;
  return parse_program(gen_nested_loops(spec));
}

bool same_concrete_run(const Program& a, const Program& b,
                       const std::vector<std::uint32_t>& inputs, int width) {
  InterpResult ra = interpret(a, inputs, width);
  InterpResult rb = interpret(b, inputs, width);
  return ra.outputs == rb.outputs && ra.stop == rb.stop;
}

std::set<int> bug_kinds(const Report& r) {
  std::set<int> out;
  for (const BugReport& b : r.bugs) out.insert(int(b.kind));
  return out;
}

ExploreConfig config(int width, int loop_limit) {
  ExploreConfig cfg;
  cfg.solver.width = width;
  cfg.loop_limit = loop_limit;
  return cfg;
}

}  // namespace

TEST_CASE("depth-1 programs are left untouched") {
  Program p = gen_program(1, 8);
  OutlineResult res = outline_program(p);
  CHECK(res.outlined.empty());
  CHECK(res.skipped.empty());
  CHECK(unparse(res.program) == unparse(p));
}

TEST_CASE("a two-level nest yields one synthetic function") {
  Program p = gen_program(2, 10);
  OutlineResult res = outline_inner_loops(p, "main");
  REQUIRE(res.outlined.size() == 1);
  CHECK(res.skipped.empty());
  CHECK(res.outlined[0].name == "main$loop0");
  CHECK(res.outlined[0].parent == "main");
  // The inner loop consumes its counter and the accumulator, and hands the
  // accumulator back: live-ins {t2, t6}, live-out {t6}.
  CHECK(res.outlined[0].live_in == std::vector<int>{kRegT0 + 2, kRegT0 + 6});
  CHECK(res.outlined[0].live_out == std::vector<int>{kRegT0 + 6});
  REQUIRE(res.program.functions.count("main$loop0") == 1);

  const std::string parent = unparse(res.program.functions.at("main"));
  CHECK(parent.find("mov a0, t2") != std::string::npos);
  CHECK(parent.find("mov a1, t6") != std::string::npos);
  CHECK(parent.find("call main$loop0") != std::string::npos);
  CHECK(parent.find("mov t6, rv") != std::string::npos);

  const std::string callee = unparse(res.program.functions.at("main$loop0"));
  CHECK(callee.find("mov t6, a1") != std::string::npos);
  CHECK(callee.find("mov t2, a0") != std::string::npos);
  CHECK(callee.find("mov rv, t6") != std::string::npos);
  CHECK(callee.find("input t0") != std::string::npos);  // body moved across
  CHECK(callee.find("ret") != std::string::npos);
}

TEST_CASE("depth-3 and depth-4 nests peel one synthetic per inner level") {
  OutlineResult r3 = outline_program(gen_program(3, 8));
  REQUIRE(r3.outlined.size() == 2);
  CHECK(r3.outlined[0].name == "main$loop0");
  CHECK(r3.outlined[1].name == "main$loop1");
  // The second extraction wraps the first: the middle loop calls the inner.
  const std::string mid = unparse(r3.program.functions.at("main$loop1"));
  CHECK(mid.find("call main$loop0") != std::string::npos);

  OutlineResult r4 = outline_program(gen_program(4, 8));
  CHECK(r4.outlined.size() == 3);
}

TEST_CASE("outlined generators preserve every concrete run") {
  for (int depth : {2, 3}) {
    Program p = gen_program(depth, 8);
    OutlineResult res = outline_program(p);
    for (std::uint32_t v = 0; v < 256; ++v)
      REQUIRE(same_concrete_run(p, res.program, {v}, 8));
  }
  // Spot checks at the wider width, including the halting input.
  Program p = gen_program(2, 8);
  OutlineResult res = outline_program(p);
  for (std::uint32_t v : {0u, 3u, 7u, 200u, 65535u})
    CHECK(same_concrete_run(p, res.program, {v}, 16));
}

TEST_CASE("two live-outs travel through a caller-stack cell block") {
  Program p = parse_program(
      "fn main {\n"
      "  const t1, 0\n"
      "OUTER:\n"
      "  const t9, 3\n"
      "  bge t1, t9, ODONE\n"
      "  const t2, 0\n"
      "  const t3, 0\n"
      "  const t4, 0\n"
      "INNER:\n"
      "  const t9, 4\n"
      "  bge t2, t9, IDONE\n"
      "  add t3, t3, t2\n"
      "  const t9, 2\n"
      "  add t4, t4, t9\n"
      "  const t9, 1\n"
      "  add t2, t2, t9\n"
      "  jmp INNER\n"
      "IDONE:\n"
      "  add t5, t3, t4\n"
      "  output t5\n"
      "  const t9, 1\n"
      "  add t1, t1, t9\n"
      "  jmp OUTER\n"
      "ODONE:\n"
      "  halt\n"
      "}\n");
  OutlineResult res = outline_inner_loops(p, "main");
  REQUIRE(res.outlined.size() == 1);
  CHECK(res.outlined[0].live_in ==
        std::vector<int>{kRegT0 + 2, kRegT0 + 3, kRegT0 + 4});
  CHECK(res.outlined[0].live_out ==
        std::vector<int>{kRegT0 + 3, kRegT0 + 4});

  const std::string parent = unparse(res.program.functions.at("main"));
  CHECK(parent.find("sub a3, sp, a3") != std::string::npos);
  CHECK(parent.find("load t3, a3, 0") != std::string::npos);
  CHECK(parent.find("load t4, a3, 1") != std::string::npos);
  const std::string callee = unparse(res.program.functions.at("main$loop0"));
  CHECK(callee.find("store a3, 0, t3") != std::string::npos);
  CHECK(callee.find("store a3, 1, t4") != std::string::npos);

  for (int w : {8, 16}) REQUIRE(same_concrete_run(p, res.program, {}, w));

  // The whole chain holds up symbolically too: summarizing the synthetic
  // binds the cell writes back into the caller's stack.
  ExploreConfig cfg = config(16, 32);
  Report base = explore(p, cfg);
  Report comp = run_compositional(res.program, cfg);
  REQUIRE(base.paths.size() == 1);
  REQUIRE(comp.paths.size() == 1);
  REQUIRE(comp.paths[0].outputs.size() == 3);
  for (int j = 0; j < 3; ++j) {
    REQUIRE(base.paths[0].outputs[j]->is_const());
    REQUIRE(comp.paths[0].outputs[j]->is_const());
    CHECK(base.paths[0].outputs[j]->value == 14);
    CHECK(comp.paths[0].outputs[j]->value == 14);
  }
}

TEST_CASE("a ret inside the loop span blocks outlining") {
  Program p = parse_program(
      "fn f {\n"
      "  const t0, 0\n"
      "A:\n"
      "  const t9, 3\n"
      "  bge t0, t9, DONE\n"
      "  const t1, 0\n"
      "B:\n"
      "  const t9, 2\n"
      "  bge t1, t9, C\n"
      "  beq t1, t0, R\n"
      "  jmp G\n"
      "R:\n"
      "  ret\n"
      "G:\n"
      "  const t9, 1\n"
      "  add t1, t1, t9\n"
      "  jmp B\n"
      "C:\n"
      "  const t9, 1\n"
      "  add t0, t0, t9\n"
      "  jmp A\n"
      "DONE:\n"
      "  ret\n"
      "}\n"
      "fn main {\n"
      "  call f\n"
      "  halt\n"
      "}\n");
  OutlineResult res = outline_inner_loops(p, "f");
  CHECK(res.outlined.empty());
  REQUIRE(res.skipped.size() == 1);
  CHECK(res.skipped[0].find("contains ret") != std::string::npos);
  CHECK(unparse(res.program) == unparse(p));
}

TEST_CASE("a loop leaving to two places is skipped") {
  Program p = parse_program(
      "fn g {\n"
      "  const t0, 0\n"
      "A:\n"
      "  const t9, 3\n"
      "  bge t0, t9, DONE\n"
      "  const t1, 0\n"
      "B:\n"
      "  const t9, 2\n"
      "  bge t1, t9, C\n"
      "  beq t1, t0, ESC\n"
      "  const t9, 1\n"
      "  add t1, t1, t9\n"
      "  jmp B\n"
      "C:\n"
      "  const t9, 1\n"
      "  add t0, t0, t9\n"
      "  jmp A\n"
      "ESC:\n"
      "  halt\n"
      "DONE:\n"
      "  ret\n"
      "}\n"
      "fn main {\n"
      "  call g\n"
      "  halt\n"
      "}\n");
  OutlineResult res = outline_inner_loops(p, "g");
  CHECK(res.outlined.empty());
  REQUIRE(res.skipped.size() == 1);
  CHECK(res.skipped[0].find("multiple continuations") != std::string::npos);
}

TEST_CASE("stack-pointer use inside the loop is skipped") {
  Program p = parse_program(
      "fn h {\n"
      "  const t0, 0\n"
      "A:\n"
      "  const t9, 3\n"
      "  bge t0, t9, DONE\n"
      "  const t1, 0\n"
      "B:\n"
      "  const t9, 2\n"
      "  bge t1, t9, C\n"
      "  lea t5, sp, 0\n"
      "  const t9, 1\n"
      "  add t1, t1, t9\n"
      "  jmp B\n"
      "C:\n"
      "  const t9, 1\n"
      "  add t0, t0, t9\n"
      "  jmp A\n"
      "DONE:\n"
      "  ret\n"
      "}\n"
      "fn main {\n"
      "  call h\n"
      "  halt\n"
      "}\n");
  OutlineResult res = outline_inner_loops(p, "h");
  CHECK(res.outlined.empty());
  REQUIRE(res.skipped.size() == 1);
  CHECK(res.skipped[0].find("stack pointer") != std::string::npos);
}

TEST_CASE("loops needing more than six parameters are skipped") {
  Program p = parse_program(
      "fn k {\n"
      "  const t0, 0\n"
      "A:\n"
      "  const t9, 3\n"
      "  bge t0, t9, DONE\n"
      "  const t1, 0\n"
      "B:\n"
      "  const t9, 2\n"
      "  bge t1, t9, C\n"
      "  add t2, t2, t3\n"
      "  add t2, t2, t4\n"
      "  add t2, t2, t5\n"
      "  add t2, t2, t6\n"
      "  add t2, t2, t7\n"
      "  add t2, t2, t8\n"
      "  const t9, 1\n"
      "  add t1, t1, t9\n"
      "  jmp B\n"
      "C:\n"
      "  output t2\n"
      "  const t9, 1\n"
      "  add t0, t0, t9\n"
      "  jmp A\n"
      "DONE:\n"
      "  ret\n"
      "}\n"
      "fn main {\n"
      "  call k\n"
      "  halt\n"
      "}\n");
  OutlineResult res = outline_inner_loops(p, "k");
  CHECK(res.outlined.empty());
  REQUIRE(res.skipped.size() == 1);
  CHECK(res.skipped[0].find("too many live-in registers") !=
        std::string::npos);
}

TEST_CASE("outlining composes with summarization on the bug generator") {
  Program p = gen_program(2, 8, /*with_bug=*/true);
  OutlineResult res = outline_program(p);
  REQUIRE(res.outlined.size() == 1);
  ExploreConfig cfg = config(8, 16);
  Report base = explore(p, cfg);
  Report comp = run_compositional(res.program, cfg);
  CHECK(!bug_kinds(base).empty());
  CHECK(bug_kinds(base) == bug_kinds(comp));
}

TEST_CASE("summary states on outlined programs stay flat across depths") {
  ExploreConfig cfg = config(8, 16);
  Report d1 = run_compositional(gen_program(1, 8), cfg);
  CHECK(d1.metrics.states_explored == 17);
  for (int depth : {2, 3}) {
    OutlineResult res = outline_program(gen_program(depth, 8));
    Report r = run_compositional(res.program, cfg);
    CHECK(r.metrics.states_explored == d1.metrics.states_explored);
    CHECK(!r.incomplete);
  }
}

TEST_CASE("outlining twice produces identical text") {
  Program p = gen_program(3, 8);
  OutlineResult a = outline_program(p);
  OutlineResult b = outline_program(p);
  CHECK(unparse(a.program) == unparse(b.program));
  CHECK(a.skipped == b.skipped);
}

TEST_CASE("unknown function names are rejected") {
  Program p = gen_program(1, 4);
  CHECK_THROWS_AS(outline_inner_loops(p, "nope"), std::invalid_argument);
}

TEST_CASE("bound schedule follows the round outcome") {
  BoundSchedule s;
  s.bound = 8;
  s.increment = 4;
  s.wall_budget_s = 300.0;
  s.live_state_cap = 10000;

  RoundMetrics fine;
  fine.pruned = true;
  fine.wall_s = 1.0;
  fine.peak_states = 100;
  ScheduleDecision d = schedule_loop_bounds(s, fine);
  CHECK(d.action == ScheduleAction::Continue);
  CHECK(d.bound == 12);

  RoundMetrics settled;
  settled.pruned = false;
  settled.wall_s = 1.0;
  BoundSchedule s32 = s;
  s32.bound = 32;
  d = schedule_loop_bounds(s32, settled);
  CHECK(d.action == ScheduleAction::Exhaustive);
  CHECK(d.bound == 32);

  RoundMetrics slow;
  slow.pruned = true;
  slow.wall_s = 400.0;
  BoundSchedule s16 = s;
  s16.bound = 16;
  d = schedule_loop_bounds(s16, slow);
  CHECK(d.action == ScheduleAction::BudgetStop);
  CHECK(d.bound == 12);

  RoundMetrics fat;
  fat.pruned = true;
  fat.wall_s = 1.0;
  fat.peak_states = 20000;
  d = schedule_loop_bounds(s, fat);
  CHECK(d.action == ScheduleAction::BudgetStop);
  CHECK(d.bound == 4);

  // Disabled budgets never trip.
  BoundSchedule open = s;
  open.wall_budget_s = 0;
  open.live_state_cap = 0;
  d = schedule_loop_bounds(open, slow);
  CHECK(d.action == ScheduleAction::Continue);
  CHECK(d.bound == 12);
}
