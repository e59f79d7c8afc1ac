#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <set>
#include <string>
#include <vector>

#include "symsum/ir.hpp"

using namespace symsum;

namespace {

// Independent dominator oracle: a dominates b iff b becomes unreachable from
// the entry when traversal is forbidden from visiting a.
bool dom_oracle(const Cfg& cfg, int a, int b) {
  if (a == b) return true;
  std::vector<bool> seen(cfg.blocks.size(), false);
  std::vector<int> work;
  if (a != 0) {
    seen[0] = true;
    work.push_back(0);
  }
  while (!work.empty()) {
    int x = work.back();
    work.pop_back();
    for (int s : cfg.blocks[x].succs) {
      if (s == a || seen[s]) continue;
      seen[s] = true;
      work.push_back(s);
    }
  }
  return !seen[b];
}

void check_dominators_against_oracle(const Function& fn) {
  Cfg cfg = build_cfg(fn);
  REQUIRE(cfg.blocks.size() <= 12);
  for (int b = 0; b < int(cfg.blocks.size()); ++b) {
    if (!cfg.reachable[b]) continue;
    for (int a = 0; a < int(cfg.blocks.size()); ++a) {
      CAPTURE(fn.name);
      CAPTURE(a);
      CAPTURE(b);
      CHECK(dominates(cfg, a, b) == dom_oracle(cfg, a, b));
    }
  }
  for (const auto& [tail, head] : cfg.back_edges)
    CHECK(dominates(cfg, head, tail));
}

void check_roundtrip(const std::string& text) {
  std::string once = unparse(parse_program(text));
  std::string twice = unparse(parse_program(once));
  CHECK(once == twice);
}

const char* kDiamond = R"(
fn d {
  input t0
  const t1, 0
  beq t0, t1, L1
  const t2, 1
  jmp J
L1:
  const t2, 2
J:
  output t2
  halt
}
)";

const char* kLoop = R"(
fn loop1 {
  const t0, 0
  const t1, 10
L:
  add t0, t0, t1
  blt t0, t1, L
  halt
}
)";

const char* kNested = R"(
fn n2 {
  const t1, 0
  const t5, 3
L1:
  const t2, 0
L2:
  input t0
  add t6, t6, t0
  const t9, 1
  add t2, t2, t9
  blt t2, t5, L2
  const t9, 1
  add t1, t1, t9
  blt t1, t5, L1
  halt
}
)";

const char* kSiblings = R"(
fn sib {
  const t0, 0
O:
  const t1, 0
A:
  const t9, 1
  add t1, t1, t9
  blt t1, t9, A
  const t2, 0
B:
  add t2, t2, t9
  blt t2, t9, B
  add t0, t0, t9
  blt t0, t9, O
  halt
}
)";

const char* kIrreducible = R"(
fn irr {
  input t0
  const t1, 0
  beq t0, t1, B
A:
  const t2, 1
  jmp B
B:
  const t2, 2
  jmp A
}
)";

const char* kUnreachable = R"(
fn unr {
  jmp E
  output t0
E:
  halt
}
)";

}  // namespace

TEST_CASE("register set is fixed and bidirectional") {
  const char* expected[] = {"a0", "a1", "a2", "a3", "a4", "a5", "rv", "sp",
                            "t0", "t1", "t2", "t3", "t4", "t5", "t6", "t7",
                            "t8", "t9"};
  REQUIRE(kNumRegs == 18);
  for (int i = 0; i < kNumRegs; ++i) {
    CHECK(reg_name(i) == std::string(expected[i]));
    CHECK(reg_index(expected[i]) == i);
  }
  CHECK(reg_index("x0") == -1);
  CHECK(reg_index("SP") == -1);
}

TEST_CASE("minimal program parses, including single-line form") {
  Program p = parse_program("fn main { halt }");
  REQUIRE(p.functions.size() == 1);
  REQUIRE(p.functions.count("main"));
  REQUIRE(p.functions["main"].instrs.size() == 1);
  CHECK(p.functions["main"].instrs[0].op == Op::Halt);
  CHECK(p.entry == "main");

  Program q = parse_program("fn main {\n  halt\n}\n");
  CHECK(unparse(p) == unparse(q));
}

TEST_CASE("immediates parse in decimal, hex, and negative forms") {
  Program p = parse_program(
      "fn main {\n"
      "  const t0, 42\n"
      "  const t1, 0x2A\n"
      "  const t2, -5\n"
      "  load t3, sp, -2\n"
      "  store sp, 0x10, t3\n"
      "  halt\n"
      "}\n");
  const auto& ins = p.functions["main"].instrs;
  CHECK(ins[0].imm == 42);
  CHECK(ins[1].imm == 42);
  CHECK(ins[2].imm == -5);
  CHECK(ins[3].imm == -2);
  CHECK(ins[4].imm == 16);
}

TEST_CASE("parse errors carry positions and reasons") {
  auto fails = [](const std::string& text, const std::string& needle,
                  int line) {
    try {
      parse_program(text);
      FAIL_CHECK("expected ParseError for: " << text);
    } catch (const ParseError& e) {
      CHECK(std::string(e.what()).find(needle) != std::string::npos);
      CHECK(e.line == line);
    }
  };
  fails("fn main {\n  jmp L\n  halt\n}\n", "undefined label 'L'", 2);
  fails("fn main {\n  frobnicate t0\n  halt\n}\n", "unknown opcode", 2);
  fails("fn main {\n  call g\n  halt\n}\n", "undefined call target 'g'", 2);
  fails("fn main { halt }\nfn main { halt }\n", "duplicate function", 2);
  fails("fn main {\nL:\nL:\n  halt\n}\n", "duplicate label", 3);
  fails("fn main {\n  const t0, 1\n}\n", "fall off the end", 3);
  fails("fn main {\n  halt\nE:\n}\n", "label 'E' at end", 4);
  fails("fn main {\n  mov t0, x9\n  halt\n}\n", "unknown register 'x9'", 2);
  fails("fn main {\n  add t0, t1\n  halt\n}\n", "expects 3 operand(s)", 2);
  fails("fn main {\n  const t0, zap\n  halt\n}\n", "bad immediate", 2);
  fails("fn main {\n  const t0, 0x100000000\n  halt\n}\n", "out of range", 2);
  fails("fn main {\n  halt\n", "missing '}'", 2);
  fails("fn main {\n  halt\nfn g {\n  halt\n}\n", "missing '}'", 3);
}

TEST_CASE("unparse is canonical and round-trips") {
  Program p = parse_program("  fn   main   {  halt  }  ");
  CHECK(unparse(p) == "fn main {\n  halt\n}\n");

  for (const char* text : {kDiamond, kLoop, kNested, kSiblings, kIrreducible,
                           kUnreachable})
    check_roundtrip(text);

  check_roundtrip(
      "fn main {\n"
      "  const a0, 3\n"
      "  call f$helper\n"
      "  jmp X\n"
      "Y:\n"
      "X:\n"
      "  halt\n"
      "}\n"
      "fn f$helper {\n"
      "  alloc rv, a0\n"
      "  free rv\n"
      "  input t4\n"
      "  output t4\n"
      "  shr t1, t4, t4\n"
      "  lea t2, sp, -3\n"
      "  callr t2\n"
      "  jmpr t1\n"
      "}\n");
}

TEST_CASE("structural round trip preserves label placement") {
  Program p = parse_program("fn m {\n  jmp X\nY:\nX:\n  halt\n}\n");
  const Function& f = p.functions["m"];
  REQUIRE(f.labels_in_order.size() == 2);
  CHECK(f.labels_in_order[0].first == "Y");
  CHECK(f.labels_in_order[1].first == "X");
  CHECK(f.label_to_index.at("X") == 1);
  CHECK(f.instrs[0].target == 1);
}

TEST_CASE("straight-line function is one block without back edges") {
  Program p = parse_program("fn main {\n  const t0, 1\n  output t0\n  halt\n}\n");
  Cfg cfg = build_cfg(p.functions["main"]);
  CHECK(cfg.blocks.size() == 1);
  CHECK(cfg.back_edges.empty());
  CHECK(!cfg.irreducible);
}

TEST_CASE("sign check function splits into three blocks") {
  Program p = parse_program(
      "fn check {\n"
      "  const t0, 0\n"
      "  bge t0, a0, NEG\n"
      "  const rv, 1\n"
      "  ret\n"
      "NEG:\n"
      "  const rv, 0\n"
      "  ret\n"
      "}\n");
  Cfg cfg = build_cfg(p.functions["check"]);
  CHECK(cfg.blocks.size() == 3);
  CHECK(cfg.back_edges.empty());
  REQUIRE(cfg.blocks[0].succs.size() == 2);
}

TEST_CASE("single loop yields one back edge headed by a dominator") {
  Program p = parse_program(kLoop);
  Cfg cfg = build_cfg(p.functions["loop1"]);
  REQUIRE(cfg.back_edges.size() == 1);
  auto [tail, head] = cfg.back_edges[0];
  CHECK(dominates(cfg, head, tail));
  LoopForest forest = detect_loops(cfg);
  REQUIRE(forest.loops.size() == 1);
  CHECK(forest.loops[0].depth == 1);
}

TEST_CASE("doubly nested loop produces a depth-2 chain") {
  Program p = parse_program(kNested);
  Cfg cfg = build_cfg(p.functions["n2"]);
  CHECK(cfg.back_edges.size() == 2);
  LoopForest forest = detect_loops(cfg);
  REQUIRE(forest.loops.size() == 2);
  REQUIRE(forest.roots.size() == 1);
  const Loop& outer = forest.loops[forest.roots[0]];
  REQUIRE(outer.children.size() == 1);
  const Loop& inner = forest.loops[outer.children[0]];
  CHECK(outer.depth == 1);
  CHECK(inner.depth == 2);
  CHECK(std::includes(outer.blocks.begin(), outer.blocks.end(),
                      inner.blocks.begin(), inner.blocks.end()));
  CHECK(inner.blocks.size() < outer.blocks.size());
}

TEST_CASE("two sibling loops nest under one outer loop") {
  Program p = parse_program(kSiblings);
  Cfg cfg = build_cfg(p.functions["sib"]);
  CHECK(cfg.back_edges.size() == 3);
  LoopForest forest = detect_loops(cfg);
  REQUIRE(forest.loops.size() == 3);
  REQUIRE(forest.roots.size() == 1);
  const Loop& outer = forest.loops[forest.roots[0]];
  CHECK(outer.children.size() == 2);
  for (int child : outer.children) {
    CHECK(forest.loops[child].depth == 2);
    CHECK(forest.loops[child].children.empty());
  }
}

TEST_CASE("irreducible cycles are flagged, not misclassified") {
  Program p = parse_program(kIrreducible);
  Cfg cfg = build_cfg(p.functions["irr"]);
  CHECK(cfg.irreducible);
  CHECK(cfg.back_edges.empty());
  LoopForest forest = detect_loops(cfg);
  CHECK(forest.irreducible);
  CHECK(forest.loops.empty());
}

TEST_CASE("dominators agree with the removal oracle") {
  for (const char* text : {kDiamond, kLoop, kNested, kSiblings, kIrreducible,
                           kUnreachable}) {
    Program p = parse_program(text);
    for (const std::string& name : p.order)
      check_dominators_against_oracle(p.functions[name]);
  }
}

TEST_CASE("unreachable code stays out of dominator claims") {
  Program p = parse_program(kUnreachable);
  Cfg cfg = build_cfg(p.functions["unr"]);
  REQUIRE(cfg.blocks.size() == 3);
  CHECK(!cfg.reachable[1]);
  CHECK(!dominates(cfg, 1, 2));
  CHECK(dominates(cfg, 0, 2));
}

TEST_CASE("call graph orders callees before callers") {
  Program p = parse_program(
      "fn main {\n  call f\n  halt\n}\n"
      "fn f {\n  call g\n  ret\n}\n"
      "fn g {\n  ret\n}\n");
  CallGraph cg = build_call_graph(p);
  CHECK(cg.order == std::vector<std::string>{"g", "f", "main"});
  CHECK(cg.recursive.empty());

  // Definition order does not matter.
  Program q = parse_program(
      "fn g {\n  ret\n}\n"
      "fn f {\n  call g\n  ret\n}\n"
      "fn main {\n  call f\n  halt\n}\n");
  CHECK(build_call_graph(q).order == cg.order);
}

TEST_CASE("call graph flags recursion") {
  Program p = parse_program("fn main {\n  call main\n  halt\n}\n");
  CallGraph cg = build_call_graph(p);
  CHECK(cg.order == std::vector<std::string>{"main"});
  CHECK(cg.recursive.count("main") == 1);

  Program q = parse_program(
      "fn main {\n  call f\n  halt\n}\n"
      "fn f {\n  call g\n  ret\n}\n"
      "fn g {\n  call f\n  ret\n}\n");
  CallGraph cq = build_call_graph(q);
  CHECK(cq.recursive == std::set<std::string>{"f", "g"});
  CHECK(cq.order.back() == "main");

  Program solo = parse_program("fn main { halt }");
  CHECK(build_call_graph(solo).order == std::vector<std::string>{"main"});
}

TEST_CASE("parameter inference: direct address use is a reference") {
  Program p = parse_program("fn f {\n  store a0, 0, t1\n  ret\n}\n");
  ParamInfo info = infer_param_info(p, "f");
  REQUIRE(info.arity == 1);
  CHECK(info.kinds[0] == ParamKind::Reference);
}

TEST_CASE("parameter inference: overwrite first means value") {
  Program p = parse_program(
      "fn main {\n  const a0, 1\n  call g\n  halt\n}\n"
      "fn g {\n  mov a0, t0\n  output a0\n  ret\n}\n");
  ParamInfo info = infer_param_info(p, "g");
  REQUIRE(info.arity == 1);  // call-site evidence only; body overwrites first
  CHECK(info.kinds[0] == ParamKind::Value);
}

TEST_CASE("parameter inference: traced address arithmetic is a reference") {
  Program p = parse_program(
      "fn h {\n"
      "  add t0, a0, a1\n"
      "  load t1, t0, 0\n"
      "  output t1\n"
      "  ret\n"
      "}\n");
  ParamInfo info = infer_param_info(p, "h");
  REQUIRE(info.arity == 2);
  CHECK(info.kinds[0] == ParamKind::Reference);
  CHECK(info.kinds[1] == ParamKind::Reference);
}

TEST_CASE("parameter inference: freed pointers and forwarded parameters") {
  Program p = parse_program(
      "fn helper {\n  free a0\n  ret\n}\n"
      "fn mid {\n  call helper\n  ret\n}\n");
  ParamInfo helper = infer_param_info(p, "helper");
  REQUIRE(helper.arity == 1);
  CHECK(helper.kinds[0] == ParamKind::Reference);

  // mid forwards a0 untouched; it inherits the callee's reference kind.
  ParamInfo mid = infer_param_info(p, "mid");
  REQUIRE(mid.arity == 1);
  CHECK(mid.kinds[0] == ParamKind::Reference);
}

TEST_CASE("parameter inference: arity grows monotonically with fresh reads") {
  std::string base = "fn f {\n  output a1\n  ret\n}\n";
  std::string more = "fn f {\n  output a3\n  output a1\n  ret\n}\n";
  ParamInfo b = infer_param_info(parse_program(base), "f");
  ParamInfo m = infer_param_info(parse_program(more), "f");
  CHECK(b.arity == 2);
  CHECK(m.arity == 4);
  CHECK(m.arity >= b.arity);
}

TEST_CASE("parameter inference is deterministic") {
  Program p = parse_program(
      "fn main {\n  const a0, 7\n  const a1, 9\n  call f\n  halt\n}\n"
      "fn f {\n  store a0, 1, a1\n  ret\n}\n");
  ParamInfo x = infer_param_info(p, "f");
  ParamInfo y = infer_param_info(p, "f");
  CHECK(x.arity == y.arity);
  REQUIRE(x.kinds.size() == y.kinds.size());
  for (std::size_t i = 0; i < x.kinds.size(); ++i)
    CHECK(x.kinds[i] == y.kinds[i]);
  CHECK(x.arity == 2);
  CHECK(x.kinds[0] == ParamKind::Reference);
  CHECK(x.kinds[1] == ParamKind::Value);
}

TEST_CASE("unknown kinds: call-site-only arity and recursion terminate") {
  Program p = parse_program(
      "fn main {\n  const a0, 5\n  call f\n  halt\n}\n"
      "fn f {\n  call g\n  ret\n}\n"
      "fn g {\n  ret\n}\n");
  ParamInfo info = infer_param_info(p, "f");
  REQUIRE(info.arity == 1);  // call-site evidence; never touched in the body
  CHECK(info.kinds[0] == ParamKind::Unknown);

  Program r = parse_program("fn rec {\n  call rec\n  ret\n}\n");
  ParamInfo rec = infer_param_info(r, "rec");
  CHECK(rec.arity == 0);
}
