#include <algorithm>
#include <cstdio>
#include <string>
#include <vector>

#include "symsum/state.hpp"

namespace symsum {

namespace {

std::string hex_str(std::uint32_t a) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "0x%x", a);
  return buf;
}

void ev(PathState& s, EventKind k, TermPtr addr = nullptr,
        TermPtr value = nullptr, std::string note = "") {
  s.events.push_back(
      {k, s.fn, s.idx, std::move(addr), std::move(value), std::move(note)});
}

bool as_const(const TermPtr& t, std::uint32_t& out) {
  if (t && t->kind == TermKind::Const) {
    out = t->value;
    return true;
  }
  return false;
}

void log_effect(PathState& s, EffectOp op, TermPtr addr, TermPtr value,
                TermPtr size = nullptr, std::uint32_t size_concrete = 0) {
  SideEffect e;
  e.op = op;
  e.addr = std::move(addr);
  e.value = std::move(value);
  e.size = std::move(size);
  e.size_concrete = size_concrete;
  e.origin = s.fn;
  s.log.push_back(std::move(e));
}

TermPtr read_concrete(PathState& s, std::uint32_t a, ExecContext& ctx) {
  const int w = ctx.layout.width;
  note_access(s, a, false, ctx);
  TermPtr v;
  auto it = s.mem.find(a);
  if (it == s.mem.end()) {
    // Unmapped cell: its initial content is an implicit input of the program,
    // cached so repeated reads observe one symbol.
    const SymId id = ctx.gen->next();
    v = make_input(id, "g@" + hex_str(a), w);
    s.mem[a] = Cell::make_data(v);
    s.implicit_reads.emplace_back(id, a);
  } else if (it->second.kind == Cell::Kind::Data) {
    v = it->second.data;
  } else {
    ev(s, EventKind::UnconstrainedAccess, make_const(a, w), nullptr,
       it->second.kind == Cell::Kind::CodeToken ? "return token read as data"
                                                : "canary read as data");
    v = make_fresh(ctx.gen->next(), "opaque@" + hex_str(a), w);
  }
  log_effect(s, EffectOp::MemRead, make_const(a, w), v);
  return v;
}

void write_concrete(PathState& s, std::uint32_t a, const TermPtr& v,
                    ExecContext& ctx) {
  note_access(s, a, true, ctx);
  s.mem[a] = Cell::make_data(v);
  log_effect(s,
             ctx.layout.in_globals(a) ? EffectOp::GlobalWrite
                                      : EffectOp::MemWrite,
             make_const(a, ctx.layout.width), v);
}

std::optional<std::vector<std::uint32_t>> enum_vals(const PathState& s,
                                                    const TermPtr& t,
                                                    ExecContext& ctx,
                                                    std::size_t limit) {
  auto r = enumerate_values(s.pc, t, ctx.solver, limit);
  if (ctx.stats) {
    ++ctx.stats->sat_queries;
    if (!r) ++ctx.stats->unknown_verdicts;
  }
  return r;
}

SatResult check_with(const PathState& s, const TermPtr& extra,
                     ExecContext& ctx) {
  std::vector<TermPtr> cs = s.pc;
  cs.push_back(extra);
  return ctx.check(cs);
}

}  // namespace

ReadResult read_mem(const PathState& s, const TermPtr& addr, ExecContext& ctx) {
  ReadResult rr;
  const int w = ctx.layout.width;
  TermPtr a = simplify(addr);
  std::uint32_t c = 0;
  if (as_const(a, c)) {
    PathState t = s;
    rr.values.push_back(read_concrete(t, c, ctx));
    rr.states.push_back(std::move(t));
    return rr;
  }
  auto vals = enum_vals(s, a, ctx, ctx.fanout);
  if (vals && vals->size() <= ctx.fanout) {
    for (std::uint32_t v : *vals) {
      PathState t = s;
      t.add_constraint(make_bin(BinOp::Eq, a, make_const(v, w)));
      rr.values.push_back(read_concrete(t, v, ctx));
      rr.states.push_back(std::move(t));
    }
    return rr;  // empty when the path condition admits no address at all
  }
  PathState t = s;
  ev(t, EventKind::UnconstrainedAccess, a, nullptr, "read fan-out exceeded");
  const SymId id = ctx.gen->next();
  TermPtr v = make_fresh(id, "u" + std::to_string(id), w);
  log_effect(t, EffectOp::MemRead, a, v);
  rr.values.push_back(std::move(v));
  rr.states.push_back(std::move(t));
  return rr;
}

std::vector<PathState> write_mem(const PathState& s, const TermPtr& addr,
                                 const TermPtr& value, ExecContext& ctx) {
  std::vector<PathState> out;
  const int w = ctx.layout.width;
  TermPtr a = simplify(addr);
  TermPtr v = simplify(value);
  std::uint32_t c = 0;
  if (as_const(a, c)) {
    PathState t = s;
    write_concrete(t, c, v, ctx);
    out.push_back(std::move(t));
    return out;
  }
  auto vals = enum_vals(s, a, ctx, ctx.fanout);
  if (vals && vals->size() <= ctx.fanout) {
    for (std::uint32_t av : *vals) {
      PathState t = s;
      t.add_constraint(make_bin(BinOp::Eq, a, make_const(av, w)));
      write_concrete(t, av, v, ctx);
      out.push_back(std::move(t));
    }
    return out;
  }
  // Too many targets to follow. Probe the interesting addresses so heap bugs
  // reachable through this write are still seen, then drop the write itself.
  PathState t = s;
  bool flagged = false;
  for (const HeapChunk& ch : t.chunks) {
    if (!ch.live) continue;
    for (std::uint64_t g :
         {std::uint64_t(ch.base) - 1, std::uint64_t(ch.base) + ch.size}) {
      TermPtr eq = make_bin(BinOp::Eq, a, make_const(std::uint32_t(g), w));
      if (check_with(t, eq, ctx) != SatResult::Unsat) {
        ev(t, EventKind::HeapOverflow, a, v,
           "guard " + hex_str(std::uint32_t(g)) + " reachable");
        flagged = true;
        break;
      }
    }
    if (flagged) break;
  }
  if (!flagged) {
    for (const HeapChunk& ch : t.chunks) {
      if (ch.live) continue;
      TermPtr eq = make_bin(BinOp::Eq, a, make_const(ch.base, w));
      if (check_with(t, eq, ctx) != SatResult::Unsat) {
        ev(t, EventKind::UseAfterFree, a, v,
           "freed chunk at " + hex_str(ch.base) + " reachable");
        break;
      }
    }
  }
  ev(t, EventKind::UnconstrainedAccess, a, v,
     "write fan-out exceeded; write dropped");
  log_effect(t, EffectOp::MemWrite, a, v);
  out.push_back(std::move(t));
  return out;
}

TermPtr sym_malloc(PathState& s, const TermPtr& size, ExecContext& ctx) {
  const int w = ctx.layout.width;
  TermPtr sz = simplify(size);
  std::uint32_t n = 0;
  if (!as_const(sz, n)) {
    ev(s, EventKind::SymbolicSize, nullptr, sz, "allocation size concretized");
    auto m = get_model(s.pc, ctx.solver);
    if (ctx.stats) {
      ++ctx.stats->sat_queries;
      if (!m) ++ctx.stats->unknown_verdicts;
    }
    n = m ? eval_term(sz, m->as_map()) : 16;
  }
  if (std::uint64_t(s.bump) + n + 2 > ctx.layout.heap_hi) {
    ev(s, EventKind::HeapExhausted, nullptr, sz,
       "bump at " + hex_str(s.bump));
    s.end = EndKind::Fault;
    return make_const(0, w);
  }
  const std::uint32_t base = s.bump + 1;
  s.chunks.push_back({base, n, true, {}, -1});
  s.bump = base + n + 1;
  log_effect(s, EffectOp::Malloc, make_const(base, w), nullptr, sz, n);
  return make_const(base, w);
}

// Chunk-relative classification of a concrete access. Freed chunks own their
// old guards too; live guards only object to writes.
void note_access(PathState& s, std::uint32_t a, bool is_write,
                 ExecContext& ctx) {
  const std::uint64_t A = a;
  for (const HeapChunk& ch : s.chunks) {
    const std::uint64_t lo = std::uint64_t(ch.base) - 1;
    const std::uint64_t hi = std::uint64_t(ch.base) + ch.size;
    if (!ch.live && A >= lo && A <= hi) {
      ev(s, EventKind::UseAfterFree, make_const(a, ctx.layout.width), nullptr,
         "freed chunk at " + hex_str(ch.base));
      return;
    }
    if (ch.live && is_write && (A == lo || A == hi)) {
      ev(s, EventKind::HeapOverflow, make_const(a, ctx.layout.width), nullptr,
         "guard of chunk at " + hex_str(ch.base));
      return;
    }
  }
}

void sym_free(PathState& s, const TermPtr& addr, ExecContext& ctx) {
  const int w = ctx.layout.width;
  TermPtr a = simplify(addr);
  std::uint32_t c = 0;
  if (as_const(a, c)) {
    for (HeapChunk& ch : s.chunks) {
      if (ch.base != c) continue;
      if (ch.live) {
        ch.live = false;
        ch.freed_by = s.fn;
        ch.freed_at = s.idx;
        log_effect(s, EffectOp::Free, a, nullptr);
      } else {
        ev(s, EventKind::DoubleFree, a, nullptr,
           "chunk at " + hex_str(c) + " first freed at " + ch.freed_by + ":" +
               std::to_string(ch.freed_at));
        // The free still executed; logging it lets post-run pairing line the
        // two frees up.
        log_effect(s, EffectOp::Free, a, nullptr);
      }
      return;
    }
    if (ctx.layout.in_shadow(c)) {
      // A reference-parameter image cell: the chunk lives in the caller, so
      // the free is recorded as an effect and resolved when the summary is
      // applied.
      log_effect(s, EffectOp::Free, a, nullptr);
      return;
    }
    ev(s, EventKind::InvalidFree, a, nullptr, "no chunk at " + hex_str(c));
    return;
  }
  bool double_free = false;
  for (const HeapChunk& ch : s.chunks) {
    if (ch.live) continue;
    TermPtr eq = make_bin(BinOp::Eq, a, make_const(ch.base, w));
    if (check_with(s, eq, ctx) != SatResult::Unsat) {
      ev(s, EventKind::DoubleFree, a, nullptr,
         "freed chunk at " + hex_str(ch.base) + " reachable; first freed at " +
             ch.freed_by + ":" + std::to_string(ch.freed_at));
      double_free = true;
      break;
    }
  }
  for (HeapChunk& ch : s.chunks) {
    if (!ch.live) continue;
    TermPtr eq = make_bin(BinOp::Eq, a, make_const(ch.base, w));
    if (check_with(s, eq, ctx) != SatResult::Unsat) {
      s.add_constraint(eq);
      ch.live = false;
      ch.freed_by = s.fn;
      ch.freed_at = s.idx;
      log_effect(s, EffectOp::Free, a, nullptr);
      return;
    }
  }
  if (mentions_input(a)) {
    // No local chunk matches, but the address derives from an input (for a
    // summarized function: from a parameter); defer to the caller by logging
    // the free as an effect.
    log_effect(s, EffectOp::Free, a, nullptr);
    return;
  }
  if (!double_free)
    ev(s, EventKind::InvalidFree, a, nullptr, "no chunk base feasible");
}

namespace {

BinOp arith_op(Op op) {
  switch (op) {
    case Op::Add: return BinOp::Add;
    case Op::Sub: return BinOp::Sub;
    case Op::Mul: return BinOp::Mul;
    case Op::And: return BinOp::And;
    case Op::Or: return BinOp::Or;
    case Op::Xor: return BinOp::Xor;
    case Op::Shl: return BinOp::Shl;
    default: return BinOp::Shr;
  }
}

BinOp branch_op(Op op) {
  switch (op) {
    case Op::Beq: return BinOp::Eq;
    case Op::Bne: return BinOp::Ne;
    case Op::Blt: return BinOp::Slt;
    default: return BinOp::Sge;
  }
}

// Pushes the return token and canary for `callee`; faults on stack overflow
// or a non-concrete sp.
void do_call(PathState& t, const std::string& callee, int ret_index,
             ExecContext& ctx) {
  std::uint32_t spv = 0;
  if (!as_const(t.regs[kRegSp], spv)) {
    ev(t, EventKind::UnconstrainedAccess, t.regs[kRegSp], nullptr,
       "sp not concrete at call");
    t.end = EndKind::Fault;
    return;
  }
  if (std::int64_t(spv) - 2 < std::int64_t(ctx.layout.stack_floor)) {
    ev(t, EventKind::StackExhausted, make_const(spv, ctx.layout.width));
    t.end = EndKind::Fault;
    return;
  }
  const std::uint32_t nsp = spv - 2;
  const std::uint64_t fid = t.next_frame_id++;
  t.mem[nsp + 1] = Cell::make_token(t.fn, ret_index);
  t.mem[nsp] = Cell::make_canary(fid);
  t.frames.push_back({fid, nsp, callee});
  t.regs[kRegSp] = make_const(nsp, ctx.layout.width);
  t.fn = callee;
  t.idx = 0;
}

void do_ret(PathState& t, ExecContext& ctx) {
  const int w = ctx.layout.width;
  std::uint32_t spv = 0;
  if (!as_const(t.regs[kRegSp], spv)) {
    ev(t, EventKind::UnconstrainedAccess, t.regs[kRegSp], nullptr,
       "sp not concrete at ret");
    t.end = EndKind::Fault;
    return;
  }
  if (t.frames.empty()) {
    ev(t, EventKind::ControlCorruption, make_const(spv, w), nullptr,
       "ret with no frame");
    t.end = EndKind::Fault;
    return;
  }
  auto itc = t.mem.find(spv);
  const bool canary_ok = itc != t.mem.end() &&
                         itc->second.kind == Cell::Kind::CanaryMarker &&
                         itc->second.frame_id == t.frames.back().frame_id;
  if (!canary_ok)
    ev(t, EventKind::StackSmash, make_const(spv, w),
       itc != t.mem.end() && itc->second.kind == Cell::Kind::Data
           ? itc->second.data
           : nullptr,
       "canary clobbered in " + t.frames.back().fn);
  auto itt = t.mem.find(spv + 1);
  if (itt == t.mem.end() || itt->second.kind != Cell::Kind::CodeToken) {
    ev(t, EventKind::ControlCorruption, make_const(spv + 1, w),
       itt != t.mem.end() && itt->second.kind == Cell::Kind::Data
           ? itt->second.data
           : nullptr,
       "return target is not a code token");
    t.end = EndKind::Fault;
    return;
  }
  const Cell token = itt->second;
  t.frames.pop_back();
  t.regs[kRegSp] = make_const(spv + 2, w);
  if (token.fn == kSentinelFn) {
    t.end = EndKind::Return;
    return;
  }
  t.fn = token.fn;
  t.idx = token.ret_index;
}

}  // namespace

std::vector<PathState> step(const PathState& s, ExecContext& ctx) {
  if (s.terminal()) return {};
  const int w = ctx.layout.width;
  const Function& F = ctx.prog->functions.at(s.fn);
  if (s.idx < 0 || s.idx >= int(F.instrs.size())) {
    PathState t = s;
    ev(t, EventKind::InvalidJump, nullptr, nullptr, "pc out of range");
    t.end = EndKind::Fault;
    return {t};
  }
  const Instr& I = F.instrs[s.idx];
  PathState t = s;
  ++t.steps;
  const int next = s.idx + 1;

  switch (I.op) {
    case Op::Const:
      t.regs[I.rd] = make_const(std::uint32_t(I.imm), w);
      t.idx = next;
      break;
    case Op::Mov:
      t.regs[I.rd] = t.regs[I.rs1];
      t.idx = next;
      break;
    case Op::Add:
    case Op::Sub:
    case Op::Mul:
    case Op::And:
    case Op::Or:
    case Op::Xor:
    case Op::Shl:
    case Op::Shr:
      t.regs[I.rd] =
          simplify(make_bin(arith_op(I.op), t.regs[I.rs1], t.regs[I.rs2]));
      t.idx = next;
      break;
    case Op::Beq:
    case Op::Bne:
    case Op::Blt:
    case Op::Bge: {
      TermPtr cond =
          simplify(make_bin(branch_op(I.op), t.regs[I.rs1], t.regs[I.rs2]));
      std::uint32_t cv = 0;
      if (as_const(cond, cv)) {
        t.idx = cv ? I.target : next;
        break;
      }
      PathState taken = t;
      t.add_constraint(make_not(cond));
      t.idx = next;
      taken.add_constraint(cond);
      taken.idx = I.target;
      return {std::move(t), std::move(taken)};
    }
    case Op::Jmp:
      t.idx = I.target;
      break;
    case Op::Jmpr: {
      TermPtr v = simplify(t.regs[I.rs1]);
      std::uint32_t c = 0;
      if (as_const(v, c)) {
        if (c < F.instrs.size()) {
          t.idx = int(c);
        } else {
          ev(t, EventKind::InvalidJump, nullptr, v,
             "target " + std::to_string(c) + " out of range");
          t.end = EndKind::Fault;
        }
      } else {
        ev(t, EventKind::SymbolicTarget, nullptr, v, "jmpr target");
        t.end = EndKind::Fault;
      }
      break;
    }
    case Op::Call:
      do_call(t, I.sym, next, ctx);
      break;
    case Op::Callr: {
      TermPtr v = simplify(t.regs[I.rs1]);
      std::uint32_t c = 0;
      if (as_const(v, c)) {
        if (c < ctx.prog->order.size()) {
          do_call(t, ctx.prog->order[c], next, ctx);
        } else {
          ev(t, EventKind::InvalidJump, nullptr, v,
             "function index " + std::to_string(c) + " out of range");
          t.end = EndKind::Fault;
        }
      } else {
        ev(t, EventKind::SymbolicTarget, nullptr, v, "callr target");
        t.end = EndKind::Fault;
      }
      break;
    }
    case Op::Ret:
      do_ret(t, ctx);
      break;
    case Op::Load: {
      TermPtr addr =
          make_bin(BinOp::Add, t.regs[I.rs1], make_const(std::uint32_t(I.imm), w));
      ReadResult rr = read_mem(s, addr, ctx);
      for (std::size_t i = 0; i < rr.states.size(); ++i) {
        rr.states[i].regs[I.rd] = rr.values[i];
        rr.states[i].idx = next;
        ++rr.states[i].steps;
      }
      return std::move(rr.states);
    }
    case Op::Store: {
      TermPtr addr =
          make_bin(BinOp::Add, t.regs[I.rs1], make_const(std::uint32_t(I.imm), w));
      std::vector<PathState> out = write_mem(s, addr, s.regs[I.rs2], ctx);
      for (PathState& st : out) {
        st.idx = next;
        ++st.steps;
      }
      return out;
    }
    case Op::Lea:
      t.regs[I.rd] = simplify(
          make_bin(BinOp::Add, t.regs[I.rs1], make_const(std::uint32_t(I.imm), w)));
      t.idx = next;
      break;
    case Op::Alloc: {
      TermPtr base = sym_malloc(t, t.regs[I.rs1], ctx);
      if (!t.terminal()) {
        t.regs[I.rd] = base;
        t.idx = next;
      }
      break;
    }
    case Op::Free:
      sym_free(t, t.regs[I.rs1], ctx);
      if (!t.terminal()) t.idx = next;
      break;
    case Op::Input: {
      ++t.input_ordinal;
      const SymId id = ctx.gen->next();
      TermPtr v = make_input(id, "in" + std::to_string(t.input_ordinal), w);
      t.regs[I.rd] = v;
      t.input_order.push_back(id);
      t.idx = next;
      break;
    }
    case Op::Output:
      t.outputs.push_back(t.regs[I.rs1]);
      log_effect(t, EffectOp::Output, nullptr, t.regs[I.rs1]);
      t.idx = next;
      break;
    case Op::Halt:
      t.end = EndKind::Halt;
      break;
  }
  return {std::move(t)};
}

}  // namespace symsum
