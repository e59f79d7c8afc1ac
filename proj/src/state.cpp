#include "symsum/state.hpp"

#include <algorithm>

namespace symsum {

MemLayout MemLayout::for_width(int w) {
  MemLayout m;
  m.width = w;
  const std::uint64_t S = std::uint64_t(1) << w;
  m.globals_lo = std::uint32_t(S / 256);
  m.globals_hi = std::uint32_t(S / 16);
  m.heap_lo = std::uint32_t(S / 16);
  m.heap_hi = std::uint32_t(S / 2);
  m.shadow_base = std::uint32_t(S * 3 / 4);
  m.shadow_stride = std::uint32_t(std::max<std::uint64_t>(2, S / 256));
  m.stack_floor = std::uint32_t(S * 13 / 16);
  m.stack_top = std::uint32_t(S - 16);
  return m;
}

Cell Cell::make_data(TermPtr t) {
  Cell c;
  c.kind = Kind::Data;
  c.data = std::move(t);
  return c;
}

Cell Cell::make_token(const std::string& fn, int ret_index) {
  Cell c;
  c.kind = Kind::CodeToken;
  c.fn = fn;
  c.ret_index = ret_index;
  return c;
}

Cell Cell::make_canary(std::uint64_t frame_id) {
  Cell c;
  c.kind = Kind::CanaryMarker;
  c.frame_id = frame_id;
  return c;
}

const char* event_kind_name(EventKind k) {
  switch (k) {
    case EventKind::SymbolicTarget: return "SymbolicTarget";
    case EventKind::ControlCorruption: return "ControlCorruption";
    case EventKind::StackSmash: return "StackSmash";
    case EventKind::HeapOverflow: return "HeapOverflow";
    case EventKind::UseAfterFree: return "UseAfterFree";
    case EventKind::DoubleFree: return "DoubleFree";
    case EventKind::InvalidFree: return "InvalidFree";
    case EventKind::InvalidJump: return "InvalidJump";
    case EventKind::UnconstrainedAccess: return "UnconstrainedAccess";
    case EventKind::HeapExhausted: return "HeapExhausted";
    case EventKind::StackExhausted: return "StackExhausted";
    case EventKind::SymbolicSize: return "SymbolicSize";
  }
  return "?";
}

void PathState::add_constraint(const TermPtr& c) {
  TermPtr s = simplify(c);
  pc.push_back(s);
  watermark = std::max(watermark, max_sym_id(s));
}

SatResult ExecContext::check(const std::vector<TermPtr>& constraints) const {
  Verdict v = check_sat(constraints, solver);
  if (stats) {
    ++stats->sat_queries;
    if (v.status == SatResult::Unknown) ++stats->unknown_verdicts;
  }
  return v.status;
}

PathState make_initial_state(const std::string& fn, ExecContext& ctx) {
  PathState s;
  s.fn = fn;
  s.idx = 0;
  s.bump = ctx.layout.heap_lo;
  for (int r = 0; r < kNumRegs; ++r) {
    if (r == kRegSp) continue;
    s.regs[r] = make_input(ctx.gen->next(),
                           std::string("init_") + reg_name(r),
                           ctx.layout.width);
  }
  // Synthetic bottom frame: returning out of `fn` completes the path, and a
  // clobbered bottom canary is still detectable.
  const std::uint32_t sp = ctx.layout.stack_top - 2;
  const std::uint64_t fid = s.next_frame_id++;
  s.mem[sp + 1] = Cell::make_token(kSentinelFn, -1);
  s.mem[sp] = Cell::make_canary(fid);
  s.frames.push_back({fid, sp, fn});
  s.regs[kRegSp] = make_const(sp, ctx.layout.width);
  return s;
}

}  // namespace symsum
