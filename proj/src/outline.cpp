#include "symsum/outline.hpp"

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace symsum {
namespace {

using Mask = std::uint32_t;

constexpr Mask kAllRegs = (Mask(1) << kNumRegs) - 1;

Mask bit(int r) { return r >= 0 ? Mask(1) << r : 0; }

struct DefUse {
  Mask use = 0;  // read before any write (for a whole function: at entry)
  Mask def = 0;  // possibly written
};

bool is_cond_branch(Op op) {
  return op == Op::Beq || op == Op::Bne || op == Op::Blt || op == Op::Bge;
}

// Registers an instruction reads/writes; calls stand for their callee's
// transitive effects, since registers flow through calls unclobbered.
DefUse instr_du(const Instr& in, const std::map<std::string, DefUse>& fx) {
  DefUse d;
  switch (in.op) {
    case Op::Const:
    case Op::Input:
      d.def = bit(in.rd);
      break;
    case Op::Mov:
    case Op::Load:
    case Op::Lea:
    case Op::Alloc:
      d.use = bit(in.rs1);
      d.def = bit(in.rd);
      break;
    case Op::Add:
    case Op::Sub:
    case Op::Mul:
    case Op::And:
    case Op::Or:
    case Op::Xor:
    case Op::Shl:
    case Op::Shr:
      d.use = bit(in.rs1) | bit(in.rs2);
      d.def = bit(in.rd);
      break;
    case Op::Beq:
    case Op::Bne:
    case Op::Blt:
    case Op::Bge:
    case Op::Store:
      d.use = bit(in.rs1) | bit(in.rs2);
      break;
    case Op::Jmpr:
    case Op::Free:
    case Op::Output:
      d.use = bit(in.rs1);
      break;
    case Op::Call: {
      auto it = fx.find(in.sym);
      if (it != fx.end()) {
        d = it->second;
      } else {
        d.use = d.def = kAllRegs;
      }
      break;
    }
    case Op::Callr:  // target unknown: could be anything
      d.use = d.def = kAllRegs;
      break;
    case Op::Jmp:
    case Op::Ret:
    case Op::Halt:
      break;
  }
  return d;
}

struct Liveness {
  std::vector<Mask> live_in;   // at block entry
  std::vector<Mask> live_out;  // at block exit
};

// Backward may-liveness per block. With `restrict_to` set, only those blocks
// participate and edges leaving the set contribute nothing; live_in of the
// set's entry block is then its use-before-def summary.
Liveness block_liveness(const Function& f, const Cfg& cfg,
                        const std::map<std::string, DefUse>& fx,
                        const std::set<int>* restrict_to) {
  const int nb = int(cfg.blocks.size());
  Liveness lv;
  lv.live_in.assign(nb, 0);
  lv.live_out.assign(nb, 0);
  bool changed = true;
  while (changed) {
    changed = false;
    for (int b = nb - 1; b >= 0; --b) {
      if (restrict_to && !restrict_to->count(b)) continue;
      Mask out = 0;
      for (int s : cfg.blocks[b].succs) {
        if (restrict_to && !restrict_to->count(s)) continue;
        out |= lv.live_in[s];
      }
      Mask in = out;
      for (int i = cfg.blocks[b].last; i >= cfg.blocks[b].first; --i) {
        const DefUse d = instr_du(f.instrs[i], fx);
        in = (in & ~d.def) | d.use;
      }
      if (in != lv.live_in[b] || out != lv.live_out[b]) {
        lv.live_in[b] = in;
        lv.live_out[b] = out;
        changed = true;
      }
    }
  }
  return lv;
}

// Transitive register effects per function, callees first. Recursive SCCs
// and functions with indirect control flow are opaque (everything).
std::map<std::string, DefUse> function_effects(const Program& p) {
  const CallGraph cg = build_call_graph(p);
  std::map<std::string, DefUse> fx;
  for (const std::string& name : cg.order) {
    const Function& f = p.functions.at(name);
    bool opaque = cg.recursive.count(name) > 0;
    for (const Instr& in : f.instrs)
      if (in.op == Op::Callr || in.op == Op::Jmpr) opaque = true;
    if (opaque) {
      fx[name] = {kAllRegs, kAllRegs};
      continue;
    }
    const Cfg cfg = build_cfg(f);
    const Liveness lv = block_liveness(f, cfg, fx, nullptr);
    DefUse d;
    d.use = lv.live_in.empty() ? 0 : lv.live_in[0];
    for (const Instr& in : f.instrs) d.def |= instr_du(in, fx).def;
    fx[name] = d;
  }
  return fx;
}

std::vector<int> mask_regs(Mask m) {
  std::vector<int> out;
  for (int r = 0; r < kNumRegs; ++r)
    if (m & bit(r)) out.push_back(r);
  return out;
}

Instr mk(Op op) {
  Instr i;
  i.op = op;
  return i;
}

Instr mov(int rd, int rs) {
  Instr i = mk(Op::Mov);
  i.rd = rd;
  i.rs1 = rs;
  return i;
}

struct Extraction {
  Function parent;       // rewritten enclosing function
  Function synthetic;    // the outlined loop
  OutlinedLoop info;
};

// Attempts to outline one innermost loop of nesting depth >= 2 from `f`.
// On success returns the rewritten functions; otherwise, when `skips` is
// given, appends one diagnostic per candidate loop examined.
std::optional<Extraction> pick_and_extract(const Program& p, const Function& f,
                                           int counter,
                                           std::vector<std::string>* skips) {
  const auto fx = function_effects(p);
  const Cfg cfg = build_cfg(f);
  const LoopForest forest = detect_loops(cfg);
  auto skip = [&](int header_instr, const std::string& why) {
    if (skips)
      skips->push_back(f.name + ": loop at instruction " +
                       std::to_string(header_instr) + ": " + why);
  };
  if (forest.irreducible) {
    if (skips) skips->push_back(f.name + ": irreducible control flow");
    return std::nullopt;
  }

  for (std::size_t li = 0; li < forest.loops.size(); ++li) {
    const Loop& L = forest.loops[li];
    if (L.depth < 2 || !L.children.empty()) continue;

    // The outlined unit is the contiguous instruction span covering the
    // loop. Blocks inside the span that are not loop members ("holes",
    // e.g. a halt the loop branches into) travel with it.
    int lo = cfg.blocks[L.header].first;
    int hi = cfg.blocks[L.header].last;
    for (int b : L.blocks) {
      lo = std::min(lo, cfg.blocks[b].first);
      hi = std::max(hi, cfg.blocks[b].last);
    }
    const int header_instr = cfg.blocks[L.header].first;
    if (header_instr != lo) {
      skip(header_instr, "body laid out before its header");
      continue;
    }

    std::set<int> span;
    for (std::size_t b = 0; b < cfg.blocks.size(); ++b)
      if (cfg.blocks[b].first >= lo && cfg.blocks[b].last <= hi)
        span.insert(int(b));

    std::string reason;
    for (int i = lo; i <= hi && reason.empty(); ++i) {
      const Instr& in = f.instrs[i];
      if (in.op == Op::Ret) reason = "contains ret";
      if (in.op == Op::Jmpr) reason = "contains jmpr";
      if (in.op == Op::Callr) reason = "contains callr";
      const DefUse d = instr_du(in, fx);
      if ((d.use | d.def) & bit(kRegSp))
        reason = "uses the stack pointer";
    }
    if (!reason.empty()) {
      skip(header_instr, reason);
      continue;
    }

    // Single entry through the header; all departures to one continuation.
    int cont_block = -1;
    bool bad = false;
    for (std::size_t b = 0; b < cfg.blocks.size() && !bad; ++b) {
      const bool inside = span.count(int(b)) > 0;
      for (int s : cfg.blocks[b].succs) {
        const bool s_inside = span.count(s) > 0;
        if (!inside && s_inside && s != L.header) {
          skip(header_instr, "multiple entries");
          bad = true;
          break;
        }
        if (inside && !s_inside) {
          if (cont_block < 0) cont_block = s;
          if (cont_block != s) {
            skip(header_instr, "multiple continuations");
            bad = true;
            break;
          }
        }
      }
    }
    if (bad) continue;
    const int cont =
        cont_block >= 0 ? cfg.blocks[cont_block].first : hi + 1;

    const Liveness global = block_liveness(f, cfg, fx, nullptr);
    const Liveness local = block_liveness(f, cfg, fx, &span);
    const Mask live_in_mask = local.live_in[L.header];
    Mask defs = 0;
    for (int i = lo; i <= hi; ++i) defs |= instr_du(f.instrs[i], fx).def;
    const Mask live_after = cont_block >= 0 ? global.live_in[cont_block] : 0;

    const std::vector<int> live_ins = mask_regs(live_in_mask);
    const std::vector<int> live_outs = mask_regs(defs & live_after);
    const int k = int(live_ins.size());
    const int m = int(live_outs.size());
    const int max_params = m > 1 ? 5 : 6;  // a cell pointer needs a slot too
    if (k > max_params) {
      skip(header_instr, "too many live-in registers (" + std::to_string(k) +
                             ")");
      continue;
    }
    if (m > 8) {
      skip(header_instr, "too many live-out registers (" + std::to_string(m) +
                             ")");
      continue;
    }

    // Registers the marshalling sequence leaves different from an inline
    // run: argument slots not restored by the prologue, rv unless it is the
    // returned live-out, and the cell pointer unless reloaded as a live-out.
    Mask clobbered = 0;
    for (int i = 0; i < k; ++i)
      if (!(live_in_mask & bit(kRegA0 + i))) clobbered |= bit(kRegA0 + i);
    if (m == 1 && live_outs[0] != kRegRv) clobbered |= bit(kRegRv);
    const int cell_reg = kRegA0 + k;
    if (m > 1 && !(defs & live_after & bit(cell_reg)))
      clobbered |= bit(cell_reg);
    if (clobbered & live_after) {
      skip(header_instr, "marshalling would clobber a live register");
      continue;
    }

    // Names that survive a reparse: the program validates uniqueness.
    std::string name =
        f.name + "$loop" + std::to_string(counter);
    while (p.functions.count(name)) name += "_";
    std::string done = "__exit";
    {
      std::set<std::string> taken;
      for (const auto& [lbl, idx] : f.labels_in_order)
        if (idx >= lo && idx <= hi) taken.insert(lbl);
      while (taken.count(done)) done += "_";
    }

    Extraction ex;
    ex.info.name = name;
    ex.info.parent = f.name;
    ex.info.live_in = live_ins;
    ex.info.live_out = live_outs;

    // Synthetic function: restore prologue (descending avoids overwriting an
    // argument slot that is itself a live-in), the span verbatim with
    // departures retargeted, then the value hand-back and ret.
    Function& g = ex.synthetic;
    g.name = name;
    for (int i = k - 1; i >= 0; --i)
      g.instrs.push_back(mov(live_ins[i], kRegA0 + i));
    for (int i = lo; i <= hi; ++i) {
      Instr in = f.instrs[i];
      if ((is_cond_branch(in.op) || in.op == Op::Jmp) && in.target == cont)
        in.sym = done;
      g.instrs.push_back(in);
    }
    for (const auto& [lbl, idx] : f.labels_in_order)
      if (idx >= lo && idx <= hi)
        g.labels_in_order.emplace_back(lbl, idx - lo + k);
    g.labels_in_order.emplace_back(done, int(g.instrs.size()));
    if (m == 1) {
      g.instrs.push_back(mov(kRegRv, live_outs[0]));
    } else if (m > 1) {
      for (int j = 0; j < m; ++j) {
        Instr st = mk(Op::Store);
        st.rs1 = cell_reg;
        st.imm = j;
        st.rs2 = live_outs[j];
        g.instrs.push_back(st);
      }
    }
    g.instrs.push_back(mk(Op::Ret));

    // Parent: the span becomes argument set-up, the call, and the live-out
    // hand-back. Ascending argument set-up never reads an already-written
    // slot because live-ins are listed by ascending register index.
    Function& h = ex.parent;
    h.name = f.name;
    for (int i = 0; i < lo; ++i) h.instrs.push_back(f.instrs[i]);
    const int marshal_at = lo;
    for (int i = 0; i < k; ++i)
      h.instrs.push_back(mov(kRegA0 + i, live_ins[i]));
    if (m > 1) {
      Instr c16 = mk(Op::Const);
      c16.rd = cell_reg;
      c16.imm = 16;
      h.instrs.push_back(c16);
      Instr sb = mk(Op::Sub);  // cell block sits below the callee's frame
      sb.rd = cell_reg;
      sb.rs1 = kRegSp;
      sb.rs2 = cell_reg;
      h.instrs.push_back(sb);
    }
    Instr call = mk(Op::Call);
    call.sym = name;
    h.instrs.push_back(call);
    if (m == 1 && live_outs[0] != kRegRv)
      h.instrs.push_back(mov(live_outs[0], kRegRv));
    if (m > 1) {
      for (int j = 0; j < m; ++j) {
        if (live_outs[j] == cell_reg) continue;  // reload the pointer last
        Instr ld = mk(Op::Load);
        ld.rd = live_outs[j];
        ld.rs1 = cell_reg;
        ld.imm = j;
        h.instrs.push_back(ld);
      }
      for (int j = 0; j < m; ++j) {
        if (live_outs[j] != cell_reg) continue;
        Instr ld = mk(Op::Load);
        ld.rd = live_outs[j];
        ld.rs1 = cell_reg;
        ld.imm = j;
        h.instrs.push_back(ld);
      }
    }
    if (cont != hi + 1) {
      std::string cont_label;
      for (const auto& [lbl, idx] : f.labels_in_order)
        if (idx == cont) {
          cont_label = lbl;
          break;
        }
      Instr j = mk(Op::Jmp);
      j.sym = cont_label;
      h.instrs.push_back(j);
    } else if (hi + 1 == int(f.instrs.size())) {
      // The span never returns (no departures) and nothing follows it; keep
      // the function well-terminated.
      h.instrs.push_back(mk(Op::Halt));
    }
    const int marshal_len = int(h.instrs.size()) - lo;
    for (std::size_t i = hi + 1; i < f.instrs.size(); ++i)
      h.instrs.push_back(f.instrs[i]);
    for (const auto& [lbl, idx] : f.labels_in_order) {
      if (idx < lo)
        h.labels_in_order.emplace_back(lbl, idx);
      else if (idx == lo)
        h.labels_in_order.emplace_back(lbl, marshal_at);
      else if (idx > hi)
        h.labels_in_order.emplace_back(lbl, idx - (hi - lo + 1) + marshal_len);
    }
    return ex;
  }
  return std::nullopt;
}

}  // namespace

OutlineResult outline_inner_loops(const Program& p, const std::string& fn) {
  if (!p.functions.count(fn))
    throw std::invalid_argument("outline_inner_loops: no function named " +
                                fn);
  OutlineResult res;
  res.program = p;
  int counter = 0;
  for (;;) {
    std::vector<std::string> skips;
    auto ex = pick_and_extract(res.program, res.program.functions.at(fn),
                               counter, &skips);
    if (!ex) {
      // Diagnostics only from the settled round: earlier rounds re-examine
      // the same loops.
      res.skipped.insert(res.skipped.end(), skips.begin(), skips.end());
      break;
    }
    Program np;
    np.entry = res.program.entry;
    np.order = res.program.order;
    np.order.push_back(ex->synthetic.name);
    np.functions = res.program.functions;
    np.functions[fn] = ex->parent;
    np.functions[ex->synthetic.name] = ex->synthetic;
    // Round-trip through the printer re-resolves branch targets and
    // re-validates the whole program.
    res.program = parse_program(unparse(np));
    res.outlined.push_back(ex->info);
    ++counter;
  }
  return res;
}

OutlineResult outline_program(const Program& p) {
  OutlineResult res;
  res.program = p;
  const std::vector<std::string> original = p.order;
  for (const std::string& fn : original) {
    OutlineResult one = outline_inner_loops(res.program, fn);
    res.program = std::move(one.program);
    res.outlined.insert(res.outlined.end(), one.outlined.begin(),
                        one.outlined.end());
    res.skipped.insert(res.skipped.end(), one.skipped.begin(),
                       one.skipped.end());
  }
  return res;
}

ScheduleDecision schedule_loop_bounds(const BoundSchedule& s,
                                      const RoundMetrics& last) {
  const bool wall_trip =
      s.wall_budget_s > 0 && last.wall_s >= s.wall_budget_s;
  const bool mem_trip =
      s.live_state_cap > 0 && last.peak_states >= s.live_state_cap;
  if (wall_trip || mem_trip)
    return {ScheduleAction::BudgetStop, std::max(0, s.bound - s.increment)};
  if (!last.pruned) return {ScheduleAction::Exhaustive, s.bound};
  return {ScheduleAction::Continue, s.bound + std::max(1, s.increment)};
}

}  // namespace symsum
