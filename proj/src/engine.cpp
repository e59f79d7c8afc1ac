#include "symsum/engine.hpp"

#include <chrono>
#include <deque>
#include <tuple>
#include <utility>

namespace symsum {

namespace {

struct FnInfo {
  Cfg cfg;
  LoopForest loops;
};

const FnInfo& fn_info(std::map<std::string, FnInfo>& cache, const Program& p,
                      const std::string& fn) {
  auto it = cache.find(fn);
  if (it == cache.end()) {
    FnInfo fi;
    fi.cfg = build_cfg(p.functions.at(fn));
    fi.loops = detect_loops(fi.cfg);
    it = cache.emplace(fn, std::move(fi)).first;
  }
  return it->second;
}

// Resolves the callee of a call-class instruction when it names a known
// function; callr through a symbolic or out-of-range register stays with the
// plain step path (which faults it).
std::optional<std::string> call_target(const Program& p, const PathState& s) {
  const Instr& ins = p.functions.at(s.fn).instrs[std::size_t(s.idx)];
  if (ins.op == Op::Call) {
    if (p.functions.count(ins.sym)) return ins.sym;
    return std::nullopt;
  }
  if (ins.op == Op::Callr) {
    const TermPtr& t = s.regs[std::size_t(ins.rs1)];
    if (t->is_const() && t->value < p.order.size())
      return p.order[t->value];
  }
  return std::nullopt;
}

}  // namespace

Report explore(const Program& prog, const ExploreConfig& cfg) {
  return explore(prog, cfg, ExploreHooks{});
}

Report explore(const Program& prog, const ExploreConfig& cfg,
               const ExploreHooks& hooks) {
  const auto t0 = std::chrono::steady_clock::now();
  Report rep;
  SymGen gen;
  ExecStats stats;
  ExecContext ctx;
  ctx.prog = &prog;
  ctx.layout = MemLayout::for_width(cfg.solver.width);
  ctx.solver = cfg.solver;
  ctx.gen = &gen;
  ctx.fanout = cfg.fanout;
  ctx.stats = &stats;

  std::map<std::string, FnInfo> fns;
  std::map<std::tuple<int, std::string, int>, BugReport> bug_map;
  auto report_bugs = [&](PathState& s) {
    for (BugReport& b : check_state(s, ctx, cfg.entry))
      bug_map.emplace(std::make_tuple(int(b.kind), b.function, b.index),
                      std::move(b));
  };

  std::uint64_t created = 1;
  std::uint64_t completed = 0, faulted = 0, pruned = 0, infeasible = 0,
                consumed = 0;
  std::deque<PathState> work;
  work.push_back(hooks.make_entry ? hooks.make_entry(ctx)
                                  : make_initial_state(cfg.entry, ctx));

  auto finish_terminal = [&](PathState& st) {
    report_bugs(st);
    if (hooks.on_terminal) hooks.on_terminal(st);
    PathOutcome po;
    po.end = st.end;
    po.outputs = st.outputs;
    po.pc = st.pc;
    po.input_order = st.input_order;
    po.loop_totals = st.loop_counters;
    po.log = st.log;
    rep.paths.push_back(std::move(po));
    if (st.end == EndKind::Fault)
      ++faulted;
    else
      ++completed;
  };

  auto process_child = [&](PathState&& child, const PathState& parent,
                           bool check_feasibility) {
    if (check_feasibility && child.pc.size() > parent.pc.size()) {
      // Constraints over symbols the old path condition never mentioned can
      // be decided alone; the conjunction splits across disjoint symbols.
      std::vector<TermPtr> fresh(child.pc.begin() + parent.pc.size(),
                                 child.pc.end());
      bool isolated = true;
      for (const TermPtr& c : fresh) {
        for (SymId id : free_syms(c))
          if (id <= parent.watermark) {
            isolated = false;
            break;
          }
        if (!isolated) break;
      }
      const SatResult r = isolated ? ctx.check(fresh) : ctx.check(child.pc);
      if (r == SatResult::Unsat) {
        ++infeasible;
        return;
      }
    }
    report_bugs(child);
    if (child.terminal()) {
      finish_terminal(child);
      return;
    }
    // Loop accounting applies to intra-function edges only.
    if (child.fn == parent.fn && child.frames.size() == parent.frames.size()) {
      const FnInfo& fi = fn_info(fns, prog, parent.fn);
      const int tb = fi.cfg.block_of[parent.idx];
      const int hb = fi.cfg.block_of[child.idx];
      // Leaving a loop resets its counters: the limit bounds traversals per
      // entry, not per path.
      for (const Loop& L : fi.loops.loops) {
        if (L.blocks.count(tb) && !L.blocks.count(hb)) {
          for (auto& [key, cnt] : child.loop_counters)
            if (key.fn == parent.fn && key.head == L.header) cnt.current = 0;
        }
      }
      for (const auto& be : fi.cfg.back_edges) {
        if (be.first == tb && be.second == hb) {
          LoopCount& lc = child.loop_counters[{parent.fn, tb, hb}];
          ++lc.current;
          ++lc.total;
          if (lc.current > cfg.loop_limit) {
            ++pruned;
            return;
          }
        }
      }
    } else if (child.frames.size() < parent.frames.size()) {
      // Returned out of parent.fn; its next activation starts loops afresh.
      for (auto& [key, cnt] : child.loop_counters)
        if (key.fn == parent.fn) cnt.current = 0;
    }
    if (child.steps > cfg.max_steps_per_path) {
      ++pruned;
      return;
    }
    work.push_back(std::move(child));
  };

  bool incomplete = false;
  bool timed_out = false;
  while (!work.empty()) {
    if (created > cfg.max_states) {
      incomplete = true;
      break;
    }
    if (std::chrono::steady_clock::now() >= cfg.deadline) {
      incomplete = true;
      timed_out = true;
      break;
    }
    PathState s;
    if (cfg.search == SearchOrder::BFS) {
      s = std::move(work.front());
      work.pop_front();
    } else {
      s = std::move(work.back());
      work.pop_back();
    }
    std::vector<PathState> succ;
    bool hooked = false;
    if (hooks.on_call) {
      const auto& instrs = prog.functions.at(s.fn).instrs;
      if (s.idx >= 0 && s.idx < int(instrs.size())) {
        const Op op = instrs[std::size_t(s.idx)].op;
        if (op == Op::Call || op == Op::Callr) {
          if (auto callee = call_target(prog, s)) {
            if (auto r = hooks.on_call(s, *callee, ctx)) {
              succ = std::move(*r);
              hooked = true;
            }
          }
        }
      }
    }
    if (!hooked) succ = step(s, ctx);
    if (succ.empty()) {
      // Non-terminal state with no successor: an address enumeration found
      // the path condition admits no value, or no summary entry applies.
      ++infeasible;
      continue;
    }
    if (succ.size() == 1) {
      process_child(std::move(succ[0]), s, false);
    } else {
      ++consumed;
      created += succ.size();
      // Hook successors arrive feasibility-filtered; skip the redundant check.
      for (PathState& c : succ) process_child(std::move(c), s, !hooked);
    }
  }

  rep.incomplete = incomplete;
  rep.timed_out = timed_out;
  rep.metrics.states_explored = created;
  rep.metrics.paths_completed = completed;
  rep.metrics.paths_pruned = pruned;
  rep.metrics.paths_faulted = faulted;
  rep.metrics.paths_infeasible = infeasible;
  rep.metrics.states_consumed_by_fork = consumed;
  rep.metrics.states_live_at_exit = work.size();
  rep.metrics.sat_queries = stats.sat_queries;
  rep.metrics.unknown_verdicts = stats.unknown_verdicts;
  rep.metrics.wall_ms = std::uint64_t(
      std::chrono::duration_cast<std::chrono::milliseconds>(
          std::chrono::steady_clock::now() - t0)
          .count());
  rep.bugs.reserve(bug_map.size());
  for (auto& [key, b] : bug_map) rep.bugs.push_back(std::move(b));
  sort_reports(rep.bugs);
  return rep;
}

}  // namespace symsum
