#pragma once

// Loop outlining: rewrite inner loops of depth >= 2 into synthetic functions
// so the compositional engine summarizes each one once instead of re-exploring
// it per outer iteration. Also the iterative loop-bound scheduler.

#include <cstdint>
#include <string>
#include <vector>

#include "symsum/ir.hpp"

namespace symsum {

struct OutlinedLoop {
  std::string name;           // synthetic function
  std::string parent;         // function it was extracted from
  std::vector<int> live_in;   // registers passed in a0.., ascending ids
  std::vector<int> live_out;  // registers produced; one -> rv, several ->
                              // spilled through a caller-stack cell block
};

struct OutlineResult {
  Program program;
  std::vector<OutlinedLoop> outlined;
  std::vector<std::string> skipped;  // diagnostics for ineligible loops
};

// Repeatedly extracts the innermost loops nested at depth >= 2 from `fn`
// until no loop in it contains another. Ineligible loops (irreducible
// regions, multiple continuations, stack-pointer use, too many live
// registers, marshalling clobbers) are skipped with a diagnostic; the
// function's observable behavior is preserved exactly.
OutlineResult outline_inner_loops(const Program& p, const std::string& fn);

// Applies outline_inner_loops to every function defined in `p`.
OutlineResult outline_program(const Program& p);

// --- Iterative deepening of loop bounds ---------------------------------

struct BoundSchedule {
  int bound = 8;                        // current per-back-edge limit
  int increment = 4;                    // additive growth between rounds
  double wall_budget_s = 300.0;         // <= 0 disables the wall clock check
  std::uint64_t live_state_cap = 10000; // 0 disables the memory check
};

struct RoundMetrics {
  bool pruned = false;          // some path hit the per-back-edge bound
  double wall_s = 0.0;          // wall time of the finished round
  std::uint64_t peak_states = 0;  // states held during the round
};

enum class ScheduleAction {
  Continue,    // run again with the returned larger bound
  Exhaustive,  // nothing was pruned: the bound is already sufficient
  BudgetStop,  // a budget tripped: returned bound is the largest completed
};

struct ScheduleDecision {
  ScheduleAction action = ScheduleAction::Continue;
  int bound = 0;
};

ScheduleDecision schedule_loop_bounds(const BoundSchedule& s,
                                      const RoundMetrics& last);

}  // namespace symsum
