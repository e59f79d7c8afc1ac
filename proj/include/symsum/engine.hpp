#pragma once

// Whole-program symbolic exploration: a worklist of path states stepped
// through the machine, with eager feasibility filtering at forks, per-back-edge
// loop limits, and bug classification after every step. This is the baseline
// the compositional engine is measured against.

#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "symsum/bugcheck.hpp"

namespace symsum {

enum class SearchOrder { BFS, DFS };

struct ExploreConfig {
  SearchOrder search = SearchOrder::BFS;
  int loop_limit = 32;                     // traversals per back edge per entry
  std::uint64_t max_states = 10000;        // states created before giving up
  std::uint64_t max_steps_per_path = 100000;
  SolverConfig solver;                     // width and per-query budget
  std::size_t fanout = 8;                  // symbolic-address fork bound
  std::string entry = "main";
  // Absolute wall deadline; max() disables it. Being absolute, one deadline
  // covers a whole compositional run including its summarizing sub-runs.
  std::chrono::steady_clock::time_point deadline =
      std::chrono::steady_clock::time_point::max();
};

struct Metrics {
  // states_explored counts created states: the initial state plus every fork
  // child. A state stepping to a single successor continues as itself.
  std::uint64_t states_explored = 0;
  std::uint64_t paths_completed = 0;   // halted or returned
  std::uint64_t paths_pruned = 0;      // loop limit or step ceiling
  std::uint64_t paths_faulted = 0;
  std::uint64_t paths_infeasible = 0;  // Unsat fork children
  std::uint64_t states_consumed_by_fork = 0;
  std::uint64_t states_live_at_exit = 0;
  std::uint64_t sat_queries = 0;
  std::uint64_t unknown_verdicts = 0;
  std::uint64_t wall_ms = 0;
};

struct PathOutcome {
  EndKind end = EndKind::None;
  std::vector<TermPtr> outputs;
  std::vector<TermPtr> pc;
  std::vector<SymId> input_order;
  std::map<LoopKey, LoopCount> loop_totals;
  std::vector<SideEffect> log;  // ordered side effects, for post-run pairing
};

struct Report {
  std::vector<BugReport> bugs;  // severity-sorted, one per (kind, fn, index)
  Metrics metrics;
  Metrics summary_work;  // cost of summaries built during this run, if any
  std::vector<PathOutcome> paths;  // terminal paths in discovery order
  bool incomplete = false;         // state budget exhausted or deadline hit
  bool timed_out = false;          // stopped by the wall deadline
};

// Extension points for engines built on the same worklist loop. All hooks are
// optional; a default-constructed ExploreHooks reproduces plain exploration.
struct ExploreHooks {
  // Invoked when the next instruction is a call whose callee resolves to a
  // known function. Returning a successor list replaces inline execution of
  // the call; each successor must sit past the call or be terminal, and must
  // already be feasibility-filtered. An empty list terminates the path as
  // infeasible. Returning nullopt executes the call inline.
  std::function<std::optional<std::vector<PathState>>(
      const PathState&, const std::string& callee, ExecContext&)>
      on_call;
  // Observes every terminal path after bug classification.
  std::function<void(const PathState&)> on_terminal;
  // Replaces the default entry state.
  std::function<PathState(ExecContext&)> make_entry;
};

Report explore(const Program& prog, const ExploreConfig& cfg);
Report explore(const Program& prog, const ExploreConfig& cfg,
               const ExploreHooks& hooks);

}  // namespace symsum
