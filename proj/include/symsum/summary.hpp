#pragma once

// Compositional engine: per-function summaries created lazily bottom-up and
// applied at call sites instead of re-exploring callees. A summary is a list
// of entries ⟨α, ω, Θ⟩ — a precondition over the function's inputs, the
// return-value term, and the ordered side effects to replay in the caller.

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "symsum/engine.hpp"

namespace symsum {

// A read of a cell the summarized function never wrote: its value is an input
// of the summary, bound to the caller's memory at application time.
struct EntryRead {
  enum class Src {
    Absolute,    // shared cell (global or raw address): read the same address
    RefParam,    // reference-parameter image: read *(actual arg + offset)
    CallerStack  // caller frame cell: read *(callee sp + offset)
  };
  SymId sym = 0;
  Src src = Src::Absolute;
  std::uint32_t addr = 0;    // Absolute: the cell address
  int param = 0;             // RefParam: argument register ordinal
  std::uint32_t offset = 0;  // RefParam / CallerStack displacement
};

// A symbol private to one summarized path: values of `input` instructions,
// fresh unknowns, and placeholder heap bases. Renamed fresh per application;
// input-class symbols stay input-class so taint survives substitution.
struct CarriedSym {
  SymId sym = 0;
  bool input_kind = false;
  int width = 16;
  std::string name;
};

struct SummaryEntry {
  std::vector<TermPtr> alpha;  // precondition, conjunction
  TermPtr omega;               // return-register term
  std::vector<SideEffect> theta;
  std::vector<Event> events;  // re-raised in the caller for classification
  EndKind end = EndKind::Return;
  std::vector<EntryRead> reads;
  std::vector<CarriedSym> carried;
  std::vector<SymId> input_reads;   // carried ids minted by `input`, in order
  std::vector<SymId> malloc_bases;  // carried ids standing in for Θ Malloc
                                    // bases, in Θ order
  SatResult alpha_verdict = SatResult::Sat;
  bool havoc = false;   // catch-all row (recursion or budget exhaustion)
  int merged_from = 1;  // completed paths folded into this entry
};

struct Summary {
  std::string fn;
  ParamInfo params;
  // Input-symbol declaration: one symbol per register (0 where none, i.e.
  // sp), bound to the caller's register terms at application.
  std::array<SymId, kNumRegs> reg_inputs{};
  SymId sp_anchor = 0;         // bound to the sp the callee observes
  std::uint32_t entry_sp = 0;  // concrete sp of the summarizing run
  int width = 16;
  std::vector<SummaryEntry> entries;  // completion order
  bool partial = false;               // pruned or budget-stopped exploration
  Metrics creation;
  int unknown_alpha = 0;  // entries stored with an Unknown α verdict
};

struct SummaryTable {
  std::map<std::string, Summary> summaries;
  std::uint64_t hits = 0;
  std::uint64_t misses = 0;
  std::uint64_t summarizations = 0;  // summarizing runs this session
  std::uint64_t havoc_calls = 0;     // recursion fallbacks
  std::set<std::string> in_progress;  // summarization stack (transient)
};

// Caller-side actuals for one call site.
struct ActualBinding {
  std::array<TermPtr, kNumRegs> regs{};
  std::uint32_t callee_sp = 0;  // sp the callee observes (caller sp - frame)
  int arity = 0;
};

// Collects the actuals for a call about to be summarized away. Requires a
// concrete caller sp (a symbolic one faults in the executor instead).
ActualBinding get_preconditions(const PathState& caller, const ParamInfo& info,
                                const MemLayout& layout);

// Explores `fn` from scratch with unconstrained inputs, folds every terminal
// path into an entry, and registers the result in the table. Partial
// exploration appends a havoc catch-all entry.
Summary summarize_function(const Program& p, const std::string& fn,
                           const ExploreConfig& cfg, SummaryTable& table);

// Forks the caller over every feasible entry: substitutes actuals for the
// summary's inputs, renames carried symbols fresh, replays Θ through the
// caller's heap, re-raises the entry's events, and installs ω as rv. An empty
// result means no entry applies under the caller's path condition.
std::vector<PathState> apply_summary(const PathState& caller,
                                     const Summary& sum,
                                     const ActualBinding& bind,
                                     ExecContext& ctx);

// Whole-program exploration where calls resolve through the table,
// summarizing callees on first use. Table metrics (hits, misses,
// summarizations) survive in `table`; summarizing-run state counts are
// reported separately in the report's summary_work.
Report run_compositional(const Program& p, const ExploreConfig& cfg,
                         SummaryTable& table);
Report run_compositional(const Program& p, const ExploreConfig& cfg);

// Post-run pairing over each completed path's side-effect log: a Free whose
// address can alias an earlier Free yields a DoubleFree finding; a later
// write or read that can alias a freed address yields a UAF finding. Each
// finding carries a witness model when the solver produces one.
std::vector<BugReport> combine_side_effects(const Report& rep,
                                            const SolverConfig& cfg);

// Cache persistence. The key is a content hash of the unparsed program plus
// the width and loop limit; a mismatched key reports false and leaves `table`
// untouched.
std::string table_to_json(const SummaryTable& table, const Program& p,
                          const ExploreConfig& cfg);
bool table_from_json(const std::string& text, const Program& p,
                     const ExploreConfig& cfg, SummaryTable& table);

}  // namespace symsum
