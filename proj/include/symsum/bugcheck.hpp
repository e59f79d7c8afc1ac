#pragma once

// Classifies executor events into bug reports. Pure with respect to the
// machine: it only reads the path condition (plus one model query for
// hijack witnesses) and advances the state's reported-events watermark.

#include <optional>
#include <string>
#include <vector>

#include "symsum/state.hpp"

namespace symsum {

enum class BugKind {
  Hijack,             // attacker-steered control transfer
  ControlCorruption,  // control data overwritten, not input-derived
  StackSmash,
  DoubleFree,
  UAF,
  HeapOverflow,
  UnconstrainedAccess,
};

const char* bug_kind_name(BugKind k);

// Larger is more severe; used only for ordering reports.
int bug_severity(BugKind k);

struct BugReport {
  BugKind kind{};
  std::string function;
  int index = 0;
  std::optional<Model> witness;  // satisfies pc by substitution when present
  std::vector<TermPtr> pc;       // path-condition snapshot at report time
  bool interprocedural = false;  // raised outside the entry function
  TermPtr addr, value;           // offending address/term when applicable
  std::optional<std::uint32_t> crafted;  // Hijack: steered target under witness
  std::string note;
};

// Classify events accumulated on s since the last call; advances
// s.events_reported. Diagnostics (invalid frees/jumps, resource exhaustion,
// size concretization) are not bugs and produce no report.
std::vector<BugReport> check_state(PathState& s, ExecContext& ctx,
                                   const std::string& entry);

// Severity-descending, then function, then instruction index.
void sort_reports(std::vector<BugReport>& reports);

}  // namespace symsum
