#include "symsum/bugcheck.hpp"

#include <algorithm>

namespace symsum {

const char* bug_kind_name(BugKind k) {
  switch (k) {
    case BugKind::Hijack: return "Hijack";
    case BugKind::ControlCorruption: return "ControlCorruption";
    case BugKind::StackSmash: return "StackSmash";
    case BugKind::DoubleFree: return "DoubleFree";
    case BugKind::UAF: return "UAF";
    case BugKind::HeapOverflow: return "HeapOverflow";
    case BugKind::UnconstrainedAccess: return "UnconstrainedAccess";
  }
  return "?";
}

int bug_severity(BugKind k) {
  switch (k) {
    case BugKind::Hijack: return 7;
    case BugKind::StackSmash: return 6;
    case BugKind::DoubleFree: return 5;
    case BugKind::UAF: return 5;
    case BugKind::HeapOverflow: return 4;
    case BugKind::ControlCorruption: return 3;
    case BugKind::UnconstrainedAccess: return 1;
  }
  return 0;
}

namespace {

BugReport base_report(BugKind kind, const Event& e, const PathState& s,
                      const std::string& entry) {
  BugReport r;
  r.kind = kind;
  r.function = e.fn;
  r.index = e.index;
  r.pc = s.pc;
  r.interprocedural = e.fn != entry;
  r.addr = e.addr;
  r.value = e.value;
  r.note = e.note;
  return r;
}

// An input-derived control target: the attacker picks the value the path
// condition's model assigns, so the report carries that steered target.
BugReport hijack_report(const Event& e, PathState& s, ExecContext& ctx,
                        const std::string& entry) {
  BugReport r = base_report(BugKind::Hijack, e, s, entry);
  auto m = get_model(s.pc, ctx.solver);
  if (ctx.stats) {
    ++ctx.stats->sat_queries;
    if (!m) ++ctx.stats->unknown_verdicts;
  }
  if (m) {
    r.witness = m;
    if (e.value) r.crafted = eval_term(e.value, m->as_map());
  } else {
    r.note += (r.note.empty() ? "" : "; ");
    r.note += "path condition undecided";
  }
  return r;
}

}  // namespace

std::vector<BugReport> check_state(PathState& s, ExecContext& ctx,
                                   const std::string& entry) {
  std::vector<BugReport> out;
  for (std::size_t i = s.events_reported; i < s.events.size(); ++i) {
    const Event& e = s.events[i];
    switch (e.kind) {
      case EventKind::SymbolicTarget:
        if (e.value && mentions_input(e.value)) {
          out.push_back(hijack_report(e, s, ctx, entry));
        } else {
          BugReport r =
              base_report(BugKind::UnconstrainedAccess, e, s, entry);
          r.note += (r.note.empty() ? "" : "; ");
          r.note += "target unconstrained but not input-derived";
          out.push_back(std::move(r));
        }
        break;
      case EventKind::ControlCorruption:
        if (e.value && mentions_input(e.value))
          out.push_back(hijack_report(e, s, ctx, entry));
        else
          out.push_back(base_report(BugKind::ControlCorruption, e, s, entry));
        break;
      case EventKind::StackSmash:
        out.push_back(base_report(BugKind::StackSmash, e, s, entry));
        break;
      case EventKind::HeapOverflow:
        out.push_back(base_report(BugKind::HeapOverflow, e, s, entry));
        break;
      case EventKind::UseAfterFree:
        out.push_back(base_report(BugKind::UAF, e, s, entry));
        break;
      case EventKind::DoubleFree:
        out.push_back(base_report(BugKind::DoubleFree, e, s, entry));
        break;
      case EventKind::UnconstrainedAccess:
        out.push_back(base_report(BugKind::UnconstrainedAccess, e, s, entry));
        break;
      case EventKind::InvalidFree:
      case EventKind::InvalidJump:
      case EventKind::HeapExhausted:
      case EventKind::StackExhausted:
      case EventKind::SymbolicSize:
        break;  // diagnostics, not bugs
    }
  }
  s.events_reported = s.events.size();
  return out;
}

void sort_reports(std::vector<BugReport>& reports) {
  std::stable_sort(reports.begin(), reports.end(),
                   [](const BugReport& a, const BugReport& b) {
                     if (bug_severity(a.kind) != bug_severity(b.kind))
                       return bug_severity(a.kind) > bug_severity(b.kind);
                     if (a.function != b.function) return a.function < b.function;
                     if (a.index != b.index) return a.index < b.index;
                     return int(a.kind) < int(b.kind);
                   });
}

}  // namespace symsum
