#pragma once

// Decision procedure for conjunctions of bitvector constraints. A constraint
// is any term; it is satisfied when it evaluates nonzero. The pipeline is
// simplify -> constant/equality propagation -> per-symbol interval pruning ->
// bounded exhaustive enumeration over connected components with few symbols.
// Verdicts are exact: Sat is only returned with a model that has been checked
// by substitution, Unsat only when propagation found a contradiction or an
// enumeration covered the whole (pruned) space. Everything else is Unknown,
// which callers must treat as feasible.

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "symsum/term.hpp"

namespace symsum {

struct SolverConfig {
  int width = 16;
  std::uint64_t budget = 200000;  // enumeration steps per query
  int max_enum_syms = 4;          // max symbols jointly enumerated
};

enum class SatResult { Sat, Unsat, Unknown };

struct Model {
  std::map<SymId, std::uint32_t> values;
  std::uint32_t get(SymId s) const {
    auto it = values.find(s);
    return it == values.end() ? 0 : it->second;
  }
  std::unordered_map<SymId, std::uint32_t> as_map() const {
    return {values.begin(), values.end()};
  }
};

struct Verdict {
  SatResult status = SatResult::Unknown;
  Model model;        // meaningful only when status == Sat
  std::string note;   // diagnostic, e.g. which stage decided
};

Verdict check_sat(const std::vector<TermPtr>& constraints, const SolverConfig& cfg);

// Model for a satisfiable set; decided-by-enumeration models are the
// lexicographically lowest assignment (symbols in id order, values ascending).
std::optional<Model> get_model(const std::vector<TermPtr>& constraints,
                               const SolverConfig& cfg);

// Keep only constraints whose free symbols all lie in inputs or carried.
std::vector<TermPtr> project_inputs(const std::vector<TermPtr>& constraints,
                                    const std::set<SymId>& inputs,
                                    const std::set<SymId>& carried);

enum class Tri { True, False, Unknown };

// Are a and b equal under every assignment satisfying the assumptions?
Tri equivalent(const TermPtr& a, const TermPtr& b,
               const std::vector<TermPtr>& assumptions, const SolverConfig& cfg);

// Distinct feasible values of `term` under the constraints, ascending. Stops
// collecting after limit+1 values (callers detect overflow by size > limit).
// nullopt when the space could not be covered (too many symbols or budget).
std::optional<std::vector<std::uint32_t>> enumerate_values(
    const std::vector<TermPtr>& constraints, const TermPtr& term,
    const SolverConfig& cfg, std::size_t limit);

}  // namespace symsum
