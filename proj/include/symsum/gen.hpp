#pragma once

// Generator for the nested-loop benchmark family. Depth-d programs sum inputs
// over d nested counted loops; each innermost iteration forks on one input
// comparison, so a plain exploration creates exactly 1 + 2*iters^depth states
// while a per-loop summarizing engine stays linear in depth.

#include <string>

#include "symsum/ir.hpp"

namespace symsum {

struct GenSpec {
  int depth = 1;         // 1..5 nested loops
  int iters = 8;         // iterations per loop, >= 1
  bool with_bug = false; // append an input-derived indirect jump after the loops
};

// IR source text; parseable by parse_program.
std::string gen_nested_loops(const GenSpec& spec);

}  // namespace symsum
