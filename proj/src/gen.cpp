#include "symsum/gen.hpp"

#include <stdexcept>

namespace symsum {

// Register roles: t0 input, t1..t5 loop counters (outermost first), t6
// accumulator, t7 bug staging, t8 the magic constant, t9 scratch.
std::string gen_nested_loops(const GenSpec& spec) {
  if (spec.depth < 1 || spec.depth > 5)
    throw std::invalid_argument("gen_nested_loops: depth must be in 1..5");
  if (spec.iters < 1)
    throw std::invalid_argument("gen_nested_loops: iters must be positive");

  std::string s = "fn main {\n";
  int idx = 0;  // instruction index of the next emitted instruction
  auto ins = [&](const std::string& text) {
    s += "  " + text + "\n";
    ++idx;
  };
  auto counter = [](int k) { return "t" + std::to_string(k); };
  const std::string n = std::to_string(spec.iters);

  ins("const t6, 0");
  for (int k = 1; k <= spec.depth; ++k) {
    ins("const " + counter(k) + ", 0");
    s += "L" + std::to_string(k) + ":\n";
    ins("const t9, " + n);
    ins("bge " + counter(k) + ", t9, E" + std::to_string(k));
  }
  ins("input t0");
  ins("const t8, 7");
  ins("bne t0, t8, C");
  ins("halt");
  s += "C:\n";
  ins("add t6, t6, t0");
  ins("const t9, 1");
  ins("add " + counter(spec.depth) + ", " + counter(spec.depth) + ", t9");
  ins("jmp L" + std::to_string(spec.depth));
  for (int k = spec.depth; k >= 2; --k) {
    s += "E" + std::to_string(k) + ":\n";
    ins("const t9, 1");
    ins("add " + counter(k - 1) + ", " + counter(k - 1) + ", t9");
    ins("jmp L" + std::to_string(k - 1));
  }
  s += "E1:\n";
  if (spec.with_bug) {
    // t7 = input + index-of-halt: the attacker reaches any instruction.
    const int halt_index = idx + 4;
    ins("input t7");
    ins("const t6, " + std::to_string(halt_index));
    ins("add t7, t7, t6");
    ins("jmpr t7");
    ins("halt");
  } else {
    ins("output t6");
    ins("halt");
  }
  s += "}\n";
  return s;
}

}  // namespace symsum
