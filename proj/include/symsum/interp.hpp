#pragma once

// Concrete reference interpreter. Mirrors the symbolic machine exactly on the
// concrete subset: same memory layout, allocator, canary/token discipline and
// wrap-around arithmetic, with every would-be-symbolic source fixed: `input`
// reads the supplied vector (0 once exhausted) and unmapped memory reads 0.

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "symsum/ir.hpp"
#include "symsum/state.hpp"

namespace symsum {

struct InterpResult {
  enum class Stop { Halt, Return, Fault, StepLimit };
  Stop stop = Stop::Halt;
  std::string fault_reason;  // set when stop == Fault
  std::vector<std::uint32_t> outputs;
  std::array<std::uint32_t, kNumRegs> regs{};
  std::uint64_t steps = 0;
};

InterpResult interpret(const Program& prog,
                       const std::vector<std::uint32_t>& inputs, int width,
                       const std::string& entry = "main",
                       std::uint64_t max_steps = 1000000);

}  // namespace symsum
