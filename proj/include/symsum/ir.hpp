#pragma once

// Textual register IR: parser, printer, and the static analyses the engines
// rely on (CFG + dominators, natural loops, call graph, parameter inference).
// Everything here is immutable after construction and safe to share.

#include <cstdint>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace symsum {

// Registers: a0-a5 (arguments), rv (return value), sp (stack pointer),
// t0-t9 (caller-saved temporaries). Indexed 0..17 in this order.
constexpr int kNumRegs = 18;
constexpr int kRegA0 = 0;
constexpr int kRegRv = 6;
constexpr int kRegSp = 7;
constexpr int kRegT0 = 8;

const char* reg_name(int r);
int reg_index(const std::string& name);  // -1 when not a register

enum class Op {
  Const, Mov,
  Add, Sub, Mul, And, Or, Xor, Shl, Shr,
  Beq, Bne, Blt, Bge,  // blt/bge compare signed two's complement
  Jmp, Jmpr, Call, Callr, Ret,
  Load, Store, Lea,
  Alloc, Free,
  Input, Output, Halt,
};

const char* op_name(Op op);

// Operand mapping by opcode:
//   const rd, imm            | mov rd, rs1
//   <arith> rd, rs1, rs2     | beq/bne/blt/bge rs1, rs2, sym(target)
//   jmp sym(target)          | jmpr rs1
//   call sym                 | callr rs1               | ret
//   load rd, rs1, imm        | store rs1, imm, rs2     | lea rd, rs1, imm
//   alloc rd, rs1            | free rs1
//   input rd                 | output rs1              | halt
struct Instr {
  Op op = Op::Halt;
  int rd = -1, rs1 = -1, rs2 = -1;
  std::int64_t imm = 0;   // masked to the machine width at execution
  std::string sym;        // label or callee name as written
  int target = -1;        // resolved instruction index for branches and jmp
  int line = 0, col = 1;  // source position for diagnostics
};

struct Function {
  std::string name;
  std::vector<Instr> instrs;
  std::map<std::string, int> label_to_index;
  std::vector<std::pair<std::string, int>> labels_in_order;  // as written
};

struct Program {
  std::vector<std::string> order;  // definition order
  std::map<std::string, Function> functions;
  std::string entry = "main";  // globals/heap/stack regions are width-scaled
                               // and live in MemLayout, not here
};

struct ParseError : std::runtime_error {
  int line, col;
  ParseError(int l, int c, const std::string& msg)
      : std::runtime_error("line " + std::to_string(l) + ":" +
                           std::to_string(c) + ": " + msg),
        line(l), col(c) {}
};

// Grammar: `fn NAME {` ... `}`; one instruction or `LABEL:` per line (a brace
// also ends a logical line, so `fn main { halt }` works); `#` starts a
// comment; immediates are decimal or 0x-hex, optionally negative.
// Enforced here: unique function names, unique labels per function, resolved
// branch labels and call targets, operand arity, and that control cannot fall
// off the end of a function (last instruction is ret/halt/jmp/jmpr).
Program parse_program(const std::string& text);

std::string unparse(const Program& p);
std::string unparse(const Function& f);

// --- CFG ---------------------------------------------------------------

struct Block {
  int first = 0, last = 0;  // instruction index range, inclusive
  std::vector<int> succs;   // jmpr/ret/halt have none statically
};

struct Cfg {
  std::vector<Block> blocks;  // blocks[0] is the entry
  std::vector<int> block_of;  // instruction index -> block id
  std::vector<bool> reachable;
  std::vector<int> idom;  // immediate dominator, -1 for entry/unreachable
  std::vector<std::vector<std::uint64_t>> dom;  // bitset per reachable block
  std::vector<std::pair<int, int>> back_edges;  // (tail, head), head dom tail
  bool irreducible = false;  // some cycle is not headed by a dominator
};

Cfg build_cfg(const Function& fn);
bool dominates(const Cfg& cfg, int a, int b);  // a dominates b (reachable b)

// --- Loops -------------------------------------------------------------

struct Loop {
  int header = 0;
  std::set<int> blocks;  // block ids, including the header
  std::vector<std::pair<int, int>> back_edges;
  int parent = -1;  // index into LoopForest::loops, -1 for roots
  std::vector<int> children;
  int depth = 1;  // 1 for roots
};

struct LoopForest {
  std::vector<Loop> loops;        // ordered by header block id
  std::vector<int> roots;
  std::vector<int> loop_of_block; // innermost loop per block, -1 outside
  bool irreducible = false;       // forest incomplete; treat regions opaquely
};

LoopForest detect_loops(const Cfg& cfg);

// --- Call graph --------------------------------------------------------

struct CallGraph {
  std::map<std::string, std::set<std::string>> callees;  // static `call` only
  std::vector<std::string> order;  // callees before callers, deterministic
  std::set<std::string> recursive; // members of cyclic SCCs or self-loops
};

CallGraph build_call_graph(const Program& p);

// --- Parameter inference ------------------------------------------------

enum class ParamKind { Value, Reference, Unknown };

struct ParamInfo {
  int arity = 0;                  // first `arity` argument registers
  std::vector<ParamKind> kinds;   // size == arity
};

// Arity joins two sources, resolved toward the larger: argument registers
// live at function entry (read before written on some path), and argument
// registers written before the call at every static call site. Kinds follow
// the first textual access: address operands of load/store, lea sources and
// freed pointers are Reference; overwrites and pure value uses (branches,
// output, stored values, alloc sizes, jmpr) are Value; a copy or arithmetic
// first access traces the derived value forward until an address use, an
// overwrite, or a control split (the latter yields Unknown).
ParamInfo infer_param_info(const Program& p, const std::string& fn);

}  // namespace symsum
