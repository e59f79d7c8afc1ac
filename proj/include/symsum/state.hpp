#pragma once

// Machine model shared by the symbolic engines: width-scaled memory layout,
// memory cells (data, return tokens, canaries), per-path symbolic state, and
// the side-effect/event records the summary and bug layers consume.

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "symsum/ir.hpp"
#include "symsum/solver.hpp"
#include "symsum/term.hpp"

namespace symsum {

// Word-addressed regions, scaled by S = 2^width (defaults shown for W=16):
// globals [S/256, S/16)   = [0x0100, 0x1000)
// heap    [S/16,  S/2)    = [0x1000, 0x8000)
// shadow  [3S/4, 13S/16)  = [0xC000, 0xD000)   reference-parameter cells
// stack   [13S/16, S-16]  grows down from stack_top = S-16 = 0xFFF0
struct MemLayout {
  int width = 16;
  std::uint32_t globals_lo = 0, globals_hi = 0;
  std::uint32_t heap_lo = 0, heap_hi = 0;
  std::uint32_t shadow_base = 0, shadow_stride = 0;
  std::uint32_t stack_floor = 0, stack_top = 0;

  static MemLayout for_width(int w);
  bool in_globals(std::uint32_t a) const {
    return a >= globals_lo && a < globals_hi;
  }
  bool in_heap(std::uint32_t a) const { return a >= heap_lo && a < heap_hi; }
  bool in_shadow(std::uint32_t a) const {
    return a >= shadow_base && a < stack_floor;
  }
  bool in_stack(std::uint32_t a) const { return a >= stack_floor; }
};

// A memory word. Return addresses and canaries are opaque: using one as an
// arithmetic value is an engine event, never a Term.
struct Cell {
  enum class Kind { Data, CodeToken, CanaryMarker };
  Kind kind = Kind::Data;
  TermPtr data;               // Data
  std::string fn;             // CodeToken: return function ...
  int ret_index = 0;          // ... and instruction index
  std::uint64_t frame_id = 0; // CanaryMarker

  static Cell make_data(TermPtr t);
  static Cell make_token(const std::string& fn, int ret_index);
  static Cell make_canary(std::uint64_t frame_id);
};

// The function name a return token carries for the synthetic bottom frame;
// never a legal identifier, so it cannot collide.
inline const char* kSentinelFn = "<exit>";

enum class EffectOp { Malloc, Free, MemWrite, GlobalWrite, MemRead, Output };

struct SideEffect {
  EffectOp op{};
  TermPtr addr;                    // null for Output
  TermPtr value;                   // written/read/output value
  TermPtr size;                    // Malloc: size term as given
  std::uint32_t size_concrete = 0; // Malloc: size actually reserved
  int pre_index = -1;              // summary entry this effect belongs to
  std::string origin;              // function that performed the effect
};

struct HeapChunk {
  std::uint32_t base = 0, size = 0;
  bool live = true;
  std::string freed_by;  // function that freed it (evidence for DoubleFree)
  int freed_at = -1;     // instruction index of that free
};

struct Frame {
  std::uint64_t frame_id = 0;
  std::uint32_t canary_addr = 0;
  std::string fn;
};

enum class EventKind {
  SymbolicTarget,       // indirect control target is not concrete
  ControlCorruption,    // return target cell is not a CodeToken
  StackSmash,           // canary mismatch at ret
  HeapOverflow,         // write to a chunk guard cell
  UseAfterFree,         // access inside a freed chunk
  DoubleFree,
  InvalidFree,          // diagnostic: free of a non-chunk address
  InvalidJump,          // diagnostic: concrete target out of range
  UnconstrainedAccess,  // unbounded symbolic address, token read as data
  HeapExhausted,        // diagnostic; faults the state
  StackExhausted,       // diagnostic; faults the state
  SymbolicSize,         // diagnostic: alloc size was concretized
};

const char* event_kind_name(EventKind k);

struct Event {
  EventKind kind{};
  std::string fn;
  int index = 0;
  TermPtr addr, value;
  std::string note;
};

enum class EndKind { None, Halt, Return, Fault };

struct LoopKey {
  std::string fn;
  int tail = 0, head = 0;
  bool operator<(const LoopKey& o) const {
    if (fn != o.fn) return fn < o.fn;
    if (tail != o.tail) return tail < o.tail;
    return head < o.head;
  }
};

struct LoopCount {
  int current = 0;  // traversals since the loop was last entered
  int total = 0;    // traversals over the whole path
};

struct PathState {
  std::string fn;
  int idx = 0;
  std::array<TermPtr, kNumRegs> regs{};
  std::map<std::uint32_t, Cell> mem;
  std::vector<HeapChunk> chunks;  // ascending base
  std::uint32_t bump = 0;         // next guard address
  std::vector<Frame> frames;
  std::uint64_t next_frame_id = 1;

  std::vector<TermPtr> pc;  // path condition, conjunction
  SymId watermark = 0;      // max symbol id referenced by pc

  std::vector<SideEffect> log;
  std::vector<TermPtr> outputs;
  std::vector<SymId> input_order;  // `input` symbols in read order
  int input_ordinal = 0;
  // Symbols minted for reads of unwritten cells, with the cell address; the
  // summary engine binds these to caller memory when applying an entry.
  std::vector<std::pair<SymId, std::uint32_t>> implicit_reads;

  std::map<LoopKey, LoopCount> loop_counters;
  std::vector<Event> events;
  std::size_t events_reported = 0;  // bug-check bookkeeping

  std::uint64_t steps = 0;
  EndKind end = EndKind::None;

  bool terminal() const { return end != EndKind::None; }
  void add_constraint(const TermPtr& c);  // simplifies, updates watermark
};

struct ExecStats {
  std::uint64_t sat_queries = 0;
  std::uint64_t unknown_verdicts = 0;
};

struct ExecContext {
  const Program* prog = nullptr;
  MemLayout layout;
  SolverConfig solver;
  SymGen* gen = nullptr;
  std::size_t fanout = 8;  // max symbolic-address forks
  ExecStats* stats = nullptr;

  SatResult check(const std::vector<TermPtr>& constraints) const;
};

// Entry state for exploring `fn`: sp at the stack top minus the synthetic
// bottom frame, every other register an unconstrained input symbol.
PathState make_initial_state(const std::string& fn, ExecContext& ctx);

// One instruction. Successors carry appended constraints at branches;
// feasibility filtering is the caller's job. Terminal states step to nothing.
std::vector<PathState> step(const PathState& s, ExecContext& ctx);

// Memory read with fan-out: parallel arrays of successor states and the value
// each one observed.
struct ReadResult {
  std::vector<PathState> states;
  std::vector<TermPtr> values;
};
ReadResult read_mem(const PathState& s, const TermPtr& addr, ExecContext& ctx);

// Memory write; may fork on symbolic addresses.
std::vector<PathState> write_mem(const PathState& s, const TermPtr& addr,
                                 const TermPtr& value, ExecContext& ctx);

// Bump allocation; returns the concrete base as a Term and mutates s.
TermPtr sym_malloc(PathState& s, const TermPtr& size, ExecContext& ctx);

void sym_free(PathState& s, const TermPtr& addr, ExecContext& ctx);

// Heap-discipline check for a concrete access: emits UseAfterFree inside a
// freed chunk (guards included) and HeapOverflow on a live guard write. Used
// by the executor on every concrete access and by side-effect replay.
void note_access(PathState& s, std::uint32_t a, bool is_write,
                 ExecContext& ctx);

}  // namespace symsum
