#include "symsum/interp.hpp"

#include <map>

namespace symsum {

namespace {

struct ICell {
  enum class Kind { Data, CodeToken, CanaryMarker };
  Kind kind = Kind::Data;
  std::uint32_t value = 0;        // Data
  std::string fn;                 // CodeToken
  int ret_index = 0;              // CodeToken
  std::uint64_t frame_id = 0;     // CanaryMarker
};

struct IFrame {
  std::uint64_t frame_id = 0;
  std::uint32_t canary_addr = 0;
};

}  // namespace

InterpResult interpret(const Program& prog,
                       const std::vector<std::uint32_t>& inputs, int width,
                       const std::string& entry, std::uint64_t max_steps) {
  InterpResult res;
  const MemLayout L = MemLayout::for_width(width);
  const std::uint32_t mask = width_mask(width);

  std::array<std::uint32_t, kNumRegs> regs{};
  std::map<std::uint32_t, ICell> mem;
  std::vector<HeapChunk> chunks;
  std::vector<IFrame> frames;
  std::uint32_t bump = L.heap_lo;
  std::uint64_t next_frame_id = 1;
  std::size_t cursor = 0;

  // Synthetic bottom frame, as in the symbolic machine: returning out of the
  // entry function ends the run.
  std::uint32_t sp = L.stack_top - 2;
  {
    const std::uint64_t fid = next_frame_id++;
    ICell tok;
    tok.kind = ICell::Kind::CodeToken;
    tok.fn = kSentinelFn;
    tok.ret_index = -1;
    mem[sp + 1] = tok;
    ICell can;
    can.kind = ICell::Kind::CanaryMarker;
    can.frame_id = fid;
    mem[sp] = can;
    frames.push_back({fid, sp});
  }
  regs[kRegSp] = sp;

  auto fault = [&](const std::string& why) {
    res.stop = InterpResult::Stop::Fault;
    res.fault_reason = why;
  };
  auto read_cell = [&](std::uint32_t a) -> std::uint32_t {
    auto it = mem.find(a);
    if (it == mem.end() || it->second.kind != ICell::Kind::Data) return 0;
    return it->second.value;
  };
  auto write_cell = [&](std::uint32_t a, std::uint32_t v) {
    ICell c;
    c.kind = ICell::Kind::Data;
    c.value = v;
    mem[a] = c;
  };

  std::string fn = entry;
  int idx = 0;
  bool running = true;
  while (running) {
    if (res.steps >= max_steps) {
      res.stop = InterpResult::Stop::StepLimit;
      break;
    }
    const Function& F = prog.functions.at(fn);
    if (idx < 0 || idx >= int(F.instrs.size())) {
      fault("pc out of range");
      break;
    }
    const Instr& I = F.instrs[idx];
    ++res.steps;
    int next = idx + 1;
    switch (I.op) {
      case Op::Const:
        regs[I.rd] = std::uint32_t(I.imm) & mask;
        idx = next;
        break;
      case Op::Mov:
        regs[I.rd] = regs[I.rs1];
        idx = next;
        break;
      case Op::Add: case Op::Sub: case Op::Mul: case Op::And:
      case Op::Or: case Op::Xor: case Op::Shl: case Op::Shr: {
        BinOp b;
        switch (I.op) {
          case Op::Add: b = BinOp::Add; break;
          case Op::Sub: b = BinOp::Sub; break;
          case Op::Mul: b = BinOp::Mul; break;
          case Op::And: b = BinOp::And; break;
          case Op::Or:  b = BinOp::Or;  break;
          case Op::Xor: b = BinOp::Xor; break;
          case Op::Shl: b = BinOp::Shl; break;
          default:      b = BinOp::Shr; break;
        }
        regs[I.rd] = fold_binop(b, regs[I.rs1], regs[I.rs2], width);
        idx = next;
        break;
      }
      case Op::Beq: case Op::Bne: case Op::Blt: case Op::Bge: {
        BinOp b;
        switch (I.op) {
          case Op::Beq: b = BinOp::Eq;  break;
          case Op::Bne: b = BinOp::Ne;  break;
          case Op::Blt: b = BinOp::Slt; break;
          default:      b = BinOp::Sge; break;
        }
        idx = fold_binop(b, regs[I.rs1], regs[I.rs2], width) ? I.target : next;
        break;
      }
      case Op::Jmp:
        idx = I.target;
        break;
      case Op::Jmpr: {
        const std::uint32_t c = regs[I.rs1];
        if (c < F.instrs.size()) {
          idx = int(c);
        } else {
          fault("jmpr target out of range");
          running = false;
        }
        break;
      }
      case Op::Call:
      case Op::Callr: {
        std::string callee;
        if (I.op == Op::Call) {
          callee = I.sym;
        } else {
          const std::uint32_t c = regs[I.rs1];
          if (c >= prog.order.size()) {
            fault("callr index out of range");
            running = false;
            break;
          }
          callee = prog.order[c];
        }
        if (std::int64_t(sp) - 2 < std::int64_t(L.stack_floor)) {
          fault("stack exhausted");
          running = false;
          break;
        }
        const std::uint32_t nsp = sp - 2;
        const std::uint64_t fid = next_frame_id++;
        ICell tok;
        tok.kind = ICell::Kind::CodeToken;
        tok.fn = fn;
        tok.ret_index = next;
        mem[nsp + 1] = tok;
        ICell can;
        can.kind = ICell::Kind::CanaryMarker;
        can.frame_id = fid;
        mem[nsp] = can;
        frames.push_back({fid, nsp});
        sp = nsp;
        regs[kRegSp] = sp;
        fn = callee;
        idx = 0;
        break;
      }
      case Op::Ret: {
        sp = regs[kRegSp];
        if (frames.empty()) {
          fault("ret with no frame");
          running = false;
          break;
        }
        // Canary mismatch is an observation, not a stop; a corrupted return
        // target is fatal, exactly as in the symbolic machine.
        auto itt = mem.find(sp + 1);
        if (itt == mem.end() || itt->second.kind != ICell::Kind::CodeToken) {
          fault("return target is not a code token");
          running = false;
          break;
        }
        const ICell token = itt->second;
        frames.pop_back();
        sp += 2;
        regs[kRegSp] = sp;
        if (token.fn == kSentinelFn) {
          res.stop = InterpResult::Stop::Return;
          running = false;
          break;
        }
        fn = token.fn;
        idx = token.ret_index;
        break;
      }
      case Op::Load:
        regs[I.rd] = read_cell((regs[I.rs1] + std::uint32_t(I.imm)) & mask);
        idx = next;
        break;
      case Op::Store:
        write_cell((regs[I.rs1] + std::uint32_t(I.imm)) & mask, regs[I.rs2]);
        idx = next;
        break;
      case Op::Lea:
        regs[I.rd] = (regs[I.rs1] + std::uint32_t(I.imm)) & mask;
        idx = next;
        break;
      case Op::Alloc: {
        const std::uint32_t n = regs[I.rs1];
        if (std::uint64_t(bump) + n + 2 > L.heap_hi) {
          fault("heap exhausted");
          running = false;
          break;
        }
        const std::uint32_t base = bump + 1;
        chunks.push_back({base, n, true, {}, -1});
        bump = base + n + 1;
        regs[I.rd] = base;
        idx = next;
        break;
      }
      case Op::Free: {
        const std::uint32_t c = regs[I.rs1];
        for (HeapChunk& ch : chunks)
          if (ch.base == c && ch.live) {
            ch.live = false;
            break;
          }
        idx = next;  // double or invalid frees are observations, not stops
        break;
      }
      case Op::Input:
        regs[I.rd] = (cursor < inputs.size() ? inputs[cursor++] : 0) & mask;
        idx = next;
        break;
      case Op::Output:
        res.outputs.push_back(regs[I.rs1]);
        idx = next;
        break;
      case Op::Halt:
        res.stop = InterpResult::Stop::Halt;
        running = false;
        break;
    }
    sp = regs[kRegSp];
  }
  res.regs = regs;
  return res;
}

}  // namespace symsum
