#include "symsum/ir.hpp"

#include <algorithm>
#include <cassert>
#include <cctype>
#include <sstream>

namespace symsum {

namespace {

const char* kRegNames[kNumRegs] = {"a0", "a1", "a2", "a3", "a4", "a5",
                                   "rv", "sp", "t0", "t1", "t2", "t3",
                                   "t4", "t5", "t6", "t7", "t8", "t9"};

enum class Shape {
  RdImm, RdRs, RdRsRs, RsRsLabel, Label, Rs, Name, None, Rd, RdRsImm, RsImmRs
};

struct OpInfo {
  Op op;
  const char* name;
  Shape shape;
};

// Ordered by Op enum value.
const OpInfo kOps[] = {
    {Op::Const, "const", Shape::RdImm},
    {Op::Mov, "mov", Shape::RdRs},
    {Op::Add, "add", Shape::RdRsRs},
    {Op::Sub, "sub", Shape::RdRsRs},
    {Op::Mul, "mul", Shape::RdRsRs},
    {Op::And, "and", Shape::RdRsRs},
    {Op::Or, "or", Shape::RdRsRs},
    {Op::Xor, "xor", Shape::RdRsRs},
    {Op::Shl, "shl", Shape::RdRsRs},
    {Op::Shr, "shr", Shape::RdRsRs},
    {Op::Beq, "beq", Shape::RsRsLabel},
    {Op::Bne, "bne", Shape::RsRsLabel},
    {Op::Blt, "blt", Shape::RsRsLabel},
    {Op::Bge, "bge", Shape::RsRsLabel},
    {Op::Jmp, "jmp", Shape::Label},
    {Op::Jmpr, "jmpr", Shape::Rs},
    {Op::Call, "call", Shape::Name},
    {Op::Callr, "callr", Shape::Rs},
    {Op::Ret, "ret", Shape::None},
    {Op::Load, "load", Shape::RdRsImm},
    {Op::Store, "store", Shape::RsImmRs},
    {Op::Lea, "lea", Shape::RdRsImm},
    {Op::Alloc, "alloc", Shape::RdRs},
    {Op::Free, "free", Shape::Rs},
    {Op::Input, "input", Shape::Rd},
    {Op::Output, "output", Shape::Rs},
    {Op::Halt, "halt", Shape::None},
};

const OpInfo* find_op(const std::string& name) {
  for (const OpInfo& oi : kOps)
    if (name == oi.name) return &oi;
  return nullptr;
}

bool is_ident(const std::string& s) {
  if (s.empty()) return false;
  if (!std::isalpha((unsigned char)s[0]) && s[0] != '_' && s[0] != '$')
    return false;
  for (char ch : s)
    if (!std::isalnum((unsigned char)ch) && ch != '_' && ch != '$')
      return false;
  return true;
}

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

struct Seg {
  std::string text;
  int line, col;
};

// Logical lines: newline-separated, with braces also acting as separators
// ('{' stays glued to its `fn` header) and '#' comments stripped.
std::vector<Seg> split_segments(const std::string& text) {
  std::vector<Seg> segs;
  std::istringstream in(text);
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::size_t hash = raw.find('#');
    if (hash != std::string::npos) raw = raw.substr(0, hash);
    std::size_t start = 0;
    for (std::size_t i = 0; i <= raw.size(); ++i) {
      bool open = i < raw.size() && raw[i] == '{';
      bool close = i < raw.size() && raw[i] == '}';
      if (i == raw.size() || open || close) {
        std::string chunk = raw.substr(start, i - start);
        if (open) chunk += '{';
        std::string t = trim(chunk);
        if (!t.empty()) {
          int col = int(start + chunk.find_first_not_of(" \t\r")) + 1;
          segs.push_back({t, line_no, col});
        }
        if (close) segs.push_back({"}", line_no, int(i) + 1});
        start = i + 1;
      }
    }
  }
  return segs;
}

std::int64_t parse_imm(const std::string& s, int line, int col) {
  std::string body = s;
  bool neg = false;
  if (!body.empty() && (body[0] == '-' || body[0] == '+')) {
    neg = body[0] == '-';
    body = body.substr(1);
  }
  int base = 10;
  if (body.size() > 2 && body[0] == '0' && (body[1] == 'x' || body[1] == 'X')) {
    base = 16;
    body = body.substr(2);
  }
  if (body.empty()) throw ParseError(line, col, "bad immediate '" + s + "'");
  std::int64_t v = 0;
  for (char ch : body) {
    int d;
    if (ch >= '0' && ch <= '9') d = ch - '0';
    else if (base == 16 && ch >= 'a' && ch <= 'f') d = ch - 'a' + 10;
    else if (base == 16 && ch >= 'A' && ch <= 'F') d = ch - 'A' + 10;
    else throw ParseError(line, col, "bad immediate '" + s + "'");
    v = v * base + d;
    if (v > 0x100000000LL)
      throw ParseError(line, col, "immediate out of range: '" + s + "'");
  }
  if (neg) v = -v;
  if (v < -0x80000000LL || v >= 0x100000000LL)
    throw ParseError(line, col, "immediate out of range: '" + s + "'");
  return v;
}

int parse_reg(const std::string& s, int line, int col) {
  int r = reg_index(s);
  if (r < 0) throw ParseError(line, col, "unknown register '" + s + "'");
  return r;
}

Instr parse_instr(const Seg& seg) {
  std::size_t sp = seg.text.find_first_of(" \t");
  std::string opw = sp == std::string::npos ? seg.text : seg.text.substr(0, sp);
  const OpInfo* oi = find_op(opw);
  if (!oi)
    throw ParseError(seg.line, seg.col, "unknown opcode '" + opw + "'");

  std::vector<std::string> ops;
  if (sp != std::string::npos) {
    std::string rest = seg.text.substr(sp + 1);
    std::size_t pos = 0;
    while (true) {
      std::size_t comma = rest.find(',', pos);
      ops.push_back(trim(rest.substr(pos, comma - pos)));
      if (comma == std::string::npos) break;
      pos = comma + 1;
    }
    if (ops.size() == 1 && ops[0].empty()) ops.clear();
  }
  for (const std::string& o : ops)
    if (o.empty())
      throw ParseError(seg.line, seg.col, "empty operand in '" + seg.text + "'");

  auto need = [&](std::size_t n) {
    if (ops.size() != n)
      throw ParseError(seg.line, seg.col,
                       "'" + opw + "' expects " + std::to_string(n) +
                           " operand(s), got " + std::to_string(ops.size()));
  };
  auto ident = [&](const std::string& s) {
    if (!is_ident(s))
      throw ParseError(seg.line, seg.col, "bad name '" + s + "'");
    return s;
  };

  Instr ins;
  ins.op = oi->op;
  ins.line = seg.line;
  ins.col = seg.col;
  int L = seg.line, C = seg.col;
  switch (oi->shape) {
    case Shape::RdImm:
      need(2);
      ins.rd = parse_reg(ops[0], L, C);
      ins.imm = parse_imm(ops[1], L, C);
      break;
    case Shape::RdRs:
      need(2);
      ins.rd = parse_reg(ops[0], L, C);
      ins.rs1 = parse_reg(ops[1], L, C);
      break;
    case Shape::RdRsRs:
      need(3);
      ins.rd = parse_reg(ops[0], L, C);
      ins.rs1 = parse_reg(ops[1], L, C);
      ins.rs2 = parse_reg(ops[2], L, C);
      break;
    case Shape::RsRsLabel:
      need(3);
      ins.rs1 = parse_reg(ops[0], L, C);
      ins.rs2 = parse_reg(ops[1], L, C);
      ins.sym = ident(ops[2]);
      break;
    case Shape::Label:
      need(1);
      ins.sym = ident(ops[0]);
      break;
    case Shape::Rs:
      need(1);
      ins.rs1 = parse_reg(ops[0], L, C);
      break;
    case Shape::Name:
      need(1);
      ins.sym = ident(ops[0]);
      break;
    case Shape::None:
      need(0);
      break;
    case Shape::Rd:
      need(1);
      ins.rd = parse_reg(ops[0], L, C);
      break;
    case Shape::RdRsImm:
      need(3);
      ins.rd = parse_reg(ops[0], L, C);
      ins.rs1 = parse_reg(ops[1], L, C);
      ins.imm = parse_imm(ops[2], L, C);
      break;
    case Shape::RsImmRs:
      need(3);
      ins.rs1 = parse_reg(ops[0], L, C);
      ins.imm = parse_imm(ops[1], L, C);
      ins.rs2 = parse_reg(ops[2], L, C);
      break;
  }
  return ins;
}

bool ends_block_hard(Op op) {
  return op == Op::Ret || op == Op::Halt || op == Op::Jmp || op == Op::Jmpr;
}

}  // namespace

const char* reg_name(int r) {
  assert(r >= 0 && r < kNumRegs);
  return kRegNames[r];
}

int reg_index(const std::string& name) {
  for (int i = 0; i < kNumRegs; ++i)
    if (name == kRegNames[i]) return i;
  return -1;
}

const char* op_name(Op op) { return kOps[int(op)].name; }

Program parse_program(const std::string& text) {
  Program prog;
  Function* cur = nullptr;
  int last_line = 1;

  for (const Seg& seg : split_segments(text)) {
    last_line = seg.line;
    if (!cur) {
      if (seg.text.rfind("fn", 0) != 0 ||
          (seg.text.size() > 2 && !std::isspace((unsigned char)seg.text[2])))
        throw ParseError(seg.line, seg.col, "expected 'fn NAME {'");
      std::string rest = trim(seg.text.substr(2));
      if (rest.empty() || rest.back() != '{')
        throw ParseError(seg.line, seg.col, "expected '{' after function name");
      std::string name = trim(rest.substr(0, rest.size() - 1));
      if (!is_ident(name))
        throw ParseError(seg.line, seg.col, "bad function name '" + name + "'");
      if (prog.functions.count(name))
        throw ParseError(seg.line, seg.col, "duplicate function '" + name + "'");
      prog.order.push_back(name);
      cur = &prog.functions[name];
      cur->name = name;
      continue;
    }
    if (seg.text == "}") {
      for (const auto& [lbl, idx] : cur->labels_in_order)
        if (idx == int(cur->instrs.size()))
          throw ParseError(seg.line, seg.col,
                           "label '" + lbl + "' at end of function");
      if (cur->instrs.empty() || !ends_block_hard(cur->instrs.back().op))
        throw ParseError(seg.line, seg.col,
                         "control can fall off the end of function '" +
                             cur->name + "'");
      cur = nullptr;
      continue;
    }
    if (seg.text.rfind("fn ", 0) == 0)
      throw ParseError(seg.line, seg.col,
                       "missing '}' before next function");
    if (seg.text.back() == ':') {
      std::string lbl = trim(seg.text.substr(0, seg.text.size() - 1));
      if (!is_ident(lbl))
        throw ParseError(seg.line, seg.col, "bad label '" + lbl + "'");
      if (cur->label_to_index.count(lbl))
        throw ParseError(seg.line, seg.col, "duplicate label '" + lbl + "'");
      cur->label_to_index[lbl] = int(cur->instrs.size());
      cur->labels_in_order.emplace_back(lbl, int(cur->instrs.size()));
      continue;
    }
    cur->instrs.push_back(parse_instr(seg));
  }
  if (cur)
    throw ParseError(last_line, 1,
                     "missing '}' at end of function '" + cur->name + "'");

  // Resolve branch targets and call targets.
  for (auto& [name, fn] : prog.functions) {
    for (Instr& ins : fn.instrs) {
      switch (ins.op) {
        case Op::Beq: case Op::Bne: case Op::Blt: case Op::Bge: case Op::Jmp: {
          auto it = fn.label_to_index.find(ins.sym);
          if (it == fn.label_to_index.end())
            throw ParseError(ins.line, ins.col,
                             "undefined label '" + ins.sym + "'");
          ins.target = it->second;
          break;
        }
        case Op::Call:
          if (!prog.functions.count(ins.sym))
            throw ParseError(ins.line, ins.col,
                             "undefined call target '" + ins.sym + "'");
          break;
        default:
          break;
      }
    }
  }
  return prog;
}

std::string unparse(const Function& f) {
  std::map<int, std::vector<std::string>> labels_at;
  for (const auto& [lbl, idx] : f.labels_in_order)
    labels_at[idx].push_back(lbl);

  std::string out = "fn " + f.name + " {\n";
  for (std::size_t i = 0; i < f.instrs.size(); ++i) {
    auto it = labels_at.find(int(i));
    if (it != labels_at.end())
      for (const std::string& lbl : it->second) out += lbl + ":\n";
    const Instr& ins = f.instrs[i];
    out += "  ";
    out += op_name(ins.op);
    auto reg = [&](int r) { return std::string(reg_name(r)); };
    switch (kOps[int(ins.op)].shape) {
      case Shape::RdImm:
        out += " " + reg(ins.rd) + ", " + std::to_string(ins.imm);
        break;
      case Shape::RdRs:
        out += " " + reg(ins.rd) + ", " + reg(ins.rs1);
        break;
      case Shape::RdRsRs:
        out += " " + reg(ins.rd) + ", " + reg(ins.rs1) + ", " + reg(ins.rs2);
        break;
      case Shape::RsRsLabel:
        out += " " + reg(ins.rs1) + ", " + reg(ins.rs2) + ", " + ins.sym;
        break;
      case Shape::Label:
      case Shape::Name:
        out += " " + ins.sym;
        break;
      case Shape::Rs:
        out += " " + reg(ins.rs1);
        break;
      case Shape::None:
        break;
      case Shape::Rd:
        out += " " + reg(ins.rd);
        break;
      case Shape::RdRsImm:
        out += " " + reg(ins.rd) + ", " + reg(ins.rs1) + ", " +
               std::to_string(ins.imm);
        break;
      case Shape::RsImmRs:
        out += " " + reg(ins.rs1) + ", " + std::to_string(ins.imm) + ", " +
               reg(ins.rs2);
        break;
    }
    out += "\n";
  }
  out += "}\n";
  return out;
}

std::string unparse(const Program& p) {
  std::string out;
  for (const std::string& name : p.order) {
    if (!out.empty()) out += "\n";
    out += unparse(p.functions.at(name));
  }
  return out;
}

// --- CFG -----------------------------------------------------------------

namespace {

bool bit_get(const std::vector<std::uint64_t>& v, int i) {
  return (v[i / 64] >> (i % 64)) & 1;
}
void bit_set(std::vector<std::uint64_t>& v, int i) {
  v[i / 64] |= std::uint64_t(1) << (i % 64);
}

std::vector<std::vector<int>> predecessors(const Cfg& cfg) {
  std::vector<std::vector<int>> preds(cfg.blocks.size());
  for (std::size_t b = 0; b < cfg.blocks.size(); ++b)
    for (int s : cfg.blocks[b].succs) preds[s].push_back(int(b));
  return preds;
}

}  // namespace

Cfg build_cfg(const Function& fn) {
  Cfg cfg;
  const auto& ins = fn.instrs;
  const int n = int(ins.size());
  assert(n > 0);

  std::set<int> leaders{0};
  for (int i = 0; i < n; ++i) {
    switch (ins[i].op) {
      case Op::Beq: case Op::Bne: case Op::Blt: case Op::Bge:
      case Op::Jmp:
        leaders.insert(ins[i].target);
        if (i + 1 < n) leaders.insert(i + 1);
        break;
      case Op::Jmpr: case Op::Ret: case Op::Halt:
        if (i + 1 < n) leaders.insert(i + 1);
        break;
      default:
        break;
    }
  }

  std::vector<int> ls(leaders.begin(), leaders.end());
  const int nb = int(ls.size());
  cfg.block_of.assign(n, -1);
  for (int b = 0; b < nb; ++b) {
    Block blk;
    blk.first = ls[b];
    blk.last = (b + 1 < nb ? ls[b + 1] : n) - 1;
    for (int i = blk.first; i <= blk.last; ++i) cfg.block_of[i] = b;
    cfg.blocks.push_back(blk);
  }
  for (int b = 0; b < nb; ++b) {
    Block& blk = cfg.blocks[b];
    const Instr& t = ins[blk.last];
    switch (t.op) {
      case Op::Beq: case Op::Bne: case Op::Blt: case Op::Bge: {
        int fall = b + 1, taken = cfg.block_of[t.target];
        blk.succs.push_back(fall);
        if (taken != fall) blk.succs.push_back(taken);
        break;
      }
      case Op::Jmp:
        blk.succs.push_back(cfg.block_of[t.target]);
        break;
      case Op::Jmpr: case Op::Ret: case Op::Halt:
        break;
      default:
        blk.succs.push_back(b + 1);  // parse guarantees a following block
        break;
    }
  }

  // Reachability from the entry.
  cfg.reachable.assign(nb, false);
  {
    std::vector<int> work{0};
    cfg.reachable[0] = true;
    while (!work.empty()) {
      int b = work.back();
      work.pop_back();
      for (int s : cfg.blocks[b].succs)
        if (!cfg.reachable[s]) {
          cfg.reachable[s] = true;
          work.push_back(s);
        }
    }
  }

  // Dominators: bitset fixpoint over reachable blocks in reverse postorder.
  const int words = (nb + 63) / 64;
  cfg.dom.assign(nb, std::vector<std::uint64_t>(words, 0));
  std::vector<std::uint64_t> full(words, 0);
  for (int b = 0; b < nb; ++b)
    if (cfg.reachable[b]) bit_set(full, b);
  for (int b = 0; b < nb; ++b)
    if (cfg.reachable[b]) cfg.dom[b] = full;
  cfg.dom[0].assign(words, 0);
  bit_set(cfg.dom[0], 0);

  std::vector<int> rpo;
  {
    std::vector<int> color(nb, 0), stack{0}, succ_idx(nb, 0);
    std::vector<int> post;
    color[0] = 1;
    while (!stack.empty()) {
      int b = stack.back();
      if (succ_idx[b] < int(cfg.blocks[b].succs.size())) {
        int s = cfg.blocks[b].succs[succ_idx[b]++];
        if (color[s] == 0) {
          color[s] = 1;
          stack.push_back(s);
        } else if (color[s] == 1) {
          // Retreating edge: reducible iff its head dominates its tail;
          // checked after dominators converge (see below).
        }
      } else {
        post.push_back(b);
        color[b] = 2;
        stack.pop_back();
      }
    }
    rpo.assign(post.rbegin(), post.rend());
  }

  auto preds = predecessors(cfg);
  bool changed = true;
  while (changed) {
    changed = false;
    for (int b : rpo) {
      if (b == 0) continue;
      std::vector<std::uint64_t> nd = full;
      for (int p : preds[b]) {
        if (!cfg.reachable[p]) continue;
        for (int w = 0; w < words; ++w) nd[w] &= cfg.dom[p][w];
      }
      bit_set(nd, b);
      if (nd != cfg.dom[b]) {
        cfg.dom[b] = nd;
        changed = true;
      }
    }
  }

  cfg.idom.assign(nb, -1);
  for (int b : rpo) {
    if (b == 0) continue;
    int best = -1, best_count = -1;
    for (int d = 0; d < nb; ++d) {
      if (d == b || !bit_get(cfg.dom[b], d)) continue;
      int count = 0;
      for (int w = 0; w < words; ++w)
        count += __builtin_popcountll(cfg.dom[d][w]);
      if (count > best_count) {
        best = d;
        best_count = count;
      }
    }
    cfg.idom[b] = best;
  }

  // Back edges; any cycle edge whose head is not a dominator marks the
  // region irreducible.
  for (int b = 0; b < nb; ++b) {
    if (!cfg.reachable[b]) continue;
    for (int s : cfg.blocks[b].succs)
      if (bit_get(cfg.dom[b], s)) cfg.back_edges.emplace_back(b, s);
  }
  {
    // Retreating edges via DFS gray marking.
    std::vector<int> color(nb, 0), succ_idx(nb, 0), stack{0};
    color[0] = 1;
    while (!stack.empty()) {
      int b = stack.back();
      if (succ_idx[b] < int(cfg.blocks[b].succs.size())) {
        int s = cfg.blocks[b].succs[succ_idx[b]++];
        if (color[s] == 0) {
          color[s] = 1;
          stack.push_back(s);
        } else if (color[s] == 1 && !bit_get(cfg.dom[b], s)) {
          cfg.irreducible = true;
        }
      } else {
        color[b] = 2;
        stack.pop_back();
      }
    }
  }
  return cfg;
}

bool dominates(const Cfg& cfg, int a, int b) {
  if (b < 0 || b >= int(cfg.blocks.size()) || !cfg.reachable[b]) return false;
  return bit_get(cfg.dom[b], a);
}

// --- Loops ---------------------------------------------------------------

LoopForest detect_loops(const Cfg& cfg) {
  LoopForest forest;
  forest.irreducible = cfg.irreducible;
  forest.loop_of_block.assign(cfg.blocks.size(), -1);
  auto preds = predecessors(cfg);

  std::map<int, Loop> by_header;
  for (const auto& [tail, head] : cfg.back_edges) {
    Loop& L = by_header[head];
    L.header = head;
    L.back_edges.emplace_back(tail, head);
    L.blocks.insert(head);
    std::vector<int> work;
    if (!L.blocks.count(tail)) {
      L.blocks.insert(tail);
      work.push_back(tail);
    }
    while (!work.empty()) {
      int b = work.back();
      work.pop_back();
      for (int p : preds[b]) {
        if (!cfg.reachable[p] || L.blocks.count(p)) continue;
        L.blocks.insert(p);
        work.push_back(p);
      }
    }
  }
  for (auto& [h, L] : by_header) forest.loops.push_back(std::move(L));

  const int nl = int(forest.loops.size());
  for (int i = 0; i < nl; ++i) {
    int best = -1;
    std::size_t best_size = SIZE_MAX;
    for (int j = 0; j < nl; ++j) {
      if (i == j) continue;
      const auto &a = forest.loops[j].blocks, &b = forest.loops[i].blocks;
      if (a.size() <= b.size()) continue;
      if (std::includes(a.begin(), a.end(), b.begin(), b.end()) &&
          a.size() < best_size) {
        best = j;
        best_size = a.size();
      }
    }
    forest.loops[i].parent = best;
  }
  for (int i = 0; i < nl; ++i) {
    if (forest.loops[i].parent < 0) {
      forest.roots.push_back(i);
      continue;
    }
    forest.loops[forest.loops[i].parent].children.push_back(i);
  }
  for (int i = 0; i < nl; ++i) {
    int d = 1;
    for (int p = forest.loops[i].parent; p >= 0; p = forest.loops[p].parent)
      ++d;
    forest.loops[i].depth = d;
  }
  for (int i = 0; i < nl; ++i)
    for (int b : forest.loops[i].blocks) {
      int cur = forest.loop_of_block[b];
      if (cur < 0 || forest.loops[i].blocks.size() <
                         forest.loops[cur].blocks.size())
        forest.loop_of_block[b] = i;
    }
  return forest;
}

// --- Call graph ------------------------------------------------------------

namespace {

struct Tarjan {
  const std::map<std::string, std::set<std::string>>& adj;
  std::map<std::string, int> index, low;
  std::map<std::string, bool> on_stack;
  std::vector<std::string> stack;
  int counter = 0;
  std::vector<std::vector<std::string>> sccs;  // emitted callees-first

  explicit Tarjan(const std::map<std::string, std::set<std::string>>& a)
      : adj(a) {}

  void visit(const std::string& v) {
    index[v] = low[v] = counter++;
    stack.push_back(v);
    on_stack[v] = true;
    auto it = adj.find(v);
    if (it != adj.end())
      for (const std::string& w : it->second) {
        if (!index.count(w)) {
          visit(w);
          low[v] = std::min(low[v], low[w]);
        } else if (on_stack[w]) {
          low[v] = std::min(low[v], index[w]);
        }
      }
    if (low[v] == index[v]) {
      std::vector<std::string> scc;
      while (true) {
        std::string w = stack.back();
        stack.pop_back();
        on_stack[w] = false;
        scc.push_back(w);
        if (w == v) break;
      }
      std::sort(scc.begin(), scc.end());
      sccs.push_back(std::move(scc));
    }
  }
};

}  // namespace

CallGraph build_call_graph(const Program& p) {
  CallGraph cg;
  for (const auto& [name, fn] : p.functions) {
    cg.callees[name];
    for (const Instr& ins : fn.instrs)
      if (ins.op == Op::Call) cg.callees[name].insert(ins.sym);
  }

  Tarjan t(cg.callees);
  for (const auto& [name, callees] : cg.callees)
    if (!t.index.count(name)) t.visit(name);

  for (const auto& scc : t.sccs) {
    bool cyclic = scc.size() > 1;
    for (const std::string& f : scc)
      if (cg.callees.at(f).count(f)) cyclic = true;
    for (const std::string& f : scc) {
      cg.order.push_back(f);
      if (cyclic) cg.recursive.insert(f);
    }
  }
  return cg;
}

// --- Parameter inference -----------------------------------------------

namespace {

constexpr std::uint32_t kArgMask = 0x3F;  // a0..a5
constexpr std::uint32_t kVolatileMask =
    ((1u << kNumRegs) - 1) & ~(1u << kRegSp);

std::uint32_t rbit(int r) { return r >= 0 ? (1u << r) : 0; }

struct UseDef {
  std::uint32_t use = 0, def = 0;
};

UseDef use_def(const Instr& ins,
               const std::map<std::string, std::uint32_t>& live_args) {
  UseDef ud;
  switch (ins.op) {
    case Op::Const:
      ud.def = rbit(ins.rd);
      break;
    case Op::Mov: case Op::Alloc: case Op::Load: case Op::Lea:
      ud.use = rbit(ins.rs1);
      ud.def = rbit(ins.rd);
      break;
    case Op::Add: case Op::Sub: case Op::Mul: case Op::And: case Op::Or:
    case Op::Xor: case Op::Shl: case Op::Shr:
      ud.use = rbit(ins.rs1) | rbit(ins.rs2);
      ud.def = rbit(ins.rd);
      break;
    case Op::Beq: case Op::Bne: case Op::Blt: case Op::Bge:
      ud.use = rbit(ins.rs1) | rbit(ins.rs2);
      break;
    case Op::Store:
      ud.use = rbit(ins.rs1) | rbit(ins.rs2);
      break;
    case Op::Jmpr: case Op::Free: case Op::Output:
      ud.use = rbit(ins.rs1);
      break;
    case Op::Call: {
      auto it = live_args.find(ins.sym);
      ud.use = it == live_args.end() ? 0 : it->second;
      ud.def = kVolatileMask;
      break;
    }
    case Op::Callr:
      ud.use = rbit(ins.rs1) | kArgMask;  // unknown callee: assume all args
      ud.def = kVolatileMask;
      break;
    case Op::Input:
      ud.def = rbit(ins.rd);
      break;
    case Op::Jmp: case Op::Ret: case Op::Halt:
      break;
  }
  return ud;
}

// Argument registers live at each function's entry, as a program-wide
// fixpoint (call instructions use the callee's current estimate).
std::map<std::string, std::uint32_t> entry_live_args(const Program& p) {
  std::map<std::string, Cfg> cfgs;
  for (const auto& [name, fn] : p.functions) cfgs.emplace(name, build_cfg(fn));

  std::map<std::string, std::uint32_t> la;
  for (const auto& [name, fn] : p.functions) la[name] = 0;

  bool outer_changed = true;
  while (outer_changed) {
    outer_changed = false;
    for (const auto& [name, fn] : p.functions) {
      const Cfg& cfg = cfgs.at(name);
      const int nb = int(cfg.blocks.size());
      std::vector<std::uint32_t> use(nb, 0), def(nb, 0), lin(nb, 0);
      for (int b = 0; b < nb; ++b)
        for (int i = cfg.blocks[b].first; i <= cfg.blocks[b].last; ++i) {
          UseDef ud = use_def(fn.instrs[i], la);
          use[b] |= ud.use & ~def[b];
          def[b] |= ud.def;
        }
      bool changed = true;
      while (changed) {
        changed = false;
        for (int b = nb - 1; b >= 0; --b) {
          std::uint32_t lout = 0;
          for (int s : cfg.blocks[b].succs) lout |= lin[s];
          std::uint32_t v = use[b] | (lout & ~def[b]);
          if (v != lin[b]) {
            lin[b] = v;
            changed = true;
          }
        }
      }
      std::uint32_t entry = lin[0] & kArgMask;
      if (entry != la[name]) {
        la[name] = entry;
        outer_changed = true;
      }
    }
  }
  return la;
}

// Argument registers written before `call target` within the call's block,
// intersected over all static call sites. No sites: empty.
std::uint32_t callsite_args(const Program& p, const std::string& target) {
  std::uint32_t acc = kArgMask;
  bool any = false;
  for (const auto& [name, fn] : p.functions) {
    Cfg cfg = build_cfg(fn);
    for (int i = 0; i < int(fn.instrs.size()); ++i) {
      const Instr& ins = fn.instrs[i];
      if (ins.op != Op::Call || ins.sym != target) continue;
      std::uint32_t written = 0;
      for (int j = i - 1; j >= cfg.blocks[cfg.block_of[i]].first; --j) {
        const Instr& pre = fn.instrs[j];
        if (pre.op == Op::Call || pre.op == Op::Callr) break;
        written |= rbit(pre.rd);
      }
      acc &= written & kArgMask;
      any = true;
    }
  }
  return any ? acc : 0;
}

int mask_arity(std::uint32_t m) {
  int arity = 0;
  for (int i = 0; i < 6; ++i)
    if (m & (1u << i)) arity = i + 1;
  return arity;
}

ParamKind classify_param(const Program& p, const std::string& fname, int areg,
                         const std::map<std::string, std::uint32_t>& la,
                         std::map<std::string, ParamInfo>& memo,
                         std::set<std::string>& in_progress);

ParamInfo infer_rec(const Program& p, const std::string& fname,
                    const std::map<std::string, std::uint32_t>& la,
                    std::map<std::string, ParamInfo>& memo,
                    std::set<std::string>& in_progress) {
  auto found = memo.find(fname);
  if (found != memo.end()) return found->second;

  ParamInfo info;
  info.arity = std::max(mask_arity(la.at(fname)),
                        mask_arity(callsite_args(p, fname)));
  in_progress.insert(fname);
  for (int i = 0; i < info.arity; ++i)
    info.kinds.push_back(classify_param(p, fname, i, la, memo, in_progress));
  in_progress.erase(fname);
  memo[fname] = info;
  return info;
}

// First textual access decides the kind; copies and derived arithmetic are
// traced forward along straight-line flow (following jmp) until an address
// use, a full overwrite, or a control split.
ParamKind classify_param(const Program& p, const std::string& fname, int areg,
                         const std::map<std::string, std::uint32_t>& la,
                         std::map<std::string, ParamInfo>& memo,
                         std::set<std::string>& in_progress) {
  const Function& fn = p.functions.at(fname);
  const std::uint32_t a = rbit(areg);

  for (int i = 0; i < int(fn.instrs.size()); ++i) {
    const Instr& ins = fn.instrs[i];
    bool src1 = ins.rs1 == areg, src2 = ins.rs2 == areg, dst = ins.rd == areg;
    bool call_use = false;
    if (ins.op == Op::Call) {
      auto it = la.find(ins.sym);
      call_use = it != la.end() && (it->second & a);
    }
    if (!src1 && !src2 && !dst && !call_use) continue;

    switch (ins.op) {
      case Op::Load: case Op::Lea:
        if (src1) return ParamKind::Reference;
        return ParamKind::Value;  // overwritten
      case Op::Store:
        return src1 ? ParamKind::Reference : ParamKind::Value;
      case Op::Free:
        return ParamKind::Reference;
      case Op::Const: case Op::Input:
        return ParamKind::Value;  // overwritten
      case Op::Beq: case Op::Bne: case Op::Blt: case Op::Bge:
      case Op::Output: case Op::Jmpr: case Op::Callr:
        return ParamKind::Value;
      case Op::Alloc:
        return ParamKind::Value;  // size operand or overwrite
      case Op::Call: {
        // Forwarded to the callee: inherit that parameter's kind.
        if (in_progress.count(ins.sym)) return ParamKind::Unknown;
        ParamInfo ci = infer_rec(p, ins.sym, la, memo, in_progress);
        if (areg < ci.arity) return ci.kinds[areg];
        return ParamKind::Unknown;
      }
      case Op::Mov:
      case Op::Add: case Op::Sub: case Op::Mul: case Op::And: case Op::Or:
      case Op::Xor: case Op::Shl: case Op::Shr: {
        if (!src1 && !src2) return ParamKind::Value;  // pure overwrite
        std::uint32_t taint = rbit(ins.rd);
        int pc = i + 1;
        int steps = 2 * int(fn.instrs.size());
        while (taint && steps-- > 0 && pc < int(fn.instrs.size())) {
          const Instr& tr = fn.instrs[pc];
          bool t1 = taint & rbit(tr.rs1), t2 = taint & rbit(tr.rs2);
          switch (tr.op) {
            case Op::Load: case Op::Lea:
              if (t1) return ParamKind::Reference;
              taint &= ~rbit(tr.rd);
              break;
            case Op::Store:
              if (t1) return ParamKind::Reference;
              break;
            case Op::Free:
              if (t1) return ParamKind::Reference;
              break;
            case Op::Mov:
            case Op::Add: case Op::Sub: case Op::Mul: case Op::And:
            case Op::Or: case Op::Xor: case Op::Shl: case Op::Shr:
              if (t1 || t2) taint |= rbit(tr.rd);
              else taint &= ~rbit(tr.rd);
              break;
            case Op::Const: case Op::Input: case Op::Alloc:
              taint &= ~rbit(tr.rd);
              break;
            case Op::Output:
              break;
            case Op::Jmp:
              pc = tr.target;
              continue;
            case Op::Jmpr:
              return t1 ? ParamKind::Value : ParamKind::Unknown;
            case Op::Ret: case Op::Halt:
              return ParamKind::Value;  // no address use on this path
            case Op::Beq: case Op::Bne: case Op::Blt: case Op::Bge:
            case Op::Call: case Op::Callr:
              return ParamKind::Unknown;  // control splits or clobbers
          }
          ++pc;
        }
        return taint ? ParamKind::Unknown : ParamKind::Value;
      }
      case Op::Jmp: case Op::Ret: case Op::Halt:
        break;  // cannot mention a register
    }
  }
  return ParamKind::Unknown;  // never accessed in the body
}

}  // namespace

ParamInfo infer_param_info(const Program& p, const std::string& fn) {
  auto la = entry_live_args(p);
  std::map<std::string, ParamInfo> memo;
  std::set<std::string> in_progress;
  return infer_rec(p, fn, la, memo, in_progress);
}

}  // namespace symsum
