#include "symsum/term.hpp"

#include <cassert>
#include <sstream>

namespace symsum {

const char* binop_name(BinOp op) {
  switch (op) {
    case BinOp::Add: return "add";
    case BinOp::Sub: return "sub";
    case BinOp::Mul: return "mul";
    case BinOp::And: return "and";
    case BinOp::Or:  return "or";
    case BinOp::Xor: return "xor";
    case BinOp::Shl: return "shl";
    case BinOp::Shr: return "shr";
    case BinOp::Eq:  return "eq";
    case BinOp::Ne:  return "ne";
    case BinOp::Ult: return "ult";
    case BinOp::Uge: return "uge";
    case BinOp::Slt: return "slt";
    case BinOp::Sge: return "sge";
  }
  return "?";
}

std::uint32_t width_mask(int width) {
  return width >= 32 ? 0xffffffffu : ((1u << width) - 1u);
}

std::int64_t to_signed(std::uint32_t v, int width) {
  std::uint32_t sign = 1u << (width - 1);
  std::int64_t x = v & width_mask(width);
  if (x & sign) x -= (std::int64_t(1) << width);
  return x;
}

namespace {

std::size_t mix(std::size_t h, std::size_t v) {
  return h * 1099511628211ull ^ (v + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2));
}

std::size_t hash_node(const Term& t) {
  std::size_t h = mix(std::size_t(t.kind) * 31 + t.width, 0x5bd1e995);
  switch (t.kind) {
    case TermKind::Const: return mix(h, t.value);
    case TermKind::Input:
    case TermKind::Fresh: return mix(h, t.sym);
    case TermKind::Bin:   return mix(mix(mix(h, std::size_t(t.op)), t.a->hash), t.b->hash);
    case TermKind::Not:   return mix(h, t.a->hash);
    case TermKind::Ite:   return mix(mix(mix(h, t.a->hash), t.b->hash), t.c->hash);
  }
  return h;
}

TermPtr finish(std::shared_ptr<Term> t) {
  t->hash = hash_node(*t);
  return t;
}

std::uint32_t fold(BinOp op, std::uint32_t x, std::uint32_t y, int w) {
  std::uint32_t m = width_mask(w);
  x &= m;
  y &= m;
  switch (op) {
    case BinOp::Add: return (x + y) & m;
    case BinOp::Sub: return (x - y) & m;
    case BinOp::Mul: return std::uint32_t(std::uint64_t(x) * y) & m;
    case BinOp::And: return x & y;
    case BinOp::Or:  return x | y;
    case BinOp::Xor: return x ^ y;
    case BinOp::Shl: return y >= std::uint32_t(w) ? 0 : (x << y) & m;
    case BinOp::Shr: return y >= std::uint32_t(w) ? 0 : (x >> y) & m;
    case BinOp::Eq:  return x == y;
    case BinOp::Ne:  return x != y;
    case BinOp::Ult: return x < y;
    case BinOp::Uge: return x >= y;
    case BinOp::Slt: return to_signed(x, w) < to_signed(y, w);
    case BinOp::Sge: return to_signed(x, w) >= to_signed(y, w);
  }
  return 0;
}

bool commutative(BinOp op) {
  switch (op) {
    case BinOp::Add: case BinOp::Mul: case BinOp::And:
    case BinOp::Or: case BinOp::Xor: case BinOp::Eq: case BinOp::Ne:
      return true;
    default:
      return false;
  }
}

}  // namespace

std::uint32_t fold_binop(BinOp op, std::uint32_t x, std::uint32_t y, int width) {
  return fold(op, x, y, width);
}

TermPtr make_const(std::uint32_t v, int width) {
  auto t = std::make_shared<Term>();
  t->kind = TermKind::Const;
  t->width = std::uint8_t(width);
  t->value = v & width_mask(width);
  return finish(t);
}

TermPtr make_input(SymId id, std::string name, int width) {
  auto t = std::make_shared<Term>();
  t->kind = TermKind::Input;
  t->width = std::uint8_t(width);
  t->sym = id;
  t->name = std::move(name);
  return finish(t);
}

TermPtr make_fresh(SymId id, std::string name, int width) {
  auto t = std::make_shared<Term>();
  t->kind = TermKind::Fresh;
  t->width = std::uint8_t(width);
  t->sym = id;
  t->name = std::move(name);
  return finish(t);
}

bool term_eq(const TermPtr& a, const TermPtr& b) {
  if (a.get() == b.get()) return true;
  if (!a || !b) return false;
  if (a->hash != b->hash || a->kind != b->kind || a->width != b->width) return false;
  switch (a->kind) {
    case TermKind::Const: return a->value == b->value;
    case TermKind::Input:
    case TermKind::Fresh: return a->sym == b->sym;
    case TermKind::Bin:
      return a->op == b->op && term_eq(a->a, b->a) && term_eq(a->b, b->b);
    case TermKind::Not: return term_eq(a->a, b->a);
    case TermKind::Ite:
      return term_eq(a->a, b->a) && term_eq(a->b, b->b) && term_eq(a->c, b->c);
  }
  return false;
}

TermPtr make_bin(BinOp op, const TermPtr& a, const TermPtr& b) {
  assert(a && b && a->width == b->width);
  int w = a->width;
  std::uint32_t m = width_mask(w);

  if (a->is_const() && b->is_const()) return make_const(fold(op, a->value, b->value, w), w);

  // Normalize constants to the right for commutative ops.
  TermPtr x = a, y = b;
  if (commutative(op) && x->is_const()) std::swap(x, y);

  // Rewrite x - c as x + (-c) so the Add rules see every constant offset.
  if (op == BinOp::Sub && y->is_const())
    return make_bin(BinOp::Add, x, make_const((0u - y->value) & m, w));

  switch (op) {
    case BinOp::Add:
      if (y->is_const() && y->value == 0) return x;
      // (x + c1) + c2 -> x + (c1+c2)
      if (y->is_const() && x->kind == TermKind::Bin && x->op == BinOp::Add &&
          x->b->is_const())
        return make_bin(BinOp::Add, x->a, make_const((x->b->value + y->value) & m, w));
      break;
    case BinOp::Sub:
      if (term_eq(x, y)) return make_const(0, w);
      break;
    case BinOp::Mul:
      if (y->is_const() && y->value == 0) return make_const(0, w);
      if (y->is_const() && y->value == 1) return x;
      break;
    case BinOp::And:
      if (y->is_const() && y->value == 0) return make_const(0, w);
      if (y->is_const() && y->value == m) return x;
      if (term_eq(x, y)) return x;
      break;
    case BinOp::Or:
      if (y->is_const() && y->value == 0) return x;
      if (y->is_const() && y->value == m) return make_const(m, w);
      if (term_eq(x, y)) return x;
      break;
    case BinOp::Xor:
      if (y->is_const() && y->value == 0) return x;
      if (term_eq(x, y)) return make_const(0, w);
      break;
    case BinOp::Shl:
    case BinOp::Shr:
      if (y->is_const() && y->value == 0) return x;
      if (y->is_const() && y->value >= std::uint32_t(w)) return make_const(0, w);
      break;
    case BinOp::Eq:
      if (term_eq(x, y)) return make_const(1, w);
      break;
    case BinOp::Ne:
      if (term_eq(x, y)) return make_const(0, w);
      break;
    case BinOp::Ult:
      if (term_eq(x, y)) return make_const(0, w);
      if (y->is_const() && y->value == 0) return make_const(0, w);  // u < 0 never
      break;
    case BinOp::Uge:
      if (term_eq(x, y)) return make_const(1, w);
      if (y->is_const() && y->value == 0) return make_const(1, w);  // u >= 0 always
      break;
    case BinOp::Slt:
      if (term_eq(x, y)) return make_const(0, w);
      break;
    case BinOp::Sge:
      if (term_eq(x, y)) return make_const(1, w);
      break;
  }

  auto t = std::make_shared<Term>();
  t->kind = TermKind::Bin;
  t->width = std::uint8_t(w);
  t->op = op;
  t->a = x;
  t->b = y;
  return finish(t);
}

TermPtr make_not(const TermPtr& in) {
  int w = in->width;
  if (in->is_const()) return make_const(in->value == 0 ? 1 : 0, w);
  // not(not(y)) == (y != 0); Ne is already 0/1-valued.
  if (in->kind == TermKind::Not)
    return make_bin(BinOp::Ne, in->a, make_const(0, w));
  if (in->kind == TermKind::Bin) {
    switch (in->op) {
      case BinOp::Eq:  return make_bin(BinOp::Ne, in->a, in->b);
      case BinOp::Ne:  return make_bin(BinOp::Eq, in->a, in->b);
      case BinOp::Ult: return make_bin(BinOp::Uge, in->a, in->b);
      case BinOp::Uge: return make_bin(BinOp::Ult, in->a, in->b);
      case BinOp::Slt: return make_bin(BinOp::Sge, in->a, in->b);
      case BinOp::Sge: return make_bin(BinOp::Slt, in->a, in->b);
      default: break;
    }
  }
  auto t = std::make_shared<Term>();
  t->kind = TermKind::Not;
  t->width = in->width;
  t->a = in;
  return finish(t);
}

TermPtr make_ite(const TermPtr& cond, const TermPtr& a, const TermPtr& b) {
  assert(a->width == b->width && cond->width == a->width);
  if (cond->is_const()) return cond->value != 0 ? a : b;
  if (term_eq(a, b)) return a;
  auto t = std::make_shared<Term>();
  t->kind = TermKind::Ite;
  t->width = a->width;
  t->a = cond;
  t->b = a;
  t->c = b;
  return finish(t);
}

TermPtr simplify(const TermPtr& t) {
  switch (t->kind) {
    case TermKind::Const:
    case TermKind::Input:
    case TermKind::Fresh:
      return t;
    case TermKind::Bin: return make_bin(t->op, simplify(t->a), simplify(t->b));
    case TermKind::Not: return make_not(simplify(t->a));
    case TermKind::Ite: return make_ite(simplify(t->a), simplify(t->b), simplify(t->c));
  }
  return t;
}

namespace {

std::uint32_t eval_rec(const Term* t,
                       const std::unordered_map<SymId, std::uint32_t>& asg,
                       std::uint32_t def,
                       std::unordered_map<const Term*, std::uint32_t>& memo) {
  auto it = memo.find(t);
  if (it != memo.end()) return it->second;
  std::uint32_t r = 0;
  switch (t->kind) {
    case TermKind::Const: r = t->value; break;
    case TermKind::Input:
    case TermKind::Fresh: {
      auto f = asg.find(t->sym);
      r = (f == asg.end() ? def : f->second) & width_mask(t->width);
      break;
    }
    case TermKind::Bin:
      r = fold(t->op, eval_rec(t->a.get(), asg, def, memo),
               eval_rec(t->b.get(), asg, def, memo), t->width);
      break;
    case TermKind::Not:
      r = eval_rec(t->a.get(), asg, def, memo) == 0 ? 1 : 0;
      break;
    case TermKind::Ite:
      r = eval_rec(t->a.get(), asg, def, memo) != 0
              ? eval_rec(t->b.get(), asg, def, memo)
              : eval_rec(t->c.get(), asg, def, memo);
      break;
  }
  memo.emplace(t, r);
  return r;
}

}  // namespace

std::uint32_t eval_term(const TermPtr& t,
                        const std::unordered_map<SymId, std::uint32_t>& asg,
                        std::uint32_t def) {
  std::unordered_map<const Term*, std::uint32_t> memo;
  return eval_rec(t.get(), asg, def, memo);
}

std::uint32_t eval_plain(const Term* t, const std::map<SymId, std::uint32_t>& asg) {
  switch (t->kind) {
    case TermKind::Const: return t->value;
    case TermKind::Input:
    case TermKind::Fresh: {
      auto it = asg.find(t->sym);
      return it == asg.end() ? 0 : it->second;
    }
    case TermKind::Bin:
      return fold(t->op, eval_plain(t->a.get(), asg), eval_plain(t->b.get(), asg),
                  t->width);
    case TermKind::Not: return eval_plain(t->a.get(), asg) == 0 ? 1 : 0;
    case TermKind::Ite:
      return eval_plain(t->a.get(), asg) != 0 ? eval_plain(t->b.get(), asg)
                                              : eval_plain(t->c.get(), asg);
  }
  return 0;
}

namespace {

TermPtr subst_rec(const TermPtr& t, const std::map<SymId, TermPtr>& repl,
                  std::unordered_map<const Term*, TermPtr>& memo) {
  auto it = memo.find(t.get());
  if (it != memo.end()) return it->second;
  TermPtr r;
  switch (t->kind) {
    case TermKind::Const: r = t; break;
    case TermKind::Input:
    case TermKind::Fresh: {
      auto f = repl.find(t->sym);
      r = (f == repl.end() ? t : f->second);
      break;
    }
    case TermKind::Bin:
      r = make_bin(t->op, subst_rec(t->a, repl, memo), subst_rec(t->b, repl, memo));
      break;
    case TermKind::Not:
      r = make_not(subst_rec(t->a, repl, memo));
      break;
    case TermKind::Ite:
      r = make_ite(subst_rec(t->a, repl, memo), subst_rec(t->b, repl, memo),
                   subst_rec(t->c, repl, memo));
      break;
  }
  memo.emplace(t.get(), r);
  return r;
}

}  // namespace

TermPtr substitute(const TermPtr& t, const std::map<SymId, TermPtr>& repl) {
  std::unordered_map<const Term*, TermPtr> memo;
  return subst_rec(t, repl, memo);
}

namespace {

template <typename F>
void walk(const Term* t, std::set<const Term*>& seen, F&& f) {
  if (!t || !seen.insert(t).second) return;
  f(t);
  if (t->a) walk(t->a.get(), seen, f);
  if (t->b) walk(t->b.get(), seen, f);
  if (t->c) walk(t->c.get(), seen, f);
}

}  // namespace

void collect_syms(const TermPtr& t, std::set<SymId>& out) {
  std::set<const Term*> seen;
  walk(t.get(), seen, [&](const Term* n) {
    if (n->kind == TermKind::Input || n->kind == TermKind::Fresh) out.insert(n->sym);
  });
}

std::set<SymId> free_syms(const TermPtr& t) {
  std::set<SymId> out;
  collect_syms(t, out);
  return out;
}

bool mentions_input(const TermPtr& t) {
  bool found = false;
  std::set<const Term*> seen;
  walk(t.get(), seen, [&](const Term* n) {
    if (n->kind == TermKind::Input) found = true;
  });
  return found;
}

SymId max_sym_id(const TermPtr& t) {
  SymId best = 0;
  std::set<const Term*> seen;
  walk(t.get(), seen, [&](const Term* n) {
    if (n->kind == TermKind::Input || n->kind == TermKind::Fresh)
      if (n->sym > best) best = n->sym;
  });
  return best;
}

namespace {

void print_rec(const Term* t, std::ostringstream& os) {
  switch (t->kind) {
    case TermKind::Const: os << t->value; break;
    case TermKind::Input:
    case TermKind::Fresh: os << t->name; break;
    case TermKind::Bin:
      os << '(' << binop_name(t->op) << ' ';
      print_rec(t->a.get(), os);
      os << ' ';
      print_rec(t->b.get(), os);
      os << ')';
      break;
    case TermKind::Not:
      os << "(not ";
      print_rec(t->a.get(), os);
      os << ')';
      break;
    case TermKind::Ite:
      os << "(ite ";
      print_rec(t->a.get(), os);
      os << ' ';
      print_rec(t->b.get(), os);
      os << ' ';
      print_rec(t->c.get(), os);
      os << ')';
      break;
  }
}

}  // namespace

std::string term_str(const TermPtr& t) {
  std::ostringstream os;
  print_rec(t.get(), os);
  return os.str();
}

}  // namespace symsum
