#pragma once

// Fixed-width bitvector terms. All arithmetic wraps mod 2^width; comparisons
// yield 0/1 at the same width so every term in an analysis shares one width.
// Terms are immutable shared DAG nodes; the factory functions canonicalize on
// construction, so a term built through them is already simplified.

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

namespace symsum {

using SymId = std::uint64_t;

enum class TermKind : std::uint8_t { Const, Input, Fresh, Bin, Not, Ite };

enum class BinOp : std::uint8_t {
  Add, Sub, Mul, And, Or, Xor, Shl, Shr,  // wrap-around arithmetic
  Eq, Ne, Ult, Uge, Slt, Sge              // comparisons, result 0 or 1
};

const char* binop_name(BinOp op);

class Term;
using TermPtr = std::shared_ptr<const Term>;

class Term {
 public:
  TermKind kind;
  std::uint8_t width;       // 8, 16 or 32
  BinOp op = BinOp::Add;    // Bin only
  std::uint32_t value = 0;  // Const only
  SymId sym = 0;            // Input/Fresh: identity
  std::string name;         // Input/Fresh: display/serialization name
  TermPtr a, b, c;          // operands (c used by Ite)
  std::size_t hash = 0;

  bool is_const() const { return kind == TermKind::Const; }
  bool is_sym() const { return kind == TermKind::Input || kind == TermKind::Fresh; }
};

std::uint32_t width_mask(int width);
std::int64_t to_signed(std::uint32_t v, int width);

TermPtr make_const(std::uint32_t v, int width);
TermPtr make_input(SymId id, std::string name, int width);
TermPtr make_fresh(SymId id, std::string name, int width);
TermPtr make_bin(BinOp op, const TermPtr& a, const TermPtr& b);
TermPtr make_not(const TermPtr& t);
TermPtr make_ite(const TermPtr& cond, const TermPtr& a, const TermPtr& b);

// Structural equality / ordering (pointer fast path, then hash, then walk).
bool term_eq(const TermPtr& a, const TermPtr& b);

// Rebuild bottom-up through the factories; idempotent on factory-built terms.
TermPtr simplify(const TermPtr& t);

// Concrete evaluation under an assignment. Symbols missing from the map
// evaluate to `def`. DAG-safe (memoized per call).
std::uint32_t eval_term(const TermPtr& t,
                        const std::unordered_map<SymId, std::uint32_t>& asg,
                        std::uint32_t def = 0);

// Allocation-free variant for enumeration loops over small terms; missing
// symbols evaluate to 0.
std::uint32_t eval_plain(const Term* t, const std::map<SymId, std::uint32_t>& asg);

// Concrete binary-operator semantics (wrap-around at `width` bits); the same
// table simplification and evaluation use.
std::uint32_t fold_binop(BinOp op, std::uint32_t x, std::uint32_t y, int width);

// Substitution; symbols not in the map are kept. Result is re-simplified.
TermPtr substitute(const TermPtr& t, const std::map<SymId, TermPtr>& repl);

void collect_syms(const TermPtr& t, std::set<SymId>& out);
std::set<SymId> free_syms(const TermPtr& t);
bool mentions_input(const TermPtr& t);
SymId max_sym_id(const TermPtr& t);  // 0 when no symbols

std::string term_str(const TermPtr& t);

// Allocates fresh symbol ids for one analysis run; ids are the watermark used
// by the incremental feasibility fast path, so they must grow monotonically.
class SymGen {
 public:
  SymId next() { return ++last_; }
  SymId last() const { return last_; }

 private:
  SymId last_ = 0;
};

}  // namespace symsum
