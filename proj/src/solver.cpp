#include "symsum/solver.hpp"

#include <algorithm>
#include <cassert>
#include <functional>
#include <unordered_map>

namespace symsum {

namespace {

std::uint32_t ev(const Term* t, const std::map<SymId, std::uint32_t>& asg) {
  return eval_plain(t, asg);
}

struct Interval {
  std::uint32_t lo = 0, hi = 0;
  bool empty() const { return lo > hi; }
  std::uint64_t size() const { return empty() ? 0 : std::uint64_t(hi) - lo + 1; }
};

// Tighten per-symbol unsigned bounds from atoms of shape sym <op> const.
// Returns false on a contradiction.
bool apply_interval(const TermPtr& c, std::map<SymId, Interval>& iv,
                    std::uint32_t mask) {
  if (c->kind != TermKind::Bin) return true;
  const TermPtr &l = c->a, &r = c->b;
  SymId s = 0;
  std::uint32_t k = 0;
  bool sym_left;
  if (l->is_sym() && r->is_const()) {
    s = l->sym; k = r->value; sym_left = true;
  } else if (r->is_sym() && l->is_const()) {
    s = r->sym; k = l->value; sym_left = false;
  } else {
    return true;
  }
  auto it = iv.find(s);
  if (it == iv.end()) it = iv.emplace(s, Interval{0, mask}).first;
  Interval& v = it->second;
  switch (c->op) {
    case BinOp::Eq:
      v.lo = std::max(v.lo, k);
      v.hi = std::min(v.hi, k);
      break;
    case BinOp::Ult:
      if (sym_left) {                    // s < k
        if (k == 0) return false;
        v.hi = std::min(v.hi, k - 1);
      } else {                           // k < s
        if (k == mask) return false;
        v.lo = std::max(v.lo, k + 1);
      }
      break;
    case BinOp::Uge:
      if (sym_left) v.lo = std::max(v.lo, k);   // s >= k
      else v.hi = std::min(v.hi, k);            // k >= s
      break;
    default:
      return true;
  }
  return !v.empty();
}

struct Component {
  std::vector<SymId> syms;
  std::vector<TermPtr> items;
};

// Union-find partition of constraints by shared symbols.
std::vector<Component> split_components(const std::vector<TermPtr>& items) {
  std::map<SymId, SymId> parent;
  std::function<SymId(SymId)> find = [&](SymId s) {
    auto it = parent.find(s);
    if (it == parent.end() || it->second == s) return s;
    return it->second = find(it->second);
  };
  std::vector<std::set<SymId>> item_syms(items.size());
  for (std::size_t i = 0; i < items.size(); ++i) {
    collect_syms(items[i], item_syms[i]);
    SymId root = 0;
    for (SymId s : item_syms[i]) {
      parent.emplace(s, s);
      if (root == 0) root = find(s);
      else parent[find(s)] = root;
    }
  }
  std::map<SymId, Component> by_root;
  for (std::size_t i = 0; i < items.size(); ++i) {
    SymId root = find(*item_syms[i].begin());
    by_root[root].items.push_back(items[i]);
  }
  std::vector<Component> out;
  for (auto& [root, comp] : by_root) {
    std::set<SymId> syms;
    for (auto& it : comp.items) collect_syms(it, syms);
    comp.syms.assign(syms.begin(), syms.end());
    out.push_back(std::move(comp));
  }
  // by_root is keyed by representative id; components come out in a
  // deterministic order (ascending smallest representative).
  return out;
}

bool sat_under(const std::vector<TermPtr>& items,
               const std::map<SymId, std::uint32_t>& asg) {
  for (const auto& c : items)
    if (ev(c.get(), asg) == 0) return false;
  return true;
}

enum class CompStatus { Sat, Unsat, Unknown };

// Exhaustive interval-pruned lexicographic enumeration of one component.
// On Sat, asg holds the lowest satisfying assignment.
CompStatus enumerate_component(const Component& comp,
                               const std::map<SymId, Interval>& iv,
                               std::uint32_t mask, std::uint64_t& budget,
                               int max_syms,
                               std::map<SymId, std::uint32_t>& asg) {
  const std::size_t n = comp.syms.size();
  if (int(n) > max_syms) return CompStatus::Unknown;

  std::vector<Interval> dom(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto it = iv.find(comp.syms[i]);
    dom[i] = it == iv.end() ? Interval{0, mask} : it->second;
    if (dom[i].empty()) return CompStatus::Unsat;
  }

  // Probe a few deterministic candidate values when the full space does not
  // fit in the budget; this can still find a model (never decides Unsat).
  std::uint64_t space = 1;
  bool overflow = false;
  for (auto& d : dom) {
    space *= d.size();
    if (space > budget) { overflow = true; break; }
  }
  if (overflow) {
    // Probe a small grid instead: domain corners, 0/1, and every constant
    // appearing in the component, each +/-1. Constants cover comparison
    // boundaries (including signed ones via wraparound).
    std::set<std::uint32_t> extra{0, 1};
    std::function<void(const Term*)> consts = [&](const Term* t) {
      if (!t) return;
      if (t->kind == TermKind::Const) {
        extra.insert(t->value);
        extra.insert((t->value + 1) & mask);
        extra.insert((t->value - 1) & mask);
        return;
      }
      consts(t->a.get());
      consts(t->b.get());
      consts(t->c.get());
    };
    for (const auto& c : comp.items) consts(c.get());

    std::vector<std::vector<std::uint32_t>> cand(n);
    for (std::size_t i = 0; i < n; ++i) {
      std::set<std::uint32_t> vals{dom[i].lo, dom[i].hi};
      for (std::uint32_t v : extra)
        if (v >= dom[i].lo && v <= dom[i].hi) vals.insert(v);
      cand[i].assign(vals.begin(), vals.end());
    }
    std::vector<std::size_t> idx(n, 0);
    while (budget > 0) {
      --budget;
      for (std::size_t i = 0; i < n; ++i) asg[comp.syms[i]] = cand[i][idx[i]];
      if (sat_under(comp.items, asg)) return CompStatus::Sat;
      std::size_t i = n;
      bool wrapped = false;
      while (i > 0) {
        --i;
        if (idx[i] + 1 < cand[i].size()) { ++idx[i]; break; }
        idx[i] = 0;
        if (i == 0) wrapped = true;
      }
      if (wrapped) break;
    }
    for (std::size_t i = 0; i < n; ++i) asg.erase(comp.syms[i]);
    return CompStatus::Unknown;
  }

  std::vector<std::uint32_t> cur(n);
  for (std::size_t i = 0; i < n; ++i) cur[i] = dom[i].lo;
  for (;;) {
    if (budget == 0) {
      for (std::size_t i = 0; i < n; ++i) asg.erase(comp.syms[i]);
      return CompStatus::Unknown;
    }
    --budget;
    for (std::size_t i = 0; i < n; ++i) asg[comp.syms[i]] = cur[i];
    if (sat_under(comp.items, asg)) return CompStatus::Sat;
    // Odometer increment, last symbol fastest... lexicographic order needs
    // the FIRST symbol slowest, so bump from the back.
    std::size_t i = n;
    while (i > 0) {
      --i;
      if (cur[i] < dom[i].hi) { ++cur[i]; break; }
      cur[i] = dom[i].lo;
      if (i == 0) {
        for (std::size_t j = 0; j < n; ++j) asg.erase(comp.syms[j]);
        return CompStatus::Unsat;
      }
    }
  }
}

struct Prepared {
  bool contradiction = false;
  std::vector<TermPtr> items;               // simplified, non-trivial
  std::map<SymId, std::uint32_t> bindings;  // from equality propagation
};

Prepared propagate(const std::vector<TermPtr>& constraints) {
  Prepared p;
  std::vector<TermPtr> work;
  work.reserve(constraints.size());
  for (const auto& c : constraints) work.push_back(simplify(c));

  bool changed = true;
  while (changed) {
    changed = false;
    std::map<SymId, TermPtr> repl;
    std::vector<TermPtr> next;
    for (const auto& c : work) {
      if (c->is_const()) {
        if (c->value == 0) { p.contradiction = true; return p; }
        continue;  // trivially true
      }
      if (c->kind == TermKind::Bin && c->op == BinOp::Eq) {
        const TermPtr *s = nullptr, *k = nullptr;
        if (c->a->is_sym() && c->b->is_const()) { s = &c->a; k = &c->b; }
        else if (c->b->is_sym() && c->a->is_const()) { s = &c->b; k = &c->a; }
        if (s) {
          auto found = p.bindings.find((*s)->sym);
          if (found != p.bindings.end()) {
            if (found->second != (*k)->value) { p.contradiction = true; return p; }
          } else {
            p.bindings[(*s)->sym] = (*k)->value;
            repl[(*s)->sym] = *k;
            changed = true;
          }
          continue;
        }
      }
      next.push_back(c);
    }
    if (!repl.empty())
      for (auto& c : next) c = substitute(c, repl);
    work = std::move(next);
  }
  p.items = std::move(work);
  return p;
}

}  // namespace

Verdict check_sat(const std::vector<TermPtr>& constraints, const SolverConfig& cfg) {
  Verdict v;
  Prepared p = propagate(constraints);
  if (p.contradiction) {
    v.status = SatResult::Unsat;
    v.note = "propagation";
    return v;
  }

  std::uint32_t mask = width_mask(cfg.width);
  std::map<SymId, Interval> iv;
  for (const auto& c : p.items)
    if (!apply_interval(c, iv, mask)) {
      v.status = SatResult::Unsat;
      v.note = "interval";
      return v;
    }

  std::map<SymId, std::uint32_t> asg;
  std::uint64_t budget = cfg.budget;
  bool unknown = false;
  for (const Component& comp : split_components(p.items)) {
    switch (enumerate_component(comp, iv, mask, budget, cfg.max_enum_syms, asg)) {
      case CompStatus::Unsat:
        v.status = SatResult::Unsat;
        v.note = "enumeration";
        return v;
      case CompStatus::Unknown:
        unknown = true;
        break;
      case CompStatus::Sat:
        break;
    }
  }
  if (unknown) {
    v.status = SatResult::Unknown;
    return v;
  }

  for (auto& [s, val] : p.bindings) asg[s] = val;
  // Every Sat verdict is re-checked by substitution before being returned.
  for (const auto& c : constraints)
    if (ev(simplify(c).get(), asg) == 0) {
      assert(false && "model failed verification");
      v.status = SatResult::Unknown;
      v.note = "verification failed";
      return v;
    }
  v.status = SatResult::Sat;
  v.model.values = std::move(asg);
  return v;
}

std::optional<Model> get_model(const std::vector<TermPtr>& constraints,
                               const SolverConfig& cfg) {
  Verdict v = check_sat(constraints, cfg);
  if (v.status != SatResult::Sat) return std::nullopt;
  return v.model;
}

std::vector<TermPtr> project_inputs(const std::vector<TermPtr>& constraints,
                                    const std::set<SymId>& inputs,
                                    const std::set<SymId>& carried) {
  std::vector<TermPtr> out;
  for (const auto& c : constraints) {
    bool ok = true;
    for (SymId s : free_syms(c))
      if (!inputs.count(s) && !carried.count(s)) { ok = false; break; }
    if (ok) out.push_back(c);
  }
  return out;
}

Tri equivalent(const TermPtr& a, const TermPtr& b,
               const std::vector<TermPtr>& assumptions, const SolverConfig& cfg) {
  std::vector<TermPtr> cs = assumptions;
  cs.push_back(make_bin(BinOp::Ne, a, b));
  Verdict v = check_sat(cs, cfg);
  switch (v.status) {
    case SatResult::Unsat: return Tri::True;
    case SatResult::Sat: return Tri::False;
    default: return Tri::Unknown;
  }
}

std::optional<std::vector<std::uint32_t>> enumerate_values(
    const std::vector<TermPtr>& constraints, const TermPtr& term,
    const SolverConfig& cfg, std::size_t limit) {
  TermPtr t = simplify(term);
  if (t->is_const()) {
    // Still subject to the path being feasible at all.
    Verdict v = check_sat(constraints, cfg);
    if (v.status == SatResult::Unsat) return std::vector<std::uint32_t>{};
    return std::vector<std::uint32_t>{t->value};
  }

  Prepared p = propagate(constraints);
  if (p.contradiction) return std::vector<std::uint32_t>{};
  std::map<SymId, TermPtr> bind_repl;
  for (auto& [s, val] : p.bindings) bind_repl[s] = make_const(val, cfg.width);
  t = substitute(t, bind_repl);
  if (t->is_const()) return std::vector<std::uint32_t>{t->value};

  std::set<SymId> syms = free_syms(t);
  for (const auto& c : p.items) collect_syms(c, syms);
  if (int(syms.size()) > cfg.max_enum_syms) return std::nullopt;

  std::uint32_t mask = width_mask(cfg.width);
  std::map<SymId, Interval> iv;
  for (const auto& c : p.items)
    if (!apply_interval(c, iv, mask)) return std::vector<std::uint32_t>{};

  std::vector<SymId> order(syms.begin(), syms.end());
  std::vector<Interval> dom(order.size());
  std::uint64_t space = 1;
  for (std::size_t i = 0; i < order.size(); ++i) {
    auto it = iv.find(order[i]);
    dom[i] = it == iv.end() ? Interval{0, mask} : it->second;
    if (dom[i].empty()) return std::vector<std::uint32_t>{};
    space *= dom[i].size();
    if (space > cfg.budget) return std::nullopt;
  }

  std::set<std::uint32_t> values;
  std::map<SymId, std::uint32_t> asg;
  std::vector<std::uint32_t> cur(order.size());
  for (std::size_t i = 0; i < order.size(); ++i) cur[i] = dom[i].lo;
  for (;;) {
    for (std::size_t i = 0; i < order.size(); ++i) asg[order[i]] = cur[i];
    if (sat_under(p.items, asg)) {
      values.insert(ev(t.get(), asg));
      if (values.size() > limit)
        return std::vector<std::uint32_t>(values.begin(), values.end());
    }
    std::size_t i = order.size();
    bool done = false;
    while (i > 0) {
      --i;
      if (cur[i] < dom[i].hi) { ++cur[i]; break; }
      cur[i] = dom[i].lo;
      if (i == 0) done = true;
    }
    if (done || order.empty()) break;
  }
  return std::vector<std::uint32_t>(values.begin(), values.end());
}

}  // namespace symsum
