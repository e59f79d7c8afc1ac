#include "symsum/summary.hpp"

#include <algorithm>
#include <cstdio>
#include <unordered_map>
#include <utility>

#include "json.hpp"

namespace symsum {

namespace {

// Canonical symbol-id bands for entry-private symbols. Bound reads get stable
// ids keyed by cell so equal-shaped paths merge; carried symbols number off in
// first-appearance order. The bands sit far above any running generator so an
// incomplete substitution cannot silently alias a live symbol.
constexpr SymId kReadBase = SymId(1) << 40;
constexpr SymId kCarriedBase = (SymId(1) << 40) + (SymId(1) << 32);
constexpr SymId kPlaceholderBase = SymId(1) << 36;  // pre-canonical heap bases

std::string hex_str(std::uint32_t v) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "0x%x", v);
  return buf;
}

bool as_const(const TermPtr& t, std::uint32_t& out) {
  if (!t || !t->is_const()) return false;
  out = t->value;
  return true;
}

// ---------------------------------------------------------------------------
// Entry construction: rewriting one terminal path of a summarizing run into
// caller-relative form, then canonicalizing its private symbols.

struct BuildCtx {
  const Program* prog = nullptr;
  MemLayout layout;
  SolverConfig solver;
  Summary* sum = nullptr;
  std::array<TermPtr, kNumRegs> reg_terms{};  // declared register inputs
  TermPtr sp_term;                            // declared sp anchor
  std::map<std::string, std::size_t> merge_index;
};

// Classifies a concrete value as an address the caller must relocate:
// reference-parameter image cells rebase onto the actual argument, chunk
// addresses rebase onto the placeholder for their Malloc, and caller-frame
// stack cells rebase onto the sp anchor. Anything else stays literal.
struct ConstRewriter {
  const BuildCtx* bc;
  const std::vector<HeapChunk>* chunks;
  std::vector<TermPtr> placeholders;  // one per chunk, in allocation order
  std::unordered_map<const Term*, TermPtr> memo;

  TermPtr rebase_const(const TermPtr& t) {
    const MemLayout& L = bc->layout;
    const std::uint32_t v = t->value;
    const int w = t->width;
    if (L.in_shadow(v)) {
      const std::uint32_t slot = (v - L.shadow_base) / L.shadow_stride;
      const std::uint32_t off = (v - L.shadow_base) % L.shadow_stride;
      const ParamInfo& pi = bc->sum->params;
      if (int(slot) < pi.arity && pi.kinds[slot] == ParamKind::Reference) {
        const TermPtr& arg = bc->reg_terms[std::size_t(kRegA0 + int(slot))];
        return off ? make_bin(BinOp::Add, arg, make_const(off, w)) : arg;
      }
      return t;
    }
    if (L.in_heap(v)) {
      for (std::size_t j = 0; j < chunks->size(); ++j) {
        const HeapChunk& ch = (*chunks)[j];
        const std::uint64_t lo = std::uint64_t(ch.base) - 1;
        const std::uint64_t hi = std::uint64_t(ch.base) + ch.size;
        if (v >= lo && v <= hi) {
          const std::uint32_t off = (v - ch.base) & width_mask(w);
          return off ? make_bin(BinOp::Add, placeholders[j], make_const(off, w))
                     : placeholders[j];
        }
      }
      return t;
    }
    if (L.in_stack(v) && v > bc->sum->entry_sp) {
      return make_bin(BinOp::Add, bc->sp_term,
                      make_const(v - bc->sum->entry_sp, w));
    }
    return t;
  }

  TermPtr rw(const TermPtr& t) {
    if (!t) return t;
    auto it = memo.find(t.get());
    if (it != memo.end()) return it->second;
    TermPtr res;
    switch (t->kind) {
      case TermKind::Const:
        res = rebase_const(t);
        break;
      case TermKind::Input:
      case TermKind::Fresh:
        res = t;
        break;
      case TermKind::Bin: {
        TermPtr a = rw(t->a), b = rw(t->b);
        res = (a == t->a && b == t->b) ? t : make_bin(t->op, a, b);
        break;
      }
      case TermKind::Not: {
        TermPtr a = rw(t->a);
        res = a == t->a ? t : make_not(a);
        break;
      }
      case TermKind::Ite: {
        TermPtr a = rw(t->a), b = rw(t->b), c = rw(t->c);
        res = (a == t->a && b == t->b && c == t->c) ? t : make_ite(a, b, c);
        break;
      }
    }
    memo.emplace(t.get(), res);
    return res;
  }
};

// Symbol occurrences in first-appearance DFS order, with the nodes themselves
// so kind and name survive canonicalization.
void syms_in_order(const TermPtr& t, std::vector<TermPtr>& out,
                   std::set<SymId>& seen) {
  if (!t) return;
  if (t->is_sym()) {
    if (seen.insert(t->sym).second) out.push_back(t);
    return;
  }
  syms_in_order(t->a, out, seen);
  syms_in_order(t->b, out, seen);
  syms_in_order(t->c, out, seen);
}

std::string effect_key(const SideEffect& e) {
  std::string k = std::to_string(int(e.op));
  k += "|" + (e.addr ? term_str(e.addr) : std::string("-"));
  k += "|" + (e.value ? term_str(e.value) : std::string("-"));
  k += "|" + (e.size ? term_str(e.size) : std::string("-"));
  k += "|" + std::to_string(e.size_concrete) + "|" + e.origin;
  return k;
}

std::string event_key(const Event& e) {
  std::string k = std::to_string(int(e.kind)) + "|" + e.fn + "|" +
                  std::to_string(e.index);
  k += "|" + (e.addr ? term_str(e.addr) : std::string("-"));
  k += "|" + (e.value ? term_str(e.value) : std::string("-"));
  k += "|" + e.note;
  return k;
}

bool event_worth_carrying(EventKind k) {
  switch (k) {
    case EventKind::SymbolicTarget:
    case EventKind::ControlCorruption:
    case EventKind::StackSmash:
    case EventKind::HeapOverflow:
    case EventKind::UseAfterFree:
    case EventKind::DoubleFree:
    case EventKind::UnconstrainedAccess:
      return true;
    default:
      return false;  // diagnostics stay with the summarizing run
  }
}

void build_entry(const PathState& st, BuildCtx& bc) {
  const int w = bc.layout.width;
  Summary& sum = *bc.sum;

  ConstRewriter cr;
  cr.bc = &bc;
  cr.chunks = &st.chunks;
  for (std::size_t j = 0; j < st.chunks.size(); ++j)
    cr.placeholders.push_back(
        make_fresh(kPlaceholderBase + j, "m" + std::to_string(j), w));
  auto R = [&](const TermPtr& t) { return t ? simplify(cr.rw(t)) : t; };

  // Rewrite the side-effect log; traffic at or below the run's own frame is
  // invisible to callers and drops out.
  std::vector<SideEffect> theta;
  for (const SideEffect& e : st.log) {
    std::uint32_t a = 0;
    if ((e.op == EffectOp::MemRead || e.op == EffectOp::MemWrite) &&
        as_const(e.addr, a) && bc.layout.in_stack(a) && a <= sum.entry_sp)
      continue;
    SideEffect ne = e;
    ne.addr = R(e.addr);
    ne.value = R(e.value);
    ne.size = R(e.size);
    theta.push_back(std::move(ne));
  }
  // After a halt or fault nothing can observe the return register, so
  // terminal-ending entries carry no result; that also lets paths that stop
  // at different iterations collapse into one entry.
  TermPtr omega =
      st.end == EndKind::Return ? R(st.regs[kRegRv]) : nullptr;
  std::vector<TermPtr> alpha0;
  alpha0.reserve(st.pc.size());
  for (const TermPtr& c : st.pc) alpha0.push_back(R(c));
  std::vector<Event> events;
  for (const Event& e : st.events) {
    if (!event_worth_carrying(e.kind)) continue;
    Event ne = e;
    ne.addr = R(e.addr);
    ne.value = R(e.value);
    events.push_back(std::move(ne));
  }

  // Symbols the finished entry actually mentions, in deterministic order.
  std::vector<TermPtr> order;
  std::set<SymId> seen;
  syms_in_order(omega, order, seen);
  for (const SideEffect& e : theta) {
    syms_in_order(e.addr, order, seen);
    syms_in_order(e.value, order, seen);
    syms_in_order(e.size, order, seen);
  }
  for (const TermPtr& c : alpha0) syms_in_order(c, order, seen);
  for (const Event& e : events) {
    syms_in_order(e.addr, order, seen);
    syms_in_order(e.value, order, seen);
  }

  // Unwritten-cell reads that survived into the entry become bound inputs;
  // reads of the run's own frame or chunks stay carried unknowns.
  std::vector<EntryRead> reads;
  for (const auto& [id, a] : st.implicit_reads) {
    if (!seen.count(id)) continue;
    EntryRead r;
    r.sym = id;
    const MemLayout& L = bc.layout;
    if (L.in_shadow(a)) {
      const std::uint32_t slot = (a - L.shadow_base) / L.shadow_stride;
      if (int(slot) < sum.params.arity &&
          sum.params.kinds[slot] == ParamKind::Reference) {
        r.src = EntryRead::Src::RefParam;
        r.param = int(slot);
        r.offset = (a - L.shadow_base) % L.shadow_stride;
      } else {
        r.src = EntryRead::Src::Absolute;
        r.addr = a;
      }
    } else if (L.in_stack(a)) {
      if (a <= sum.entry_sp) continue;  // own-frame junk: stays carried
      r.src = EntryRead::Src::CallerStack;
      r.offset = a - sum.entry_sp;
    } else if (L.in_heap(a)) {
      bool own = false;
      for (const HeapChunk& ch : st.chunks)
        if (a + 1 >= ch.base && a <= ch.base + ch.size) own = true;
      if (own) continue;  // uninitialized cell of an own chunk: carried
      r.src = EntryRead::Src::Absolute;
      r.addr = a;
    } else {
      r.src = EntryRead::Src::Absolute;
      r.addr = a;
    }
    reads.push_back(r);
  }
  std::sort(reads.begin(), reads.end(), [](const EntryRead& x,
                                           const EntryRead& y) {
    return std::tuple(int(x.src), x.addr, x.param, x.offset) <
           std::tuple(int(y.src), y.addr, y.param, y.offset);
  });

  // Canonicalization: declared inputs map to themselves, bound reads get
  // cell-keyed ids, everything else numbers off in walk order.
  std::map<SymId, TermPtr> canon;
  for (int r = 0; r < kNumRegs; ++r)
    if (sum.reg_inputs[std::size_t(r)])
      canon[sum.reg_inputs[std::size_t(r)]] = bc.reg_terms[std::size_t(r)];
  canon[sum.sp_anchor] = bc.sp_term;
  for (std::size_t i = 0; i < reads.size(); ++i) {
    EntryRead& r = reads[i];
    std::string nm;
    switch (r.src) {
      case EntryRead::Src::Absolute: nm = "g@" + hex_str(r.addr); break;
      case EntryRead::Src::RefParam:
        nm = "ref" + std::to_string(r.param) + "+" + std::to_string(r.offset);
        break;
      case EntryRead::Src::CallerStack:
        nm = "stk+" + std::to_string(r.offset);
        break;
    }
    const SymId cid = kReadBase + i;
    canon[r.sym] = make_input(cid, nm, w);
    r.sym = cid;
  }
  std::vector<CarriedSym> carried;
  SymId next_carried = kCarriedBase;
  auto carry = [&](SymId id, bool input_kind, const std::string& name) {
    const SymId cid = next_carried++;
    canon[id] = input_kind ? make_input(cid, name, w)
                           : make_fresh(cid, name, w);
    carried.push_back({cid, input_kind, w, name});
    return cid;
  };
  for (const TermPtr& node : order)
    if (!canon.count(node->sym))
      carry(node->sym, node->kind == TermKind::Input, node->name);
  std::vector<SymId> malloc_bases;
  for (std::size_t j = 0; j < st.chunks.size(); ++j)
    malloc_bases.push_back(canon.at(kPlaceholderBase + j)->sym);
  std::vector<SymId> input_reads;
  for (SymId id : st.input_order) {
    auto it = canon.find(id);
    input_reads.push_back(it != canon.end() ? it->second->sym
                                            : carry(id, true, "in"));
  }

  auto C = [&](const TermPtr& t) {
    return t ? simplify(substitute(t, canon)) : t;
  };
  SummaryEntry entry;
  entry.omega = C(omega);
  for (SideEffect& e : theta) {
    e.addr = C(e.addr);
    e.value = C(e.value);
    e.size = C(e.size);
    entry.theta.push_back(std::move(e));
  }
  for (Event& e : events) {
    e.addr = C(e.addr);
    e.value = C(e.value);
    entry.events.push_back(std::move(e));
  }
  std::set<SymId> input_ids{sum.sp_anchor};
  for (int r = 0; r < kNumRegs; ++r)
    if (sum.reg_inputs[std::size_t(r)])
      input_ids.insert(sum.reg_inputs[std::size_t(r)]);
  for (const EntryRead& r : reads) input_ids.insert(r.sym);
  std::set<SymId> carried_ids;
  for (const CarriedSym& c : carried) carried_ids.insert(c.sym);
  std::vector<TermPtr> alpha;
  alpha.reserve(alpha0.size());
  for (const TermPtr& c : alpha0) alpha.push_back(C(c));
  entry.alpha = project_inputs(alpha, input_ids, carried_ids);
  entry.end = st.end;
  entry.reads = std::move(reads);
  entry.carried = std::move(carried);
  entry.input_reads = std::move(input_reads);
  entry.malloc_bases = std::move(malloc_bases);

  // Merge with a structurally identical entry: the precondition weakens to
  // the ordered intersection, which stays sound because every dropped
  // constraint only narrowed the behavior class.
  std::string key = std::to_string(int(entry.end)) + "\x1f" +
                    (entry.omega ? term_str(entry.omega) : "-");
  for (const SideEffect& e : entry.theta) key += "\x1f" + effect_key(e);
  key += "\x1e";
  for (const Event& e : entry.events) key += "\x1f" + event_key(e);
  key += "\x1e";
  for (const EntryRead& r : entry.reads)
    key += "\x1f" + std::to_string(int(r.src)) + ":" + std::to_string(r.addr) +
           ":" + std::to_string(r.param) + ":" + std::to_string(r.offset);
  auto mi = bc.merge_index.find(key);
  if (mi != bc.merge_index.end()) {
    SummaryEntry& prev = sum.entries[mi->second];
    std::set<std::string> keep;
    for (const TermPtr& c : entry.alpha) keep.insert(term_str(c));
    std::vector<TermPtr> merged;
    for (const TermPtr& c : prev.alpha)
      if (keep.count(term_str(c))) merged.push_back(c);
    prev.alpha = std::move(merged);
    ++prev.merged_from;
    return;
  }

  entry.alpha_verdict = entry.alpha.empty()
                            ? SatResult::Sat
                            : check_sat(entry.alpha, bc.solver).status;
  if (entry.alpha_verdict == SatResult::Unknown) ++sum.unknown_alpha;
  bc.merge_index.emplace(std::move(key), sum.entries.size());
  sum.entries.push_back(std::move(entry));
}

// ---------------------------------------------------------------------------
// Shared call interception for compositional runs and summarizing runs.

struct CompDriver {
  const Program* prog = nullptr;
  ExploreConfig cfg;
  SummaryTable* table = nullptr;

  std::optional<std::vector<PathState>> on_call(const PathState& s,
                                                const std::string& callee,
                                                ExecContext& ctx) {
    const TermPtr& sp = s.regs[kRegSp];
    std::uint32_t spv = 0;
    if (!as_const(sp, spv)) return std::nullopt;  // executor faults this
    if (std::int64_t(spv) - 2 < std::int64_t(ctx.layout.stack_floor))
      return std::nullopt;  // executor raises StackExhausted
    auto it = table->summaries.find(callee);
    if (it == table->summaries.end()) {
      if (table->in_progress.count(callee)) {
        // Recursive cycle: the call returns an unconstrained value and the
        // path continues; deeper behaviors are out of this summary's scope.
        ++table->havoc_calls;
        PathState t = s;
        ++t.steps;
        t.regs[kRegRv] = make_fresh(ctx.gen->next(), "havoc", ctx.layout.width);
        ++t.idx;
        return std::vector<PathState>{std::move(t)};
      }
      ++table->misses;
      summarize_function(*prog, callee, cfg, *table);
      it = table->summaries.find(callee);
    } else {
      ++table->hits;
    }
    ActualBinding bind = get_preconditions(s, it->second.params, ctx.layout);
    return apply_summary(s, it->second, bind, ctx);
  }
};

void serialize_term(nlohmann::json& j, const TermPtr& t);

nlohmann::json term_json(const TermPtr& t) {
  nlohmann::json j;
  serialize_term(j, t);
  return j;
}

void serialize_term(nlohmann::json& j, const TermPtr& t) {
  using nlohmann::json;
  if (!t) {
    j = nullptr;
    return;
  }
  j = json::object();
  j["w"] = t->width;
  switch (t->kind) {
    case TermKind::Const:
      j["k"] = "c";
      j["v"] = t->value;
      break;
    case TermKind::Input:
      j["k"] = "i";
      j["s"] = t->sym;
      j["n"] = t->name;
      break;
    case TermKind::Fresh:
      j["k"] = "f";
      j["s"] = t->sym;
      j["n"] = t->name;
      break;
    case TermKind::Bin:
      j["k"] = "b";
      j["o"] = int(t->op);
      j["a"] = term_json(t->a);
      j["b"] = term_json(t->b);
      break;
    case TermKind::Not:
      j["k"] = "n";
      j["a"] = term_json(t->a);
      break;
    case TermKind::Ite:
      j["k"] = "t";
      j["a"] = term_json(t->a);
      j["b"] = term_json(t->b);
      j["c"] = term_json(t->c);
      break;
  }
}

TermPtr term_from_json(const nlohmann::json& j) {
  if (j.is_null()) return nullptr;
  const std::string k = j.at("k").get<std::string>();
  const int w = j.at("w").get<int>();
  if (k == "c") return make_const(j.at("v").get<std::uint32_t>(), w);
  if (k == "i")
    return make_input(j.at("s").get<SymId>(), j.at("n").get<std::string>(), w);
  if (k == "f")
    return make_fresh(j.at("s").get<SymId>(), j.at("n").get<std::string>(), w);
  if (k == "b")
    return make_bin(BinOp(j.at("o").get<int>()), term_from_json(j.at("a")),
                    term_from_json(j.at("b")));
  if (k == "n") return make_not(term_from_json(j.at("a")));
  return make_ite(term_from_json(j.at("a")), term_from_json(j.at("b")),
                  term_from_json(j.at("c")));
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string cache_key(const Program& p, const ExploreConfig& cfg) {
  std::string text = unparse(p);
  text += "\nwidth=" + std::to_string(cfg.solver.width);
  text += "\nloop_limit=" + std::to_string(cfg.loop_limit);
  char buf[32];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a(text)));
  return buf;
}

}  // namespace

// ---------------------------------------------------------------------------

ActualBinding get_preconditions(const PathState& caller, const ParamInfo& info,
                                const MemLayout& layout) {
  (void)layout;
  ActualBinding b;
  b.regs = caller.regs;
  b.arity = info.arity;
  std::uint32_t spv = 0;
  if (as_const(caller.regs[kRegSp], spv)) b.callee_sp = spv - 2;
  return b;
}

std::vector<PathState> apply_summary(const PathState& caller,
                                     const Summary& sum,
                                     const ActualBinding& bind,
                                     ExecContext& ctx) {
  const int w = ctx.layout.width;
  std::vector<PathState> out;
  for (std::size_t ei = 0; ei < sum.entries.size(); ++ei) {
    const SummaryEntry& E = sum.entries[ei];
    PathState t = caller;
    ++t.steps;
    std::map<SymId, TermPtr> sigma;
    for (int r = 0; r < kNumRegs; ++r)
      if (sum.reg_inputs[std::size_t(r)])
        sigma[sum.reg_inputs[std::size_t(r)]] = bind.regs[std::size_t(r)];
    sigma[sum.sp_anchor] = make_const(bind.callee_sp, w);

    // Bind the entry's memory-image inputs against the caller's memory. The
    // read path performs the usual heap-discipline checks, so a reference
    // parameter pointing into a freed chunk surfaces here — attributed to the
    // callee, whose code performs the read.
    const std::string caller_fn = t.fn;
    t.fn = sum.fn;
    for (const EntryRead& r : E.reads) {
      TermPtr v;
      std::optional<std::uint32_t> cell;
      switch (r.src) {
        case EntryRead::Src::Absolute:
          cell = r.addr;
          break;
        case EntryRead::Src::RefParam: {
          TermPtr a = simplify(make_bin(
              BinOp::Add, bind.regs[std::size_t(kRegA0 + r.param)],
              make_const(r.offset, w)));
          std::uint32_t av = 0;
          if (as_const(a, av)) cell = av;
          break;
        }
        case EntryRead::Src::CallerStack:
          cell = (bind.callee_sp + r.offset) & width_mask(w);
          break;
      }
      if (cell) {
        ReadResult rr = read_mem(t, make_const(*cell, w), ctx);
        // Concrete reads have exactly one successor.
        t = std::move(rr.states[0]);
        v = rr.values[0];
      } else {
        // Symbolic actual pointer: the image value stays unconstrained.
        v = make_fresh(ctx.gen->next(), "img", w);
      }
      sigma[r.sym] = v;
    }
    t.fn = caller_fn;
    for (const CarriedSym& c : E.carried) {
      const SymId id = ctx.gen->next();
      sigma[c.sym] = c.input_kind ? make_input(id, c.name, w)
                                  : make_fresh(id, c.name, w);
    }

    std::vector<TermPtr> alpha;
    alpha.reserve(E.alpha.size());
    bool contradicted = false;
    for (const TermPtr& c : E.alpha) {
      TermPtr sc = simplify(substitute(c, sigma));
      // Binding the actuals often folds a conjunct to a constant (loop
      // counters in a concrete caller, say): drop satisfied ones, and skip
      // the entry outright on a contradiction.
      if (sc->is_const()) {
        if (sc->value == 0) {
          contradicted = true;
          break;
        }
        continue;
      }
      alpha.push_back(std::move(sc));
    }
    if (contradicted) continue;
    if (!alpha.empty()) {
      // Constraints touching only symbols this application just minted can be
      // decided alone; otherwise conjoin with the caller's path condition.
      bool isolated = true;
      for (const TermPtr& c : alpha) {
        for (SymId id : free_syms(c))
          if (id <= t.watermark) {
            isolated = false;
            break;
          }
        if (!isolated) break;
      }
      SatResult r;
      if (isolated) {
        r = ctx.check(alpha);
      } else {
        std::vector<TermPtr> conj = t.pc;
        conj.insert(conj.end(), alpha.begin(), alpha.end());
        r = ctx.check(conj);
      }
      if (r == SatResult::Unsat) continue;
    }
    for (const TermPtr& c : alpha) t.add_constraint(c);

    // Replay Θ. Writes through a symbolic rebased address can fork, so the
    // replay threads a state list.
    std::vector<PathState> cur;
    cur.push_back(std::move(t));
    std::size_t malloc_seq = 0;
    for (const SideEffect& e : E.theta) {
      TermPtr addr = e.addr ? simplify(substitute(e.addr, sigma)) : nullptr;
      TermPtr value = e.value ? simplify(substitute(e.value, sigma)) : nullptr;
      TermPtr size = e.size ? simplify(substitute(e.size, sigma)) : nullptr;
      std::vector<PathState> next;
      for (PathState& st : cur) {
        if (st.terminal()) {  // faulted mid-replay; later effects don't apply
          next.push_back(std::move(st));
          continue;
        }
        const std::size_t log_mark = st.log.size();
        // Events raised while replaying belong to the function whose code
        // produced the effect, so baseline and compositional runs attribute
        // a given bug to the same function.
        st.fn = e.origin;
        auto tag_new = [&](PathState& ns) {
          ns.fn = caller_fn;
          for (std::size_t i = log_mark; i < ns.log.size(); ++i) {
            ns.log[i].pre_index = int(ei);
            ns.log[i].origin = e.origin;
          }
        };
        switch (e.op) {
          case EffectOp::Malloc: {
            TermPtr base =
                sym_malloc(st, make_const(e.size_concrete, w), ctx);
            if (st.terminal()) {  // heap exhausted while replaying
              tag_new(st);
              next.push_back(std::move(st));
              continue;
            }
            st.log.back().size = size;
            // Pin the renamed placeholder to the caller-side base so the
            // precondition, ω, and later effects all agree on the address.
            const TermPtr& ph = sigma.at(E.malloc_bases[malloc_seq]);
            st.add_constraint(make_bin(BinOp::Eq, ph, base));
            sigma[E.malloc_bases[malloc_seq]] = base;
            tag_new(st);
            next.push_back(std::move(st));
            break;
          }
          case EffectOp::Free:
            sym_free(st, addr, ctx);
            tag_new(st);
            next.push_back(std::move(st));
            break;
          case EffectOp::MemWrite:
          case EffectOp::GlobalWrite: {
            std::vector<PathState> ws = write_mem(st, addr, value, ctx);
            for (PathState& ns : ws) {
              tag_new(ns);
              next.push_back(std::move(ns));
            }
            break;
          }
          case EffectOp::MemRead: {
            std::uint32_t a = 0;
            if (as_const(addr, a)) note_access(st, a, false, ctx);
            SideEffect ne;
            ne.op = EffectOp::MemRead;
            ne.addr = addr;
            ne.value = value;
            ne.pre_index = int(ei);
            ne.origin = e.origin;
            st.log.push_back(std::move(ne));
            tag_new(st);
            next.push_back(std::move(st));
            break;
          }
          case EffectOp::Output: {
            st.outputs.push_back(value);
            SideEffect ne;
            ne.op = EffectOp::Output;
            ne.value = value;
            ne.pre_index = int(ei);
            ne.origin = e.origin;
            st.log.push_back(std::move(ne));
            tag_new(st);
            next.push_back(std::move(st));
            break;
          }
        }
      }
      cur = std::move(next);
      if (e.op == EffectOp::Malloc) ++malloc_seq;
    }

    for (PathState& st : cur) {
      if (st.terminal()) {  // replay itself faulted (heap exhaustion)
        out.push_back(std::move(st));
        continue;
      }
      st.regs[kRegRv] =
          E.omega ? simplify(substitute(E.omega, sigma)) : st.regs[kRegRv];
      for (const Event& ev : E.events) {
        Event ne = ev;
        ne.addr = ne.addr ? simplify(substitute(ne.addr, sigma)) : nullptr;
        ne.value = ne.value ? simplify(substitute(ne.value, sigma)) : nullptr;
        st.events.push_back(std::move(ne));
      }
      for (SymId id : E.input_reads)
        st.input_order.push_back(sigma.at(id)->sym);
      switch (E.end) {
        case EndKind::Return:
          ++st.idx;
          break;
        case EndKind::Halt:
          st.end = EndKind::Halt;
          break;
        default:
          st.end = EndKind::Fault;
          break;
      }
      out.push_back(std::move(st));
    }
  }
  return out;
}

Summary summarize_function(const Program& p, const std::string& fn,
                           const ExploreConfig& cfg, SummaryTable& table) {
  table.in_progress.insert(fn);
  Summary sum;
  sum.fn = fn;
  sum.width = cfg.solver.width;
  sum.params = infer_param_info(p, fn);
  const MemLayout layout = MemLayout::for_width(cfg.solver.width);
  sum.entry_sp = layout.stack_top - 2;

  BuildCtx bc;
  bc.prog = &p;
  bc.layout = layout;
  bc.solver = cfg.solver;
  bc.sum = &sum;

  ExploreConfig scfg = cfg;
  scfg.entry = fn;
  CompDriver driver{&p, cfg, &table};
  ExploreHooks hooks;
  hooks.on_call = [&driver](const PathState& s, const std::string& callee,
                            ExecContext& ctx) {
    return driver.on_call(s, callee, ctx);
  };
  hooks.make_entry = [&](ExecContext& ctx) {
    PathState st = make_initial_state(fn, ctx);
    for (int r = 0; r < kNumRegs; ++r) {
      const TermPtr& t = st.regs[std::size_t(r)];
      if (t && t->is_sym()) {
        sum.reg_inputs[std::size_t(r)] = t->sym;
        bc.reg_terms[std::size_t(r)] = t;
      }
    }
    sum.sp_anchor = ctx.gen->next();
    bc.sp_term = make_input(sum.sp_anchor, "sp@entry", ctx.layout.width);
    // Reference parameters point at private image cells; their contents are
    // unwritten, so reads become bound inputs of the summary.
    for (int k = 0; k < sum.params.arity; ++k)
      if (sum.params.kinds[std::size_t(k)] == ParamKind::Reference)
        st.regs[std::size_t(kRegA0 + k)] = make_const(
            layout.shadow_base + std::uint32_t(k) * layout.shadow_stride,
            ctx.layout.width);
    return st;
  };
  hooks.on_terminal = [&](const PathState& st) { build_entry(st, bc); };

  Report rep = explore(p, scfg, hooks);
  sum.creation = rep.metrics;
  sum.partial = rep.incomplete || rep.metrics.paths_pruned > 0;
  if (rep.incomplete) {
    // Catch-all for state-budget truncation only: behaviors past the budget
    // return an unconstrained value with no visible effects. Loop-limit
    // pruning needs no catch-all — the bound applies identically when the
    // callee is explored inline, so the entries already cover everything an
    // in-line run under the same limits would reach, and an always-feasible
    // extra entry would fork every call site.
    SummaryEntry hv;
    hv.havoc = true;
    hv.end = EndKind::Return;
    const SymId hid = kCarriedBase;
    hv.omega = make_fresh(hid, "havoc", cfg.solver.width);
    hv.carried.push_back({hid, false, cfg.solver.width, "havoc"});
    sum.entries.push_back(std::move(hv));
  }
  ++table.summarizations;
  table.summaries[fn] = sum;
  table.in_progress.erase(fn);
  return sum;
}

Report run_compositional(const Program& p, const ExploreConfig& cfg,
                         SummaryTable& table) {
  std::set<std::string> pre;
  for (const auto& [name, s] : table.summaries) pre.insert(name);
  CompDriver driver{&p, cfg, &table};
  ExploreHooks hooks;
  hooks.on_call = [&driver](const PathState& s, const std::string& callee,
                            ExecContext& ctx) {
    return driver.on_call(s, callee, ctx);
  };
  Report rep = explore(p, cfg, hooks);
  // Summarizing runs are reported separately: `metrics` stays the entry
  // function's own exploration (the number the scaling comparison is about),
  // while the amortizable cost of building this run's new summaries lands in
  // `summary_work`. Wall time is not split — the main run's clock covers it.
  for (const auto& [name, s] : table.summaries) {
    if (pre.count(name)) continue;
    rep.summary_work.states_explored += s.creation.states_explored;
    rep.summary_work.states_consumed_by_fork +=
        s.creation.states_consumed_by_fork;
    rep.summary_work.paths_completed += s.creation.paths_completed;
    rep.summary_work.paths_pruned += s.creation.paths_pruned;
    rep.summary_work.paths_faulted += s.creation.paths_faulted;
    rep.summary_work.paths_infeasible += s.creation.paths_infeasible;
    rep.summary_work.sat_queries += s.creation.sat_queries;
    rep.summary_work.unknown_verdicts += s.creation.unknown_verdicts;
  }
  return rep;
}

Report run_compositional(const Program& p, const ExploreConfig& cfg) {
  SummaryTable table;
  return run_compositional(p, cfg, table);
}

std::vector<BugReport> combine_side_effects(const Report& rep,
                                            const SolverConfig& cfg) {
  std::vector<BugReport> findings;
  std::set<std::string> dedup;
  for (const PathOutcome& po : rep.paths) {
    struct Freed {
      TermPtr addr;
      std::string origin;
    };
    std::vector<Freed> freed;
    for (const SideEffect& e : po.log) {
      const bool is_free = e.op == EffectOp::Free;
      const bool is_use =
          e.op == EffectOp::MemWrite || e.op == EffectOp::MemRead;
      if (!is_free && !is_use) continue;
      if (!e.addr) continue;
      for (const Freed& f : freed) {
        std::uint32_t va = 0, vb = 0;
        if (as_const(f.addr, va) && as_const(e.addr, vb) && va != vb)
          continue;  // distinct concrete cells never alias
        const BugKind kind = is_free ? BugKind::DoubleFree : BugKind::UAF;
        std::string key = std::to_string(int(kind)) + "|" + e.origin + "|" +
                          term_str(f.addr) + "|" + term_str(e.addr);
        if (dedup.count(key)) continue;
        std::vector<TermPtr> conj = po.pc;
        conj.push_back(
            simplify(make_bin(BinOp::Eq, f.addr, e.addr)));
        const Verdict v = check_sat(conj, cfg);
        if (v.status == SatResult::Unsat) continue;
        dedup.insert(std::move(key));
        BugReport b;
        b.kind = kind;
        b.function = e.origin;
        b.index = -1;
        b.pc = conj;
        b.addr = e.addr;
        b.interprocedural = f.origin != e.origin;
        b.note = std::string(is_free ? "second free of " : "use of freed ") +
                 term_str(f.addr) + " via " + term_str(e.addr) +
                 " (side-effect pairing)";
        if (v.status == SatResult::Sat)
          b.witness = v.model;
        else if (auto m = get_model(conj, cfg))
          b.witness = *m;
        else
          b.note += "; path condition undecided";
        findings.push_back(std::move(b));
      }
      if (is_free) freed.push_back({e.addr, e.origin});
    }
  }
  sort_reports(findings);
  return findings;
}

// ---------------------------------------------------------------------------
// Cache persistence.

std::string table_to_json(const SummaryTable& table, const Program& p,
                          const ExploreConfig& cfg) {
  using nlohmann::json;
  json root;
  root["version"] = 1;
  root["key"] = cache_key(p, cfg);
  json fns = json::object();
  for (const auto& [name, s] : table.summaries) {
    json js;
    js["fn"] = s.fn;
    js["arity"] = s.params.arity;
    json kinds = json::array();
    for (ParamKind k : s.params.kinds) kinds.push_back(int(k));
    js["kinds"] = kinds;
    json regs = json::array();
    for (SymId id : s.reg_inputs) regs.push_back(id);
    js["reg_inputs"] = regs;
    js["sp_anchor"] = s.sp_anchor;
    js["entry_sp"] = s.entry_sp;
    js["width"] = s.width;
    js["partial"] = s.partial;
    js["unknown_alpha"] = s.unknown_alpha;
    json entries = json::array();
    for (const SummaryEntry& e : s.entries) {
      json je;
      json alpha = json::array();
      for (const TermPtr& c : e.alpha) alpha.push_back(term_json(c));
      je["alpha"] = alpha;
      je["omega"] = term_json(e.omega);
      json theta = json::array();
      for (const SideEffect& f : e.theta) {
        json jf;
        jf["op"] = int(f.op);
        jf["addr"] = term_json(f.addr);
        jf["value"] = term_json(f.value);
        jf["size"] = term_json(f.size);
        jf["size_concrete"] = f.size_concrete;
        jf["origin"] = f.origin;
        theta.push_back(std::move(jf));
      }
      je["theta"] = theta;
      json events = json::array();
      for (const Event& ev : e.events) {
        json jv;
        jv["kind"] = int(ev.kind);
        jv["fn"] = ev.fn;
        jv["index"] = ev.index;
        jv["addr"] = term_json(ev.addr);
        jv["value"] = term_json(ev.value);
        jv["note"] = ev.note;
        events.push_back(std::move(jv));
      }
      je["events"] = events;
      je["end"] = int(e.end);
      json reads = json::array();
      for (const EntryRead& r : e.reads) {
        json jr;
        jr["sym"] = r.sym;
        jr["src"] = int(r.src);
        jr["addr"] = r.addr;
        jr["param"] = r.param;
        jr["offset"] = r.offset;
        reads.push_back(std::move(jr));
      }
      je["reads"] = reads;
      json carried = json::array();
      for (const CarriedSym& c : e.carried) {
        json jc;
        jc["sym"] = c.sym;
        jc["input"] = c.input_kind;
        jc["width"] = c.width;
        jc["name"] = c.name;
        carried.push_back(std::move(jc));
      }
      je["carried"] = carried;
      je["input_reads"] = e.input_reads;
      je["malloc_bases"] = e.malloc_bases;
      je["alpha_verdict"] = int(e.alpha_verdict);
      je["havoc"] = e.havoc;
      je["merged_from"] = e.merged_from;
      entries.push_back(std::move(je));
    }
    js["entries"] = entries;
    fns[name] = std::move(js);
  }
  root["summaries"] = std::move(fns);
  return root.dump(2);
}

bool table_from_json(const std::string& text, const Program& p,
                     const ExploreConfig& cfg, SummaryTable& table) try {
  using nlohmann::json;
  json root = json::parse(text, nullptr, false);
  if (root.is_discarded()) return false;
  if (!root.contains("version") || root["version"].get<int>() != 1)
    return false;
  if (!root.contains("key") ||
      root["key"].get<std::string>() != cache_key(p, cfg))
    return false;
  SummaryTable fresh;
  for (const auto& [name, js] : root.at("summaries").items()) {
    Summary s;
    s.fn = js.at("fn").get<std::string>();
    s.params.arity = js.at("arity").get<int>();
    for (const auto& k : js.at("kinds"))
      s.params.kinds.push_back(ParamKind(k.get<int>()));
    std::size_t i = 0;
    for (const auto& id : js.at("reg_inputs")) {
      if (i >= s.reg_inputs.size()) return false;
      s.reg_inputs[i++] = id.get<SymId>();
    }
    s.sp_anchor = js.at("sp_anchor").get<SymId>();
    s.entry_sp = js.at("entry_sp").get<std::uint32_t>();
    s.width = js.at("width").get<int>();
    s.partial = js.at("partial").get<bool>();
    s.unknown_alpha = js.at("unknown_alpha").get<int>();
    for (const auto& je : js.at("entries")) {
      SummaryEntry e;
      for (const auto& c : je.at("alpha")) e.alpha.push_back(term_from_json(c));
      e.omega = term_from_json(je.at("omega"));
      for (const auto& jf : je.at("theta")) {
        SideEffect f;
        f.op = EffectOp(jf.at("op").get<int>());
        f.addr = term_from_json(jf.at("addr"));
        f.value = term_from_json(jf.at("value"));
        f.size = term_from_json(jf.at("size"));
        f.size_concrete = jf.at("size_concrete").get<std::uint32_t>();
        f.origin = jf.at("origin").get<std::string>();
        e.theta.push_back(std::move(f));
      }
      for (const auto& jv : je.at("events")) {
        Event ev;
        ev.kind = EventKind(jv.at("kind").get<int>());
        ev.fn = jv.at("fn").get<std::string>();
        ev.index = jv.at("index").get<int>();
        ev.addr = term_from_json(jv.at("addr"));
        ev.value = term_from_json(jv.at("value"));
        ev.note = jv.at("note").get<std::string>();
        e.events.push_back(std::move(ev));
      }
      e.end = EndKind(je.at("end").get<int>());
      for (const auto& jr : je.at("reads")) {
        EntryRead r;
        r.sym = jr.at("sym").get<SymId>();
        r.src = EntryRead::Src(jr.at("src").get<int>());
        r.addr = jr.at("addr").get<std::uint32_t>();
        r.param = jr.at("param").get<int>();
        r.offset = jr.at("offset").get<std::uint32_t>();
        e.reads.push_back(r);
      }
      for (const auto& jc : je.at("carried")) {
        CarriedSym c;
        c.sym = jc.at("sym").get<SymId>();
        c.input_kind = jc.at("input").get<bool>();
        c.width = jc.at("width").get<int>();
        c.name = jc.at("name").get<std::string>();
        e.carried.push_back(std::move(c));
      }
      for (const auto& id : je.at("input_reads"))
        e.input_reads.push_back(id.get<SymId>());
      for (const auto& id : je.at("malloc_bases"))
        e.malloc_bases.push_back(id.get<SymId>());
      e.alpha_verdict = SatResult(je.at("alpha_verdict").get<int>());
      e.havoc = je.at("havoc").get<bool>();
      e.merged_from = je.at("merged_from").get<int>();
      s.entries.push_back(std::move(e));
    }
    fresh.summaries.emplace(name, std::move(s));
  }
  table.summaries = std::move(fresh.summaries);
  return true;
} catch (const nlohmann::json::exception&) {
  return false;
}

}  // namespace symsum
