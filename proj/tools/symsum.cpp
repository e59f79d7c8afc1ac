// Command-line front end: run an engine over a program, build and inspect
// function summaries, generate benchmark programs, compare engines over a
// corpus, and interpret programs concretely.
//
// Exit codes: 0 clean, 1 bugs found (or missed expectations in bench),
// 2 usage/parse error, 3 exploration incomplete (budget or deadline).

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "symsum/bench.hpp"
#include "symsum/gen.hpp"
#include "symsum/interp.hpp"
#include "symsum/outline.hpp"
#include "symsum/summary.hpp"

namespace {

using namespace symsum;
using nlohmann::json;

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& text) {
  if (path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
}

std::string stem_of(const std::string& path) {
  return std::filesystem::path(path).stem().string();
}

std::string cache_path(const std::string& dir, const std::string& program) {
  return (std::filesystem::path(dir) / (stem_of(program) + ".summaries.json"))
      .string();
}

// Pull display names for the symbols a report mentions.
void collect_names(const TermPtr& t, std::map<SymId, std::string>& out) {
  if (!t) return;
  if (t->is_sym()) out.emplace(t->sym, t->name);
  collect_names(t->a, out);
  collect_names(t->b, out);
  collect_names(t->c, out);
}

json bug_to_json(const BugReport& b) {
  json j;
  j["kind"] = bug_kind_name(b.kind);
  j["function"] = b.function;
  j["index"] = b.index;
  j["interprocedural"] = b.interprocedural;
  if (!b.note.empty()) j["note"] = b.note;
  if (b.addr) j["addr"] = term_str(b.addr);
  if (b.value) j["value"] = term_str(b.value);
  if (b.crafted) j["crafted"] = *b.crafted;
  json pc = json::array();
  for (const TermPtr& c : b.pc) pc.push_back(term_str(c));
  j["path_condition"] = pc;
  if (b.witness) {
    std::map<SymId, std::string> names;
    for (const TermPtr& c : b.pc) collect_names(c, names);
    collect_names(b.addr, names);
    collect_names(b.value, names);
    json w = json::array();
    for (const auto& [sym, value] : b.witness->values) {
      json e;
      e["sym"] = sym;
      auto it = names.find(sym);
      if (it != names.end()) e["name"] = it->second;
      e["value"] = value;
      w.push_back(e);
    }
    j["witness"] = w;
  }
  return j;
}

json metrics_to_json(const Metrics& m) {
  return json{{"states_explored", m.states_explored},
              {"paths_completed", m.paths_completed},
              {"paths_pruned", m.paths_pruned},
              {"paths_faulted", m.paths_faulted},
              {"paths_infeasible", m.paths_infeasible},
              {"states_consumed_by_fork", m.states_consumed_by_fork},
              {"states_live_at_exit", m.states_live_at_exit},
              {"sat_queries", m.sat_queries},
              {"unknown_verdicts", m.unknown_verdicts},
              {"wall_ms", m.wall_ms}};
}

void print_bugs(const std::vector<BugReport>& bugs) {
  for (const BugReport& b : bugs) {
    std::printf("%s in %s at instruction %d", bug_kind_name(b.kind),
                b.function.c_str(), b.index);
    if (b.crafted) std::printf(" (steerable to %u)", *b.crafted);
    if (!b.note.empty()) std::printf(": %s", b.note.c_str());
    std::printf("\n");
  }
}

void print_metrics(const char* label, const Metrics& m) {
  std::printf(
      "%s: states %llu, completed %llu, pruned %llu, faulted %llu, "
      "infeasible %llu, sat queries %llu, unknown %llu, wall %llu ms\n",
      label, (unsigned long long)m.states_explored,
      (unsigned long long)m.paths_completed,
      (unsigned long long)m.paths_pruned,
      (unsigned long long)m.paths_faulted,
      (unsigned long long)m.paths_infeasible,
      (unsigned long long)m.sat_queries,
      (unsigned long long)m.unknown_verdicts,
      (unsigned long long)m.wall_ms);
}

struct RunArgs {
  std::string file;
  std::string engine = "baseline";
  bool outline = false;
  int width = 16;
  int loop_limit = 32;
  std::uint64_t max_states = 10000;
  std::uint64_t budget = 200000;
  std::string search = "bfs";
  std::string report_path;
  std::string cache_dir;
  std::string emit_ir;
};

ExploreConfig make_config(const RunArgs& a) {
  ExploreConfig cfg;
  cfg.search = a.search == "dfs" ? SearchOrder::DFS : SearchOrder::BFS;
  cfg.loop_limit = a.loop_limit;
  cfg.max_states = a.max_states;
  cfg.solver.width = a.width;
  cfg.solver.budget = a.budget;
  return cfg;
}

int cmd_run(const RunArgs& a) {
  Program prog = parse_program(read_file(a.file));
  if (a.outline) {
    OutlineResult res = outline_program(prog);
    prog = std::move(res.program);
    for (const OutlinedLoop& o : res.outlined)
      std::printf("outlined %s from %s\n", o.name.c_str(), o.parent.c_str());
  }
  if (!a.emit_ir.empty()) write_file(a.emit_ir, unparse(prog));

  const ExploreConfig cfg = make_config(a);
  Report rep;
  SummaryTable table;
  if (a.engine == "summary") {
    if (!a.cache_dir.empty()) {
      std::filesystem::create_directories(a.cache_dir);
      const std::string path = cache_path(a.cache_dir, a.file);
      if (std::filesystem::exists(path))
        table_from_json(read_file(path), prog, cfg, table);
    }
    rep = run_compositional(prog, cfg, table);
    if (!a.cache_dir.empty())
      write_file(cache_path(a.cache_dir, a.file),
                 table_to_json(table, prog, cfg));
    std::printf(
        "summaries: %llu built, %llu hits, %llu misses, %llu havoc calls\n",
        (unsigned long long)table.summarizations,
        (unsigned long long)table.hits, (unsigned long long)table.misses,
        (unsigned long long)table.havoc_calls);
  } else {
    rep = explore(prog, cfg);
  }

  print_bugs(rep.bugs);
  print_metrics("explored", rep.metrics);
  if (rep.summary_work.states_explored)
    print_metrics("summary work", rep.summary_work);
  if (rep.timed_out)
    std::printf("status: timeout\n");
  else if (rep.incomplete)
    std::printf("status: incomplete (state budget)\n");
  else
    std::printf("status: complete\n");

  if (!a.report_path.empty()) {
    json j;
    j["schema"] = "symsum.report/1";
    j["program"] = a.file;
    j["engine"] = a.engine + (a.outline ? "+outline" : "");
    j["width"] = a.width;
    j["loop_limit"] = a.loop_limit;
    j["incomplete"] = rep.incomplete;
    j["timed_out"] = rep.timed_out;
    j["metrics"] = metrics_to_json(rep.metrics);
    if (rep.summary_work.states_explored)
      j["summary_work"] = metrics_to_json(rep.summary_work);
    json bugs = json::array();
    for (const BugReport& b : rep.bugs) bugs.push_back(bug_to_json(b));
    j["bugs"] = bugs;
    write_file(a.report_path, j.dump(2) + "\n");
  }

  if (!rep.bugs.empty()) return 1;
  if (rep.incomplete) return 3;
  return 0;
}

int cmd_summarize(const std::string& file, const std::string& fn,
                  const std::string& cache_dir, int width, int loop_limit) {
  const Program prog = parse_program(read_file(file));
  if (!prog.functions.count(fn)) {
    std::fprintf(stderr, "no function named %s\n", fn.c_str());
    return 2;
  }
  ExploreConfig cfg;
  cfg.solver.width = width;
  cfg.loop_limit = loop_limit;

  SummaryTable table;
  if (!cache_dir.empty()) {
    std::filesystem::create_directories(cache_dir);
    const std::string path = cache_path(cache_dir, file);
    if (std::filesystem::exists(path))
      table_from_json(read_file(path), prog, cfg, table);
  }
  if (!table.summaries.count(fn)) summarize_function(prog, fn, cfg, table);
  if (!cache_dir.empty())
    write_file(cache_path(cache_dir, file), table_to_json(table, prog, cfg));

  const Summary& sum = table.summaries.at(fn);
  std::printf("summary of %s: %zu entries%s\n", fn.c_str(),
              sum.entries.size(), sum.partial ? " (partial)" : "");
  for (std::size_t i = 0; i < sum.entries.size(); ++i) {
    const SummaryEntry& e = sum.entries[i];
    std::printf("entry %zu:%s end=%s merged=%d\n", i,
                e.havoc ? " havoc" : "",
                e.end == EndKind::Return ? "return"
                : e.end == EndKind::Halt ? "halt"
                                         : "fault",
                e.merged_from);
    for (const TermPtr& c : e.alpha)
      std::printf("  requires %s\n", term_str(c).c_str());
    if (e.omega) std::printf("  returns %s\n", term_str(e.omega).c_str());
    for (const SideEffect& s : e.theta)
      std::printf("  effect %d at %s\n", int(s.op),
                  s.addr ? term_str(s.addr).c_str() : "-");
  }
  return 0;
}

int cmd_bench(const std::string& dir, const std::string& out_path, int repeat,
              double timeout_s, int jobs, int width, int loop_limit) {
  BenchConfig cfg;
  cfg.repeat = repeat;
  cfg.timeout_s = timeout_s;
  cfg.jobs = jobs;
  cfg.width = width;
  cfg.loop_limit = loop_limit;
  const std::vector<BenchProgram> corpus = load_corpus(dir);
  if (corpus.empty()) std::fprintf(stderr, "warning: no .ir files in %s\n", dir.c_str());
  const BenchResult res = run_bench(corpus, cfg);
  const std::string csv = to_csv(res.rows);
  write_file(out_path, csv);
  std::fputs(csv.c_str(), stdout);
  for (const std::string& m : res.missed)
    std::fprintf(stderr, "missed: %s\n", m.c_str());
  return res.missed.empty() ? 0 : 1;
}

int cmd_interpret(const std::string& file, const std::vector<std::uint32_t>& inputs,
                  int width, const std::string& entry) {
  const Program prog = parse_program(read_file(file));
  const InterpResult r = interpret(prog, inputs, width, entry);
  for (std::uint32_t v : r.outputs) std::printf("%u\n", v);
  switch (r.stop) {
    case InterpResult::Stop::Halt:
      std::printf("halted after %llu steps\n", (unsigned long long)r.steps);
      break;
    case InterpResult::Stop::Return:
      std::printf("returned %u after %llu steps\n", r.regs[kRegRv],
                  (unsigned long long)r.steps);
      break;
    case InterpResult::Stop::Fault:
      std::printf("faulted: %s\n", r.fault_reason.c_str());
      break;
    case InterpResult::Stop::StepLimit:
      std::printf("step limit reached\n");
      break;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"compositional symbolic execution for the register IR"};
  app.require_subcommand(1);

  RunArgs ra;
  CLI::App* run = app.add_subcommand("run", "explore a program symbolically");
  run->add_option("file", ra.file, "IR source file")->required();
  run->add_option("--engine", ra.engine, "baseline or summary")
      ->check(CLI::IsMember({"baseline", "summary"}));
  run->add_flag("--outline", ra.outline, "rewrite nested loops into calls first");
  run->add_option("--width", ra.width, "bit width")
      ->check(CLI::IsMember({8, 16, 32}));
  run->add_option("--loop-limit", ra.loop_limit, "back-edge traversal bound");
  run->add_option("--max-states", ra.max_states, "state creation budget");
  run->add_option("--budget", ra.budget, "solver enumeration steps per query");
  run->add_option("--search", ra.search, "exploration order")
      ->check(CLI::IsMember({"bfs", "dfs"}));
  run->add_option("--report", ra.report_path, "write a JSON bug report");
  run->add_option("--cache", ra.cache_dir, "summary cache directory");
  run->add_option("--emit-ir", ra.emit_ir,
                  "write the program the engine actually ran ('-' = stdout)");

  std::string sm_file, sm_fn, sm_cache;
  int sm_width = 16, sm_loop = 32;
  CLI::App* sm = app.add_subcommand("summarize", "print a function summary");
  sm->add_option("file", sm_file, "IR source file")->required();
  sm->add_option("--function", sm_fn, "function to summarize")->required();
  sm->add_option("--cache", sm_cache, "summary cache directory");
  sm->add_option("--width", sm_width, "bit width")
      ->check(CLI::IsMember({8, 16, 32}));
  sm->add_option("--loop-limit", sm_loop, "back-edge traversal bound");

  std::string gen_family;
  int gen_depth = 1, gen_iters = 8;
  bool gen_bug = false;
  std::string gen_out = "-";
  CLI::App* gen = app.add_subcommand("gen", "emit a generated program");
  gen->add_option("family", gen_family, "generator family (nested)")
      ->required()
      ->check(CLI::IsMember({"nested"}));
  gen->add_option("--depth", gen_depth, "loop nesting depth")
      ->check(CLI::Range(1, 6));
  gen->add_option("--iters", gen_iters, "iterations per loop")
      ->check(CLI::PositiveNumber);
  gen->add_flag("--with-bug", gen_bug, "append an input-steered indirect jump");
  gen->add_option("-o,--out", gen_out, "output file ('-' = stdout)");

  std::string b_dir, b_out = "results.csv";
  int b_repeat = 3, b_jobs = 1, b_width = 16, b_loop = 32;
  double b_timeout = 300;
  CLI::App* bench = app.add_subcommand("bench", "compare engines over a corpus");
  bench->add_option("dir", b_dir, "corpus directory")->required();
  bench->add_option("--out", b_out, "CSV output path");
  bench->add_option("--repeat", b_repeat, "runs per row (median wall time)")
      ->check(CLI::PositiveNumber);
  bench->add_option("--timeout", b_timeout, "per-run wall deadline, seconds");
  bench->add_option("--jobs", b_jobs, "worker threads")
      ->check(CLI::PositiveNumber);
  bench->add_option("--width", b_width, "bit width")
      ->check(CLI::IsMember({8, 16, 32}));
  bench->add_option("--loop-limit", b_loop, "back-edge traversal bound");

  std::string i_file, i_entry = "main";
  std::vector<std::uint32_t> i_inputs;
  int i_width = 16;
  CLI::App* interp = app.add_subcommand("interpret", "run a program concretely");
  interp->add_option("file", i_file, "IR source file")->required();
  interp->add_option("--inputs", i_inputs, "comma-separated input values")
      ->delimiter(',');
  interp->add_option("--width", i_width, "bit width")
      ->check(CLI::IsMember({8, 16, 32}));
  interp->add_option("--entry", i_entry, "entry function");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return cmd_run(ra);
    if (sm->parsed())
      return cmd_summarize(sm_file, sm_fn, sm_cache, sm_width, sm_loop);
    if (gen->parsed()) {
      GenSpec spec;
      spec.depth = gen_depth;
      spec.iters = gen_iters;
      spec.with_bug = gen_bug;
      write_file(gen_out, gen_nested_loops(spec));
      return 0;
    }
    if (bench->parsed())
      return cmd_bench(b_dir, b_out, b_repeat, b_timeout, b_jobs, b_width,
                       b_loop);
    if (interp->parsed()) return cmd_interpret(i_file, i_inputs, i_width, i_entry);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 2;
}
