#include "symsum/bench.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <thread>
#include <tuple>

#include "json.hpp"
#include "symsum/outline.hpp"
#include "symsum/summary.hpp"

namespace symsum {

Report run_engine(const Program& p, const std::string& engine,
                  const ExploreConfig& cfg) {
  if (engine == "baseline") return explore(p, cfg);
  if (engine == "summary") return run_compositional(p, cfg);
  if (engine == "summary+outline")
    return run_compositional(outline_program(p).program, cfg);
  throw std::invalid_argument("unknown engine: " + engine);
}

namespace {

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : (v[n / 2 - 1] + v[n / 2]) / 2.0;
}

}  // namespace

BenchResult run_bench(const std::vector<BenchProgram>& corpus,
                      const BenchConfig& cfg) {
  struct Job {
    const BenchProgram* prog;
    const std::string* engine;
  };
  std::vector<Job> jobs;
  for (const BenchProgram& bp : corpus)
    for (const std::string& e : cfg.engines) jobs.push_back({&bp, &e});

  BenchResult out;
  out.rows.resize(jobs.size());
  std::vector<std::vector<std::string>> missed(jobs.size());

  std::atomic<std::size_t> cursor{0};
  auto worker = [&] {
    for (;;) {
      const std::size_t i = cursor.fetch_add(1);
      if (i >= jobs.size()) return;
      const Job& job = jobs[i];

      ExploreConfig ec;
      ec.loop_limit = cfg.loop_limit;
      ec.max_states = cfg.max_states;
      ec.solver.width = cfg.width;

      Report rep;
      std::vector<double> walls;
      const int repeat = std::max(1, cfg.repeat);
      for (int r = 0; r < repeat && !rep.timed_out; ++r) {
        ExploreConfig run_cfg = ec;
        if (cfg.timeout_s > 0)
          run_cfg.deadline =
              std::chrono::steady_clock::now() +
              std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                  std::chrono::duration<double>(cfg.timeout_s));
        const auto t0 = std::chrono::steady_clock::now();
        Report got = run_engine(job.prog->program, *job.engine, run_cfg);
        walls.push_back(std::chrono::duration<double, std::milli>(
                            std::chrono::steady_clock::now() - t0)
                            .count());
        if (r == 0) rep = std::move(got);
      }

      BenchRow row;
      row.name = job.prog->name;
      row.engine = *job.engine;
      row.width = cfg.width;
      row.loop_limit = cfg.loop_limit;
      row.states_explored = rep.metrics.states_explored;
      row.paths_completed = rep.metrics.paths_completed;
      row.sat_queries = rep.metrics.sat_queries;
      row.unknown_verdicts = rep.metrics.unknown_verdicts;
      std::set<std::string> kinds;
      for (const BugReport& b : rep.bugs) kinds.insert(bug_kind_name(b.kind));
      row.bugs.assign(kinds.begin(), kinds.end());
      row.wall_ms = median(walls);
      row.status =
          rep.timed_out ? "timeout" : rep.incomplete ? "incomplete" : "ok";

      for (const ExpectedBug& exp : job.prog->expected) {
        const bool found = std::any_of(
            rep.bugs.begin(), rep.bugs.end(), [&](const BugReport& b) {
              return exp.kind == bug_kind_name(b.kind) &&
                     exp.function == b.function;
            });
        if (!found)
          missed[i].push_back(job.prog->name + "/" + *job.engine +
                              ": expected " + exp.kind + " in " +
                              exp.function);
      }
      out.rows[i] = std::move(row);
    }
  };

  const std::size_t n_workers =
      std::min<std::size_t>(std::size_t(std::max(1, cfg.jobs)), jobs.size());
  if (n_workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(n_workers);
    for (std::size_t t = 0; t < n_workers; ++t) pool.emplace_back(worker);
    for (std::thread& th : pool) th.join();
  }

  std::sort(out.rows.begin(), out.rows.end(),
            [](const BenchRow& a, const BenchRow& b) {
              return std::tie(a.name, a.engine) < std::tie(b.name, b.engine);
            });
  for (std::vector<std::string>& m : missed)
    out.missed.insert(out.missed.end(), m.begin(), m.end());
  return out;
}

std::string to_csv(const std::vector<BenchRow>& rows) {
  std::ostringstream os;
  os << "name,engine,width,loop_limit,states_explored,paths_completed,"
        "sat_queries,unknown_verdicts,bugs,wall_ms,status\n";
  for (const BenchRow& r : rows) {
    char wall[32];
    std::snprintf(wall, sizeof wall, "%.3f", r.wall_ms);
    os << r.name << ',' << r.engine << ',' << r.width << ',' << r.loop_limit
       << ',' << r.states_explored << ',' << r.paths_completed << ','
       << r.sat_queries << ',' << r.unknown_verdicts << ',';
    for (std::size_t i = 0; i < r.bugs.size(); ++i) {
      if (i) os << '|';
      os << r.bugs[i];
    }
    os << ',' << wall << ',' << r.status << '\n';
  }
  return os.str();
}

std::vector<BenchProgram> load_corpus(const std::string& dir) {
  namespace fs = std::filesystem;
  std::vector<fs::path> files;
  for (const fs::directory_entry& ent : fs::directory_iterator(dir))
    if (ent.is_regular_file() && ent.path().extension() == ".ir")
      files.push_back(ent.path());
  std::sort(files.begin(), files.end());

  std::vector<BenchProgram> corpus;
  corpus.reserve(files.size());
  for (const fs::path& f : files) {
    BenchProgram bp;
    bp.name = f.stem().string();
    std::ifstream in(f);
    std::ostringstream text;
    text << in.rdbuf();
    bp.program = parse_program(text.str());

    fs::path side = f;
    side.replace_extension(".expect.json");
    if (fs::exists(side)) {
      std::ifstream js(side);
      const nlohmann::json j = nlohmann::json::parse(js);
      for (const nlohmann::json& b : j.value("bugs", nlohmann::json::array()))
        bp.expected.push_back({b.at("kind").get<std::string>(),
                               b.at("function").get<std::string>()});
    }
    corpus.push_back(std::move(bp));
  }
  return corpus;
}

}  // namespace symsum
