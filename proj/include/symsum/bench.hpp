#pragma once

// Engine comparison harness: runs every engine over every corpus program,
// collects one row per (program, engine) pair, and renders a deterministic
// CSV whose only run-dependent column is wall_ms.

#include <cstdint>
#include <string>
#include <vector>

#include "symsum/engine.hpp"

namespace symsum {

// A (kind, function) pair a corpus program is known to contain.
struct ExpectedBug {
  std::string kind;
  std::string function;
};

struct BenchProgram {
  std::string name;
  Program program;
  std::vector<ExpectedBug> expected;
};

struct BenchRow {
  std::string name;
  std::string engine;  // baseline | summary | summary+outline
  int width = 16;
  int loop_limit = 32;
  std::uint64_t states_explored = 0;
  std::uint64_t paths_completed = 0;
  std::uint64_t sat_queries = 0;
  std::uint64_t unknown_verdicts = 0;
  std::vector<std::string> bugs;  // distinct kind names, sorted
  double wall_ms = 0.0;           // median over repeats
  std::string status;             // ok | incomplete | timeout
};

struct BenchConfig {
  std::vector<std::string> engines{"baseline", "summary", "summary+outline"};
  int width = 16;
  int loop_limit = 32;
  std::uint64_t max_states = 10000;
  int repeat = 3;          // runs per row; wall_ms is the median
  double timeout_s = 300;  // per-run wall deadline; <= 0 disables
  int jobs = 1;            // worker threads over (program, engine) pairs
};

struct BenchResult {
  std::vector<BenchRow> rows;       // sorted by (name, engine)
  std::vector<std::string> missed;  // expected bugs absent from some engine
};

// Runs each engine on each program. Metrics come from the first run of a
// pair (they are deterministic); wall_ms is the median over `repeat` runs.
// A run that hits the deadline is not repeated.
BenchResult run_bench(const std::vector<BenchProgram>& corpus,
                      const BenchConfig& cfg);

// Header plus one line per row, columns in BenchRow field order with a
// trailing status column; bug kinds joined by '|'.
std::string to_csv(const std::vector<BenchRow>& rows);

// Reads every *.ir file under dir (sorted by filename). A sidecar
// <stem>.expect.json may list expected bugs: {"bugs":[{"kind":K,"function":F}]}.
std::vector<BenchProgram> load_corpus(const std::string& dir);

// Runs `fn` with one engine selected by name; "summary+outline" rewrites
// nested loops into calls first. Throws std::invalid_argument on an unknown
// engine name.
Report run_engine(const Program& p, const std::string& engine,
                  const ExploreConfig& cfg);

}  // namespace symsum
