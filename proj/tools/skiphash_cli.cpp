// skiphash: benchmark and verification front end.
//
//   skiphash bench  [workload flags]      run workloads, print or write CSV
//   skiphash record --out DIR             record concurrent histories
//   skiphash verify --histories DIR       check recorded histories offline
//
// Every bench flag can also be set through SKIPHASH_<FLAG> in the
// environment (e.g. SKIPHASH_THREADS=4, SKIPHASH_RANGE_LEN=100). Command
// line values win.

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "skiphash/bench/workload.hpp"
#include "skiphash/verify/history.hpp"
#include "skiphash/verify/linearizability.hpp"

namespace fs = std::filesystem;
using namespace skiphash;

namespace {

struct bench_args {
  std::vector<unsigned> threads{1};
  double duration_s = 1.0;
  std::uint64_t ops = 0;
  std::int64_t universe = std::int64_t{1} << 16;
  std::uint64_t prefill = std::uint64_t{1} << 15;
  std::vector<std::string> mixes{"80:10:10:0"};
  std::vector<std::int64_t> range_lens{100};
  std::vector<std::string> modes{"two_path"};
  unsigned fast_path_tries = 3;
  std::uint64_t seed = 1;
  std::size_t buckets = 0;
  unsigned max_level = 20;
  std::string csv;
  bool pin = false;
  unsigned trials = 3;
};

int run_bench(const bench_args& a) {
  std::vector<op_mix> mixes;
  for (const auto& m : a.mixes) {
    auto parsed = op_mix::parse(m);
    if (!parsed || !parsed->valid()) {
      std::cerr << "error: --mix '" << m << "' must be l:i:r:q or l:u:q summing to 100\n";
      return 2;
    }
    mixes.push_back(*parsed);
  }
  std::vector<range_mode> modes;
  for (const auto& m : a.modes) {
    auto parsed = parse_range_mode(m);
    if (!parsed) {
      std::cerr << "error: --mode '" << m << "' must be fast_only, slow_only or two_path\n";
      return 2;
    }
    modes.push_back(*parsed);
  }

  std::vector<bench::run_report> reports;
  for (unsigned t : a.threads)
    for (const auto& mix : mixes)
      for (auto len : a.range_lens)
        for (auto mode : modes) {
          bench::workload_config cfg;
          cfg.threads = t;
          cfg.duration_s = a.duration_s;
          cfg.ops = a.ops;
          cfg.universe = a.universe;
          cfg.prefill = a.prefill;
          cfg.mix = mix;
          cfg.range_len = len;
          cfg.mode = mode;
          cfg.fast_path_tries = a.fast_path_tries;
          cfg.seed = a.seed;
          cfg.bucket_count = a.buckets;
          cfg.max_level = a.max_level;
          cfg.pin = a.pin;
          for (unsigned trial = 0; trial < a.trials; ++trial) {
            reports.push_back(bench::run(cfg, trial));
            std::cerr << bench::csv_row(reports.back()) << '\n';
          }
        }

  if (a.csv.empty() || a.csv == "-")
    bench::emit_csv(reports, std::cout);
  else
    bench::emit_csv(reports, fs::path{a.csv});
  return 0;
}

struct record_args {
  std::string out;
  unsigned count = 10;
  verify::record_config cfg;
  std::string mix = "25:25:25:25";
};

int run_record(record_args a) {
  auto mix = op_mix::parse(a.mix);
  if (!mix || !mix->valid()) {
    std::cerr << "error: bad --mix '" << a.mix << "'\n";
    return 2;
  }
  a.cfg.mix = *mix;
  a.cfg.map.bucket_count = 31;
  fs::create_directories(a.out);
  const auto base = a.cfg.seed;
  for (unsigned i = 0; i < a.count; ++i) {
    a.cfg.seed = base + i;
    auto h = verify::record_history(a.cfg);
    auto path = fs::path{a.out} / ("history_" + std::to_string(a.cfg.seed) + ".txt");
    std::ofstream f{path};
    verify::write_history(f, h);
    if (!f) {
      std::cerr << "error: cannot write " << path << '\n';
      return 1;
    }
  }
  std::cout << "wrote " << a.count << " histories to " << a.out << '\n';
  return 0;
}

int run_verify(const std::string& dir, std::size_t node_limit) {
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator{dir})
    if (e.is_regular_file()) files.push_back(e.path());
  std::sort(files.begin(), files.end());
  if (files.empty()) {
    std::cerr << "error: no history files in " << dir << '\n';
    return 2;
  }
  unsigned bad = 0;
  for (const auto& p : files) {
    try {
      auto h = verify::read_history_file(p);
      auto r = verify::check_linearizable(h, {node_limit});
      bool ok = verify::is_linearizable(r);
      if (!ok) ++bad;
      std::cout << (ok ? "ok   " : "FAIL ") << p.filename().string() << " (" << h.size() << " events)";
      if (!ok) std::cout << "\n" << verify::describe(h, r);
      std::cout << '\n';
    } catch (const std::exception& ex) {
      ++bad;
      std::cout << "FAIL " << p.filename().string() << ": " << ex.what() << '\n';
    }
  }
  std::cout << files.size() - bad << "/" << files.size() << " linearizable\n";
  return bad ? 1 : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"skip hash benchmark and verification tool"};
  app.require_subcommand(1);

  bench_args b;
  auto* bench_cmd = app.add_subcommand("bench", "run workloads and emit CSV");
  bench_cmd->add_option("--threads", b.threads, "worker threads (comma list sweeps)")
      ->delimiter(',')
      ->envname("SKIPHASH_THREADS");
  bench_cmd->add_option("--duration-s", b.duration_s, "seconds per trial")->envname("SKIPHASH_DURATION_S");
  bench_cmd->add_option("--ops", b.ops, "operations per thread; overrides --duration-s")->envname("SKIPHASH_OPS");
  bench_cmd->add_option("--universe", b.universe, "key universe size")->envname("SKIPHASH_UNIVERSE");
  bench_cmd->add_option("--prefill", b.prefill, "distinct keys inserted before the run")->envname("SKIPHASH_PREFILL");
  bench_cmd->add_option("--mix", b.mixes, "l:i:r:q or l:u:q percentages (comma list sweeps)")
      ->delimiter(',')
      ->envname("SKIPHASH_MIX");
  bench_cmd->add_option("--range-len", b.range_lens, "r - l for range queries (comma list sweeps)")
      ->delimiter(',')
      ->envname("SKIPHASH_RANGE_LEN");
  bench_cmd->add_option("--mode", b.modes, "fast_only, slow_only, two_path (comma list sweeps)")
      ->delimiter(',')
      ->envname("SKIPHASH_MODE");
  bench_cmd->add_option("--fast-path-tries", b.fast_path_tries, "fast-path attempts before the slow path")
      ->envname("SKIPHASH_FAST_PATH_TRIES");
  bench_cmd->add_option("--seed", b.seed, "base RNG seed")->envname("SKIPHASH_SEED");
  bench_cmd->add_option("--buckets", b.buckets, "hash buckets; 0 sizes for the prefill")->envname("SKIPHASH_BUCKETS");
  bench_cmd->add_option("--max-level", b.max_level, "skip list height cap")->envname("SKIPHASH_MAX_LEVEL");
  bench_cmd->add_option("--csv", b.csv, "output path; stdout when omitted")->envname("SKIPHASH_CSV");
  bench_cmd->add_flag("--pin", b.pin, "pin worker i to core i mod cores")->envname("SKIPHASH_PIN");
  bench_cmd->add_option("--trials", b.trials, "trials per configuration")->envname("SKIPHASH_TRIALS");

  record_args r;
  auto* record_cmd = app.add_subcommand("record", "record concurrent histories from the real map");
  record_cmd->add_option("--out", r.out, "output directory")->required();
  record_cmd->add_option("--count", r.count, "number of histories");
  record_cmd->add_option("--threads", r.cfg.threads, "threads per history");
  record_cmd->add_option("--ops", r.cfg.ops_per_thread, "operations per thread");
  record_cmd->add_option("--universe", r.cfg.universe, "key universe size");
  record_cmd->add_option("--mix", r.mix, "l:i:r:q percentages");
  record_cmd->add_option("--range-len", r.cfg.range_len, "r - l for range queries");
  record_cmd->add_flag("--point-queries", r.cfg.point_queries, "replace part of the lookups by ceil/floor/succ/pred");
  record_cmd->add_option("--seed", r.cfg.seed, "seed of the first history");

  std::string dir;
  std::size_t node_limit = verify::check_options{}.node_limit;
  auto* verify_cmd = app.add_subcommand("verify", "check recorded histories for linearizability");
  verify_cmd->add_option("--histories", dir, "directory of history files")->required()->check(CLI::ExistingDirectory);
  verify_cmd->add_option("--node-limit", node_limit, "search budget per history");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*bench_cmd) return run_bench(b);
    if (*record_cmd) return run_record(r);
    if (*verify_cmd) return run_verify(dir, node_limit);
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << '\n';
    return 1;
  }
  return 0;
}
