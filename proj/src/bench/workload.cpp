#include "skiphash/bench/workload.hpp"

#include <atomic>
#include <barrier>
#include <chrono>
#include <cmath>
#include <random>
#include <thread>

#if defined(__linux__)
#include <pthread.h>
#include <sched.h>
#endif

namespace skiphash::bench {

namespace {

using map_t = skip_hash<std::int64_t, std::int64_t>;

struct worker_result {
  std::array<op_counters, op_kind_count> per_op{};
  std::uint64_t range_entries = 0;
  skip_hash_stats stats;
  std::chrono::steady_clock::time_point start, end;
};

void pin_to_core(unsigned tid) {
#if defined(__linux__)
  unsigned cores = std::max(1u, std::thread::hardware_concurrency());
  cpu_set_t set;
  CPU_ZERO(&set);
  CPU_SET(tid % cores, &set);
  pthread_setaffinity_np(pthread_self(), sizeof(set), &set);
#else
  (void)tid;
#endif
}

void prefill(map_t& m, const workload_config& cfg) {
  auto s = m.open_session(cfg.seed ^ 0x5eed5eed5eedULL);
  std::mt19937_64 rng{cfg.seed ^ 0xf111f111ULL};
  std::uniform_int_distribution<std::int64_t> key{0, cfg.universe - 1};
  std::uniform_int_distribution<std::int64_t> val{0, 1'000'000};
  for (std::uint64_t have = 0; have < cfg.prefill;)
    if (s.insert(key(rng), val(rng))) ++have;
}

}  // namespace

void validate(const workload_config& cfg) {
  std::string bad;
  auto fail = [&](const char* field, const std::string& why) {
    if (!bad.empty()) bad += "; ";
    bad += std::string(field) + ": " + why;
  };
  if (cfg.threads == 0) fail("threads", "must be at least 1");
  if (!(cfg.duration_s >= 0) || !std::isfinite(cfg.duration_s)) fail("duration_s", "must be a finite value >= 0");
  if (cfg.universe <= 0) fail("universe", "must be positive");
  if (cfg.universe > 0 && cfg.prefill > static_cast<std::uint64_t>(cfg.universe))
    fail("prefill", "exceeds universe");
  if (!cfg.mix.valid()) fail("mix", "percentages sum to " + std::to_string(cfg.mix.total()) + ", not 100");
  if (cfg.range_len < 0) fail("range_len", "must be >= 0");
  if (cfg.max_level == 0 || cfg.max_level > max_supported_level) fail("max_level", "must be in [1, 64]");
  if (!bad.empty()) throw config_error("invalid workload: " + bad);
}

run_report run(const workload_config& cfg, unsigned trial) {
  validate(cfg);
  skip_hash_config mc;
  mc.bucket_count = cfg.bucket_count ? cfg.bucket_count : buckets_for(std::max<std::uint64_t>(cfg.prefill, 1));
  mc.max_level = cfg.max_level;
  mc.fast_path_tries = cfg.fast_path_tries;
  mc.mode = cfg.mode;
  map_t map{mc};
  prefill(map, cfg);

  run_report rep;
  rep.config = cfg;
  rep.trial = trial;
  rep.population_before = map.size_direct();

  const bool timed = cfg.ops == 0;
  std::atomic<bool> stop{timed && cfg.duration_s <= 0};
  std::vector<worker_result> results(cfg.threads);
  std::barrier sync{static_cast<std::ptrdiff_t>(cfg.threads) + 1};

  std::vector<std::thread> workers;
  workers.reserve(cfg.threads);
  for (unsigned t = 0; t < cfg.threads; ++t) {
    workers.emplace_back([&, t] {
      if (cfg.pin) pin_to_core(t);
      const std::uint64_t seed = cfg.seed + t + std::uint64_t{trial} * 7919;
      std::mt19937_64 rng{seed};
      std::uniform_int_distribution<std::int64_t> key{0, cfg.universe - 1};
      std::uniform_int_distribution<std::int64_t> val{0, 1'000'000};
      auto& out = results[t];
      std::vector<map_t::entry> buf;
      {
        auto s = map.open_session(seed * 0x9e3779b97f4a7c15ULL);
        sync.arrive_and_wait();
        out.start = std::chrono::steady_clock::now();
        for (std::uint64_t i = 0; timed ? !stop.load(std::memory_order_relaxed) : i < cfg.ops; ++i) {
          op_kind k = cfg.mix.draw(rng);
          std::int64_t a = key(rng);
          auto& c = out.per_op[static_cast<std::size_t>(k)];
          bool ok = true;
          switch (k) {
            case op_kind::lookup: ok = s.lookup(a).has_value(); break;
            case op_kind::insert: ok = s.insert(a, val(rng)); break;
            case op_kind::remove: ok = s.remove(a); break;
            case op_kind::range: out.range_entries += s.range(a, a + cfg.range_len, buf); break;
            default: break;
          }
          ++c.completed;
          if (!ok) ++c.failed;
        }
        s.flush();
        out.end = std::chrono::steady_clock::now();
        out.stats = s.stats();
      }
      sync.arrive_and_wait();
    });
  }

  sync.arrive_and_wait();
  if (timed && cfg.duration_s > 0) {
    std::this_thread::sleep_for(std::chrono::duration<double>(cfg.duration_s));
    stop.store(true);
  }
  sync.arrive_and_wait();
  for (auto& w : workers) w.join();
  // Workers stamp their own interval; the main thread may be descheduled
  // across the barriers.
  auto t0 = results.front().start, t1 = results.front().end;

  for (const auto& r : results) {
    t0 = std::min(t0, r.start);
    t1 = std::max(t1, r.end);
    for (std::size_t i = 0; i < op_kind_count; ++i) {
      rep.per_op[i].completed += r.per_op[i].completed;
      rep.per_op[i].failed += r.per_op[i].failed;
      rep.per_op[i].aborts += r.stats.aborts_by_op[i];
    }
    rep.range_entries += r.range_entries;
    rep.slow_path_entries += r.stats.slow_path_entries;
    rep.fast_path_failures += r.stats.fast_path_failures;
    rep.aborts += r.stats.aborts();
  }
  for (const auto& c : rep.per_op) rep.ops_total += c.completed;
  rep.population_after = map.size_direct();
  rep.wall_time_s = rep.ops_total ? std::chrono::duration<double>(t1 - t0).count() : 0.0;
  if (rep.wall_time_s > 0) {
    rep.ops_per_s = static_cast<double>(rep.ops_total) / rep.wall_time_s;
    rep.range_entries_per_s = static_cast<double>(rep.range_entries) / rep.wall_time_s;
  }
  return rep;
}

}  // namespace skiphash::bench
