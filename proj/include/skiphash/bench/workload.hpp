#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "skiphash/op_mix.hpp"
#include "skiphash/skip_hash.hpp"

namespace skiphash::bench {

struct workload_config {
  unsigned threads = 1;
  double duration_s = 1.0;
  /// Operations per thread. Nonzero selects op-count mode and ignores
  /// duration_s.
  std::uint64_t ops = 0;
  std::int64_t universe = std::int64_t{1} << 16;
  std::uint64_t prefill = std::uint64_t{1} << 15;
  op_mix mix{80, 10, 10, 0};
  std::int64_t range_len = 100;
  range_mode mode = range_mode::two_path;
  unsigned fast_path_tries = 3;
  std::uint64_t seed = 1;
  /// 0 sizes the table for the prefill population.
  std::size_t bucket_count = 0;
  unsigned max_level = 20;
  bool pin = false;
};

/// Validation failure; the message names every offending field.
struct config_error : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

void validate(const workload_config& cfg);

struct op_counters {
  std::uint64_t completed = 0;
  /// Semantic failures: lookup miss, insert of a present key, remove of an
  /// absent key.
  std::uint64_t failed = 0;
  std::uint64_t aborts = 0;

  friend bool operator==(const op_counters&, const op_counters&) = default;
};

struct run_report {
  workload_config config;
  unsigned trial = 0;
  std::array<op_counters, op_kind_count> per_op{};
  std::uint64_t ops_total = 0;
  std::uint64_t range_entries = 0;
  std::uint64_t aborts = 0;
  std::uint64_t slow_path_entries = 0;
  std::uint64_t fast_path_failures = 0;
  std::size_t population_before = 0;
  std::size_t population_after = 0;
  double wall_time_s = 0;
  double ops_per_s = 0;
  double range_entries_per_s = 0;

  const op_counters& of(op_kind k) const { return per_op[static_cast<std::size_t>(k)]; }
};

/// Prefill, run the workers, aggregate their exact counters. Trial t seeds
/// worker i with seed + i + t * 7919.
run_report run(const workload_config& cfg, unsigned trial = 0);

inline constexpr const char* csv_header =
    "threads,duration_s,mix,range_len,mode,ops_total,ops_per_s,range_entries_per_s,aborts,slow_path_entries,seed";

std::string csv_row(const run_report& r);
void emit_csv(const std::vector<run_report>& reports, std::ostream& os);
/// Throws std::runtime_error if the file cannot be written.
void emit_csv(const std::vector<run_report>& reports, const std::filesystem::path& p);

/// Parsed form of one data row, for round-trip checks and downstream tools.
struct csv_record {
  unsigned threads = 0;
  double duration_s = 0;
  op_mix mix;
  std::int64_t range_len = 0;
  range_mode mode = range_mode::two_path;
  std::uint64_t ops_total = 0;
  double ops_per_s = 0;
  double range_entries_per_s = 0;
  std::uint64_t aborts = 0;
  std::uint64_t slow_path_entries = 0;
  std::uint64_t seed = 0;
};

/// Reads a header line followed by data rows. Throws std::invalid_argument.
std::vector<csv_record> parse_csv(std::istream& is);

}  // namespace skiphash::bench
