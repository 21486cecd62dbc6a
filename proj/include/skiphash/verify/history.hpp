#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "skiphash/verify/oracle.hpp"

namespace skiphash::verify {

/// One completed operation as observed by a client thread. Times are
/// nanoseconds of a monotonic clock.
struct event {
  unsigned thread = 0;
  operation op;
  std::uint64_t t_invoke = 0;
  std::uint64_t t_response = 0;
  outcome result;

  friend bool operator==(const event&, const event&) = default;
};

using history = std::vector<event>;

/// Per-thread append-only logs, merged after the threads are done.
class history_recorder {
 public:
  explicit history_recorder(unsigned threads) : logs_(threads) {}

  static std::uint64_t now() noexcept {
    return static_cast<std::uint64_t>(
        std::chrono::duration_cast<std::chrono::nanoseconds>(std::chrono::steady_clock::now().time_since_epoch())
            .count());
  }

  std::vector<event>& log(unsigned thread) { return logs_.at(thread); }

  /// All events ordered by invocation time.
  history merge() const;

 private:
  std::vector<std::vector<event>> logs_;
};

// Line format, one event per line:
//   thread,op,arg[,arg2],t_invoke,t_response,result
// arg2 is present for insert (value) and range (upper bound). result is
// true/false, an integer, "none", or "{k:v;k:v}" for range.

std::string format_event(const event& e);
/// Throws std::invalid_argument on malformed input.
event parse_event(std::string_view line);

void write_history(std::ostream& os, const history& h);
/// Skips blank lines and lines starting with '#'.
history read_history(std::istream& is);
history read_history_file(const std::filesystem::path& p);

struct record_config {
  unsigned threads = 4;
  unsigned ops_per_thread = 250;
  map_key universe = 16;
  op_mix mix{25, 25, 25, 25};
  map_key range_len = 4;
  bool point_queries = false;
  std::uint64_t seed = 1;
  skip_hash_config map;
};

/// Run random operations on a fresh skip hash from several threads and
/// record what each thread observed.
history record_history(const record_config& cfg);

}  // namespace skiphash::verify
