#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <string_view>

#include "skiphash/bench/workload.hpp"

namespace skiphash::bench {

namespace {

std::string fixed(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::fixed, 3);
  if (ec != std::errc{}) return "0";
  return {buf, end};
}

std::vector<std::string_view> fields(std::string_view line) {
  std::vector<std::string_view> out;
  for (;;) {
    auto pos = line.find(',');
    out.push_back(line.substr(0, pos));
    if (pos == std::string_view::npos) return out;
    line.remove_prefix(pos + 1);
  }
}

template <class T>
T number(std::string_view s, const char* name) {
  T v{};
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc{} || p != s.data() + s.size())
    throw std::invalid_argument(std::string("csv: bad ") + name + " '" + std::string(s) + "'");
  return v;
}

}  // namespace

std::string csv_row(const run_report& r) {
  const auto& c = r.config;
  std::string s;
  s += std::to_string(c.threads) + ',';
  s += fixed(c.ops ? r.wall_time_s : c.duration_s) + ',';
  s += c.mix.str() + ',';
  s += std::to_string(c.range_len) + ',';
  s += std::string(to_string(c.mode)) + ',';
  s += std::to_string(r.ops_total) + ',';
  s += fixed(r.ops_per_s) + ',';
  s += fixed(r.range_entries_per_s) + ',';
  s += std::to_string(r.aborts) + ',';
  s += std::to_string(r.slow_path_entries) + ',';
  s += std::to_string(c.seed);
  return s;
}

void emit_csv(const std::vector<run_report>& reports, std::ostream& os) {
  os << csv_header << '\n';
  for (const auto& r : reports) os << csv_row(r) << '\n';
  if (!os) throw std::runtime_error("csv: write failed");
}

void emit_csv(const std::vector<run_report>& reports, const std::filesystem::path& p) {
  std::ofstream out{p};
  if (!out) throw std::runtime_error("csv: cannot open " + p.string());
  emit_csv(reports, out);
  out.flush();
  if (!out) throw std::runtime_error("csv: write failed for " + p.string());
}

std::vector<csv_record> parse_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line != csv_header) throw std::invalid_argument("csv: missing or unexpected header");
  std::vector<csv_record> out;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    auto f = fields(line);
    if (f.size() != 11) throw std::invalid_argument("csv: expected 11 fields, got " + std::to_string(f.size()));
    csv_record r;
    r.threads = number<unsigned>(f[0], "threads");
    r.duration_s = number<double>(f[1], "duration_s");
    auto mix = op_mix::parse(f[2]);
    if (!mix) throw std::invalid_argument("csv: bad mix '" + std::string(f[2]) + "'");
    r.mix = *mix;
    r.range_len = number<std::int64_t>(f[3], "range_len");
    auto mode = parse_range_mode(f[4]);
    if (!mode) throw std::invalid_argument("csv: bad mode '" + std::string(f[4]) + "'");
    r.mode = *mode;
    r.ops_total = number<std::uint64_t>(f[5], "ops_total");
    r.ops_per_s = number<double>(f[6], "ops_per_s");
    r.range_entries_per_s = number<double>(f[7], "range_entries_per_s");
    r.aborts = number<std::uint64_t>(f[8], "aborts");
    r.slow_path_entries = number<std::uint64_t>(f[9], "slow_path_entries");
    r.seed = number<std::uint64_t>(f[10], "seed");
    out.push_back(r);
  }
  return out;
}

}  // namespace skiphash::bench
