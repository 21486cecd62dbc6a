#include "skiphash/verify/history.hpp"

#include <algorithm>
#include <barrier>
#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <thread>

namespace skiphash::verify {

namespace {

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  for (;;) {
    auto pos = s.find(sep);
    out.push_back(s.substr(0, pos));
    if (pos == std::string_view::npos) return out;
    s.remove_prefix(pos + 1);
  }
}

template <class Int>
Int parse_int(std::string_view s, const char* what) {
  Int v{};
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size() || s.empty())
    throw std::invalid_argument(std::string("history: bad ") + what + " '" + std::string(s) + "'");
  return v;
}

outcome parse_result(op_kind kind, std::string_view s) {
  switch (kind) {
    case op_kind::insert:
    case op_kind::remove:
      if (s == "true") return true;
      if (s == "false") return false;
      throw std::invalid_argument("history: bad boolean result '" + std::string(s) + "'");
    case op_kind::range: {
      if (s.size() < 2 || s.front() != '{' || s.back() != '}')
        throw std::invalid_argument("history: bad range result '" + std::string(s) + "'");
      s = s.substr(1, s.size() - 2);
      range_entries out;
      if (s.empty()) return out;
      for (auto pair : split(s, ';')) {
        auto kv = split(pair, ':');
        if (kv.size() != 2) throw std::invalid_argument("history: bad range pair '" + std::string(pair) + "'");
        out.emplace_back(parse_int<map_key>(kv[0], "key"), parse_int<map_value>(kv[1], "value"));
      }
      return out;
    }
    default:
      if (s == "none") return std::optional<std::int64_t>{};
      return std::optional<std::int64_t>{parse_int<std::int64_t>(s, "result")};
  }
}

bool has_second_arg(op_kind k) { return k == op_kind::insert || k == op_kind::range; }

}  // namespace

history history_recorder::merge() const {
  history h;
  for (const auto& l : logs_) h.insert(h.end(), l.begin(), l.end());
  std::stable_sort(h.begin(), h.end(), [](const event& a, const event& b) { return a.t_invoke < b.t_invoke; });
  return h;
}

std::string format_event(const event& e) {
  std::string s = std::to_string(e.thread) + ',' + to_string(e.op.kind) + ',' + std::to_string(e.op.a);
  if (has_second_arg(e.op.kind)) s += ',' + std::to_string(e.op.b);
  s += ',' + std::to_string(e.t_invoke) + ',' + std::to_string(e.t_response) + ',' + to_string(e.result);
  return s;
}

event parse_event(std::string_view line) {
  auto f = split(line, ',');
  if (f.size() < 2) throw std::invalid_argument("history: too few fields");
  auto kind = parse_op_kind(f[1]);
  if (!kind) throw std::invalid_argument("history: unknown op '" + std::string(f[1]) + "'");
  std::size_t expected = has_second_arg(*kind) ? 7 : 6;
  if (f.size() != expected)
    throw std::invalid_argument("history: expected " + std::to_string(expected) + " fields for " + std::string(f[1]));
  event e;
  e.thread = parse_int<unsigned>(f[0], "thread");
  e.op.kind = *kind;
  e.op.a = parse_int<map_key>(f[2], "argument");
  std::size_t i = 3;
  if (has_second_arg(*kind)) e.op.b = parse_int<map_value>(f[i++], "argument");
  e.t_invoke = parse_int<std::uint64_t>(f[i++], "t_invoke");
  e.t_response = parse_int<std::uint64_t>(f[i++], "t_response");
  if (e.t_response < e.t_invoke) throw std::invalid_argument("history: response before invocation");
  e.result = parse_result(*kind, f[i]);
  return e;
}

void write_history(std::ostream& os, const history& h) {
  for (const auto& e : h) os << format_event(e) << '\n';
}

history read_history(std::istream& is) {
  history h;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    try {
      h.push_back(parse_event(line));
    } catch (const std::invalid_argument& ex) {
      throw std::invalid_argument("line " + std::to_string(lineno) + ": " + ex.what());
    }
  }
  return h;
}

history read_history_file(const std::filesystem::path& p) {
  std::ifstream in{p};
  if (!in) throw std::runtime_error("cannot open " + p.string());
  return read_history(in);
}

history record_history(const record_config& cfg) {
  int_map map{cfg.map};
  history_recorder rec{cfg.threads};
  std::barrier start{static_cast<std::ptrdiff_t>(cfg.threads)};
  std::vector<std::thread> workers;
  for (unsigned t = 0; t < cfg.threads; ++t) {
    workers.emplace_back([&, t] {
      auto s = map.open_session(cfg.seed * 1000 + t);
      std::mt19937_64 rng{cfg.seed * 7919 + t};
      auto& log = rec.log(t);
      log.reserve(cfg.ops_per_thread);
      start.arrive_and_wait();
      for (unsigned i = 0; i < cfg.ops_per_thread; ++i) {
        operation op = random_operation(rng, cfg.mix, cfg.universe, cfg.range_len, cfg.point_queries);
        event e;
        e.thread = t;
        e.op = op;
        e.t_invoke = history_recorder::now();
        e.result = apply(s, op);
        e.t_response = history_recorder::now();
        log.push_back(std::move(e));
      }
    });
  }
  for (auto& w : workers) w.join();
  return rec.merge();
}

}  // namespace skiphash::verify
