#include "skiphash/verify/linearizability.hpp"

#include <algorithm>
#include <functional>
#include <map>
#include <stdexcept>
#include <unordered_set>

namespace skiphash::verify {

namespace {

struct node {
  std::size_t event = 0;  // index into the history
  bool is_call = true;
  std::size_t match = 0;  // call <-> return node
  std::size_t prev = 0, next = 0;
};

constexpr std::size_t nil = static_cast<std::size_t>(-1);

struct config {
  std::vector<std::uint64_t> done;
  std::map<map_key, map_value> state;
  std::size_t hash = 0;

  friend bool operator==(const config& a, const config& b) { return a.done == b.done && a.state == b.state; }
};

struct config_hash {
  std::size_t operator()(const config& c) const noexcept { return c.hash; }
};

std::size_t mix(std::size_t h, std::uint64_t v) {
  v += 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
  v ^= v >> 31;
  v *= 0xbf58476d1ce4e5b9ULL;
  return h ^ static_cast<std::size_t>(v ^ (v >> 29));
}

std::size_t hash_of(const std::vector<std::uint64_t>& done, const std::map<map_key, map_value>& state) {
  std::size_t h = 0;
  for (auto w : done) h = mix(h, w);
  for (auto [k, v] : state) h = mix(mix(h, static_cast<std::uint64_t>(k)), static_cast<std::uint64_t>(v));
  return h;
}

void check_well_formed(const history& h) {
  std::map<unsigned, std::vector<std::size_t>> per_thread;
  for (std::size_t i = 0; i < h.size(); ++i) {
    if (h[i].t_response < h[i].t_invoke)
      throw std::invalid_argument("event " + std::to_string(i) + " responds before it is invoked");
    per_thread[h[i].thread].push_back(i);
  }
  for (auto& [t, idx] : per_thread) {
    std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return h[a].t_invoke < h[b].t_invoke; });
    for (std::size_t j = 1; j < idx.size(); ++j)
      if (h[idx[j]].t_invoke < h[idx[j - 1]].t_response)
        throw std::invalid_argument("thread " + std::to_string(t) + " has overlapping operations");
  }
}

}  // namespace

check_result check_linearizable(const history& h, const check_options& opt) {
  check_well_formed(h);
  const std::size_t n = h.size();
  if (n == 0) return linearizable{};

  // Node 0 is the head sentinel; nodes 1..2n are calls and returns.
  std::vector<node> nodes(2 * n + 1);
  {
    std::vector<std::size_t> order(2 * n);
    for (std::size_t i = 0; i < n; ++i) {
      nodes[1 + 2 * i] = {i, true, 2 + 2 * i, 0, 0};
      nodes[2 + 2 * i] = {i, false, 1 + 2 * i, 0, 0};
      order[2 * i] = 1 + 2 * i;
      order[2 * i + 1] = 2 + 2 * i;
    }
    auto time = [&](std::size_t x) { return nodes[x].is_call ? h[nodes[x].event].t_invoke : h[nodes[x].event].t_response; };
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      if (time(a) != time(b)) return time(a) < time(b);
      return nodes[a].is_call && !nodes[b].is_call;
    });
    std::size_t prev = 0;
    for (auto x : order) {
      nodes[prev].next = x;
      nodes[x].prev = prev;
      prev = x;
    }
    nodes[prev].next = nil;
    nodes[0].prev = nil;
  }

  auto unlink = [&](std::size_t x) {
    nodes[nodes[x].prev].next = nodes[x].next;
    if (nodes[x].next != nil) nodes[nodes[x].next].prev = nodes[x].prev;
  };
  auto relink = [&](std::size_t x) {
    nodes[nodes[x].prev].next = x;
    if (nodes[x].next != nil) nodes[nodes[x].next].prev = x;
  };
  auto lift = [&](std::size_t call) {
    unlink(call);
    unlink(nodes[call].match);
  };
  auto unlift = [&](std::size_t call) {
    relink(nodes[call].match);
    relink(call);
  };

  std::vector<std::uint64_t> done((n + 63) / 64, 0);
  oracle_map state;
  std::unordered_set<config, config_hash> seen;
  struct frame {
    std::size_t call;
    oracle_map state;
  };
  std::vector<frame> stack;

  std::size_t best_depth = 0;
  counterexample worst;
  bool have_worst = false;

  std::size_t steps = 0;
  std::size_t cur = nodes[0].next;
  while (nodes[0].next != nil) {
    if (++steps > opt.node_limit) return budget_exceeded{steps};
    if (cur == nil) throw std::logic_error("linearizability search ran off the list");
    const auto& nd = nodes[cur];
    if (nd.is_call) {
      const event& e = h[nd.event];
      oracle_map next = state;
      bool ok = next.apply(e.op) == e.result;
      if (ok) {
        done[nd.event / 64] |= std::uint64_t{1} << (nd.event % 64);
        config c{done, next.contents(), 0};
        c.hash = hash_of(c.done, c.state);
        if (seen.insert(std::move(c)).second) {
          stack.push_back({cur, std::move(state)});
          state = std::move(next);
          lift(cur);
          cur = nodes[0].next;
          continue;
        }
        done[nd.event / 64] &= ~(std::uint64_t{1} << (nd.event % 64));
      }
      cur = nd.next;
    } else {
      if (!have_worst || stack.size() > best_depth) {
        best_depth = stack.size();
        have_worst = true;
        worst.window.clear();
        worst.window.push_back(nd.event);
        for (std::size_t x = nodes[0].next; x != cur && x != nil; x = nodes[x].next)
          if (nodes[x].is_call) worst.window.push_back(nodes[x].event);
        std::sort(worst.window.begin(), worst.window.end());
        worst.window.erase(std::unique(worst.window.begin(), worst.window.end()), worst.window.end());
        worst.reason = "after " + std::to_string(best_depth) + " linearized operations, " + to_string(h[nd.event].op) +
                       " -> " + to_string(h[nd.event].result) + " on thread " + std::to_string(h[nd.event].thread) +
                       " has no legal linearization point";
      }
      if (stack.empty()) return worst;
      auto [call, prior] = std::move(stack.back());
      stack.pop_back();
      state = std::move(prior);
      std::size_t ev = nodes[call].event;
      done[ev / 64] &= ~(std::uint64_t{1} << (ev % 64));
      unlift(call);
      cur = nodes[call].next;
    }
  }
  return linearizable{};
}

std::string describe(const history& h, const check_result& r) {
  if (std::holds_alternative<linearizable>(r)) return "linearizable";
  if (auto* b = std::get_if<budget_exceeded>(&r)) return "budget exceeded after " + std::to_string(b->nodes) + " steps";
  const auto& c = std::get<counterexample>(r);
  std::string s = "not linearizable: " + c.reason + "\nwindow:";
  for (auto i : c.window) s += "\n  " + format_event(h.at(i));
  return s;
}

}  // namespace skiphash::verify
