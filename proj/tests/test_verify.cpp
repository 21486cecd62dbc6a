#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <random>
#include <sstream>

#include "skiphash/verify/history.hpp"
#include "skiphash/verify/linearizability.hpp"
#include "skiphash/verify/structure.hpp"

using namespace skiphash;
using namespace skiphash::verify;

namespace {

history parse(const std::string& text) {
  std::istringstream in{text};
  return read_history(in);
}

// Brute force: does any permutation consistent with real-time order replay
// on the oracle with exactly the recorded results?
bool brute_force_linearizable(const history& h) {
  std::vector<std::size_t> order(h.size());
  std::iota(order.begin(), order.end(), 0);
  do {
    bool ok = true;
    for (std::size_t i = 0; i < order.size() && ok; ++i)
      for (std::size_t j = i + 1; j < order.size() && ok; ++j)
        if (h[order[j]].t_response < h[order[i]].t_invoke) ok = false;
    if (!ok) continue;
    oracle_map m;
    for (auto i : order)
      if (m.apply(h[i].op) != h[i].result) {
        ok = false;
        break;
      }
    if (ok) return true;
  } while (std::next_permutation(order.begin(), order.end()));
  return false;
}

// A history produced by a legal sequential run, with each operation's
// interval stretched around its linearization point.
history legal_history(std::mt19937_64& rng, unsigned threads, unsigned ops, map_key universe) {
  oracle_map m;
  history h;
  const std::uint64_t spacing = 10;
  std::uniform_int_distribution<std::uint64_t> stretch{0, spacing * threads / 2 - 1};
  for (unsigned i = 0; i < ops; ++i) {
    event e;
    e.thread = i % threads;
    e.op = random_operation(rng, op_mix{25, 25, 25, 25}, universe, 2, true);
    e.result = m.apply(e.op);
    std::uint64_t t = 1000 + i * spacing;
    e.t_invoke = t - stretch(rng);
    e.t_response = t + stretch(rng);
    h.push_back(e);
  }
  return h;
}

struct handcrafted {
  const char* name;
  bool linearizable;
  const char* text;
};

// thread,op,args...,t_invoke,t_response,result
const handcrafted library[] = {
    {"sequential insert then lookup", true,
     "0,insert,3,30,0,1,true\n"
     "0,lookup,3,2,3,30\n"},
    {"lookup of a value never inserted", false,
     "0,insert,3,30,0,1,true\n"
     "1,lookup,3,2,3,31\n"},
    {"overlapping lookup sees the insert", true,
     "0,insert,1,10,0,10,true\n"
     "1,lookup,1,5,6,10\n"},
    {"overlapping lookup misses the insert", true,
     "0,insert,1,10,0,10,true\n"
     "1,lookup,1,5,6,none\n"},
    {"stale lookup after a completed insert", false,
     "0,insert,1,10,0,1,true\n"
     "1,lookup,1,2,3,none\n"},
    {"two concurrent inserts of one key both succeed", false,
     "0,insert,4,1,0,10,true\n"
     "1,insert,4,2,0,10,true\n"},
    {"two concurrent inserts of one key, one succeeds", true,
     "0,insert,4,1,0,10,true\n"
     "1,insert,4,2,0,10,false\n"
     "2,lookup,4,11,12,1\n"},
    {"range observes a later insert without an earlier one", false,
     "0,insert,1,10,0,2,true\n"
     "0,insert,2,20,3,5,true\n"
     "1,range,0,3,1,6,{2:20}\n"},
    {"range observes a prefix of the inserts", true,
     "0,insert,1,10,0,2,true\n"
     "0,insert,2,20,3,5,true\n"
     "1,range,0,3,1,6,{1:10}\n"},
    {"range reports a wrong value", false,
     "0,insert,1,10,0,2,true\n"
     "1,range,0,3,3,4,{1:11}\n"},
    {"double remove of one key", false,
     "0,insert,1,10,0,1,true\n"
     "0,remove,1,2,3,true\n"
     "1,remove,1,4,5,true\n"},
    {"concurrent removes, one wins", true,
     "0,insert,1,10,0,1,true\n"
     "0,remove,1,2,9,true\n"
     "1,remove,1,3,8,false\n"},
    {"ceil returns a key removed before it started", false,
     "0,insert,5,1,0,1,true\n"
     "0,insert,8,1,2,3,true\n"
     "0,remove,5,4,5,true\n"
     "1,ceil,4,6,7,5\n"},
    {"point queries on a stable set", true,
     "0,insert,3,1,0,1,true\n"
     "0,insert,9,1,2,3,true\n"
     "1,ceil,4,4,5,9\n"
     "1,succ,3,6,7,9\n"
     "1,floor,4,8,9,3\n"
     "1,pred,3,10,11,none\n"
     "1,pred,9,12,13,3\n"},
    {"range atomicity across a move", false,
     // Key 1 moves to key 2: removal of 1 finishes before insert of 2 starts.
     // A range seeing neither is fine; seeing both is not.
     "0,insert,1,7,0,1,true\n"
     "0,remove,1,2,3,true\n"
     "0,insert,2,7,4,5,true\n"
     "1,range,0,5,1,6,{1:7;2:7}\n"},
    {"range sees neither during a move", true,
     "0,insert,1,7,0,1,true\n"
     "0,remove,1,2,3,true\n"
     "0,insert,2,7,4,5,true\n"
     "1,range,0,5,2,4,{}\n"},
};

}  // namespace

TEST_CASE("oracle basics") {
  std::vector<operation> ops{{op_kind::insert, 3, 30}, {op_kind::lookup, 3, 0}};
  auto r = oracle_apply(ops);
  CHECK(r == std::vector<outcome>{true, std::optional<std::int64_t>{30}});
  ops = {{op_kind::insert, 3, 30}, {op_kind::insert, 3, 31}, {op_kind::lookup, 3, 0}};
  r = oracle_apply(ops);
  CHECK(r == std::vector<outcome>{true, false, std::optional<std::int64_t>{30}});
  oracle_map m;
  m.insert(1, 1);
  m.insert(5, 5);
  CHECK(m.ceil(2) == 5);
  CHECK(m.floor(4) == 1);
  CHECK(m.succ(5) == std::nullopt);
  CHECK(m.pred(1) == std::nullopt);
  CHECK(m.range(5, 1).empty());
  CHECK(m.range(0, 5) == range_entries{{1, 1}, {5, 5}});
}

TEST_CASE("history line format round trip") {
  history h{
      {0, {op_kind::insert, -3, 30}, 5, 9, true},
      {1, {op_kind::lookup, 7, 0}, 6, 8, std::optional<std::int64_t>{}},
      {2, {op_kind::range, 1, 4}, 7, 7, range_entries{{1, 2}, {3, -4}}},
      {3, {op_kind::range, 1, 4}, 8, 9, range_entries{}},
      {0, {op_kind::pred, 7, 0}, 10, 11, std::optional<std::int64_t>{-3}},
  };
  std::ostringstream out;
  write_history(out, h);
  CHECK(out.str().find("2,range,1,4,7,7,{1:2;3:-4}") != std::string::npos);
  std::istringstream in{"# comment\n\n" + out.str()};
  CHECK(read_history(in) == h);
}

TEST_CASE("malformed history lines are rejected") {
  for (const char* bad : {"0,insert,1,0,1,true", "0,jump,1,0,1,true", "0,lookup,x,0,1,none", "0,lookup,1,5,1,none",
                          "0,insert,1,1,0,1,maybe", "0,range,1,2,0,1,{1-2}", "0,range,1,2,0,1,1:2"}) {
    CAPTURE(bad);
    CHECK_THROWS_AS(parse_event(bad), std::invalid_argument);
  }
  CHECK_THROWS_AS(parse("0,lookup,1,0,1,none\nbroken\n"), std::invalid_argument);
}

TEST_CASE("handcrafted library") {
  for (const auto& c : library) {
    CAPTURE(std::string(c.name));
    auto h = parse(c.text);
    auto r = check_linearizable(h);
    CHECK(is_linearizable(r) == c.linearizable);
    CHECK(brute_force_linearizable(h) == c.linearizable);
    if (!c.linearizable) {
      REQUIRE(std::holds_alternative<counterexample>(r));
      const auto& ce = std::get<counterexample>(r);
      CHECK_FALSE(ce.window.empty());
      CHECK_FALSE(ce.reason.empty());
      for (auto i : ce.window) CHECK(i < h.size());
    }
  }
}

TEST_CASE("the counterexample window names the failing operation") {
  auto h = parse(
      "0,insert,3,30,0,1,true\n"
      "0,insert,4,40,2,3,true\n"
      "1,lookup,3,4,5,99\n"
      "0,insert,5,50,6,7,true\n");
  auto r = check_linearizable(h);
  REQUIRE(std::holds_alternative<counterexample>(r));
  INFO(describe(h, r));
  CHECK(std::get<counterexample>(r).window == std::vector<std::size_t>{2});
  CHECK(describe(h, r).find("1,lookup,3,4,5,99") != std::string::npos);
}

TEST_CASE("single-threaded histories are linearizable") {
  std::mt19937_64 rng{1};
  for (int trial = 0; trial < 20; ++trial) {
    auto h = legal_history(rng, 1, 300, 8);
    CHECK(is_linearizable(check_linearizable(h)));
  }
  CHECK(is_linearizable(check_linearizable({})));
}

TEST_CASE("every history produced by a legal order is accepted") {
  std::mt19937_64 rng{2};
  for (int trial = 0; trial < 50; ++trial) {
    auto h = legal_history(rng, 4, 200, 6);
    CHECK(is_linearizable(check_linearizable(h)));
  }
}

TEST_CASE("a lookup of a never-inserted value is always rejected") {
  std::mt19937_64 rng{3};
  for (int trial = 0; trial < 50; ++trial) {
    auto h = legal_history(rng, 4, 120, 6);
    auto it = std::find_if(h.begin(), h.end(), [](const event& e) { return e.op.kind == op_kind::lookup; });
    if (it == h.end()) continue;
    it->result = std::optional<std::int64_t>{-12345};
    CHECK(std::holds_alternative<counterexample>(check_linearizable(h)));
  }
}

TEST_CASE("checker agrees with brute force on tiny random histories") {
  std::mt19937_64 rng{4};
  int accepted = 0, rejected = 0;
  for (int trial = 0; trial < 600; ++trial) {
    history h;
    unsigned n = 2 + rng() % 5;
    for (unsigned i = 0; i < n; ++i) {
      event e;
      e.thread = i;
      e.op = random_operation(rng, op_mix{25, 25, 25, 25}, 2, 1, true);
      if (e.op.kind == op_kind::insert) e.op.b = static_cast<map_value>(rng() % 2);
      e.t_invoke = rng() % 10;
      e.t_response = e.t_invoke + rng() % 6;
      // Random but well-typed result.
      switch (e.op.kind) {
        case op_kind::insert:
        case op_kind::remove: e.result = bool(rng() % 2); break;
        case op_kind::range: {
          range_entries r;
          for (map_key k = e.op.a; k <= e.op.b; ++k)
            if (rng() % 2) r.emplace_back(k, static_cast<map_value>(rng() % 2));
          e.result = r;
          break;
        }
        default:
          e.result = rng() % 3 ? std::optional<std::int64_t>{static_cast<std::int64_t>(rng() % 2)}
                               : std::optional<std::int64_t>{};
      }
      h.push_back(e);
    }
    bool want = brute_force_linearizable(h);
    CAPTURE(trial);
    CHECK(is_linearizable(check_linearizable(h)) == want);
    (want ? accepted : rejected)++;
  }
  // Both verdicts must actually be exercised.
  CHECK(accepted > 30);
  CHECK(rejected > 30);
}

TEST_CASE("search budget") {
  std::mt19937_64 rng{5};
  auto h = legal_history(rng, 4, 200, 6);
  auto r = check_linearizable(h, {10});
  CHECK(std::holds_alternative<budget_exceeded>(r));
  CHECK(describe(h, r).find("budget") != std::string::npos);
}

TEST_CASE("overlapping operations on one thread are malformed") {
  auto h = parse(
      "0,insert,1,1,0,5,true\n"
      "0,lookup,1,3,6,1\n");
  CHECK_THROWS_AS(check_linearizable(h), std::invalid_argument);
}

TEST_CASE("recorded histories from the real map are linearizable") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    record_config cfg;
    cfg.seed = seed;
    cfg.point_queries = seed % 2 == 0;
    cfg.map.bucket_count = 31;
    auto h = record_history(cfg);
    CHECK(h.size() == 1000);
    auto r = check_linearizable(h);
    CAPTURE(describe(h, r));
    CHECK(is_linearizable(r));
  }
}

TEST_CASE("history recorder merges per-thread logs by invocation time") {
  history_recorder rec{2};
  rec.log(1).push_back({1, {}, 5, 6, std::optional<std::int64_t>{}});
  rec.log(0).push_back({0, {}, 3, 4, std::optional<std::int64_t>{}});
  rec.log(1).push_back({1, {}, 7, 9, std::optional<std::int64_t>{}});
  auto h = rec.merge();
  REQUIRE(h.size() == 3);
  CHECK(h[0].t_invoke == 3);
  CHECK(h[1].t_invoke == 5);
  CHECK(h[2].t_invoke == 7);
  CHECK_THROWS_AS(rec.log(2), std::out_of_range);
}

TEST_CASE("structural scan") {
  skip_hash_config c;
  c.bucket_count = 97;
  c.max_level = 10;
  SUBCASE("fresh prefilled map passes") {
    int_map m{c};
    auto s = m.open_session(1);
    for (int k = 0; k < 500; ++k) s.insert(k * 3, k);
    auto rep = scan_structure(m);
    CHECK(rep.ok());
    CHECK(rep.failures().empty());
    CHECK(rep.leak_count == 0);
    CHECK(rep.present_nodes == 500);
    CHECK(rep.map_entries == 500);
  }
  SUBCASE("corrupted pred link") {
    int_map m{c};
    auto s = m.open_session(1);
    for (int k = 0; k < 50; ++k) s.insert(k, k);
    int_map::node* victim = nullptr;
    m.list().for_each_direct(0, [&](int_map::node* n) {
      if (n->key == 20) victim = n;
    });
    REQUIRE(victim);
    auto* saved = victim->at(0).pred.load_direct();
    victim->at(0).pred.store_direct(m.list().head());
    auto rep = scan_structure(m);
    CHECK_FALSE(rep.bidir_links);
    CHECK(rep.failures() == std::vector<std::string>{"bidir_links"});
    victim->at(0).pred.store_direct(saved);
    CHECK(scan_structure(m).ok());
  }
  SUBCASE("a logically deleted node still stitched counts as a leak") {
    int_map m{c};
    auto s = m.open_session(1);
    for (int k = 0; k < 10; ++k) s.insert(k, k);
    s.remove(4);  // buffered, not yet unstitched
    auto rep = scan_structure(m);
    CHECK(rep.ok());
    CHECK(rep.leak_count == 1);
    s.flush();
    CHECK(scan_structure(m).leak_count == 0);
  }
  SUBCASE("a present node missing from the map breaks composition") {
    int_map m{c};
    auto s = m.open_session(1);
    for (int k = 0; k < 10; ++k) s.insert(k, k);
    stm::atomically([&](stm::txn& tx) { m.map().remove(tx, 4); });
    CHECK_FALSE(scan_structure(m).composition_equality);
  }
  SUBCASE("a present node ahead of an equal key breaks sortedness") {
    int_map m{c};
    auto s = m.open_session(1);
    for (int k = 0; k < 10; ++k) s.insert(k, k);
    int_map::node* n4 = nullptr;
    m.list().for_each_direct(0, [&](int_map::node* n) {
      if (n->key == 4) n4 = n;
    });
    // Stitch a second present key-4 node in behind the first.
    stm::atomically([&](stm::txn& tx) { m.list().insert_after_logical_deletes(tx, 4, 0, 1, 0); });
    auto rep = scan_structure(m);
    CHECK_FALSE(rep.sortedness);
    CHECK(n4 != nullptr);
  }
  SUBCASE("an unfinished range query is reported") {
    int_map m{c};
    auto t = stm::atomically([&](stm::txn& tx) { return m.rqc().on_range(tx); });
    CHECK_FALSE(scan_structure(m).no_inflight_ranges);
    m.rqc().after_range(t);
    CHECK(scan_structure(m).no_inflight_ranges);
  }
  SUBCASE("10^5 mixed operations then quiesce") {
    int_map m{c};
    {
      auto s = m.open_session(7);
      std::mt19937_64 rng{7};
      for (int i = 0; i < 100'000; ++i) apply(s, random_operation(rng, op_mix{30, 25, 25, 20}, 2000, 16, true));
    }
    auto rep = scan_structure(m);
    CHECK(rep.ok());
    CHECK(rep.leak_count == 0);
  }
}
