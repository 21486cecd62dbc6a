#include <doctest.h>

#include <vector>

#include "skiphash/rqc.hpp"

using namespace skiphash;
using stm::atomically;
using stm::txn;

namespace {

using list_t = skip_list<long, long>;
using node = list_t::node;
using rqc_t = range_coordinator<list_t>;

struct fixture {
  list_t sl{8};
  rqc_t rqc{sl};
  removal_buffer<node> buf;

  node* add(long k) {
    return atomically([&](txn& tx) { return sl.insert_optimized(tx, k, k, 1 + k % 3, rqc.on_update(tx)); });
  }
  // Logically delete, as a remove would, and hand to the coordinator.
  void remove(node* n) {
    atomically([&](txn& tx) { tx.write(n->lock, n->r_time, rqc.on_update(tx)); });
    rqc.after_remove(buf, n);
  }
  rqc_t::ticket begin_range() {
    return atomically([&](txn& tx) { return rqc.on_range(tx); });
  }
  std::size_t stitched() const {
    std::size_t n = 0;
    sl.for_each_direct(0, [&](node*) { ++n; });
    return n;
  }
};

}  // namespace

TEST_CASE("removal buffer") {
  removal_buffer<node> b;
  CHECK(b.empty());
  std::vector<node*> fake(32);
  for (std::size_t i = 0; i < 32; ++i) b.push(fake[i]);
  CHECK(b.full());
  CHECK(b.size() == removal_buffer<node>::capacity);
  CHECK_THROWS_AS(b.push(nullptr), std::logic_error);
  b.clear();
  CHECK(b.empty());
}

TEST_CASE("on_update reads the counter and never writes it") {
  fixture f;
  for (long k = 0; k < 100; ++k) f.add(k);
  CHECK(f.rqc.counter_direct() == 0);
  CHECK(f.rqc.counter_orec().raw() == 0);
  auto s = f.rqc.stats();
  CHECK(s.counter_writes == 0);
  CHECK(s.range_registrations == 0);
}

TEST_CASE("on_range issues strictly increasing versions and registers the op") {
  fixture f;
  auto a = f.begin_range();
  auto b = f.begin_range();
  CHECK(a.ver == 1);
  CHECK(b.ver == 2);
  CHECK(f.rqc.counter_direct() == 2);
  CHECK(f.rqc.in_flight_direct() == 2);
  atomically([&](txn& tx) { CHECK(f.rqc.on_update(tx) == 2); });
  f.rqc.after_range(a);
  f.rqc.after_range(b);
  CHECK(f.rqc.in_flight_direct() == 0);
  auto s = f.rqc.stats();
  CHECK(s.counter_writes == 2);
  CHECK(s.range_registrations == 2);
}

TEST_CASE("an aborted registration leaves the counter alone") {
  fixture f;
  CHECK_FALSE(stm::try_once([&](txn& tx) {
    f.rqc.on_range(tx);
    tx.restart();
  }));
  CHECK(f.rqc.counter_direct() == 0);
  CHECK(f.rqc.in_flight_direct() == 0);
  CHECK(f.rqc.stats().counter_writes == 0);
}

TEST_CASE("after_range rejects unknown tickets") {
  fixture f;
  CHECK_THROWS_AS(f.rqc.after_range({}), std::invalid_argument);
  auto t = f.begin_range();
  CHECK_THROWS_AS(f.rqc.after_range({t.ver + 1, t.op}), std::invalid_argument);
  f.rqc.after_range(t);
}

TEST_CASE("removals unstitch at flush when no range query is in flight") {
  fixture f;
  std::vector<node*> nodes;
  for (long k = 0; k < 40; ++k) nodes.push_back(f.add(k));
  for (int i = 0; i < 31; ++i) f.remove(nodes[i]);
  CHECK(f.buf.size() == 31);
  CHECK(f.stitched() == 40);
  f.remove(nodes[31]);  // fills the buffer
  CHECK(f.buf.empty());
  CHECK(f.stitched() == 8);
  f.remove(nodes[32]);
  f.rqc.flush(f.buf);
  CHECK(f.stitched() == 7);
  CHECK(f.rqc.stats().immediate_unstitches == 33);
  stm::reclaim_now();
}

TEST_CASE("removals during a slow-path range wait for it") {
  fixture f;
  std::vector<node*> nodes;
  for (long k = 0; k < 10; ++k) nodes.push_back(f.add(k));
  auto t = f.begin_range();
  for (int i = 0; i < 5; ++i) f.remove(nodes[i]);
  f.rqc.flush(f.buf);
  CHECK(f.stitched() == 10);
  f.rqc.for_each_op_direct([](const rqc_t::range_op& op) { CHECK(rqc_t::deferred_count_direct(op) == 5); });
  CHECK(f.rqc.stats().deferred_appends == 1);
  f.rqc.after_range(t);
  CHECK(f.stitched() == 5);
  CHECK(f.rqc.stats().deferred_unstitches == 5);
  stm::reclaim_now();
}

TEST_CASE("a newer range finishing first hands its deferred nodes to the older one") {
  fixture f;
  std::vector<node*> nodes;
  for (long k = 0; k < 10; ++k) nodes.push_back(f.add(k));
  auto older = f.begin_range();
  auto newer = f.begin_range();
  for (int i = 0; i < 3; ++i) f.remove(nodes[i]);
  f.rqc.flush(f.buf);
  f.rqc.after_range(newer);
  CHECK(f.stitched() == 10);
  CHECK(f.rqc.stats().handoffs_backward == 1);
  CHECK(f.rqc.in_flight_direct() == 1);
  f.rqc.for_each_op_direct([&](const rqc_t::range_op& op) {
    CHECK(op.ver == older.ver);
    CHECK(rqc_t::deferred_count_direct(op) == 3);
  });
  // Later removals join the same list.
  for (int i = 3; i < 5; ++i) f.remove(nodes[i]);
  f.rqc.flush(f.buf);
  f.rqc.after_range(older);
  CHECK(f.stitched() == 5);
  CHECK(f.rqc.stats().deferred_unstitches == 5);
  stm::reclaim_now();
}

TEST_CASE("the oldest range finishing first leaves newer deferred lists alone") {
  fixture f;
  std::vector<node*> nodes;
  for (long k = 0; k < 6; ++k) nodes.push_back(f.add(k));
  auto older = f.begin_range();
  auto newer = f.begin_range();
  for (int i = 0; i < 2; ++i) f.remove(nodes[i]);
  f.rqc.flush(f.buf);
  f.rqc.after_range(older);
  CHECK(f.stitched() == 6);
  f.rqc.after_range(newer);
  CHECK(f.stitched() == 4);
  CHECK(f.rqc.stats().handoffs_backward == 0);
  stm::reclaim_now();
}

TEST_CASE("a middle range hands its list to its predecessor only") {
  fixture f;
  std::vector<node*> nodes;
  for (long k = 0; k < 6; ++k) nodes.push_back(f.add(k));
  auto a = f.begin_range();
  auto b = f.begin_range();
  f.remove(nodes[0]);
  f.rqc.flush(f.buf);  // to b
  auto c = f.begin_range();
  f.remove(nodes[1]);
  f.rqc.flush(f.buf);  // to c
  f.rqc.after_range(b);  // b's list goes to a
  std::vector<std::size_t> counts;
  f.rqc.for_each_op_direct([&](const rqc_t::range_op& op) { counts.push_back(rqc_t::deferred_count_direct(op)); });
  CHECK(counts == std::vector<std::size_t>{1, 1});
  f.rqc.after_range(a);
  CHECK(f.stitched() == 5);
  f.rqc.after_range(c);
  CHECK(f.stitched() == 4);
  stm::reclaim_now();
}
