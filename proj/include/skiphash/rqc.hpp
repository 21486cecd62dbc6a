#pragma once

#include <array>
#include <atomic>
#include <cstddef>
#include <cstdint>
#include <stdexcept>

#include "skiphash/skip_list.hpp"
#include "skiphash/stm.hpp"

namespace skiphash {

/// Per-thread buffer of logically deleted nodes awaiting unstitching.
/// Thread-confined and not transactional.
template <class Node>
class removal_buffer {
 public:
  static constexpr std::size_t capacity = 32;

  bool full() const noexcept { return size_ == capacity; }
  bool empty() const noexcept { return size_ == 0; }
  std::size_t size() const noexcept { return size_; }
  void push(Node* n) {
    if (full()) throw std::logic_error("removal_buffer overflow");
    nodes_[size_++] = n;
  }
  Node* operator[](std::size_t i) const noexcept { return nodes_[i]; }
  void clear() noexcept { size_ = 0; }

 private:
  std::array<Node*, capacity> nodes_{};
  std::size_t size_ = 0;
};

struct rqc_stats {
  std::uint64_t range_registrations = 0;  // committed on_range calls
  std::uint64_t counter_writes = 0;       // committed writes to the version counter
  std::uint64_t deferred_appends = 0;     // buffers handed to an in-flight range op
  std::uint64_t immediate_unstitches = 0; // nodes unstitched at buffer flush
  std::uint64_t handoffs_backward = 0;    // deferred lists passed to an older op
  std::uint64_t deferred_unstitches = 0;  // nodes unstitched by after_range
};

/// Range query coordinator: issues versions to slow-path range queries,
/// tracks the in-flight ones, and decides when logically deleted nodes may
/// be unstitched.
template <class SkipList>
class range_coordinator {
 public:
  using node = typename SkipList::node;
  using txn = stm::txn;

  /// Registration record of one slow-path range query.
  struct range_op {
    explicit range_op(version v) : ver{v} {}
    stm::orec lock;
    const version ver;
    stm::tvar<range_op*> prev;
    stm::tvar<range_op*> next;
    stm::tvar<node*> deferred_head;
    stm::tvar<node*> deferred_tail;
  };

  /// Handle returned by on_range; gives after_range direct access to the op.
  struct ticket {
    version ver = 0;
    range_op* op = nullptr;
  };

  explicit range_coordinator(SkipList& sl) : sl_{sl} {}
  range_coordinator(const range_coordinator&) = delete;
  range_coordinator& operator=(const range_coordinator&) = delete;

  ~range_coordinator() {
    range_op* op = ops_head_.load_direct();
    while (op) {
      range_op* next = op->next.load_direct();
      delete op;
      op = next;
    }
  }

  /// Register a slow-path range query. Must run inside the setup transaction.
  ticket on_range(txn& tx) {
    version v = tx.read(counter_lock_, counter_) + 1;
    tx.write(counter_lock_, counter_, v);
    auto* op = tx.create<range_op>(v);
    range_op* last = tx.read(list_lock_, ops_tail_);
    op->prev.store_direct(last);
    if (last)
      tx.write(last->lock, last->next, op);
    else
      tx.write(list_lock_, ops_head_, op);
    tx.write(list_lock_, ops_tail_, op);
    tx.on_commit([this] {
      stats_.range_registrations.fetch_add(1, std::memory_order_relaxed);
      stats_.counter_writes.fetch_add(1, std::memory_order_relaxed);
    });
    return {v, op};
  }

  /// Version for an insert's i_time or a remove's r_time: the newest range
  /// query's version. A read; never writes the counter.
  version on_update(txn& tx) const { return tx.read(counter_lock_, counter_); }

  /// Hand a logically deleted node (already out of the hash map) to the
  /// coordinator. Call outside of any transaction.
  void after_remove(removal_buffer<node>& buf, node* n) {
    buf.push(n);
    if (buf.full()) flush(buf);
  }

  /// Empty `buf`: unstitch immediately when no slow-path range query is in
  /// flight, otherwise append the whole buffer to the newest one's deferred
  /// list.
  void flush(removal_buffer<node>& buf) {
    if (buf.empty()) return;
    node* first = buf[0];
    node* last = buf[buf.size() - 1];
    for (std::size_t i = 0; i + 1 < buf.size(); ++i) buf[i]->deferred_next.store_direct(buf[i + 1]);
    last->deferred_next.store_direct(nullptr);

    bool deferred = stm::atomically([&](txn& tx) {
      range_op* newest = tx.read(list_lock_, ops_tail_);
      if (!newest) return false;
      append_chain(tx, newest, first, last);
      return true;
    });
    if (deferred) {
      stats_.deferred_appends.fetch_add(1, std::memory_order_relaxed);
    } else {
      for (std::size_t i = 0; i < buf.size(); ++i) {
        node* n = buf[i];
        stm::atomically([&](txn& tx) { sl_.unstitch(tx, n); });
      }
      stats_.immediate_unstitches.fetch_add(buf.size(), std::memory_order_relaxed);
    }
    buf.clear();
  }

  /// Deregister a finished slow-path range query. Its deferred nodes are
  /// unstitched now if it was the oldest in flight, otherwise handed to its
  /// predecessor.
  void after_range(const ticket& t) {
    if (!t.op || t.op->ver != t.ver) throw std::invalid_argument("after_range: unknown range version");
    range_op* op = t.op;
    node* taken = stm::atomically([&](txn& tx) -> node* {
      range_op* prev = tx.read(op->lock, op->prev);
      range_op* next = tx.read(op->lock, op->next);
      if (prev)
        tx.write(prev->lock, prev->next, next);
      else
        tx.write(list_lock_, ops_head_, next);
      if (next)
        tx.write(next->lock, next->prev, prev);
      else
        tx.write(list_lock_, ops_tail_, prev);
      tx.acquire(op->lock);
      node* head = tx.read(op->lock, op->deferred_head);
      node* tail = tx.read(op->lock, op->deferred_tail);
      tx.retire(op);
      if (!prev) return head;
      if (head) {
        append_chain(tx, prev, head, tail);
        tx.on_commit([this] { stats_.handoffs_backward.fetch_add(1, std::memory_order_relaxed); });
      }
      return nullptr;
    });
    std::uint64_t count = 0;
    while (taken) {
      // The chain belongs to this thread now; read the link before the node
      // is retired.
      node* next = taken->deferred_next.load_direct();
      stm::atomically([&](txn& tx) { sl_.unstitch(tx, taken); });
      taken = next;
      ++count;
    }
    if (count) stats_.deferred_unstitches.fetch_add(count, std::memory_order_relaxed);
  }

  rqc_stats stats() const noexcept {
    return {stats_.range_registrations.load(), stats_.counter_writes.load(), stats_.deferred_appends.load(),
            stats_.immediate_unstitches.load(), stats_.handoffs_backward.load(), stats_.deferred_unstitches.load()};
  }

  // Quiescent inspection.

  version counter_direct() const noexcept { return counter_.load_direct(); }
  const stm::orec& counter_orec() const noexcept { return counter_lock_; }

  std::size_t in_flight_direct() const noexcept {
    std::size_t n = 0;
    for (range_op* op = ops_head_.load_direct(); op; op = op->next.load_direct()) ++n;
    return n;
  }

  template <class F>
  void for_each_op_direct(F&& fn) const {
    for (range_op* op = ops_head_.load_direct(); op; op = op->next.load_direct()) fn(*op);
  }

  /// Number of nodes on `op`'s deferred list.
  static std::size_t deferred_count_direct(const range_op& op) noexcept {
    std::size_t n = 0;
    for (node* d = op.deferred_head.load_direct(); d; d = d->deferred_next.load_direct()) ++n;
    return n;
  }

 private:
  // Splice the chain first..last (linked through deferred_next) onto the end
  // of op's deferred list in O(1).
  static void append_chain(txn& tx, range_op* op, node* first, node* last) {
    node* tail = tx.read(op->lock, op->deferred_tail);
    if (tail)
      tx.write(op->lock, tail->deferred_next, first);
    else
      tx.write(op->lock, op->deferred_head, first);
    tx.write(op->lock, op->deferred_tail, last);
  }

  struct atomic_stats {
    std::atomic<std::uint64_t> range_registrations{0};
    std::atomic<std::uint64_t> counter_writes{0};
    std::atomic<std::uint64_t> deferred_appends{0};
    std::atomic<std::uint64_t> immediate_unstitches{0};
    std::atomic<std::uint64_t> handoffs_backward{0};
    std::atomic<std::uint64_t> deferred_unstitches{0};
  };

  SkipList& sl_;
  stm::orec counter_lock_;
  stm::tvar<version> counter_{0};
  stm::orec list_lock_;
  stm::tvar<range_op*> ops_head_;
  stm::tvar<range_op*> ops_tail_;
  atomic_stats stats_;
};

}  // namespace skiphash
