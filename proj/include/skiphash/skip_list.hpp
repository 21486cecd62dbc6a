#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <new>
#include <random>
#include <stdexcept>

#include "skiphash/stm.hpp"

namespace skiphash {

using version = std::uint64_t;

/// r_time of a logically present node.
inline constexpr version no_time = std::numeric_limits<version>::max();

inline constexpr unsigned max_supported_level = 64;

enum class node_kind : std::uint8_t { head, item, tail };

/// Skip list node with a tower of (pred, succ) links sized to its height.
/// One orec covers val, r_time and the whole tower. key, height, kind and
/// i_time never change after construction, so they are read directly.
template <class K, class V>
class sl_node {
 public:
  struct link {
    stm::tvar<sl_node*> pred;
    stm::tvar<sl_node*> succ;
  };

  static sl_node* make(node_kind kind, const K& key, V val, unsigned height, version i_time) {
    void* mem = ::operator new(links_offset + height * sizeof(link));
    auto* n = new (mem) sl_node(kind, key, val, height, i_time);
    auto* l = n->links();
    for (unsigned i = 0; i < height; ++i) new (l + i) link{};
    return n;
  }

  static void destroy(void* p) noexcept {
    auto* n = static_cast<sl_node*>(p);
    auto* l = n->links();
    for (unsigned i = 0; i < n->height; ++i) l[i].~link();
    n->~sl_node();
    ::operator delete(p);
  }

  link& at(unsigned level) noexcept { return links()[level]; }
  const link& at(unsigned level) const noexcept { return links()[level]; }

  bool is_sentinel() const noexcept { return kind != node_kind::item; }

  stm::orec lock;
  stm::tvar<V> val;
  stm::tvar<version> r_time{no_time};
  // Intrusive chain used by the range query coordinator for deferred
  // unstitching. Guarded by the orec of whichever range op owns the chain.
  stm::tvar<sl_node*> deferred_next;
  const K key;
  const version i_time;
  const std::uint8_t height;
  const node_kind kind;

 private:
  sl_node(node_kind k, const K& key_, V v, unsigned h, version it)
      : val{v}, key{key_}, i_time{it}, height{static_cast<std::uint8_t>(h)}, kind{k} {}
  ~sl_node() = default;

  static constexpr std::size_t links_offset = (sizeof(sl_node) + alignof(link) - 1) / alignof(link) * alignof(link);

  link* links() noexcept {
    return std::launder(reinterpret_cast<link*>(reinterpret_cast<std::byte*>(this) + links_offset));
  }
  const link* links() const noexcept {
    return std::launder(reinterpret_cast<const link*>(reinterpret_cast<const std::byte*>(this) + links_offset));
  }
};

/// Tower height in [1, max_level], geometric with p = 1/2; the tail mass
/// beyond max_level is folded into max_level.
template <class Rng>
unsigned random_height(Rng& rng, unsigned max_level) {
  static_assert(Rng::max() == std::numeric_limits<std::uint64_t>::max() && Rng::min() == 0,
                "random_height needs a full 64-bit generator");
  auto bits = static_cast<std::uint64_t>(rng());
  return std::min<unsigned>(max_level, 1 + static_cast<unsigned>(std::countr_one(bits)));
}

/// Doubly linked skip list operated on inside transactions. Sentinels sit
/// outside the key domain, so every K value is usable.
template <class K, class V, class Compare = std::less<K>>
class skip_list {
 public:
  using node = sl_node<K, V>;
  using txn = stm::txn;

  explicit skip_list(unsigned max_level = 20, Compare cmp = Compare{}) : max_level_{max_level}, cmp_{cmp} {
    if (max_level == 0 || max_level > max_supported_level)
      throw std::invalid_argument("skip_list: max_level must be in [1, 64]");
    head_ = node::make(node_kind::head, K{}, V{}, max_level, 0);
    tail_ = node::make(node_kind::tail, K{}, V{}, max_level, 0);
    for (unsigned l = 0; l < max_level; ++l) {
      head_->at(l).succ.store_direct(tail_);
      tail_->at(l).pred.store_direct(head_);
    }
  }

  skip_list(const skip_list&) = delete;
  skip_list& operator=(const skip_list&) = delete;

  ~skip_list() {
    node* n = head_;
    while (n) {
      node* next = n == tail_ ? nullptr : n->at(0).succ.load_direct();
      node::destroy(n);
      n = next;
    }
  }

  unsigned max_level() const noexcept { return max_level_; }
  node* head() const noexcept { return head_; }
  node* tail() const noexcept { return tail_; }

  /// n.key < k, with head < everything < tail.
  bool before(const node* n, const K& k) const {
    if (n->kind != node_kind::item) return n->kind == node_kind::head;
    return cmp_(n->key, k);
  }
  /// n.key <= k
  bool at_or_before(const node* n, const K& k) const {
    if (n->kind != node_kind::item) return n->kind == node_kind::head;
    return !cmp_(k, n->key);
  }
  /// n.key > k
  bool after(const node* n, const K& k) const { return !at_or_before(n, k); }

  bool key_less(const K& a, const K& b) const { return cmp_(a, b); }

  /// Order of two nodes by key domain (head < items < tail).
  bool node_less(const node* a, const node* b) const {
    if (a->kind != b->kind || a->kind != node_kind::item)
      return static_cast<int>(a->kind) < static_cast<int>(b->kind);
    return cmp_(a->key, b->key);
  }

  bool present(txn& tx, node* n) const { return tx.read(n->lock, n->r_time) == no_time; }

  node* succ_of(txn& tx, node* n, unsigned level = 0) const { return tx.read(n->lock, n->at(level).succ); }
  node* pred_of(txn& tx, node* n, unsigned level = 0) const { return tx.read(n->lock, n->at(level).pred); }

  /// First logically present node with key >= k, or tail.
  node* ceil_node(txn& tx, const K& k) const { return first_present_from(tx, succ_of(tx, descend(tx, k, false))); }
  /// First logically present node with key > k, or tail.
  node* succ_node(txn& tx, const K& k) const { return first_present_from(tx, succ_of(tx, descend(tx, k, true))); }
  /// Last logically present node with key <= k, or head.
  node* floor_node(txn& tx, const K& k) const { return last_present_from(tx, descend(tx, k, true)); }
  /// Last logically present node with key < k, or head.
  node* pred_node(txn& tx, const K& k) const { return last_present_from(tx, descend(tx, k, false)); }

  /// First logically present node strictly after n, or tail.
  node* next_present(txn& tx, node* n) const { return first_present_from(tx, succ_of(tx, n)); }
  /// Last logically present node strictly before n, or head.
  node* prev_present(txn& tx, node* n) const { return last_present_from(tx, pred_of(tx, n)); }

  /// Insert a node for a key that has no node in the list at all.
  node* insert_optimized(txn& tx, const K& k, V v, unsigned height, version i_time) {
    return insert_at(tx, k, v, height, i_time, false);
  }

  /// Insert a node for k after every (logically deleted) node already
  /// holding k.
  node* insert_after_logical_deletes(txn& tx, const K& k, V v, unsigned height, version i_time) {
    return insert_at(tx, k, v, height, i_time, true);
  }

  /// Unlink n at every level of its tower using its own links; no search.
  /// Ownership of n passes to the reclamation subsystem.
  void unstitch(txn& tx, node* n) {
    tx.acquire(n->lock);
    for (unsigned l = 0; l < n->height; ++l) {
      node* p = tx.read(n->lock, n->at(l).pred);
      node* s = tx.read(n->lock, n->at(l).succ);
      tx.write(p->lock, p->at(l).succ, s);
      tx.write(s->lock, s->at(l).pred, p);
    }
    tx.retire(n, &node::destroy);
  }

  /// Quiescent traversal of one level, sentinels excluded.
  template <class F>
  void for_each_direct(unsigned level, F&& fn) const {
    for (node* n = head_->at(level).succ.load_direct(); n && n != tail_; n = n->at(level).succ.load_direct()) fn(n);
  }

 private:
  // Last node at the bottom level with key < k (or <= k when inclusive).
  // Fills preds[level] for every level when preds is given.
  node* descend(txn& tx, const K& k, bool inclusive, node** preds = nullptr) const {
    node* x = head_;
    for (unsigned l = max_level_; l-- > 0;) {
      for (;;) {
        node* next = tx.read(x->lock, x->at(l).succ);
        if (inclusive ? !at_or_before(next, k) : !before(next, k)) break;
        x = next;
      }
      if (preds) preds[l] = x;
    }
    return x;
  }

  node* first_present_from(txn& tx, node* n) const {
    while (n != tail_ && !present(tx, n)) n = succ_of(tx, n);
    return n;
  }

  node* last_present_from(txn& tx, node* n) const {
    while (n != head_ && !present(tx, n)) n = pred_of(tx, n);
    return n;
  }

  node* insert_at(txn& tx, const K& k, V v, unsigned height, version i_time, bool after_equal) {
    if (height == 0 || height > max_level_) throw std::invalid_argument("skip_list: height out of range");
    std::array<node*, max_supported_level> preds;
    descend(tx, k, after_equal, preds.data());
    node* fresh = node::make(node_kind::item, k, v, height, i_time);
    tx.track_allocation(fresh, &node::destroy);
    for (unsigned l = 0; l < height; ++l) {
      node* p = preds[l];
      node* s = tx.read(p->lock, p->at(l).succ);
      fresh->at(l).pred.store_direct(p);
      fresh->at(l).succ.store_direct(s);
      tx.write(p->lock, p->at(l).succ, fresh);
      tx.write(s->lock, s->at(l).pred, fresh);
    }
    return fresh;
  }

  unsigned max_level_;
  [[no_unique_address]] Compare cmp_;
  node* head_;
  node* tail_;
};

}  // namespace skiphash
