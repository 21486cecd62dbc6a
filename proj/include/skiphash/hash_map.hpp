#pragma once

#include <bit>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <stdexcept>
#include <type_traits>

#include "skiphash/stm.hpp"

namespace skiphash {

/// Well-mixed 64-bit hash. Integers go through a multiplicative finalizer;
/// everything else through std::hash and then the same finalizer.
template <class K>
struct mix_hash {
  std::uint64_t operator()(const K& k) const noexcept {
    std::uint64_t x;
    if constexpr (std::is_integral_v<K>) {
      x = static_cast<std::uint64_t>(k);
    } else {
      x = static_cast<std::uint64_t>(std::hash<K>{}(k));
    }
    x ^= x >> 30;
    x *= 0xbf58476d1ce4e5b9ULL;
    x ^= x >> 27;
    x *= 0x94d049bb133111ebULL;
    x ^= x >> 31;
    return x;
  }
};

enum class insert_result { inserted, already_present };
enum class remove_result { removed, absent };

/// Closed-addressing hash table from keys to `T*`, for use inside an
/// enclosing transaction. One orec per bucket covers the whole chain.
/// No resizing: the bucket count is fixed at construction.
template <class K, class T, class Hash = mix_hash<K>, class Equal = std::equal_to<K>>
class hash_map {
 public:
  struct entry {
    entry(const K& k, T* t) : key{k}, target{t} {}
    const K key;
    T* const target;
    stm::tvar<entry*> next;
  };

  struct bucket {
    stm::orec lock;
    stm::tvar<entry*> head;
  };

  explicit hash_map(std::size_t bucket_count, Hash hash = Hash{}, Equal eq = Equal{})
      : buckets_{make_buckets(bucket_count)}, count_{bucket_count}, hash_{hash}, eq_{eq} {}

  hash_map(const hash_map&) = delete;
  hash_map& operator=(const hash_map&) = delete;

  ~hash_map() {
    for (std::size_t i = 0; i < count_; ++i) {
      entry* e = buckets_[i].head.load_direct();
      while (e) {
        entry* next = e->next.load_direct();
        delete e;
        e = next;
      }
    }
  }

  std::size_t bucket_count() const noexcept { return count_; }
  std::size_t bucket_index(const K& k) const noexcept { return hash_(k) % count_; }

  T* get(stm::txn& tx, const K& k) const {
    const bucket& b = buckets_[bucket_index(k)];
    for (entry* e = tx.read(b.lock, b.head); e; e = tx.read(b.lock, e->next))
      if (eq_(e->key, k)) return e->target;
    return nullptr;
  }

  insert_result insert(stm::txn& tx, const K& k, T* target) {
    bucket& b = buckets_[bucket_index(k)];
    entry* head = tx.read(b.lock, b.head);
    for (entry* e = head; e; e = tx.read(b.lock, e->next))
      if (eq_(e->key, k)) return insert_result::already_present;
    entry* fresh = tx.create<entry>(k, target);
    fresh->next.store_direct(head);
    tx.write(b.lock, b.head, fresh);
    return insert_result::inserted;
  }

  remove_result remove(stm::txn& tx, const K& k) {
    bucket& b = buckets_[bucket_index(k)];
    stm::tvar<entry*>* link = &b.head;
    for (entry* e = tx.read(b.lock, b.head); e; e = tx.read(b.lock, e->next)) {
      if (eq_(e->key, k)) {
        tx.write(b.lock, *link, tx.read(b.lock, e->next));
        tx.retire(e);
        return remove_result::removed;
      }
      link = &e->next;
    }
    return remove_result::absent;
  }

  // Quiescent inspection (no concurrent transactions).

  const bucket& bucket_at(std::size_t i) const { return buckets_[i]; }

  template <class F>
  void for_each_direct(F&& fn) const {
    for (std::size_t i = 0; i < count_; ++i)
      for (entry* e = buckets_[i].head.load_direct(); e; e = e->next.load_direct()) fn(i, *e);
  }

  std::size_t size_direct() const {
    std::size_t n = 0;
    for_each_direct([&](std::size_t, const entry&) { ++n; });
    return n;
  }

 private:
  static std::unique_ptr<bucket[]> make_buckets(std::size_t n) {
    if (n == 0) throw std::invalid_argument("hash_map: bucket_count must be positive");
    return std::make_unique<bucket[]>(n);
  }

  std::unique_ptr<bucket[]> buckets_;
  std::size_t count_;
  [[no_unique_address]] Hash hash_;
  [[no_unique_address]] Equal eq_;
};

/// Smallest prime >= n (n >= 2).
constexpr std::size_t next_prime(std::size_t n) noexcept {
  if (n <= 2) return 2;
  if (n % 2 == 0) ++n;
  for (;; n += 2) {
    bool prime = true;
    for (std::size_t d = 3; d * d <= n; d += 2)
      if (n % d == 0) {
        prime = false;
        break;
      }
    if (prime) return n;
  }
}

/// Prime bucket count keeping utilization at or below 70% for `population`.
constexpr std::size_t buckets_for(std::size_t population) noexcept {
  return next_prime(population * 10 / 7 + 1);
}

}  // namespace skiphash
