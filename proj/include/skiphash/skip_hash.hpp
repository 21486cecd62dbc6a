#pragma once

#include <array>
#include <atomic>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <mutex>
#include <optional>
#include <random>
#include <stdexcept>
#include <string_view>
#include <utility>
#include <vector>

#include "skiphash/hash_map.hpp"
#include "skiphash/rqc.hpp"
#include "skiphash/skip_list.hpp"
#include "skiphash/stm.hpp"

namespace skiphash {

enum class range_mode : std::uint8_t { fast_only, slow_only, two_path };

const char* to_string(range_mode m) noexcept;
std::optional<range_mode> parse_range_mode(std::string_view s) noexcept;

enum class op_kind : std::uint8_t { lookup, insert, remove, ceil, floor, succ, pred, range };
inline constexpr std::size_t op_kind_count = 8;

const char* to_string(op_kind k) noexcept;
std::optional<op_kind> parse_op_kind(std::string_view s) noexcept;

/// Test-only interposition points on the range query paths. Leave the
/// config's hook pointer null in production; the only cost is a branch.
struct range_hooks {
  // Inside the fast-path transaction, after visiting `step` nodes.
  std::function<void(stm::txn&, std::size_t step)> fast_step;
  // After the slow-path setup transaction committed with version `ver`.
  std::function<void(version ver)> after_setup;
  // At the start of every slow-path traversal attempt.
  std::function<void(stm::txn&, unsigned attempt)> slow_attempt;
  // Inside the slow-path transaction, after collecting `step` pairs.
  std::function<void(stm::txn&, std::size_t step)> slow_step;
  // After the traversal, before the range op deregisters.
  std::function<void(version ver)> before_after_range;
};

struct skip_hash_config {
  std::size_t bucket_count = 714341;
  unsigned max_level = 20;
  unsigned fast_path_tries = 3;
  range_mode mode = range_mode::two_path;
  const range_hooks* hooks = nullptr;
};

struct skip_hash_stats {
  std::uint64_t fast_path_successes = 0;
  std::uint64_t fast_path_failures = 0;
  std::uint64_t slow_path_entries = 0;
  std::array<std::uint64_t, op_kind_count> aborts_by_op{};

  std::uint64_t aborts() const noexcept {
    std::uint64_t n = 0;
    for (auto a : aborts_by_op) n += a;
    return n;
  }

  skip_hash_stats& operator+=(const skip_hash_stats& o) noexcept {
    fast_path_successes += o.fast_path_successes;
    fast_path_failures += o.fast_path_failures;
    slow_path_entries += o.slow_path_entries;
    for (std::size_t i = 0; i < op_kind_count; ++i) aborts_by_op[i] += o.aborts_by_op[i];
    return *this;
  }
};

/// Concurrent ordered map: a transactional hash map routing keys to the
/// nodes of a doubly linked skip list, plus a range query coordinator for
/// linearizable range queries that fall back from a single-transaction fast
/// path to a versioned slow path.
///
/// All operations go through a session, which carries the per-thread state
/// (height RNG, removal buffer, counters). Sessions are thread-confined; the
/// map itself may be shared freely.
template <class K, class V, class Hash = mix_hash<K>, class Compare = std::less<K>, class Equal = std::equal_to<K>>
class skip_hash {
 public:
  using key_type = K;
  using mapped_type = V;
  using list_type = skip_list<K, V, Compare>;
  using node = typename list_type::node;
  using map_type = hash_map<K, node, Hash, Equal>;
  using coordinator = range_coordinator<list_type>;
  using entry = std::pair<K, V>;
  using txn = stm::txn;

  class session;

  explicit skip_hash(skip_hash_config cfg = {}, Hash hash = Hash{}, Compare cmp = Compare{}, Equal eq = Equal{})
      : cfg_{cfg}, list_{cfg.max_level, cmp}, map_{cfg.bucket_count, hash, eq}, rqc_{list_} {}

  skip_hash(const skip_hash&) = delete;
  skip_hash& operator=(const skip_hash&) = delete;

  ~skip_hash() = default;

  session open_session(std::uint64_t seed = 0) { return session{*this, seed}; }

  const skip_hash_config& config() const noexcept { return cfg_; }

  /// Counters merged from every closed session.
  skip_hash_stats stats() const {
    std::lock_guard lk{stats_mu_};
    return closed_stats_;
  }

  std::size_t open_sessions() const noexcept { return open_sessions_.load(); }

  /// Times remove() found a node whose r_time was already set. Stays zero.
  std::uint64_t r_time_rewrites() const noexcept { return r_time_rewrites_.load(); }

  // Internals, exposed for verification and tests.
  list_type& list() noexcept { return list_; }
  const list_type& list() const noexcept { return list_; }
  map_type& map() noexcept { return map_; }
  const map_type& map() const noexcept { return map_; }
  coordinator& rqc() noexcept { return rqc_; }
  const coordinator& rqc() const noexcept { return rqc_; }

  /// Whether n may serve as a stopping point for a slow-path range query
  /// with version ver: sentinels always; other nodes iff inserted before the
  /// query and not removed before it.
  bool is_safe(txn& tx, node* n, version ver) const {
    if (n->is_sentinel()) return true;
    if (n->i_time >= ver) return false;
    version r = tx.read(n->lock, n->r_time);
    return r == no_time || r >= ver;
  }

  /// First safe node strictly after n (n != tail).
  node* next_safe(txn& tx, node* n, version ver) const {
    n = list_.succ_of(tx, n);
    while (!is_safe(tx, n, ver)) n = list_.succ_of(tx, n);
    return n;
  }

  /// Number of logically present keys, at quiescence.
  std::size_t size_direct() const { return map_.size_direct(); }

 private:
  friend class session;

  skip_hash_config cfg_;
  list_type list_;
  map_type map_;
  coordinator rqc_;
  mutable std::mutex stats_mu_;
  skip_hash_stats closed_stats_;
  std::atomic<std::size_t> open_sessions_{0};
  std::atomic<std::uint64_t> r_time_rewrites_{0};
};

template <class K, class V, class Hash, class Compare, class Equal>
class skip_hash<K, V, Hash, Compare, Equal>::session {
 public:
  session(session&& o) noexcept
      : map_{std::exchange(o.map_, nullptr)}, rng_{o.rng_}, buffer_{o.buffer_}, stats_{o.stats_} {
    o.buffer_.clear();
  }
  session& operator=(session&&) = delete;
  session(const session&) = delete;

  ~session() {
    if (!map_) return;
    flush();
    {
      std::lock_guard lk{map_->stats_mu_};
      map_->closed_stats_ += stats_;
    }
    map_->open_sessions_.fetch_sub(1);
  }

  std::optional<V> lookup(const K& k) {
    counted c{*this, op_kind::lookup};
    return stm::atomically(
        [&](txn& tx) -> std::optional<V> {
          node* n = map_->map_.get(tx, k);
          if (!n) return std::nullopt;
          return tx.read(n->lock, n->val);
        },
        stm::txn_mode::read_only);
  }

  bool insert(const K& k, V v) {
    counted c{*this, op_kind::insert};
    unsigned h = random_height(rng_, map_->list_.max_level());
    return stm::atomically([&](txn& tx) {
      if (map_->map_.get(tx, k)) return false;
      version i_time = map_->rqc_.on_update(tx);
      // Any node still holding k is logically deleted.
      node* n = map_->list_.insert_after_logical_deletes(tx, k, v, h, i_time);
      map_->map_.insert(tx, k, n);
      return true;
    });
  }

  bool remove(const K& k) {
    counted c{*this, op_kind::remove};
    node* victim = stm::atomically([&](txn& tx) -> node* {
      node* n = map_->map_.get(tx, k);
      if (!n) return nullptr;
      map_->map_.remove(tx, k);
      if (tx.read(n->lock, n->r_time) != no_time) tx.on_commit([m = map_] { m->r_time_rewrites_.fetch_add(1); });
      tx.write(n->lock, n->r_time, map_->rqc_.on_update(tx));
      return n;
    });
    if (!victim) return false;
    map_->rqc_.after_remove(buffer_, victim);
    return true;
  }

  std::optional<K> ceil(const K& k) {
    return point(op_kind::ceil, [&](txn& tx) -> node* {
      if (node* n = map_->map_.get(tx, k)) return n;
      return map_->list_.ceil_node(tx, k);
    });
  }

  std::optional<K> succ(const K& k) {
    return point(op_kind::succ, [&](txn& tx) -> node* {
      if (node* n = map_->map_.get(tx, k)) return map_->list_.next_present(tx, n);
      return map_->list_.succ_node(tx, k);
    });
  }

  std::optional<K> floor(const K& k) {
    return point(op_kind::floor, [&](txn& tx) -> node* {
      if (node* n = map_->map_.get(tx, k)) return n;
      return map_->list_.floor_node(tx, k);
    });
  }

  std::optional<K> pred(const K& k) {
    return point(op_kind::pred, [&](txn& tx) -> node* {
      if (node* n = map_->map_.get(tx, k)) return map_->list_.prev_present(tx, n);
      return map_->list_.pred_node(tx, k);
    });
  }

  /// Collect every pair with l <= key <= r into `out` (cleared first), in
  /// key order. Returns the number of pairs. l > r yields nothing.
  std::size_t range(const K& l, const K& r, std::vector<entry>& out) {
    out.clear();
    if (map_->list_.key_less(r, l)) return 0;
    counted c{*this, op_kind::range};
    switch (map_->cfg_.mode) {
      case range_mode::fast_only:
        while (!fast_attempt(l, r, out)) {
        }
        break;
      case range_mode::slow_only:
        slow_path(l, r, out);
        break;
      case range_mode::two_path: {
        for (unsigned i = 0; i < map_->cfg_.fast_path_tries; ++i)
          if (fast_attempt(l, r, out)) return out.size();
        slow_path(l, r, out);
        break;
      }
    }
    return out.size();
  }

  /// One fast-path attempt: a single transaction that does not retry.
  /// Returns false on conflict (with `out` cleared).
  bool range_fast(const K& l, const K& r, std::vector<entry>& out) {
    counted c{*this, op_kind::range};
    return fast_attempt(l, r, out);
  }

  /// Run the slow path directly, regardless of the configured mode.
  std::size_t range_slow_path(const K& l, const K& r, std::vector<entry>& out) {
    out.clear();
    if (map_->list_.key_less(r, l)) return 0;
    counted c{*this, op_kind::range};
    slow_path(l, r, out);
    return out.size();
  }

  /// Push buffered removals to the coordinator now.
  void flush() {
    if (map_) map_->rqc_.flush(buffer_);
  }

  std::size_t buffered() const noexcept { return buffer_.size(); }
  const skip_hash_stats& stats() const noexcept { return stats_; }
  std::mt19937_64& rng() noexcept { return rng_; }
  skip_hash& owner() const noexcept { return *map_; }

 private:
  friend class skip_hash;

  session(skip_hash& m, std::uint64_t seed) : map_{&m}, rng_{seed} { m.open_sessions_.fetch_add(1); }

  // Attributes aborts on this thread during one operation to its kind.
  struct counted {
    counted(session& s, op_kind k) : s_{s}, k_{k}, before_{stm::this_thread_stats().aborts} {}
    ~counted() { s_.stats_.aborts_by_op[static_cast<std::size_t>(k_)] += stm::this_thread_stats().aborts - before_; }
    session& s_;
    op_kind k_;
    std::uint64_t before_;
  };

  template <class F>
  std::optional<K> point(op_kind kind, F&& find) {
    counted c{*this, kind};
    return stm::atomically(
        [&](txn& tx) -> std::optional<K> {
          node* n = find(tx);
          if (n->is_sentinel()) return std::nullopt;
          return n->key;
        },
        stm::txn_mode::read_only);
  }

  bool fast_attempt(const K& l, const K& r, std::vector<entry>& out) {
    const range_hooks* hooks = map_->cfg_.hooks;
    auto& sl = map_->list_;
    bool ok = stm::try_once([&](txn& tx) {
      out.clear();
      node* n = sl.ceil_node(tx, l);
      std::size_t step = 0;
      while (!sl.after(n, r)) {
        if (sl.present(tx, n)) out.emplace_back(n->key, tx.read(n->lock, n->val));
        n = sl.succ_of(tx, n);
        if (hooks && hooks->fast_step) hooks->fast_step(tx, ++step);
      }
    });
    if (ok) {
      ++stats_.fast_path_successes;
    } else {
      ++stats_.fast_path_failures;
      out.clear();
    }
    return ok;
  }

  void slow_path(const K& l, const K& r, std::vector<entry>& out) {
    const range_hooks* hooks = map_->cfg_.hooks;
    auto& sl = map_->list_;
    node* start = nullptr;
    typename coordinator::ticket t;
    // Finding the start node and registering in one transaction makes the
    // start node safe for this query.
    stm::atomically([&](txn& tx) {
      start = sl.ceil_node(tx, l);
      t = map_->rqc_.on_range(tx);
    });
    ++stats_.slow_path_entries;
    if (hooks && hooks->after_setup) hooks->after_setup(t.ver);

    out.clear();
    node* n = start;
    std::size_t step = 0;
    // n and out persist across aborts: each attempt resumes from the last
    // safe node reached.
    stm::atomically(
        [&](txn& tx) {
          if (hooks && hooks->slow_attempt) hooks->slow_attempt(tx, tx.attempt());
          while (!sl.after(n, r)) {
            node* next = map_->next_safe(tx, n, t.ver);
            V v = tx.read(n->lock, n->val);
            out.emplace_back(n->key, v);
            n = next;
            if (hooks && hooks->slow_step) hooks->slow_step(tx, ++step);
          }
        },
        stm::txn_mode::read_write_no_local_undo);

    if (hooks && hooks->before_after_range) hooks->before_after_range(t.ver);
    map_->rqc_.after_range(t);
  }

  skip_hash* map_;
  std::mt19937_64 rng_;
  removal_buffer<node> buffer_;
  skip_hash_stats stats_;
};

}  // namespace skiphash
