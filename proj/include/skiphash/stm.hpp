#pragma once

// Word-based, orec-based software transactional memory.
//
// Design summary:
//  - Ownership records (orecs) are embedded in the objects they protect.
//  - Writers acquire orecs eagerly (on first write) and update memory in
//    place, keeping an undo log for rollback.
//  - A single global logical clock, advanced by fetch-and-add, is ticked only
//    by committing transactions that wrote something.
//  - Reads are validated against the start stamp as they happen (no timestamp
//    extension), which gives opacity: an attempt never sees an inconsistent
//    snapshot.
//  - Read-only transactions keep no logs and commit for free.
//  - Memory freed by a committed transaction is held until every transaction
//    that could still reference it has finished.

#include <atomic>
#include <bit>
#include <cstdint>
#include <cstring>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <stdexcept>
#include <type_traits>
#include <utility>
#include <vector>

namespace skiphash::stm {

using stamp = std::uint64_t;

enum class txn_mode : std::uint8_t {
  read_write,
  read_only,
  // Single attempt; the caller learns about a conflict instead of retrying.
  try_once,
  // Retrying read/write mode for bodies whose progress lives in caller-owned
  // locals. The engine never logs those locals, so they survive an abort.
  // Only thread-confined state may be kept this way.
  read_write_no_local_undo,
};

const char* to_string(txn_mode m) noexcept;

namespace detail {

// Unlocked orec word: [version:48][incarnation:15][0]
// Locked orec word:   [owner slot:63][1]
// The incarnation changes whenever an aborting writer releases an orec, so a
// reader that raced with the aborted in-place write cannot mistake the
// restored word for the one it sampled.
inline constexpr std::uint64_t lock_bit = 1;
inline constexpr unsigned version_shift = 16;
inline constexpr std::uint64_t incarnation_mask = 0xfffe;

constexpr bool is_locked(std::uint64_t w) noexcept { return (w & lock_bit) != 0; }
constexpr stamp version_of(std::uint64_t w) noexcept { return w >> version_shift; }
constexpr std::uint64_t unlocked_word(stamp v, std::uint64_t prior) noexcept {
  return (v << version_shift) | (prior & incarnation_mask);
}
constexpr std::uint64_t bump_incarnation(std::uint64_t w) noexcept {
  return (w & ~incarnation_mask) | (((w & incarnation_mask) + 2) & incarnation_mask);
}
constexpr std::uint64_t owner_word(unsigned slot) noexcept {
  return (static_cast<std::uint64_t>(slot) << 1) | lock_bit;
}

// Thrown to unwind a doomed attempt. Deliberately not derived from
// std::exception so that user handlers for std::exception do not swallow it.
struct conflict {};

struct thread_desc;
struct txn_access;

}  // namespace detail

/// Ownership record. Guards every transactional word associated with it.
class orec {
 public:
  orec() noexcept = default;
  orec(const orec&) = delete;
  orec& operator=(const orec&) = delete;

  std::uint64_t raw() const noexcept { return word_.load(std::memory_order_acquire); }
  bool locked() const noexcept { return detail::is_locked(raw()); }
  /// Commit stamp of the last change, or 0 if never written. Only
  /// meaningful while unlocked.
  stamp version() const noexcept { return detail::version_of(raw()); }

 private:
  friend class txn;
  std::atomic<std::uint64_t> word_{0};
};

template <class T>
concept word_sized = std::is_trivially_copyable_v<T> && std::is_default_constructible_v<T> &&
                     sizeof(T) <= sizeof(std::uint64_t);

/// A transactional word. Which orec guards it is decided by the accessor.
template <word_sized T>
class tvar {
 public:
  tvar() noexcept : bits_{encode(T{})} {}
  explicit tvar(T v) noexcept : bits_{encode(v)} {}
  tvar(const tvar&) = delete;
  tvar& operator=(const tvar&) = delete;

  // Non-transactional access, for private (unpublished) or quiescent data.
  T load_direct() const noexcept { return decode(bits_.load(std::memory_order_acquire)); }
  void store_direct(T v) noexcept { bits_.store(encode(v), std::memory_order_release); }

  static std::uint64_t encode(T v) noexcept {
    if constexpr (sizeof(T) == sizeof(std::uint64_t)) {
      return std::bit_cast<std::uint64_t>(v);
    } else {
      std::uint64_t b = 0;
      std::memcpy(&b, &v, sizeof(T));
      return b;
    }
  }
  static T decode(std::uint64_t b) noexcept {
    if constexpr (sizeof(T) == sizeof(std::uint64_t)) {
      return std::bit_cast<T>(b);
    } else {
      T v{};
      std::memcpy(&v, &b, sizeof(T));
      return v;
    }
  }

 private:
  friend class txn;
  std::atomic<std::uint64_t> bits_;
};

/// Per-thread counters. `shared_writes` counts every store this thread made
/// to shared transactional state: data words, orec words and the clock.
struct thread_stats {
  std::uint64_t commits = 0;
  std::uint64_t read_only_commits = 0;
  std::uint64_t aborts = 0;
  std::uint64_t reads = 0;
  std::uint64_t shared_writes = 0;
  std::uint64_t acquisitions = 0;

  thread_stats& operator+=(const thread_stats& o) noexcept;
  friend thread_stats operator-(thread_stats a, const thread_stats& b) noexcept;
};

struct reclaim_stats {
  std::uint64_t retired = 0;
  std::uint64_t reclaimed = 0;
};

using destroy_fn = void (*)(void*);

/// Transaction descriptor. One per thread, reused across attempts.
class txn {
 public:
  struct read_entry {
    const orec* rec;
    std::uint64_t seen;
  };
  struct owned_entry {
    orec* rec;
    std::uint64_t prior;
  };
  struct undo_entry {
    std::atomic<std::uint64_t>* loc;
    std::uint64_t prior;
  };
  struct object_entry {
    void* ptr;
    destroy_fn destroy;
  };

  txn(const txn&) = delete;
  txn& operator=(const txn&) = delete;

  template <word_sized T>
  T read(const orec& o, const tvar<T>& v) {
    return tvar<T>::decode(read_word(o, v.bits_));
  }

  template <word_sized T>
  void write(orec& o, tvar<T>& v, T value) {
    write_word(o, v.bits_, tvar<T>::encode(value));
  }

  /// Take ownership of `o` without writing any word it guards.
  void acquire(orec& o);

  /// Allocate an object owned by this attempt: destroyed if the attempt
  /// aborts, kept if it commits.
  template <class T, class... Args>
  T* create(Args&&... args) {
    T* p = new T(std::forward<Args>(args)...);
    track_allocation(p, [](void* q) { delete static_cast<T*>(q); });
    return p;
  }
  void track_allocation(void* p, destroy_fn destroy);

  /// Free an object once this attempt commits and a grace period elapses.
  /// Dropped if the attempt aborts.
  template <class T>
  void retire(T* p) {
    retire(static_cast<void*>(p), [](void* q) { delete static_cast<T*>(q); });
  }
  void retire(void* p, destroy_fn destroy);

  /// Run `fn` after this attempt commits (never on abort).
  void on_commit(std::function<void()> fn);

  /// Abort the current attempt. Retrying modes run the body again.
  [[noreturn]] void restart();

  bool active() const noexcept { return active_; }
  txn_mode mode() const noexcept { return mode_; }
  stamp start_stamp() const noexcept { return start_; }
  unsigned attempt() const noexcept { return attempt_; }
  bool owns(const orec& o) const noexcept;

  const std::vector<read_entry>& read_set() const noexcept { return reads_; }
  const std::vector<undo_entry>& undo_log() const noexcept { return undo_; }
  const std::vector<owned_entry>& owned() const noexcept { return owned_; }
  const std::vector<object_entry>& alloc_log() const noexcept { return allocs_; }
  const std::vector<object_entry>& free_log() const noexcept { return frees_; }

 private:
  friend struct detail::thread_desc;
  friend struct detail::txn_access;

  txn(detail::thread_desc& owner, unsigned slot) noexcept;

  std::uint64_t read_word(const orec& o, const std::atomic<std::uint64_t>& loc) {
    ++stats_->reads;
    std::uint64_t w1 = o.word_.load(std::memory_order_acquire);
    if (detail::is_locked(w1)) {
      if (w1 == lock_word_) return loc.load(std::memory_order_relaxed);
      fail();
    }
    std::uint64_t v = loc.load(std::memory_order_acquire);
    std::uint64_t w2 = o.word_.load(std::memory_order_acquire);
    if (w1 != w2 || detail::version_of(w1) > start_) fail();
    if (mode_ != txn_mode::read_only) reads_.push_back({&o, w1});
    return v;
  }

  void write_word(orec& o, std::atomic<std::uint64_t>& loc, std::uint64_t value) {
    acquire(o);
    undo_.push_back({&loc, loc.load(std::memory_order_relaxed)});
    loc.store(value, std::memory_order_release);
    ++stats_->shared_writes;
  }

  [[noreturn]] void fail() { throw detail::conflict{}; }

  void begin(txn_mode mode);
  void commit();  // throws detail::conflict on failed validation
  void rollback() noexcept;
  void finish() noexcept;
  void backoff() noexcept;
  bool validate() const noexcept;

  detail::thread_desc* owner_;
  thread_stats* stats_;
  std::uint64_t lock_word_;
  txn_mode mode_ = txn_mode::read_write;
  bool active_ = false;
  stamp start_ = 0;
  unsigned attempt_ = 0;
  std::vector<read_entry> reads_;
  std::vector<owned_entry> owned_;
  std::vector<undo_entry> undo_;
  std::vector<object_entry> allocs_;
  std::vector<object_entry> frees_;
  std::vector<std::function<void()>> commit_hooks_;
  std::minstd_rand backoff_rng_;
};

namespace detail {

txn& current_txn();

struct txn_access {
  static void begin(txn& tx, txn_mode m) {
    tx.attempt_ = 0;
    tx.begin(m);
  }
  static void retry(txn& tx, txn_mode m) { tx.begin(m); }
  static void commit(txn& tx) { tx.commit(); }
  static void rollback(txn& tx) noexcept { tx.rollback(); }
  static void backoff(txn& tx) noexcept { tx.backoff(); }
};

}  // namespace detail

/// Run `body` as a transaction, retrying until it commits. A call made
/// while a transaction is already running on this thread flattens into it.
template <class F>
auto atomically(F&& body, txn_mode mode = txn_mode::read_write) {
  using result_t = std::invoke_result_t<F&, txn&>;
  if (mode == txn_mode::try_once) throw std::invalid_argument("atomically: use try_once()");
  using access = detail::txn_access;
  txn& tx = detail::current_txn();
  if (tx.active()) return body(tx);
  access::begin(tx, mode);
  for (;;) {
    try {
      if constexpr (std::is_void_v<result_t>) {
        body(tx);
        access::commit(tx);
        return;
      } else {
        result_t r = body(tx);
        access::commit(tx);
        return r;
      }
    } catch (const detail::conflict&) {
      access::rollback(tx);
      access::backoff(tx);
    } catch (...) {
      access::rollback(tx);
      throw;
    }
    access::retry(tx, mode);
  }
}

/// Run `body` once. Returns the result (or true for void bodies) on commit,
/// and an empty optional (or false) on the first conflict.
template <class F>
auto try_once(F&& body) {
  using result_t = std::invoke_result_t<F&, txn&>;
  using outcome_t = std::conditional_t<std::is_void_v<result_t>, bool, std::optional<result_t>>;
  txn& tx = detail::current_txn();
  if (tx.active()) {
    if constexpr (std::is_void_v<result_t>) {
      body(tx);
      return outcome_t{true};
    } else {
      return outcome_t{body(tx)};
    }
  }
  using access = detail::txn_access;
  access::begin(tx, txn_mode::try_once);
  try {
    if constexpr (std::is_void_v<result_t>) {
      body(tx);
      access::commit(tx);
      return outcome_t{true};
    } else {
      result_t r = body(tx);
      access::commit(tx);
      return outcome_t{std::move(r)};
    }
  } catch (const detail::conflict&) {
    access::rollback(tx);
    return outcome_t{};
  } catch (...) {
    access::rollback(tx);
    throw;
  }
}

/// Current value of the global clock.
stamp clock_now() noexcept;

/// Counters of the calling thread.
const thread_stats& this_thread_stats() noexcept;

/// Counters summed over every thread that has ever run a transaction.
thread_stats global_stats();

reclaim_stats reclamation() noexcept;

/// Reclaim whatever the grace-period rule allows from this thread's limbo
/// list and from lists left behind by exited threads.
void reclaim_now();

/// Maximum number of threads that may run transactions at once.
inline constexpr unsigned max_threads = 256;

}  // namespace skiphash::stm
