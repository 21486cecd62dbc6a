#include "skiphash/stm.hpp"

#include <algorithm>
#include <array>
#include <mutex>
#include <thread>

#if defined(__x86_64__) || defined(__i386__)
#include <immintrin.h>
#define SKIPHASH_PAUSE() _mm_pause()
#else
#define SKIPHASH_PAUSE() std::atomic_signal_fence(std::memory_order_seq_cst)
#endif

namespace skiphash::stm {

namespace detail {

inline constexpr stamp idle = std::numeric_limits<stamp>::max();
inline constexpr std::size_t reclaim_threshold = 128;
inline constexpr unsigned backoff_cap_log2 = 16;

struct alignas(64) slot_state {
  // Start stamp of the running transaction, or `idle`.
  std::atomic<stamp> active{idle};
  std::atomic<bool> used{false};
};

struct retired_batch {
  stamp when;
  std::vector<txn::object_entry> objects;
};

struct runtime {
  alignas(64) std::atomic<stamp> clock{0};
  std::array<slot_state, max_threads> slots;

  std::mutex mu;
  std::vector<retired_batch> orphans;
  thread_stats exited;
  std::vector<thread_desc*> live;

  std::atomic<std::uint64_t> retired{0};
  std::atomic<std::uint64_t> reclaimed{0};

  ~runtime() {
    for (auto& b : orphans)
      for (auto& o : b.objects) o.destroy(o.ptr);
  }
};

runtime& rt() {
  static runtime r;
  return r;
}

unsigned claim_slot() {
  auto& r = rt();
  for (unsigned i = 0; i < max_threads; ++i) {
    bool expected = false;
    if (r.slots[i].used.compare_exchange_strong(expected, true)) return i;
  }
  throw std::runtime_error("stm: too many concurrent threads");
}

stamp oldest_active() {
  stamp m = idle;
  for (auto& s : rt().slots) m = std::min(m, s.active.load(std::memory_order_seq_cst));
  return m;
}

// Destroys every batch whose objects can no longer be referenced by a live
// transaction: all of them started at or after the batch's commit stamp.
std::uint64_t drain(std::vector<retired_batch>& batches, stamp horizon) {
  std::uint64_t n = 0;
  auto keep = std::partition(batches.begin(), batches.end(),
                             [&](const retired_batch& b) { return b.when > horizon; });
  for (auto it = keep; it != batches.end(); ++it) {
    for (auto& o : it->objects) o.destroy(o.ptr);
    n += it->objects.size();
  }
  batches.erase(keep, batches.end());
  return n;
}

struct thread_desc {
  unsigned slot;
  thread_stats stats;
  std::vector<retired_batch> limbo;
  std::size_t pending = 0;
  txn tx;

  thread_desc() : slot{claim_slot()}, tx{*this, slot} {
    std::lock_guard lk{rt().mu};
    rt().live.push_back(this);
  }

  ~thread_desc() {
    auto& r = rt();
    reclaim();
    std::lock_guard lk{r.mu};
    for (auto& b : limbo) r.orphans.push_back(std::move(b));
    r.exited += stats;
    std::erase(r.live, this);
    r.slots[slot].active.store(idle, std::memory_order_release);
    r.slots[slot].used.store(false, std::memory_order_release);
  }

  void retire_batch(stamp when, std::vector<txn::object_entry>& objects) {
    pending += objects.size();
    rt().retired.fetch_add(objects.size(), std::memory_order_relaxed);
    limbo.push_back({when, std::move(objects)});
    objects.clear();
    if (pending >= reclaim_threshold) reclaim();
  }

  void reclaim() {
    if (limbo.empty()) return;
    auto n = drain(limbo, oldest_active());
    pending -= std::min<std::size_t>(pending, n);
    rt().reclaimed.fetch_add(n, std::memory_order_relaxed);
  }
};

thread_desc& self() {
  thread_local thread_desc d;
  return d;
}

txn& current_txn() { return self().tx; }

}  // namespace detail

const char* to_string(txn_mode m) noexcept {
  switch (m) {
    case txn_mode::read_write: return "read_write";
    case txn_mode::read_only: return "read_only";
    case txn_mode::try_once: return "try_once";
    case txn_mode::read_write_no_local_undo: return "read_write_no_local_undo";
  }
  return "?";
}

thread_stats& thread_stats::operator+=(const thread_stats& o) noexcept {
  commits += o.commits;
  read_only_commits += o.read_only_commits;
  aborts += o.aborts;
  reads += o.reads;
  shared_writes += o.shared_writes;
  acquisitions += o.acquisitions;
  return *this;
}

thread_stats operator-(thread_stats a, const thread_stats& b) noexcept {
  a.commits -= b.commits;
  a.read_only_commits -= b.read_only_commits;
  a.aborts -= b.aborts;
  a.reads -= b.reads;
  a.shared_writes -= b.shared_writes;
  a.acquisitions -= b.acquisitions;
  return a;
}

txn::txn(detail::thread_desc& owner, unsigned slot) noexcept
    : owner_{&owner},
      stats_{&owner.stats},
      lock_word_{detail::owner_word(slot)},
      backoff_rng_{slot + 1} {}

bool txn::owns(const orec& o) const noexcept {
  return o.word_.load(std::memory_order_relaxed) == lock_word_;
}

void txn::acquire(orec& o) {
  if (mode_ == txn_mode::read_only) throw std::logic_error("stm: write inside a read-only transaction");
  std::uint64_t w = o.word_.load(std::memory_order_acquire);
  if (detail::is_locked(w)) {
    if (w == lock_word_) return;
    fail();
  }
  if (detail::version_of(w) > start_) fail();
  if (!o.word_.compare_exchange_strong(w, lock_word_, std::memory_order_acq_rel, std::memory_order_acquire))
    fail();
  owned_.push_back({&o, w});
  ++stats_->acquisitions;
  ++stats_->shared_writes;
}

void txn::track_allocation(void* p, destroy_fn destroy) { allocs_.push_back({p, destroy}); }

void txn::retire(void* p, destroy_fn destroy) { frees_.push_back({p, destroy}); }

void txn::on_commit(std::function<void()> fn) { commit_hooks_.push_back(std::move(fn)); }

void txn::restart() { fail(); }

void txn::begin(txn_mode mode) {
  auto& r = detail::rt();
  mode_ = mode;
  active_ = true;
  start_ = r.clock.load(std::memory_order_acquire);
  r.slots[owner_->slot].active.store(start_, std::memory_order_seq_cst);
}

bool txn::validate() const noexcept {
  for (const auto& e : reads_) {
    std::uint64_t w = e.rec->word_.load(std::memory_order_acquire);
    if (w == e.seen) continue;
    if (w != lock_word_) return false;
    auto it = std::find_if(owned_.begin(), owned_.end(), [&](const owned_entry& o) { return o.rec == e.rec; });
    if (it == owned_.end() || it->prior != e.seen) return false;
  }
  return true;
}

void txn::commit() {
  auto& r = detail::rt();
  stamp when;
  if (owned_.empty()) {
    when = r.clock.load(std::memory_order_acquire);
    if (mode_ == txn_mode::read_only) ++stats_->read_only_commits;
  } else {
    // Validate before ticking the clock so that only committed writers tick
    // it. Every written orec is held from before this point until release.
    if (!validate()) fail();
    when = r.clock.fetch_add(1, std::memory_order_acq_rel) + 1;
    ++stats_->shared_writes;
    for (const auto& o : owned_) {
      o.rec->word_.store(detail::unlocked_word(when, o.prior), std::memory_order_release);
      ++stats_->shared_writes;
    }
  }
  ++stats_->commits;
  allocs_.clear();
  auto hooks = std::move(commit_hooks_);
  commit_hooks_.clear();
  finish();
  if (!frees_.empty()) owner_->retire_batch(when, frees_);
  for (auto& h : hooks) h();
}

void txn::rollback() noexcept {
  for (auto it = undo_.rbegin(); it != undo_.rend(); ++it) {
    it->loc->store(it->prior, std::memory_order_release);
    ++stats_->shared_writes;
  }
  for (const auto& o : owned_) {
    o.rec->word_.store(detail::bump_incarnation(o.prior), std::memory_order_release);
    ++stats_->shared_writes;
  }
  for (auto& a : allocs_) a.destroy(a.ptr);
  allocs_.clear();
  frees_.clear();
  commit_hooks_.clear();
  ++stats_->aborts;
  ++attempt_;
  finish();
}

void txn::finish() noexcept {
  active_ = false;
  reads_.clear();
  owned_.clear();
  undo_.clear();
  detail::rt().slots[owner_->slot].active.store(detail::idle, std::memory_order_release);
}

void txn::backoff() noexcept {
  unsigned shift = std::min(attempt_, detail::backoff_cap_log2);
  std::uint64_t spins = std::uniform_int_distribution<std::uint64_t>{0, (std::uint64_t{1} << shift) - 1}(backoff_rng_);
  for (std::uint64_t i = 0; i < spins; ++i) SKIPHASH_PAUSE();
  // The conflicting owner may be descheduled; give it the CPU.
  if (attempt_ >= 2) std::this_thread::yield();
}

stamp clock_now() noexcept { return detail::rt().clock.load(std::memory_order_acquire); }

const thread_stats& this_thread_stats() noexcept { return detail::self().stats; }

thread_stats global_stats() {
  auto& r = detail::rt();
  std::lock_guard lk{r.mu};
  thread_stats total = r.exited;
  for (auto* d : r.live) total += d->stats;
  return total;
}

reclaim_stats reclamation() noexcept {
  auto& r = detail::rt();
  return {r.retired.load(std::memory_order_relaxed), r.reclaimed.load(std::memory_order_relaxed)};
}

void reclaim_now() {
  auto& d = detail::self();
  d.reclaim();
  auto& r = detail::rt();
  std::lock_guard lk{r.mu};
  auto n = detail::drain(r.orphans, detail::oldest_active());
  r.reclaimed.fetch_add(n, std::memory_order_relaxed);
}

}  // namespace skiphash::stm
