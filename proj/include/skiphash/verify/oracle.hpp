#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "skiphash/op_mix.hpp"
#include "skiphash/skip_hash.hpp"

namespace skiphash::verify {

using map_key = std::int64_t;
using map_value = std::int64_t;
using range_entries = std::vector<std::pair<map_key, map_value>>;

/// The integer map every harness in this module drives.
using int_map = skip_hash<map_key, map_value>;

/// One map operation. `a` is the key (or the range's lower bound); `b` is
/// the inserted value or the range's upper bound.
struct operation {
  op_kind kind = op_kind::lookup;
  map_key a = 0;
  map_value b = 0;

  friend bool operator==(const operation&, const operation&) = default;
};

/// Result of an operation: bool for insert/remove, an optional value for
/// lookup, an optional key for point queries, the pairs for range.
using outcome = std::variant<bool, std::optional<std::int64_t>, range_entries>;

std::string to_string(const operation& op);
std::string to_string(const outcome& o);

/// Sequential reference map with the same semantics as the skip hash.
class oracle_map {
 public:
  std::optional<map_value> lookup(map_key k) const;
  bool insert(map_key k, map_value v);
  bool remove(map_key k);
  std::optional<map_key> ceil(map_key k) const;
  std::optional<map_key> floor(map_key k) const;
  std::optional<map_key> succ(map_key k) const;
  std::optional<map_key> pred(map_key k) const;
  range_entries range(map_key l, map_key r) const;

  outcome apply(const operation& op);

  const std::map<map_key, map_value>& contents() const noexcept { return m_; }
  friend bool operator==(const oracle_map&, const oracle_map&) = default;

 private:
  std::map<map_key, map_value> m_;
};

/// Sequential ground truth for an operation sequence on an empty map.
std::vector<outcome> oracle_apply(std::span<const operation> ops);

/// Run `op` through a skip hash session.
template <class Session>
outcome apply(Session& s, const operation& op) {
  switch (op.kind) {
    case op_kind::lookup: return s.lookup(op.a);
    case op_kind::insert: return s.insert(op.a, op.b);
    case op_kind::remove: return s.remove(op.a);
    case op_kind::ceil: return s.ceil(op.a);
    case op_kind::floor: return s.floor(op.a);
    case op_kind::succ: return s.succ(op.a);
    case op_kind::pred: return s.pred(op.a);
    case op_kind::range: {
      range_entries out;
      s.range(op.a, op.b, out);
      return out;
    }
  }
  return false;
}

/// Uniform random operation over keys [0, universe). Range queries use
/// [l, l + range_len]. Point queries are drawn only when `point_queries`
/// is set, taking their share from lookups.
template <class Rng>
operation random_operation(Rng& rng, const op_mix& mix, map_key universe, map_key range_len, bool point_queries = false) {
  std::uniform_int_distribution<map_key> key{0, universe - 1};
  operation op;
  op.kind = mix.draw(rng);
  op.a = key(rng);
  if (op.kind == op_kind::insert) op.b = std::uniform_int_distribution<map_value>{0, 1'000'000}(rng);
  if (op.kind == op_kind::range) op.b = op.a + range_len;
  if (op.kind == op_kind::lookup && point_queries) {
    static constexpr op_kind kinds[] = {op_kind::lookup, op_kind::ceil, op_kind::floor, op_kind::succ, op_kind::pred};
    op.kind = kinds[std::uniform_int_distribution<int>{0, 4}(rng)];
  }
  return op;
}

}  // namespace skiphash::verify
