#include "skiphash/verify/oracle.hpp"

#include <iterator>

namespace skiphash::verify {

std::optional<map_value> oracle_map::lookup(map_key k) const {
  auto it = m_.find(k);
  if (it == m_.end()) return std::nullopt;
  return it->second;
}

bool oracle_map::insert(map_key k, map_value v) { return m_.emplace(k, v).second; }

bool oracle_map::remove(map_key k) { return m_.erase(k) == 1; }

std::optional<map_key> oracle_map::ceil(map_key k) const {
  auto it = m_.lower_bound(k);
  if (it == m_.end()) return std::nullopt;
  return it->first;
}

std::optional<map_key> oracle_map::succ(map_key k) const {
  auto it = m_.upper_bound(k);
  if (it == m_.end()) return std::nullopt;
  return it->first;
}

std::optional<map_key> oracle_map::floor(map_key k) const {
  auto it = m_.upper_bound(k);
  if (it == m_.begin()) return std::nullopt;
  return std::prev(it)->first;
}

std::optional<map_key> oracle_map::pred(map_key k) const {
  auto it = m_.lower_bound(k);
  if (it == m_.begin()) return std::nullopt;
  return std::prev(it)->first;
}

range_entries oracle_map::range(map_key l, map_key r) const {
  range_entries out;
  if (r < l) return out;
  for (auto it = m_.lower_bound(l); it != m_.end() && it->first <= r; ++it) out.emplace_back(*it);
  return out;
}

outcome oracle_map::apply(const operation& op) {
  switch (op.kind) {
    case op_kind::lookup: return lookup(op.a);
    case op_kind::insert: return insert(op.a, op.b);
    case op_kind::remove: return remove(op.a);
    case op_kind::ceil: return ceil(op.a);
    case op_kind::floor: return floor(op.a);
    case op_kind::succ: return succ(op.a);
    case op_kind::pred: return pred(op.a);
    case op_kind::range: return range(op.a, op.b);
  }
  return false;
}

std::vector<outcome> oracle_apply(std::span<const operation> ops) {
  oracle_map m;
  std::vector<outcome> out;
  out.reserve(ops.size());
  for (const auto& op : ops) out.push_back(m.apply(op));
  return out;
}

std::string to_string(const operation& op) {
  std::string s = skiphash::to_string(op.kind);
  s += '(' + std::to_string(op.a);
  if (op.kind == op_kind::insert || op.kind == op_kind::range) s += ',' + std::to_string(op.b);
  return s + ')';
}

std::string to_string(const outcome& o) {
  if (auto* b = std::get_if<bool>(&o)) return *b ? "true" : "false";
  if (auto* v = std::get_if<std::optional<std::int64_t>>(&o)) return *v ? std::to_string(**v) : "none";
  const auto& entries = std::get<range_entries>(o);
  std::string s = "{";
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (i) s += ';';
    s += std::to_string(entries[i].first) + ':' + std::to_string(entries[i].second);
  }
  return s + '}';
}

}  // namespace skiphash::verify
