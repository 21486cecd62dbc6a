#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <string_view>

#include "skiphash/skip_hash.hpp"

namespace skiphash {

/// Percentages of lookups, inserts, removes and range queries.
struct op_mix {
  unsigned lookup = 0;
  unsigned insert = 0;
  unsigned remove = 0;
  unsigned range = 0;

  /// Updates split evenly between inserts and removes; an odd remainder
  /// goes to lookups.
  static op_mix from_update(unsigned lookup, unsigned update, unsigned range) noexcept {
    return {lookup + update % 2, update / 2, update / 2, range};
  }

  unsigned total() const noexcept { return lookup + insert + remove + range; }
  bool valid() const noexcept { return total() == 100; }

  /// Draw an operation kind according to the mix.
  template <class Rng>
  op_kind draw(Rng& rng) const {
    auto p = std::uniform_int_distribution<unsigned>{0, 99}(rng);
    if (p < lookup) return op_kind::lookup;
    if (p < lookup + insert) return op_kind::insert;
    if (p < lookup + insert + remove) return op_kind::remove;
    return op_kind::range;
  }

  /// "l:i:r:q" (or "l:u:q" with updates split evenly).
  static std::optional<op_mix> parse(std::string_view s);
  std::string str() const;

  friend bool operator==(const op_mix&, const op_mix&) = default;
};

}  // namespace skiphash
