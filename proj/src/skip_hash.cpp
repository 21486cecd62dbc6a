#include "skiphash/skip_hash.hpp"

#include <array>

namespace skiphash {

namespace {
constexpr std::array<const char*, 3> range_mode_names{"fast_only", "slow_only", "two_path"};
constexpr std::array<const char*, op_kind_count> op_kind_names{"lookup", "insert", "remove", "ceil",
                                                               "floor",  "succ",   "pred",   "range"};
}  // namespace

const char* to_string(range_mode m) noexcept { return range_mode_names[static_cast<std::size_t>(m)]; }

std::optional<range_mode> parse_range_mode(std::string_view s) noexcept {
  for (std::size_t i = 0; i < range_mode_names.size(); ++i)
    if (s == range_mode_names[i]) return static_cast<range_mode>(i);
  return std::nullopt;
}

const char* to_string(op_kind k) noexcept { return op_kind_names[static_cast<std::size_t>(k)]; }

std::optional<op_kind> parse_op_kind(std::string_view s) noexcept {
  for (std::size_t i = 0; i < op_kind_names.size(); ++i)
    if (s == op_kind_names[i]) return static_cast<op_kind>(i);
  return std::nullopt;
}

}  // namespace skiphash
