#include "skiphash/op_mix.hpp"

#include <charconv>
#include <vector>

namespace skiphash {

std::optional<op_mix> op_mix::parse(std::string_view s) {
  std::vector<unsigned> parts;
  while (true) {
    auto colon = s.find(':');
    auto field = s.substr(0, colon);
    unsigned v = 0;
    auto [p, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
    if (ec != std::errc{} || p != field.data() + field.size() || field.empty()) return std::nullopt;
    parts.push_back(v);
    if (colon == std::string_view::npos) break;
    s.remove_prefix(colon + 1);
  }
  op_mix m;
  if (parts.size() == 4)
    m = {parts[0], parts[1], parts[2], parts[3]};
  else if (parts.size() == 3)
    m = from_update(parts[0], parts[1], parts[2]);
  else
    return std::nullopt;
  if (!m.valid()) return std::nullopt;
  return m;
}

std::string op_mix::str() const {
  return std::to_string(lookup) + ":" + std::to_string(insert) + ":" + std::to_string(remove) + ":" +
         std::to_string(range);
}

}  // namespace skiphash
