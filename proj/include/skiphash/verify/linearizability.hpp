#pragma once

#include <cstddef>
#include <string>
#include <variant>
#include <vector>

#include "skiphash/verify/history.hpp"

namespace skiphash::verify {

struct linearizable {};

/// `window` holds indices into the checked history: the operation whose
/// response could not be passed and every operation still pending then.
struct counterexample {
  std::vector<std::size_t> window;
  std::string reason;
};

struct budget_exceeded {
  std::size_t nodes = 0;
};

using check_result = std::variant<linearizable, counterexample, budget_exceeded>;

struct check_options {
  /// Upper bound on search steps (linearization attempts).
  std::size_t node_limit = 50'000'000;
};

/// Wing-Gong search with Lowe's memoization of (linearized set, state)
/// configurations, against the sequential oracle map starting empty.
/// Operations with equal invoke/response stamps are treated as concurrent.
/// Throws std::invalid_argument if a thread's events overlap.
check_result check_linearizable(const history& h, const check_options& opt = {});

inline bool is_linearizable(const check_result& r) { return std::holds_alternative<linearizable>(r); }

std::string describe(const history& h, const check_result& r);

}  // namespace skiphash::verify
