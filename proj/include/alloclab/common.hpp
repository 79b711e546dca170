// SPDX-License-Identifier: Apache-2.0
//
// Shared error types and small numeric helpers used across the library.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace alloclab {

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();
inline constexpr double kNegInfinity = -std::numeric_limits<double>::infinity();
inline constexpr double kQuietNaN = std::numeric_limits<double>::quiet_NaN();

// ---------------------------------------------------------------------------
// Error taxonomy.  Every throwing operation documents which of these it uses;
// callers can catch the broad std:: bases or the specific types below.
// ---------------------------------------------------------------------------

/// A parameter is outside the mathematical domain of the requested object
/// (e.g. a weight parameter outside (0, radius), a negative count).
struct DomainError : std::domain_error {
  using std::domain_error::domain_error;
};

/// A requested target value cannot be attained by the function being
/// inverted (e.g. a mean target at or above the maximum attainable mean).
struct RangeError : std::out_of_range {
  using std::out_of_range::out_of_range;
};

/// An iterative computation failed to meet its tolerance within its
/// iteration budget.
struct NonConvergenceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// The conditioning event has probability zero (e.g. a total that exceeds
/// the maximum attainable sum for a bounded-support family).
struct InfeasibleError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// A computation was refused because it would exceed a configured memory or
/// work budget.  The message names the budget and the estimated requirement.
struct ResourceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// An enumeration was refused because the state space exceeds the guard.
struct GuardError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// A configuration or precondition check failed before any work started.
struct ValidationError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// An internal consistency check failed; indicates a bug, not bad input.
struct InternalError : std::logic_error {
  using std::logic_error::logic_error;
};

// ---------------------------------------------------------------------------
// Log-domain arithmetic.
// ---------------------------------------------------------------------------

/// log(exp(a) + exp(b)) without overflow; handles -infinity operands.
inline double log_add_exp(double a, double b) {
  if (a == kNegInfinity) return b;
  if (b == kNegInfinity) return a;
  const double hi = std::max(a, b);
  const double lo = std::min(a, b);
  return hi + std::log1p(std::exp(lo - hi));
}

/// log(sum_i exp(x_i)); returns -infinity for an empty or all-zero input.
inline double log_sum_exp(const std::vector<double>& xs) {
  double hi = kNegInfinity;
  for (double x : xs) hi = std::max(hi, x);
  if (hi == kNegInfinity) return kNegInfinity;
  double acc = 0.0;
  for (double x : xs) {
    if (x != kNegInfinity) acc += std::exp(x - hi);
  }
  return hi + std::log(acc);
}

// ---------------------------------------------------------------------------
// Hashing and formatting.
// ---------------------------------------------------------------------------

/// FNV-1a 64-bit hash; used for cache keys and config fingerprints.
inline std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

/// Formats a double with 12 significant digits (the numeric output contract
/// shared by the CSV writer and the command-line tool).
inline std::string format_g12(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.12g", x);
  return buf;
}

// ---------------------------------------------------------------------------
// Compositions (ordered non-negative integer vectors with a fixed sum).
// ---------------------------------------------------------------------------

/// Number of compositions of `total` into `parts` ordered non-negative
/// parts, C(total + parts - 1, parts - 1), as a double (may round for very
/// large counts; used only for guard estimates).
inline double composition_count(std::int64_t total, int parts) {
  if (parts <= 0) return 0.0;
  double c = 1.0;
  for (int i = 1; i < parts; ++i) {
    c *= static_cast<double>(total + i) / static_cast<double>(i);
    if (c > 1e18) return c;  // saturate; callers only compare against guards
  }
  return c;
}

/// Visits every vector (s_1, ..., s_parts) of non-negative integers summing
/// to `total`, in lexicographic order.  The visitor receives a const
/// reference to a scratch vector valid only during the call.
template <typename Visitor>
void for_each_composition(std::int64_t total, int parts, Visitor&& visit) {
  if (parts <= 0) {
    if (total == 0) {
      const std::vector<std::int64_t> empty;
      visit(empty);
    }
    return;
  }
  std::vector<std::int64_t> scratch(static_cast<std::size_t>(parts), 0);
  auto rec = [&](auto&& self, int idx, std::int64_t remaining) -> void {
    if (idx == parts - 1) {
      scratch[static_cast<std::size_t>(idx)] = remaining;
      visit(const_cast<const std::vector<std::int64_t>&>(scratch));
      return;
    }
    for (std::int64_t v = 0; v <= remaining; ++v) {
      scratch[static_cast<std::size_t>(idx)] = v;
      self(self, idx + 1, remaining - v);
    }
  };
  rec(rec, 0, total);
}

}  // namespace alloclab
