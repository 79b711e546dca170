// SPDX-License-Identifier: Apache-2.0
//
// Power-series families of distributions on the non-negative integers:
//
//   P(xi = k) = b_k theta^k / (k! * B(theta)),   B(theta) = sum_k b_k theta^k / k!
//
// with b_0 > 0, b_1 > 0, b_k >= 0, valid for 0 < theta < radius.  The three
// classical members (Poisson, geometric, binomial) are built in; arbitrary
// families can be supplied as coefficient lists or log-coefficient callables.
//
// Everything here works in the log domain: coefficients can grow like k!
// (the geometric family has b_k = k!), so linear-domain arithmetic would
// overflow long before the distributions themselves become extreme.
#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "alloclab/common.hpp"
#include "alloclab/rng.hpp"

namespace alloclab {

class PowerSeriesFamily {
 public:
  enum class Kind { poisson, geometric, binomial, custom };

  // -- factories ------------------------------------------------------------

  /// b_k = 1, B(theta) = exp(theta), radius infinite.
  static PowerSeriesFamily poisson() {
    PowerSeriesFamily f;
    f.kind_ = Kind::poisson;
    f.name_ = "poisson";
    f.radius_ = std::numeric_limits<double>::infinity();
    return f;
  }

  /// b_k = k!, B(theta) = 1/(1 - theta), radius 1.
  static PowerSeriesFamily geometric() {
    PowerSeriesFamily f;
    f.kind_ = Kind::geometric;
    f.name_ = "geometric";
    f.radius_ = 1.0;
    return f;
  }

  /// b_k = m!/(m-k)! for k <= m, B(theta) = (1 + theta)^m, radius infinite.
  static PowerSeriesFamily binomial(int trials) {
    if (trials < 1) throw ValidationError("binomial family: trials must be >= 1");
    PowerSeriesFamily f;
    f.kind_ = Kind::binomial;
    f.name_ = "binomial(" + std::to_string(trials) + ")";
    f.radius_ = std::numeric_limits<double>::infinity();
    f.trials_ = trials;
    f.support_bound_ = trials;
    return f;
  }

  /// Family from an explicit coefficient list (b_0, b_1, ..., b_L).  The
  /// support bound is L; the declared radius defaults to infinite, which is
  /// always correct for a finite list.
  static PowerSeriesFamily from_coefficients(
      std::string name, std::vector<double> coeffs,
      double radius = std::numeric_limits<double>::infinity()) {
    if (coeffs.size() < 2) {
      throw ValidationError("family '" + name +
                            "': need at least coefficients b_0 and b_1");
    }
    if (!(coeffs[0] > 0.0)) {
      throw ValidationError("family '" + name + "': b_0 must be > 0");
    }
    if (!(coeffs[1] > 0.0)) {
      throw ValidationError("family '" + name + "': b_1 must be > 0");
    }
    for (std::size_t k = 0; k < coeffs.size(); ++k) {
      if (!(coeffs[k] >= 0.0) || std::isinf(coeffs[k])) {
        throw ValidationError("family '" + name + "': coefficient " +
                              std::to_string(k) + " must be finite and >= 0");
      }
    }
    if (!(radius > 0.0)) {
      throw ValidationError("family '" + name + "': radius must be > 0");
    }
    PowerSeriesFamily f;
    f.kind_ = Kind::custom;
    f.name_ = std::move(name);
    f.radius_ = radius;
    f.coeffs_ = std::move(coeffs);
    f.support_bound_ = static_cast<std::int64_t>(f.coeffs_.size()) - 1;
    f.validate_by_probe();
    return f;
  }

  /// Family from a log-coefficient callable (k -> log b_k, -infinity where
  /// b_k = 0).  Callers with unbounded support should make sure the declared
  /// radius really is a radius of convergence; construction probes the series
  /// at one interior point and rejects declarations it cannot sum.
  static PowerSeriesFamily from_log_coefficients(
      std::string name, std::function<double(std::int64_t)> log_coeff,
      double radius, std::optional<std::int64_t> support_bound = {}) {
    if (!log_coeff) {
      throw ValidationError("family '" + name + "': log-coefficient callable is empty");
    }
    if (!(radius > 0.0)) {
      throw ValidationError("family '" + name + "': radius must be > 0");
    }
    PowerSeriesFamily f;
    f.kind_ = Kind::custom;
    f.name_ = std::move(name);
    f.radius_ = radius;
    f.log_coeff_fn_ = std::move(log_coeff);
    f.support_bound_ = support_bound;
    if (!(f.log_coeff(0) > kNegInfinity)) {
      throw ValidationError("family '" + f.name_ + "': b_0 must be > 0");
    }
    if (!(f.log_coeff(1) > kNegInfinity)) {
      throw ValidationError("family '" + f.name_ + "': b_1 must be > 0");
    }
    f.validate_by_probe();
    return f;
  }

  // -- observers --------------------------------------------------------------

  const std::string& name() const { return name_; }
  Kind kind() const { return kind_; }
  double radius() const { return radius_; }

  /// Largest k with b_k > 0, when the support is known to be bounded.
  std::optional<std::int64_t> support_bound() const { return support_bound_; }

  /// Number of trials for the binomial kind (undefined otherwise).
  int binomial_trials() const { return trials_; }

  /// The explicit coefficient table, when this family was built from one
  /// (nullptr for builtins and callback-defined customs).
  const std::vector<double>* coefficient_vector() const {
    return (kind_ == Kind::custom && !log_coeff_fn_) ? &coeffs_ : nullptr;
  }

  /// log b_k (-infinity where b_k = 0).  k < 0 is always -infinity.
  double log_coeff(std::int64_t k) const {
    if (k < 0) return kNegInfinity;
    switch (kind_) {
      case Kind::poisson:
        return 0.0;
      case Kind::geometric:
        return std::lgamma(static_cast<double>(k) + 1.0);
      case Kind::binomial:
        if (k > trials_) return kNegInfinity;
        return std::lgamma(trials_ + 1.0) -
               std::lgamma(static_cast<double>(trials_ - k) + 1.0);
      case Kind::custom:
        if (log_coeff_fn_) {
          if (support_bound_ && k > *support_bound_) return kNegInfinity;
          return log_coeff_fn_(k);
        }
        if (k >= static_cast<std::int64_t>(coeffs_.size())) return kNegInfinity;
        {
          const double b = coeffs_[static_cast<std::size_t>(k)];
          return b > 0.0 ? std::log(b) : kNegInfinity;
        }
    }
    return kNegInfinity;
  }

  /// b_k itself.  For the geometric and binomial kinds this is computed from
  /// log b_k and may overflow to +infinity for very large k; prefer
  /// log_coeff in numeric code.
  double coeff(std::int64_t k) const {
    if (k < 0) return 0.0;
    if (kind_ == Kind::custom && !log_coeff_fn_) {
      return k < static_cast<std::int64_t>(coeffs_.size())
                 ? coeffs_[static_cast<std::size_t>(k)]
                 : 0.0;
    }
    const double lc = log_coeff(k);
    return lc == kNegInfinity ? 0.0 : std::exp(lc);
  }

 private:
  PowerSeriesFamily() = default;

  // Checks that the declared radius is usable by summing the series at one
  // interior point.  Defined after the series evaluator below.
  void validate_by_probe() const;

  Kind kind_ = Kind::custom;
  std::string name_;
  double radius_ = 0.0;
  int trials_ = 0;
  std::optional<std::int64_t> support_bound_;
  std::vector<double> coeffs_;
  std::function<double(std::int64_t)> log_coeff_fn_;
};

/// Checked theta: constructing one proves 0 < value < family radius.
struct ThetaValue {
  double value;
};

/// Throws DomainError unless 0 < theta < radius (and theta is finite).
inline void check_theta(const PowerSeriesFamily& family, double theta) {
  if (!(theta > 0.0) || !std::isfinite(theta) || theta >= family.radius()) {
    throw DomainError("family '" + family.name() + "': theta " +
                      format_g12(theta) + " outside (0, " +
                      format_g12(family.radius()) + ")");
  }
}

namespace detail {

/// Log-domain sums of the series terms t_k = b_k theta^k / k!:
///   s0 = log sum t_k            (= log B)
///   s1 = log sum k t_k          (mean numerator)
///   s2 = log sum k (k-1) t_k    (second-factorial-moment numerator)
struct SeriesSums {
  double s0 = kNegInfinity;
  double s1 = kNegInfinity;
  double s2 = kNegInfinity;
  std::int64_t terms = 0;
};

inline constexpr std::int64_t kSeriesMaxTerms = 2'000'000;

/// Sums the series with a certified truncation rule.  Finite-support
/// families are summed exactly.  Otherwise the loop watches the per-index
/// term ratio; once the ratio has stayed below 1 for a window of consecutive
/// terms, the remaining tail is bounded by the geometric series at the
/// largest recently observed ratio (with a (k+2)^2 slack factor to cover the
/// k and k^2 weights in s1 and s2) and the loop stops when that bound drops
/// below tol * exp(s0).  A series whose terms never settle into decay within
/// max_terms raises NonConvergenceError.
inline SeriesSums accumulate_power_series(const PowerSeriesFamily& family,
                                          double theta, double tol,
                                          std::int64_t max_terms = kSeriesMaxTerms) {
  check_theta(family, theta);
  if (!(tol > 0.0)) throw ValidationError("series tolerance must be > 0");

  const double log_theta = std::log(theta);
  const std::optional<std::int64_t> support = family.support_bound();

  constexpr int kWindow = 4;
  const double log_ratio_cap = std::log1p(-1e-6);  // per-index ratio must be < 1 - 1e-6

  SeriesSums acc;
  double last_log = kQuietNaN;
  std::int64_t last_k = -1;
  int streak = 0;
  double streak_max_ratio = kNegInfinity;

  for (std::int64_t k = 0;; ++k) {
    if (support && k > *support) break;
    if (k > max_terms) {
      throw NonConvergenceError(
          "family '" + family.name() + "': series at theta = " +
          format_g12(theta) + " did not converge within " +
          std::to_string(max_terms) +
          " terms (declare a support bound or reduce theta)");
    }

    const double lc = family.log_coeff(k);
    const double lt = (lc == kNegInfinity)
                          ? kNegInfinity
                          : lc + static_cast<double>(k) * log_theta -
                                std::lgamma(static_cast<double>(k) + 1.0);
    if (lt != kNegInfinity) {
      ++acc.terms;
      acc.s0 = log_add_exp(acc.s0, lt);
      if (k >= 1) acc.s1 = log_add_exp(acc.s1, lt + std::log(static_cast<double>(k)));
      if (k >= 2) {
        acc.s2 = log_add_exp(
            acc.s2, lt + std::log(static_cast<double>(k) * (static_cast<double>(k) - 1.0)));
      }
      if (last_k >= 0) {
        const double step = (lt - last_log) / static_cast<double>(k - last_k);
        if (step < log_ratio_cap) {
          ++streak;
          streak_max_ratio = std::max(streak_max_ratio, step);
        } else {
          streak = 0;
          streak_max_ratio = kNegInfinity;
        }
      }
      last_log = lt;
      last_k = k;
    }
    // Zero coefficients neither extend nor break a decay streak.

    if (streak >= kWindow && acc.s0 > kNegInfinity &&
        streak_max_ratio > kNegInfinity) {
      const double r_log = streak_max_ratio;           // < log_ratio_cap < 0
      const double tail_log = last_log + r_log - std::log1p(-std::exp(r_log)) +
                              2.0 * std::log(static_cast<double>(k) + 2.0);
      if (tail_log <= std::log(tol) + acc.s0) break;
    }
  }

  if (acc.s0 == kNegInfinity) {
    throw InternalError("family '" + family.name() + "': series summed to zero");
  }
  return acc;
}

}  // namespace detail

inline void PowerSeriesFamily::validate_by_probe() const {
  const double probe =
      std::isfinite(radius_) ? radius_ / 2.0 : 1.0;
  try {
    detail::accumulate_power_series(*this, probe, 1e-6, 500'000);
  } catch (const NonConvergenceError& e) {
    throw ValidationError("family '" + name_ +
                          "': series does not converge at theta = " +
                          format_g12(probe) +
                          "; the declared radius looks too large (" +
                          e.what() + ")");
  }
}

// ---------------------------------------------------------------------------
// Series values and moments.
// ---------------------------------------------------------------------------

/// log B(theta), summed to relative tolerance tol.
inline double log_eval_B(const PowerSeriesFamily& family, double theta,
                         double tol = 1e-13) {
  return detail::accumulate_power_series(family, theta, tol).s0;
}

/// B(theta).  May overflow to +infinity for theta close to a finite radius;
/// prefer log_eval_B in numeric code.
inline double eval_B(const PowerSeriesFamily& family, double theta,
                     double tol = 1e-13) {
  return std::exp(log_eval_B(family, theta, tol));
}

/// Mean m(theta) = theta B'(theta) / B(theta).
inline double mean(const PowerSeriesFamily& family, double theta) {
  const auto s = detail::accumulate_power_series(family, theta, 1e-13);
  return s.s1 == kNegInfinity ? 0.0 : std::exp(s.s1 - s.s0);
}

/// Variance sigma^2(theta) = E xi(xi-1) + m - m^2.  Always positive for a
/// non-degenerate family; a non-positive value beyond rounding noise raises
/// InternalError.
inline double variance(const PowerSeriesFamily& family, double theta) {
  const auto s = detail::accumulate_power_series(family, theta, 1e-13);
  const double m = s.s1 == kNegInfinity ? 0.0 : std::exp(s.s1 - s.s0);
  const double fm2 = s.s2 == kNegInfinity ? 0.0 : std::exp(s.s2 - s.s0);
  double v = fm2 + m - m * m;
  if (v <= 0.0) {
    if (v < -1e-8 * (1.0 + m * m)) {
      throw InternalError("family '" + family.name() +
                          "': variance came out non-positive (" +
                          format_g12(v) + ") at theta = " + format_g12(theta));
    }
    v = std::numeric_limits<double>::min();
  }
  return v;
}

/// Solves m(theta) = alpha.  The built-in kinds invert their means in closed
/// form (exact, so identities that are exact in theta stay exact in floating
/// point); custom families fall back to bisection, which is valid because
/// the mean is strictly increasing in theta.  The bracket grows toward the
/// radius geometrically (halving the remaining gap for a finite radius,
/// doubling for an infinite one); if the target is never enclosed the target
/// is unattainable and RangeError is raised.
inline ThetaValue mean_inverse(const PowerSeriesFamily& family, double alpha,
                               double tol = 1e-10) {
  if (!(alpha > 0.0) || !std::isfinite(alpha)) {
    throw RangeError("mean_inverse: target mean " + format_g12(alpha) +
                     " is outside (0, inf)");
  }
  if (family.support_bound() &&
      alpha >= static_cast<double>(*family.support_bound())) {
    throw RangeError("mean_inverse: family '" + family.name() +
                     "' has maximum attainable mean below " +
                     format_g12(alpha) + " (support bound " +
                     std::to_string(*family.support_bound()) + ")");
  }
  switch (family.kind()) {
    case PowerSeriesFamily::Kind::poisson:
      return ThetaValue{alpha};  // m(theta) = theta
    case PowerSeriesFamily::Kind::geometric:
      return ThetaValue{alpha / (1.0 + alpha)};  // m = theta / (1 - theta)
    case PowerSeriesFamily::Kind::binomial: {
      // m = M theta / (1 + theta); alpha < M was checked above.
      const double m = static_cast<double>(family.binomial_trials());
      return ThetaValue{alpha / (m - alpha)};
    }
    case PowerSeriesFamily::Kind::custom:
      break;
  }

  const double radius = family.radius();
  const bool finite_radius = std::isfinite(radius);
  double hi = finite_radius ? radius / 2.0 : 1.0;

  auto mean_at = [&](double t) {
    try {
      return mean(family, t);
    } catch (const NonConvergenceError& e) {
      throw RangeError(std::string("mean_inverse: series evaluation failed while "
                                   "bracketing (") + e.what() + ")");
    }
  };

  double m_hi = mean_at(hi);
  double lo = hi;
  double m_lo = m_hi;

  int guard = 0;
  while (m_hi < alpha) {
    lo = hi;
    m_lo = m_hi;
    hi = finite_radius ? radius - (radius - hi) / 2.0 : hi * 2.0;
    if (++guard > 200 || (finite_radius && hi <= lo) ||
        (!finite_radius && hi > 1e60)) {
      throw RangeError("mean_inverse: target mean " + format_g12(alpha) +
                       " not attainable for family '" + family.name() + "'");
    }
    m_hi = mean_at(hi);
  }
  guard = 0;
  while (m_lo > alpha) {
    hi = std::min(hi, lo);
    lo /= 2.0;
    if (++guard > 1100) {
      throw RangeError("mean_inverse: target mean " + format_g12(alpha) +
                       " not attainable for family '" + family.name() + "'");
    }
    m_lo = mean_at(lo);
  }

  const double scale = std::max(1.0, std::abs(alpha));
  for (int iter = 0; iter < 200; ++iter) {
    const double mid = 0.5 * (lo + hi);
    const double m_mid = mean_at(mid);
    if (std::abs(m_mid - alpha) <= tol * scale) return ThetaValue{mid};
    if (m_mid < alpha) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  throw NonConvergenceError("mean_inverse: bisection failed to reach tolerance " +
                            format_g12(tol) + " for target " + format_g12(alpha));
}

// ---------------------------------------------------------------------------
// Pointwise probabilities.
// ---------------------------------------------------------------------------

/// Precomputes log B(theta) once so repeated pmf evaluations at the same
/// (family, theta) cost one lgamma each.
class PmfEvaluator {
 public:
  PmfEvaluator(const PowerSeriesFamily& family, double theta,
               double tol = 1e-13)
      : family_(family),
        theta_(theta),
        log_theta_(std::log(theta)),
        log_b_(log_eval_B(family, theta, tol)) {}

  double log_pmf(std::int64_t k) const {
    if (k < 0) return kNegInfinity;
    const double lc = family_.log_coeff(k);
    if (lc == kNegInfinity) return kNegInfinity;
    return lc + static_cast<double>(k) * log_theta_ -
           std::lgamma(static_cast<double>(k) + 1.0) - log_b_;
  }

  double pmf(std::int64_t k) const {
    const double lp = log_pmf(k);
    return lp == kNegInfinity ? 0.0 : std::exp(lp);
  }

  const PowerSeriesFamily& family() const { return family_; }
  double theta() const { return theta_; }
  double log_b() const { return log_b_; }

 private:
  PowerSeriesFamily family_;
  double theta_;
  double log_theta_;
  double log_b_;
};

/// P(xi = k) for one draw.  Convenience wrapper; loops should hold a
/// PmfEvaluator so log B is not recomputed per call.
inline double pmf(const PowerSeriesFamily& family, double theta,
                  std::int64_t k) {
  return PmfEvaluator(family, theta).pmf(k);
}

inline double log_pmf(const PowerSeriesFamily& family, double theta,
                      std::int64_t k) {
  return PmfEvaluator(family, theta).log_pmf(k);
}

// ---------------------------------------------------------------------------
// Unconditional sampling (inverse CDF).
// ---------------------------------------------------------------------------

/// Draws xi ~ (family, theta) by inverting the CDF against one uniform.
/// The cumulative table is cached and extended on demand, so amortized cost
/// per draw is a binary search.
class UnconditionalSampler {
 public:
  UnconditionalSampler(const PowerSeriesFamily& family, double theta,
                       double tol = 1e-13)
      : eval_(family, theta, tol), support_(family.support_bound()) {}

  std::int64_t operator()(Rng& rng) {
    const double u = rng.uniform01();
    while (!exhausted_ && (cum_.empty() || cum_.back() < u)) extend_once();
    const auto it = std::lower_bound(cum_.begin(), cum_.end(), u);
    if (it == cum_.end()) {
      // Remaining mass below double resolution; clamp to the last index seen.
      return static_cast<std::int64_t>(cum_.size()) - 1;
    }
    return static_cast<std::int64_t>(it - cum_.begin());
  }

  const PmfEvaluator& evaluator() const { return eval_; }

 private:
  static constexpr std::int64_t kMaxTerms = 4'000'000;

  void extend_once() {
    const auto k = static_cast<std::int64_t>(cum_.size());
    if (support_ && k > *support_) {
      exhausted_ = true;
      return;
    }
    if (k > kMaxTerms) {
      throw NonConvergenceError(
          "unconditional sampler: CDF did not reach the drawn uniform within " +
          std::to_string(kMaxTerms) + " terms");
    }
    const double prev = cum_.empty() ? 0.0 : cum_.back();
    const double next = std::min(prev + eval_.pmf(k), 1.0);
    cum_.push_back(next);
    if (next >= 1.0) {
      exhausted_ = true;
    } else if (next == prev) {
      // pmf below double resolution; once the CDF is numerically flat and
      // essentially complete, stop extending.
      if (++stall_ > 64 && next > 1.0 - 1e-9) exhausted_ = true;
    } else {
      stall_ = 0;
    }
  }

  PmfEvaluator eval_;
  std::optional<std::int64_t> support_;
  std::vector<double> cum_;
  int stall_ = 0;
  bool exhausted_ = false;
};

/// One-shot draw.  Recomputes log B per call; loops should hold an
/// UnconditionalSampler instead.
inline std::int64_t sample_unconditional(const PowerSeriesFamily& family,
                                         double theta, Rng& rng) {
  UnconditionalSampler s(family, theta);
  return s(rng);
}

}  // namespace alloclab
