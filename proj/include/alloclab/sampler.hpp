// SPDX-License-Identifier: Apache-2.0
//
// Exact sampling from the conditional law
//
//   (eta_1, ..., eta_N)  =d  (xi_1, ..., xi_N | xi_1 + ... + xi_N = n)
//
// for i.i.d. power-series variables, plus exact pointwise probabilities for
// that law.  Three independent sampling routes are provided so they can
// cross-validate each other:
//
//   * sample_exact       - sequential inverse-CDF walk against a full sum
//                          table: box j draws from
//                          pmf(k) P(S_{N-j} = r - k) / P(S_{N-j+1} = r).
//   * sample_rejection   - draw N unconditioned variables, accept when they
//                          hit the total.  Exhaustion is a result, not an
//                          error.
//   * sample_conditional_direct - family-specific closed-form laws that need
//                          no table: conditioned Poisson rows are uniform
//                          multinomial throws, conditioned geometric rows are
//                          uniform over compositions (stars and bars), and
//                          conditioned binomial(m) rows are multivariate
//                          hypergeometric.  These scale to N in the millions.
//
// The conditional law does not depend on theta (it cancels in the ratio), so
// every route below agrees for every valid theta.
#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <unordered_set>
#include <vector>

#include "alloclab/common.hpp"
#include "alloclab/power_series.hpp"
#include "alloclab/rng.hpp"
#include "alloclab/sum_distribution.hpp"

namespace alloclab {

/// One sampled allocation row: counts per box, summing to the conditioned
/// total.
struct ConditionalRow {
  std::vector<std::int64_t> counts;

  std::int64_t sum() const {
    std::int64_t s = 0;
    for (auto c : counts) s += c;
    return s;
  }
};

// ---------------------------------------------------------------------------
// Sequential exact sampler (full table).
// ---------------------------------------------------------------------------

/// Draws one row from the conditional law using a full-mode table.  The law
/// is exchangeable even though boxes are filled left to right.  Throws
/// ValidationError for a marginal-mode table and InfeasibleError when
/// P(S_N = n) = 0.
inline ConditionalRow sample_exact(const SumDistributionTable& table,
                                   Rng& rng) {
  if (table.mode() != SumDistributionTable::Mode::full) {
    throw ValidationError("sample_exact: needs a full-mode table");
  }
  const std::int64_t num_vars = table.num_vars();
  const std::int64_t total = table.total();
  if (table.log_prob_event_A() == kNegInfinity) {
    throw InfeasibleError("sample_exact: conditioning event has probability zero");
  }

  ConditionalRow row;
  row.counts.assign(static_cast<std::size_t>(num_vars), 0);
  std::int64_t remaining = total;
  for (std::int64_t j = 1; j < num_vars; ++j) {
    const std::int64_t left = num_vars - j;  // variables after this one
    const double log_ref = table.log_prob(left + 1, remaining);
    if (log_ref == kNegInfinity) {
      throw InternalError("sample_exact: reached a zero-probability state");
    }
    const double u = rng.uniform01();
    double cum = 0.0;
    std::int64_t chosen = -1;
    std::int64_t last_positive = -1;
    for (std::int64_t k = 0; k <= remaining; ++k) {
      const double lp = table.log_pmf_term(k) +
                        table.log_prob(left, remaining - k) - log_ref;
      if (lp == kNegInfinity) continue;
      cum += std::exp(lp);
      last_positive = k;
      if (cum >= u) {
        chosen = k;
        break;
      }
    }
    if (chosen < 0) chosen = last_positive;  // sub-ulp CDF shortfall
    if (chosen < 0) {
      throw InternalError("sample_exact: no admissible count at box " +
                          std::to_string(j));
    }
    row.counts[static_cast<std::size_t>(j - 1)] = chosen;
    remaining -= chosen;
  }
  row.counts[static_cast<std::size_t>(num_vars - 1)] = remaining;
  return row;
}

// ---------------------------------------------------------------------------
// Rejection sampler.
// ---------------------------------------------------------------------------

struct RejectionSample {
  /// Empty when the attempt budget was exhausted before an acceptance.
  std::optional<ConditionalRow> row;
  /// Attempts consumed, including the accepting one.
  std::uint64_t attempts = 0;
};

/// Repeatedly draws N unconditioned variables and accepts when they sum to
/// `total`.  An attempt is abandoned as soon as its partial sum exceeds the
/// total (abandonment only discards certain rejections, so the accepted law
/// is exact).  Returns an empty row after max_attempts without acceptance.
inline RejectionSample sample_rejection(const PowerSeriesFamily& family,
                                        double theta, std::int64_t num_vars,
                                        std::int64_t total, Rng& rng,
                                        std::uint64_t max_attempts = 1'000'000) {
  check_theta(family, theta);
  if (num_vars < 1) throw ValidationError("sample_rejection: num_vars must be >= 1");
  if (total < 0) throw ValidationError("sample_rejection: total must be >= 0");
  if (max_attempts < 1) throw ValidationError("sample_rejection: max_attempts must be >= 1");

  UnconditionalSampler draw(family, theta);
  RejectionSample result;
  std::vector<std::int64_t> counts(static_cast<std::size_t>(num_vars), 0);
  while (result.attempts < max_attempts) {
    ++result.attempts;
    std::int64_t sum = 0;
    bool overshoot = false;
    for (std::int64_t j = 0; j < num_vars; ++j) {
      const std::int64_t k = draw(rng);
      counts[static_cast<std::size_t>(j)] = k;
      sum += k;
      if (sum > total) {
        overshoot = true;
        break;
      }
    }
    if (!overshoot && sum == total) {
      result.row = ConditionalRow{counts};
      return result;
    }
  }
  return result;
}

// ---------------------------------------------------------------------------
// Direct (table-free) samplers for the built-in kinds.
// ---------------------------------------------------------------------------

namespace detail {

/// Floyd's algorithm: emits a uniform k-subset of {0, ..., m-1} in O(k)
/// expected draws.  Emission order is deterministic for a fixed rng stream.
template <typename Emit>
void sample_subset_floyd(std::int64_t m, std::int64_t k, Rng& rng,
                         Emit&& emit) {
  std::unordered_set<std::int64_t> seen;
  seen.reserve(static_cast<std::size_t>(k) * 2);
  for (std::int64_t i = m - k; i < m; ++i) {
    const std::int64_t t = rng.below_i64(i + 1);
    if (seen.insert(t).second) {
      emit(t);
    } else {
      seen.insert(i);
      emit(i);
    }
  }
}

}  // namespace detail

/// True when sample_conditional_direct supports the family.
inline bool has_direct_conditional_sampler(const PowerSeriesFamily& family) {
  return family.kind() != PowerSeriesFamily::Kind::custom;
}

/// Exact conditional row without a table, using the closed-form conditional
/// laws of the built-in kinds (see file header).  Throws ValidationError for
/// custom families and InfeasibleError when the total is unattainable.
inline ConditionalRow sample_conditional_direct(const PowerSeriesFamily& family,
                                                std::int64_t num_vars,
                                                std::int64_t total, Rng& rng) {
  if (num_vars < 1) {
    throw ValidationError("sample_conditional_direct: num_vars must be >= 1");
  }
  if (total < 0) {
    throw ValidationError("sample_conditional_direct: total must be >= 0");
  }
  ConditionalRow row;
  row.counts.assign(static_cast<std::size_t>(num_vars), 0);

  switch (family.kind()) {
    case PowerSeriesFamily::Kind::poisson: {
      // Conditioned Poisson = multinomial with equal cell probabilities.
      for (std::int64_t i = 0; i < total; ++i) {
        ++row.counts[static_cast<std::size_t>(rng.below_i64(num_vars))];
      }
      return row;
    }
    case PowerSeriesFamily::Kind::geometric: {
      // b_k = k! makes every composition equally likely; draw a uniform
      // stars-and-bars arrangement: bar positions are a uniform
      // (N-1)-subset of the n + N - 1 slots.
      if (num_vars == 1) {
        row.counts[0] = total;
        return row;
      }
      std::vector<std::int64_t> bars;
      bars.reserve(static_cast<std::size_t>(num_vars - 1));
      detail::sample_subset_floyd(total + num_vars - 1, num_vars - 1, rng,
                                  [&](std::int64_t p) { bars.push_back(p); });
      std::sort(bars.begin(), bars.end());
      std::int64_t prev = -1;
      for (std::int64_t j = 0; j < num_vars - 1; ++j) {
        row.counts[static_cast<std::size_t>(j)] =
            bars[static_cast<std::size_t>(j)] - prev - 1;
        prev = bars[static_cast<std::size_t>(j)];
      }
      row.counts[static_cast<std::size_t>(num_vars - 1)] =
          (total + num_vars - 1) - 1 - prev;
      return row;
    }
    case PowerSeriesFamily::Kind::binomial: {
      // Conditioned binomial(m) = multivariate hypergeometric: choose which
      // n of the m*N Bernoulli slots succeed.
      const std::int64_t m = family.binomial_trials();
      if (total > m * num_vars) {
        throw InfeasibleError(
            "sample_conditional_direct: total exceeds trials * num_vars");
      }
      detail::sample_subset_floyd(m * num_vars, total, rng,
                                  [&](std::int64_t slot) {
                                    ++row.counts[static_cast<std::size_t>(slot / m)];
                                  });
      return row;
    }
    case PowerSeriesFamily::Kind::custom:
      break;
  }
  throw ValidationError(
      "sample_conditional_direct: no closed-form conditional law for family '" +
      family.name() + "'");
}

// ---------------------------------------------------------------------------
// Exact pointwise probabilities.
// ---------------------------------------------------------------------------

/// Exhaustively enumerated conditional law on the compositions of `total`
/// into `num_vars` parts, in lexicographic order.  Built from raw
/// coefficients only (weight of a row is prod_j b_{k_j} / k_j!), so it is
/// independent of the table machinery it is used to check.  Guarded: more
/// than max_states compositions raises GuardError.
struct ConditionalLaw {
  std::int64_t num_vars = 0;
  std::int64_t total = 0;
  std::vector<std::vector<std::int64_t>> states;
  std::vector<double> probs;

  /// Index of a composition in `states`, or -1 if absent.
  std::int64_t index_of(const std::vector<std::int64_t>& s) const {
    const auto it = index_by_state.find(s);
    return it == index_by_state.end() ? -1 : it->second;
  }

  std::map<std::vector<std::int64_t>, std::int64_t> index_by_state;
};

inline ConditionalLaw enumerate_conditional_law(const PowerSeriesFamily& family,
                                                std::int64_t num_vars,
                                                std::int64_t total,
                                                std::int64_t max_states = 1'000'000) {
  if (num_vars < 1) {
    throw ValidationError("enumerate_conditional_law: num_vars must be >= 1");
  }
  if (total < 0) {
    throw ValidationError("enumerate_conditional_law: total must be >= 0");
  }
  const double count = composition_count(total, static_cast<int>(num_vars));
  if (count > static_cast<double>(max_states)) {
    throw GuardError("enumerate_conditional_law: " + format_g12(count) +
                     " compositions exceed the guard of " +
                     std::to_string(max_states));
  }

  ConditionalLaw law;
  law.num_vars = num_vars;
  law.total = total;
  std::vector<double> log_weights;
  for_each_composition(total, static_cast<int>(num_vars),
                       [&](const std::vector<std::int64_t>& s) {
                         double lw = 0.0;
                         for (auto k : s) {
                           const double lc = family.log_coeff(k);
                           if (lc == kNegInfinity) {
                             lw = kNegInfinity;
                             break;
                           }
                           lw += lc - std::lgamma(static_cast<double>(k) + 1.0);
                         }
                         law.states.push_back(s);
                         log_weights.push_back(lw);
                       });
  const double norm = log_sum_exp(log_weights);
  if (norm == kNegInfinity) {
    throw InfeasibleError("enumerate_conditional_law: every composition has "
                          "zero weight");
  }
  law.probs.resize(log_weights.size());
  for (std::size_t i = 0; i < log_weights.size(); ++i) {
    law.probs[i] = log_weights[i] == kNegInfinity
                       ? 0.0
                       : std::exp(log_weights[i] - norm);
    law.index_by_state.emplace(law.states[i], static_cast<std::int64_t>(i));
  }
  return law;
}

/// log P(eta_1 = k_1, ..., eta_N = k_N | S_N = n) computed as
/// sum_j log pmf(k_j) - log P(S_N = n) at any valid theta (the value is
/// theta-free; by default theta is fitted so the numerics stay centred).
/// Guarded against large instances: N * n above `guard` raises GuardError.
inline double log_exact_conditional_prob(
    const PowerSeriesFamily& family, std::int64_t num_vars, std::int64_t total,
    const std::vector<std::int64_t>& counts,
    std::optional<double> theta = std::nullopt,
    std::int64_t guard = 1'000'000) {
  if (num_vars < 1) {
    throw ValidationError("exact_conditional_prob: num_vars must be >= 1");
  }
  if (static_cast<std::int64_t>(counts.size()) != num_vars) {
    throw ValidationError("exact_conditional_prob: counts has " +
                          std::to_string(counts.size()) + " entries, expected " +
                          std::to_string(num_vars));
  }
  std::int64_t sum = 0;
  for (auto c : counts) {
    if (c < 0) throw ValidationError("exact_conditional_prob: negative count");
    sum += c;
  }
  if (sum != total) {
    throw ValidationError("exact_conditional_prob: counts sum to " +
                          std::to_string(sum) + ", expected " +
                          std::to_string(total));
  }
  if (total == 0) return 0.0;  // the all-zero row is forced
  if (static_cast<double>(num_vars) * static_cast<double>(total) >
      static_cast<double>(guard)) {
    throw GuardError("exact_conditional_prob: N * n = " +
                     format_g12(static_cast<double>(num_vars) *
                                static_cast<double>(total)) +
                     " exceeds the guard of " + std::to_string(guard) +
                     "; query the marginal or use the samplers instead");
  }

  double th;
  if (theta) {
    check_theta(family, *theta);
    th = *theta;
  } else {
    // Fit so the table is centred; clamp the target into the attainable
    // range for bounded-support families.
    double alpha = static_cast<double>(total) / static_cast<double>(num_vars);
    if (family.support_bound()) {
      alpha = std::min(alpha,
                       0.999 * static_cast<double>(*family.support_bound()));
    }
    th = mean_inverse(family, alpha).value;
  }

  const auto table = SumDistributionTable::build(
      family, th, num_vars, total, SumDistributionTable::Mode::marginal);
  if (table.log_prob_event_A() == kNegInfinity) {
    throw InfeasibleError("exact_conditional_prob: conditioning event has "
                          "probability zero");
  }
  const PmfEvaluator pe(family, th);
  double log_num = 0.0;
  for (auto c : counts) {
    const double lp = pe.log_pmf(c);
    if (lp == kNegInfinity) return kNegInfinity;
    log_num += lp;
  }
  return log_num - table.log_prob_event_A();
}

inline double exact_conditional_prob(
    const PowerSeriesFamily& family, std::int64_t num_vars, std::int64_t total,
    const std::vector<std::int64_t>& counts,
    std::optional<double> theta = std::nullopt,
    std::int64_t guard = 1'000'000) {
  const double lp =
      log_exact_conditional_prob(family, num_vars, total, counts, theta, guard);
  return lp == kNegInfinity ? 0.0 : std::exp(lp);
}

/// P(eta_1 = s | S_N = n) from a table (either mode):
/// pmf(s) P(S_{N-1} = n - s) / P(S_N = n).  Theta-free like every
/// conditional quantity.
inline double marginal_prob(const SumDistributionTable& table, std::int64_t s) {
  if (s < 0 || s > table.total()) {
    throw ValidationError("marginal_prob: s = " + std::to_string(s) +
                          " outside [0, " + std::to_string(table.total()) + "]");
  }
  if (table.num_vars() == 1) return s == table.total() ? 1.0 : 0.0;
  if (table.log_prob_event_A() == kNegInfinity) {
    throw InfeasibleError("marginal_prob: conditioning event has probability zero");
  }
  const double lp = table.log_pmf_term(s) +
                    table.log_prob_prev(table.total() - s) -
                    table.log_prob_event_A();
  return lp == kNegInfinity ? 0.0 : std::exp(lp);
}

// ---------------------------------------------------------------------------
// Size-aware dispatch: streaming table when affordable, closed form beyond.
// ---------------------------------------------------------------------------

struct MarginalOptions {
  /// A streaming (marginal) build touches N * (n + 1) cells; builds above
  /// this raise the closed-form route (built-in kinds) or ResourceError.
  double dp_cell_cap = 2.0e8;
  TableOptions table;
};

/// log P(S_N = n) via the streaming recursion when affordable, otherwise via
/// the closed forms of the built-in kinds.  Custom families over the cap
/// raise ResourceError.
inline double log_prob_event_A_auto(const PowerSeriesFamily& family,
                                    double theta, std::int64_t num_vars,
                                    std::int64_t total,
                                    const MarginalOptions& opts = {}) {
  const double cells =
      static_cast<double>(num_vars) * (static_cast<double>(total) + 1.0);
  if (cells <= opts.dp_cell_cap) {
    return SumDistributionTable::build(family, theta, num_vars, total,
                                       SumDistributionTable::Mode::marginal,
                                       opts.table)
        .log_prob_event_A();
  }
  if (const auto cf = closed_form_log_sum_pmf(family, theta, num_vars, total)) {
    return *cf;
  }
  throw ResourceError(
      "log_prob_event_A_auto: " + format_g12(cells) +
      " cells exceed the recursion cap and family '" + family.name() +
      "' has no closed-form sum distribution");
}

/// log P(eta_1 = s | S_N = n), choosing the route the same way.  Theta is
/// fitted internally (the result is theta-free).
inline double log_marginal_prob_auto(const PowerSeriesFamily& family,
                                     std::int64_t num_vars, std::int64_t total,
                                     std::int64_t s,
                                     const MarginalOptions& opts = {}) {
  if (num_vars < 1) {
    throw ValidationError("log_marginal_prob_auto: num_vars must be >= 1");
  }
  if (s < 0 || s > total) return kNegInfinity;
  if (num_vars == 1) return s == total ? 0.0 : kNegInfinity;
  if (total == 0) return s == 0 ? 0.0 : kNegInfinity;

  double alpha = static_cast<double>(total) / static_cast<double>(num_vars);
  if (family.support_bound()) {
    alpha =
        std::min(alpha, 0.999 * static_cast<double>(*family.support_bound()));
  }
  const double theta = mean_inverse(family, alpha).value;

  const double cells =
      static_cast<double>(num_vars) * (static_cast<double>(total) + 1.0);
  if (cells <= opts.dp_cell_cap) {
    const auto table = SumDistributionTable::build(
        family, theta, num_vars, total, SumDistributionTable::Mode::marginal,
        opts.table);
    const double p = marginal_prob(table, s);
    return p > 0.0 ? std::log(p) : kNegInfinity;
  }
  const auto lp_prev =
      closed_form_log_sum_pmf(family, theta, num_vars - 1, total - s);
  const auto lp_all = closed_form_log_sum_pmf(family, theta, num_vars, total);
  if (!lp_prev || !lp_all) {
    throw ResourceError(
        "log_marginal_prob_auto: " + format_g12(cells) +
        " cells exceed the recursion cap and family '" + family.name() +
        "' has no closed-form sum distribution");
  }
  if (*lp_all == kNegInfinity) {
    throw InfeasibleError("log_marginal_prob_auto: conditioning event has "
                          "probability zero");
  }
  const double lp_s = log_pmf(family, theta, s);
  if (lp_s == kNegInfinity || *lp_prev == kNegInfinity) return kNegInfinity;
  return lp_s + *lp_prev - *lp_all;
}

}  // namespace alloclab
