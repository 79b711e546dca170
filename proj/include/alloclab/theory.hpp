// SPDX-License-Identifier: Apache-2.0
//
// Closed-form quantities for occupancy statistics of multi-colour
// generalized allocation schemes: almost-sure limits of mu/N, law-of-the-
// iterated-logarithm constants, an exact lower bound for the probability of
// the conditioning event, a computable exponential tail bound for
// |mu - E mu| / sqrt(N), and the one-box local approximation.
//
// Every quantity is evaluated at the centring parameter theta_alpha =
// m^{-1}(alpha) of each colour; theta overrides are diagnostic only and do
// not enter here, since the limit statements are invariant in theta.
#pragma once

#include <cmath>
#include <cstdint>
#include <iterator>
#include <vector>

#include "alloclab/common.hpp"
#include "alloclab/power_series.hpp"
#include "alloclab/sampler.hpp"
#include "alloclab/scheme.hpp"

namespace alloclab {

namespace detail {

/// pmf(s) at the centred parameter for density alpha; alpha = 0 denotes the
/// degenerate empty colour (point mass at zero).
inline double pmf_at_alpha(const PowerSeriesFamily& family, double alpha,
                           std::int64_t s) {
  if (!(alpha >= 0.0)) {
    throw ValidationError("pmf_at_alpha: density must be >= 0");
  }
  if (alpha == 0.0) return s == 0 ? 1.0 : 0.0;
  return pmf(family, mean_inverse(family, alpha).value, s);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Almost-sure limits of mu / N.
// ---------------------------------------------------------------------------

/// Limit of mu_s / N for a vector target s: prod_i pmf_i(s_i; theta_alpha_i)
/// where alpha_i is the limiting ball density of colour i.
inline double slln_limit(const std::vector<PowerSeriesFamily>& families,
                         const std::vector<double>& alphas,
                         const std::vector<std::int64_t>& s) {
  if (families.empty() || families.size() != alphas.size() ||
      families.size() != s.size()) {
    throw ValidationError("slln_limit: families, alphas and s must have the "
                          "same non-zero length");
  }
  double p = 1.0;
  for (std::size_t i = 0; i < families.size(); ++i) {
    if (s[i] < 0) throw ValidationError("slln_limit: negative target count");
    p *= detail::pmf_at_alpha(families[i], alphas[i], s[i]);
    if (p == 0.0) break;
  }
  return p;
}

/// Limit of mu / N for a colour-blind total s: the sum of the vector limit
/// over all colour splits of s.
inline double slln_limit_total(const std::vector<PowerSeriesFamily>& families,
                               const std::vector<double>& alphas,
                               std::int64_t s) {
  if (families.empty() || families.size() != alphas.size()) {
    throw ValidationError("slln_limit_total: families and alphas must have "
                          "the same non-zero length");
  }
  if (s < 0) throw ValidationError("slln_limit_total: negative target total");
  // Evaluate each colour's pmf once per count to avoid refitting theta
  // inside the composition loop.
  const int K = static_cast<int>(families.size());
  std::vector<std::vector<double>> pmf_by_colour(static_cast<std::size_t>(K));
  for (int i = 0; i < K; ++i) {
    auto& v = pmf_by_colour[static_cast<std::size_t>(i)];
    v.resize(static_cast<std::size_t>(s) + 1);
    if (alphas[static_cast<std::size_t>(i)] == 0.0) {
      for (std::int64_t k = 0; k <= s; ++k) {
        v[static_cast<std::size_t>(k)] = (k == 0) ? 1.0 : 0.0;
      }
    } else {
      const PmfEvaluator pe(
          families[static_cast<std::size_t>(i)],
          mean_inverse(families[static_cast<std::size_t>(i)],
                       alphas[static_cast<std::size_t>(i)])
              .value);
      for (std::int64_t k = 0; k <= s; ++k) {
        v[static_cast<std::size_t>(k)] = pe.pmf(k);
      }
    }
  }
  double total = 0.0;
  for_each_composition(s, K, [&](const std::vector<std::int64_t>& split) {
    double p = 1.0;
    for (int i = 0; i < K; ++i) {
      p *= pmf_by_colour[static_cast<std::size_t>(i)]
                        [static_cast<std::size_t>(split[static_cast<std::size_t>(i)])];
      if (p == 0.0) break;
    }
    total += p;
  });
  return total;
}

/// Limiting probability that one box has content vector s, evaluated on a
/// concrete scheme at its configured thetas.
inline double cell_probability(const SchemeConfig& scheme,
                               const std::vector<std::int64_t>& s) {
  if (static_cast<int>(s.size()) != scheme.num_colours()) {
    throw ValidationError("cell_probability: target has " +
                          std::to_string(s.size()) + " entries, expected " +
                          std::to_string(scheme.num_colours()));
  }
  double p = 1.0;
  for (int i = 0; i < scheme.num_colours(); ++i) {
    if (s[static_cast<std::size_t>(i)] < 0) {
      throw ValidationError("cell_probability: negative target count");
    }
    p *= pmf(scheme.family(i), scheme.theta(i), s[static_cast<std::size_t>(i)]);
    if (p == 0.0) break;
  }
  return p;
}

// ---------------------------------------------------------------------------
// Law-of-the-iterated-logarithm constants.
// ---------------------------------------------------------------------------

/// Constant for a fixed geometric schedule N_t -> infinity with densities
/// converging to a point: limsup |mu - E mu| / (sigma sqrt(N ln N)) is at
/// most 4 sqrt(1 + K/2) almost surely.
inline double lil_bound_sequence(int num_colours) {
  if (num_colours < 1) throw ValidationError("lil bound: need K >= 1");
  return 4.0 * std::sqrt(1.0 + static_cast<double>(num_colours) / 2.0);
}

/// Constant for densities wandering inside a fixed compact sector:
/// 4 sqrt(1 + 3K/2).
inline double lil_bound_sector(int num_colours) {
  if (num_colours < 1) throw ValidationError("lil bound: need K >= 1");
  return 4.0 * std::sqrt(1.0 + 1.5 * static_cast<double>(num_colours));
}

// ---------------------------------------------------------------------------
// Conditioning-event lower bound.
// ---------------------------------------------------------------------------

/// Lower bound P(S_N = n) > 1 / (4 sigma(theta_alpha) sqrt(N)) valid for
/// every N >= 1 when theta is centred at alpha = n / N.
inline double conditioning_event_lower_bound(const PowerSeriesFamily& family,
                                             double alpha,
                                             std::int64_t num_vars) {
  if (num_vars < 1) {
    throw ValidationError("conditioning_event_lower_bound: num_vars must be >= 1");
  }
  const double theta = mean_inverse(family, alpha).value;
  const double sigma = std::sqrt(variance(family, theta));
  return 1.0 / (4.0 * sigma * std::sqrt(static_cast<double>(num_vars)));
}

// ---------------------------------------------------------------------------
// f2 and the exponential tail bound.
// ---------------------------------------------------------------------------

namespace detail {

inline double f2_integrand(double x, double z) {
  static const double inv_sqrt_2pi = 0.3989422804014326779;
  return z * z * std::exp(x * z - 0.5 * z * z) * inv_sqrt_2pi;
}

template <typename F>
double adaptive_simpson_rec(const F& f, double a, double fa, double b,
                            double fb, double m, double fm, double whole,
                            double eps, int depth) {
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = f(lm), frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double delta = left + right - whole;
  if (depth <= 0 || std::abs(delta) <= 15.0 * eps) {
    return left + right + delta / 15.0;
  }
  return adaptive_simpson_rec(f, a, fa, m, fm, lm, flm, left, 0.5 * eps,
                              depth - 1) +
         adaptive_simpson_rec(f, m, fm, b, fb, rm, frm, right, 0.5 * eps,
                              depth - 1);
}

template <typename F>
double adaptive_simpson(const F& f, double a, double b, double eps) {
  const double m = 0.5 * (a + b);
  const double fa = f(a), fb = f(b), fm = f(m);
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  return adaptive_simpson_rec(f, a, fa, b, fb, m, fm, whole, eps, 48);
}

}  // namespace detail

/// f2(x) = 2 E[Z^2 e^{x |Z|}] - 1 for standard normal Z, evaluated by
/// adaptive Simpson quadrature of 4 * int_0^{x+40} z^2 e^{xz} phi(z) dz - 1.
/// f2(0) = 1 and f2 is increasing.  For x > 35 the value overflows double
/// and +infinity is returned.
inline double f2(double x, double rel_tol = 1e-8) {
  if (!(x >= 0.0)) throw DomainError("f2: argument must be >= 0");
  if (x > 35.0) return std::numeric_limits<double>::infinity();
  const auto g = [x](double z) { return detail::f2_integrand(x, z); };
  // Magnitude estimate by Laplace's method at the integrand peak (the
  // exponent has curvature -1, so the effective width is sqrt(2 pi)).
  const double z_peak = 0.5 * (x + std::sqrt(x * x + 8.0));
  const double rough = g(z_peak) * std::sqrt(2.0 * 3.141592653589793238);
  const double eps = rel_tol * std::max(0.25, rough);
  // Quadrature over one wide interval starts from probe points that can all
  // miss the peak (the integrand then looks identically zero and the
  // subdivision stops immediately), so split at the peak and a few
  // Gaussian widths beyond it and integrate each segment separately.
  const double cuts[] = {0.0, 0.5 * z_peak, z_peak, z_peak + 6.0,
                         z_peak + 16.0, x + 40.0};
  double integral = 0.0;
  for (std::size_t i = 0; i + 1 < std::size(cuts); ++i) {
    if (cuts[i + 1] <= cuts[i]) continue;
    integral += detail::adaptive_simpson(g, cuts[i], cuts[i + 1], eps);
  }
  return 4.0 * integral - 1.0;
}

/// Everything the tail bound needs about one concrete scheme and target,
/// computed once: the limiting cell probability p at the centred thetas,
/// sigma^2 = p(1-p), rho = 2 sigma^2, and the exact log-probability of the
/// conditioning event (summed over colours).
struct TheoryContext {
  SchemeConfig scheme;
  OccupancyTarget target;
  double p = 0.0;
  double sigma2 = 0.0;
  double rho = 0.0;
  double log_prob_A = kNegInfinity;
};

inline TheoryContext make_theory_context(const SchemeConfig& scheme,
                                         const OccupancyTarget& target,
                                         const MarginalOptions& opts = {}) {
  const int K = scheme.num_colours();
  if (target.kind == OccupancyTarget::Kind::vector) {
    if (static_cast<int>(target.s.size()) != K) {
      throw ValidationError("theory context: vector target has " +
                            std::to_string(target.s.size()) +
                            " entries, expected " + std::to_string(K));
    }
  } else if (target.s.size() != 1) {
    throw ValidationError("theory context: total target must have one entry");
  }

  TheoryContext ctx{scheme, target};
  std::vector<PowerSeriesFamily> families;
  std::vector<double> alphas;
  families.reserve(static_cast<std::size_t>(K));
  alphas.reserve(static_cast<std::size_t>(K));
  for (int i = 0; i < K; ++i) {
    families.push_back(scheme.family(i));
    alphas.push_back(scheme.alpha(i));
  }
  ctx.p = (target.kind == OccupancyTarget::Kind::vector)
              ? slln_limit(families, alphas, target.s)
              : slln_limit_total(families, alphas, target.s[0]);
  if (!(ctx.p > 0.0) || !(ctx.p < 1.0)) {
    throw ValidationError("theory context: cell probability " +
                          format_g12(ctx.p) +
                          " is degenerate; sigma^2 = p(1-p) would vanish");
  }
  ctx.sigma2 = ctx.p * (1.0 - ctx.p);
  ctx.rho = 2.0 * ctx.sigma2;
  ctx.log_prob_A = 0.0;
  for (int i = 0; i < K; ++i) {
    ctx.log_prob_A += log_prob_event_A_auto(
        scheme.family(i), scheme.theta(i), scheme.boxes(), scheme.balls(i),
        opts);
  }
  return ctx;
}

struct TailBoundResult {
  /// Absolute threshold on |mu - E mu| / sqrt(N).
  double epsilon = 0.0;
  /// The full bound with the slack multiplier applied.
  double value = 0.0;
  /// sqrt(2) / P(A) * exp(-eps^2 / (16 sigma^2)), before the correction.
  double base = 0.0;
  /// The computed correction term (rho/32) y^2 f2(2y), y = eps^2/(8 sigma^4 sqrt(N)).
  double correction = 0.0;
  /// 8 sigma^2 / eps^2: the size scale of the remainder that the closed
  /// form does not include.  Small values mean the reported bound is tight.
  double slack_indicator = 0.0;
};

/// Exponential bound on P(|mu - E mu| / sqrt(N) >= eps), valid for
/// eps >= 4 sqrt(2) sigma:
///
///   sqrt(2)/P(A) * exp(-eps^2 / (16 sigma^2)) * (1 + B),
///   B = (rho/32) * y^2 * f2(2y),  y = eps^2 / (8 sigma^4 sqrt(N)).
///
/// The O(8 sigma^2 / eps^2) remainder of the underlying expansion is not
/// computable in closed form; its scale is reported as slack_indicator and a
/// conservative caller can widen the bound with slack_multiplier.
inline TailBoundResult tail_bound(const TheoryContext& ctx, double epsilon,
                                  double slack_multiplier = 1.0,
                                  double f2_rel_tol = 1e-8) {
  const double sigma = std::sqrt(ctx.sigma2);
  const double floor_eps = 4.0 * std::sqrt(2.0) * sigma;
  if (!(epsilon >= floor_eps * (1.0 - 1e-12))) {
    throw ValidationError("tail_bound: epsilon = " + format_g12(epsilon) +
                          " below the validity threshold 4 sqrt(2) sigma = " +
                          format_g12(floor_eps));
  }
  if (!(slack_multiplier >= 1.0)) {
    throw ValidationError("tail_bound: slack multiplier must be >= 1");
  }
  if (ctx.log_prob_A == kNegInfinity) {
    throw InfeasibleError("tail_bound: conditioning event has probability zero");
  }
  TailBoundResult r;
  r.epsilon = epsilon;
  const double N = static_cast<double>(ctx.scheme.boxes());
  const double y =
      epsilon * epsilon / (8.0 * ctx.sigma2 * ctx.sigma2 * std::sqrt(N));
  r.correction = (ctx.rho / 32.0) * y * y * f2(2.0 * y, f2_rel_tol);
  r.slack_indicator = 8.0 * ctx.sigma2 / (epsilon * epsilon);
  const double log_base = 0.5 * std::log(2.0) - ctx.log_prob_A -
                          epsilon * epsilon / (16.0 * ctx.sigma2);
  r.base = std::exp(log_base);
  r.value = std::exp(log_base + std::log1p(r.correction) +
                     std::log(slack_multiplier));
  return r;
}

// ---------------------------------------------------------------------------
// One-box local approximation.
// ---------------------------------------------------------------------------

/// Closed-form approximation to the one-box conditional marginal
/// P(eta_1 = s | S_N = n):
///
///   pmf(s; theta_alpha) sqrt(N/(N-1))
///     * exp(-(n - s - (n/N)(N-1))^2 / (2 sigma^2(theta_alpha) (N-1)))
///
/// with theta_alpha centred at alpha = n/N.  The ratio to the exact marginal
/// tends to 1 as N grows with the density held fixed.
inline double marginal_local_approx(const PowerSeriesFamily& family,
                                    std::int64_t num_vars, std::int64_t total,
                                    std::int64_t s) {
  if (num_vars < 2) {
    throw ValidationError("marginal_local_approx: num_vars must be >= 2");
  }
  if (total < 1) {
    throw ValidationError("marginal_local_approx: total must be >= 1");
  }
  if (s < 0 || s > total) {
    throw ValidationError("marginal_local_approx: s outside [0, total]");
  }
  const double N = static_cast<double>(num_vars);
  const double n = static_cast<double>(total);
  double alpha = n / N;
  if (family.support_bound()) {
    alpha =
        std::min(alpha, 0.999 * static_cast<double>(*family.support_bound()));
  }
  const double theta = mean_inverse(family, alpha).value;
  const double sigma2 = variance(family, theta);
  const double d = n - static_cast<double>(s) - (n / N) * (N - 1.0);
  const double lp = log_pmf(family, theta, s);
  if (lp == kNegInfinity) return 0.0;
  return std::exp(lp + 0.5 * std::log(N / (N - 1.0)) -
                  d * d / (2.0 * sigma2 * (N - 1.0)));
}

// ---------------------------------------------------------------------------
// Product identities for equal colour splits.
// ---------------------------------------------------------------------------

/// One evaluated identity instance.
struct IdentityCase {
  int num_colours = 0;
  double alpha = 0.0;
  std::int64_t s = -1;  // -1 for the zero-cell product identity
  double lhs = 0.0;
  double rhs = 0.0;
  bool holds = false;
};

/// Results of probing whether splitting density alpha across K equal colours
/// reproduces the single-colour scheme:
///   * zero-cell product identity: (b_0 / B(alpha/K))^K = b_0 / B(alpha),
///   * composition identity: the colour-blind limit of the K-colour split
///     equals the single-colour limit at alpha, for s = 0..s_max.
/// Both hold exactly when B is a pure exponential (the Poisson family) and
/// generally fail otherwise.
struct IdentityReport {
  std::string family;
  double alpha = 0.0;
  double tolerance = 0.0;
  std::vector<IdentityCase> product_cases;
  std::vector<IdentityCase> composition_cases;
  bool all_product_hold = false;
  bool all_composition_hold = false;
};

inline IdentityReport equal_split_identities(
    const PowerSeriesFamily& family, double alpha,
    const std::vector<int>& colour_counts = {2, 3, 5}, std::int64_t s_max = 5,
    double tolerance = 1e-12) {
  if (!(alpha > 0.0)) {
    throw ValidationError("equal_split_identities: alpha must be > 0");
  }
  IdentityReport rep;
  rep.family = family.name();
  rep.alpha = alpha;
  rep.tolerance = tolerance;
  rep.all_product_hold = true;
  rep.all_composition_hold = true;

  const double log_b0 = family.log_coeff(0);
  const double rhs_product = std::exp(log_b0 - log_eval_B(family, alpha));
  for (int K : colour_counts) {
    if (K < 2) throw ValidationError("equal_split_identities: K must be >= 2");
    IdentityCase c;
    c.num_colours = K;
    c.alpha = alpha;
    c.lhs = std::exp(static_cast<double>(K) *
                     (log_b0 - log_eval_B(family, alpha / K)));
    c.rhs = rhs_product;
    c.holds = std::abs(c.lhs - c.rhs) <= tolerance;
    rep.all_product_hold = rep.all_product_hold && c.holds;
    rep.product_cases.push_back(c);

    const std::vector<PowerSeriesFamily> fams(static_cast<std::size_t>(K),
                                              family);
    const std::vector<double> alphas(static_cast<std::size_t>(K),
                                     alpha / static_cast<double>(K));
    for (std::int64_t s = 0; s <= s_max; ++s) {
      IdentityCase cc;
      cc.num_colours = K;
      cc.alpha = alpha;
      cc.s = s;
      cc.lhs = slln_limit_total(fams, alphas, s);
      cc.rhs = slln_limit({family}, {alpha}, {s});
      cc.holds = std::abs(cc.lhs - cc.rhs) <= tolerance;
      rep.all_composition_hold = rep.all_composition_hold && cc.holds;
      rep.composition_cases.push_back(cc);
    }
  }
  return rep;
}

}  // namespace alloclab
