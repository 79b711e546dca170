// SPDX-License-Identifier: Apache-2.0
//
// Distribution tables for partial sums S_j = xi_1 + ... + xi_j of i.i.d.
// power-series variables, computed by direct convolution:
//
//   P(S_1 = m) = pmf(m),   P(S_j = m) = sum_k pmf(k) P(S_{j-1} = m - k).
//
// The recursion runs on linear-domain rows rescaled to a per-row maximum of
// one, with the accumulated scale kept as a log offset, so tables stay exact
// to ~1e-12 relative even when the probabilities themselves are far below
// the double floor.  Entries more than ~700 nats below their row peak sit at
// the floating-point floor and only their order of magnitude is meaningful.
//
// Two build modes:
//   * full     - stores every row P(S_j = m), j = 1..N, m = 0..n.  Needed by
//                the sequential conditional sampler.  Memory N*(n+1) doubles.
//   * marginal - streams the recursion and keeps only row 1, row N-1 and
//                P(S_N = n), which is all the one-box conditional marginal
//                needs.  Memory ~3 rows regardless of N.
#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "alloclab/common.hpp"
#include "alloclab/power_series.hpp"

namespace alloclab {

struct TableOptions {
  /// Full-mode tables larger than this raise ResourceError.
  double memory_cap_bytes = 2.0e9;
  /// Convolution kernel keeps pmf terms within this many nats of the peak
  /// term.  700 keeps every representable normal double; the neglected tail
  /// contributes < N * exp(-cutoff) relative error.
  double term_log_cutoff = 700.0;
  /// Cheaper cutoff for marginal (streaming) builds; exp(-60) * N is far
  /// below every tolerance used downstream.
  double term_log_cutoff_marginal = 60.0;
};

class SumDistributionTable {
 public:
  enum class Mode { full, marginal };

  /// Builds the table for (family, theta) with `num_vars` variables and
  /// target total `total`.  Throws DomainError (bad theta), ValidationError
  /// (bad sizes), InfeasibleError (total above the maximum attainable sum),
  /// ResourceError (full mode over the memory cap).
  static SumDistributionTable build(const PowerSeriesFamily& family,
                                    double theta, std::int64_t num_vars,
                                    std::int64_t total, Mode mode = Mode::full,
                                    const TableOptions& opts = {}) {
    check_theta(family, theta);
    if (num_vars < 1) throw ValidationError("sum table: num_vars must be >= 1");
    if (total < 0) throw ValidationError("sum table: total must be >= 0");
    if (family.support_bound() &&
        total > num_vars * *family.support_bound()) {
      throw InfeasibleError(
          "sum table: total " + std::to_string(total) +
          " exceeds the maximum attainable sum " +
          std::to_string(num_vars * *family.support_bound()) + " for family '" +
          family.name() + "'");
    }

    SumDistributionTable t;
    t.mode_ = mode;
    t.num_vars_ = num_vars;
    t.total_ = total;
    t.theta_ = theta;
    t.family_name_ = family.name();
    t.family_hash_ = fnv1a64(family.name());

    const std::int64_t width = total + 1;
    if (mode == Mode::full) {
      const double bytes = static_cast<double>(num_vars) *
                           static_cast<double>(width) * sizeof(double);
      if (bytes > opts.memory_cap_bytes) {
        throw ResourceError(
            "sum table: full mode needs " + format_g12(bytes) +
            " bytes, over the cap of " + format_g12(opts.memory_cap_bytes) +
            " (use marginal mode or raise memory_cap_bytes)");
      }
    }

    // Row 1 is the pmf itself, stored exactly from log_pmf.
    const PmfEvaluator pe(family, theta);
    std::vector<double> row1(static_cast<std::size_t>(width));
    for (std::int64_t m = 0; m < width; ++m) {
      row1[static_cast<std::size_t>(m)] = pe.log_pmf(m);
    }

    // Convolution kernel: pmf terms within `cutoff` nats of the peak,
    // rescaled so the peak is exactly 1.
    const double cutoff = (mode == Mode::full) ? opts.term_log_cutoff
                                               : opts.term_log_cutoff_marginal;
    double peak_log = kNegInfinity;
    for (double v : row1) peak_log = std::max(peak_log, v);
    if (peak_log == kNegInfinity) {
      throw InfeasibleError("sum table: pmf vanishes on [0, total]");
    }
    std::int64_t kernel_len = 0;
    for (std::int64_t k = 0; k < width; ++k) {
      if (row1[static_cast<std::size_t>(k)] >= peak_log - cutoff) {
        kernel_len = k + 1;
      }
    }
    std::vector<double> kernel(static_cast<std::size_t>(kernel_len));
    for (std::int64_t k = 0; k < kernel_len; ++k) {
      const double lq = row1[static_cast<std::size_t>(k)];
      kernel[static_cast<std::size_t>(k)] =
          (lq >= peak_log - cutoff) ? std::exp(lq - peak_log) : 0.0;
    }

    if (mode == Mode::full) {
      t.log_rows_.assign(static_cast<std::size_t>(num_vars) *
                             static_cast<std::size_t>(width),
                         kNegInfinity);
      std::memcpy(t.log_rows_.data(), row1.data(),
                  static_cast<std::size_t>(width) * sizeof(double));
    } else {
      t.row1_ = row1;
    }

    if (num_vars == 1) {
      // P(S_0 = m) is the delta at zero.
      if (mode == Mode::marginal) {
        t.prev_log_.assign(static_cast<std::size_t>(width), kNegInfinity);
        t.prev_log_[0] = 0.0;
      }
      t.log_pa_ = row1[static_cast<std::size_t>(total)];
      return t;
    }

    // Scaled linear recursion.  prev holds P(S_j = m) / exp(offset), with
    // the row maximum kept at 1 to preserve relative precision.
    std::vector<double> prev(static_cast<std::size_t>(width));
    std::vector<double> next(static_cast<std::size_t>(width));
    for (std::int64_t m = 0; m < width; ++m) {
      const double lv = row1[static_cast<std::size_t>(m)];
      prev[static_cast<std::size_t>(m)] =
          (lv == kNegInfinity) ? 0.0 : std::exp(lv - peak_log);
    }
    double offset = peak_log;
    std::int64_t band_lo = 0, band_hi = 0;
    for (std::int64_t m = 0; m < width; ++m) {
      if (prev[static_cast<std::size_t>(m)] > 0.0) band_hi = m;
    }
    while (band_lo < width && prev[static_cast<std::size_t>(band_lo)] == 0.0) {
      ++band_lo;
    }

    const std::int64_t last_streamed = num_vars - 1;  // marginal keeps this row
    if (mode == Mode::marginal && last_streamed == 1) t.prev_log_ = row1;
    for (std::int64_t j = 2; j <= num_vars; ++j) {
      if (mode == Mode::marginal && j > last_streamed) break;
      std::fill(next.begin(), next.end(), 0.0);
      for (std::int64_t k = 0; k < kernel_len; ++k) {
        const double qk = kernel[static_cast<std::size_t>(k)];
        if (qk == 0.0) continue;
        const std::int64_t lo = k + band_lo;
        if (lo >= width) break;
        const std::int64_t hi = std::min<std::int64_t>(width - 1, k + band_hi);
        const double* src = prev.data() + band_lo;
        double* dst = next.data() + lo;
        const std::int64_t len = hi - lo + 1;
        for (std::int64_t i = 0; i < len; ++i) dst[i] += qk * src[i];
      }
      double mx = 0.0;
      for (double v : next) mx = std::max(mx, v);
      if (mx <= 0.0) {
        throw InternalError("sum table: row " + std::to_string(j) +
                            " vanished; b_0 > 0 should make that impossible");
      }
      const double row_offset = offset + peak_log;  // log scale of `next`
      if (mode == Mode::full) {
        double* out = t.log_rows_.data() +
                      static_cast<std::size_t>(j - 1) *
                          static_cast<std::size_t>(width);
        for (std::int64_t m = 0; m < width; ++m) {
          const double v = next[static_cast<std::size_t>(m)];
          out[m] = (v > 0.0) ? std::log(v) + row_offset : kNegInfinity;
        }
      } else if (j == last_streamed) {
        t.prev_log_.assign(static_cast<std::size_t>(width), kNegInfinity);
        for (std::int64_t m = 0; m < width; ++m) {
          const double v = next[static_cast<std::size_t>(m)];
          if (v > 0.0) {
            t.prev_log_[static_cast<std::size_t>(m)] = std::log(v) + row_offset;
          }
        }
      }
      // Rescale into prev; flush below ~1e-315 to avoid subnormal drag.
      const double inv = 1.0 / mx;
      band_lo = width;
      band_hi = 0;
      for (std::int64_t m = 0; m < width; ++m) {
        double v = next[static_cast<std::size_t>(m)] * inv;
        if (v < 1e-315) v = 0.0;
        prev[static_cast<std::size_t>(m)] = v;
        if (v > 0.0) {
          band_lo = std::min(band_lo, m);
          band_hi = std::max(band_hi, m);
        }
      }
      offset = row_offset + std::log(mx);
    }

    if (mode == Mode::full) {
      t.log_pa_ = t.log_rows_[static_cast<std::size_t>(num_vars - 1) *
                                  static_cast<std::size_t>(width) +
                              static_cast<std::size_t>(total)];
    } else {
      // Final dot product: P(S_N = n) = sum_k pmf(k) P(S_{N-1} = n - k),
      // evaluated against the stored log row to stay scale-consistent.
      double acc = kNegInfinity;
      for (std::int64_t k = 0; k < kernel_len && k <= total; ++k) {
        const double lq = row1[static_cast<std::size_t>(k)];
        const double lp = t.prev_log_[static_cast<std::size_t>(total - k)];
        if (lq == kNegInfinity || lp == kNegInfinity) continue;
        acc = log_add_exp(acc, lq + lp);
      }
      t.log_pa_ = acc;
    }
    return t;
  }

  // -- observers --------------------------------------------------------------

  Mode mode() const { return mode_; }
  std::int64_t num_vars() const { return num_vars_; }
  std::int64_t total() const { return total_; }
  double theta() const { return theta_; }
  const std::string& family_name() const { return family_name_; }
  std::uint64_t family_hash() const { return family_hash_; }

  /// log P(S_j = m).  j = 0 is the empty sum (delta at zero); m outside
  /// [0, total] returns -infinity.  Full mode only.
  double log_prob(std::int64_t j, std::int64_t m) const {
    if (mode_ != Mode::full) {
      throw ValidationError("sum table: log_prob(j, m) needs a full-mode table");
    }
    if (j < 0 || j > num_vars_) {
      throw ValidationError("sum table: row index " + std::to_string(j) +
                            " outside [0, " + std::to_string(num_vars_) + "]");
    }
    if (m < 0 || m > total_) return kNegInfinity;
    if (j == 0) return m == 0 ? 0.0 : kNegInfinity;
    return log_rows_[static_cast<std::size_t>(j - 1) *
                         static_cast<std::size_t>(total_ + 1) +
                     static_cast<std::size_t>(m)];
  }

  /// log pmf(k) at the table's (family, theta), for k in [0, total].  This is
  /// row 1, stored exactly; k outside the budget returns -infinity even
  /// though the true pmf there is merely small.
  double log_pmf_term(std::int64_t k) const {
    if (k < 0 || k > total_) return kNegInfinity;
    const double* row =
        (mode_ == Mode::full) ? log_rows_.data() : row1_.data();
    return row[static_cast<std::size_t>(k)];
  }

  /// log P(S_{N-1} = m), available in both modes.
  double log_prob_prev(std::int64_t m) const {
    if (m < 0 || m > total_) return kNegInfinity;
    if (num_vars_ == 1) return m == 0 ? 0.0 : kNegInfinity;
    if (mode_ == Mode::full) return log_prob(num_vars_ - 1, m);
    return prev_log_[static_cast<std::size_t>(m)];
  }

  /// log P(S_N = n), the conditioning event.
  double log_prob_event_A() const { return log_pa_; }

  // -- binary cache -----------------------------------------------------------

  /// Serializes a full-mode table.  Layout: magic, family name hash, theta,
  /// N, n, then the N*(n+1) log rows; all little-endian 64-bit words.
  /// Reloading is bit-identical.
  void save(const std::string& path) const {
    if (mode_ != Mode::full) {
      throw ValidationError("sum table: only full-mode tables are cacheable");
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ResourceError("sum table: cannot open '" + path + "' for write");
    auto put_u64 = [&](std::uint64_t v) {
      out.write(reinterpret_cast<const char*>(&v), sizeof(v));
    };
    put_u64(kCacheMagic);
    put_u64(family_hash_);
    std::uint64_t theta_bits;
    std::memcpy(&theta_bits, &theta_, sizeof(theta_bits));
    put_u64(theta_bits);
    put_u64(static_cast<std::uint64_t>(num_vars_));
    put_u64(static_cast<std::uint64_t>(total_));
    out.write(reinterpret_cast<const char*>(log_rows_.data()),
              static_cast<std::streamsize>(log_rows_.size() * sizeof(double)));
    if (!out) throw ResourceError("sum table: short write to '" + path + "'");
  }

  static SumDistributionTable load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ResourceError("sum table: cannot open '" + path + "'");
    auto get_u64 = [&]() {
      std::uint64_t v = 0;
      in.read(reinterpret_cast<char*>(&v), sizeof(v));
      return v;
    };
    if (get_u64() != kCacheMagic) {
      throw ValidationError("sum table: '" + path + "' is not a table cache");
    }
    SumDistributionTable t;
    t.mode_ = Mode::full;
    t.family_hash_ = get_u64();
    const std::uint64_t theta_bits = get_u64();
    std::memcpy(&t.theta_, &theta_bits, sizeof(t.theta_));
    t.num_vars_ = static_cast<std::int64_t>(get_u64());
    t.total_ = static_cast<std::int64_t>(get_u64());
    if (!in || t.num_vars_ < 1 || t.total_ < 0) {
      throw ValidationError("sum table: '" + path + "' has a corrupt header");
    }
    t.log_rows_.resize(static_cast<std::size_t>(t.num_vars_) *
                       static_cast<std::size_t>(t.total_ + 1));
    in.read(reinterpret_cast<char*>(t.log_rows_.data()),
            static_cast<std::streamsize>(t.log_rows_.size() * sizeof(double)));
    if (!in) throw ValidationError("sum table: '" + path + "' is truncated");
    t.log_pa_ = t.log_rows_[static_cast<std::size_t>(t.num_vars_ - 1) *
                                static_cast<std::size_t>(t.total_ + 1) +
                            static_cast<std::size_t>(t.total_)];
    return t;
  }

  /// Canonical cache file name for (family, theta, N, n).
  static std::string cache_file_name(const PowerSeriesFamily& family,
                                     double theta, std::int64_t num_vars,
                                     std::int64_t total) {
    std::uint64_t theta_bits;
    std::memcpy(&theta_bits, &theta, sizeof(theta_bits));
    char buf[128];
    std::snprintf(buf, sizeof(buf), "sumtab_%016llx_%016llx_%lld_%lld.bin",
                  static_cast<unsigned long long>(fnv1a64(family.name())),
                  static_cast<unsigned long long>(theta_bits),
                  static_cast<long long>(num_vars),
                  static_cast<long long>(total));
    return buf;
  }

 private:
  static constexpr std::uint64_t kCacheMagic = 0x414c4c4f43544231ull;  // "ALLOCTB1"

  Mode mode_ = Mode::full;
  std::int64_t num_vars_ = 0;
  std::int64_t total_ = 0;
  double theta_ = 0.0;
  std::string family_name_;
  std::uint64_t family_hash_ = 0;
  std::vector<double> log_rows_;  // full: num_vars rows of (total + 1)
  std::vector<double> row1_;      // marginal: pmf row
  std::vector<double> prev_log_;  // marginal: log P(S_{N-1} = m)
  double log_pa_ = kNegInfinity;
};

/// P(S_N = n) for the table's configuration.
inline double prob_event_A(const SumDistributionTable& table) {
  const double lp = table.log_prob_event_A();
  return lp == kNegInfinity ? 0.0 : std::exp(lp);
}

/// Closed-form log P(S_N = n) for the built-in kinds:
///   poisson      S_N ~ Poisson(N theta)
///   geometric    S_N ~ NegativeBinomial(N, theta)
///   binomial(m)  S_N ~ Binomial(mN, theta/(1+theta))
/// Returns nullopt for custom families.
inline std::optional<double> closed_form_log_sum_pmf(
    const PowerSeriesFamily& family, double theta, std::int64_t num_vars,
    std::int64_t total) {
  check_theta(family, theta);
  if (num_vars < 1 || total < 0) {
    throw ValidationError("closed-form sum pmf: bad num_vars or total");
  }
  const double N = static_cast<double>(num_vars);
  const double n = static_cast<double>(total);
  switch (family.kind()) {
    case PowerSeriesFamily::Kind::poisson:
      return n * std::log(N * theta) - N * theta - std::lgamma(n + 1.0);
    case PowerSeriesFamily::Kind::geometric:
      return std::lgamma(n + N) - std::lgamma(N) - std::lgamma(n + 1.0) +
             n * std::log(theta) + N * std::log1p(-theta);
    case PowerSeriesFamily::Kind::binomial: {
      const double mN = static_cast<double>(family.binomial_trials()) * N;
      if (n > mN) return kNegInfinity;
      return std::lgamma(mN + 1.0) - std::lgamma(n + 1.0) -
             std::lgamma(mN - n + 1.0) + n * std::log(theta) -
             mN * std::log1p(theta);
    }
    case PowerSeriesFamily::Kind::custom:
      return std::nullopt;
  }
  return std::nullopt;
}

}  // namespace alloclab
