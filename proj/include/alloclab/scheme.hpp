// SPDX-License-Identifier: Apache-2.0
//
// Multi-colour generalized allocation schemes: K independent single-colour
// schemes over the same N boxes.  Colour i places n_i balls of its own
// power-series family; rows of the allocation matrix are independent across
// colours, and each row follows the conditional law handled by sampler.hpp.
//
// The free parameter theta_i is a modelling convenience only (conditional
// laws are theta-free); by default it is fitted so that the unconditioned
// mean matches the ball density, theta_i = m_i^{-1}(n_i / N), which keeps
// every numeric path centred.
#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "alloclab/common.hpp"
#include "alloclab/power_series.hpp"
#include "alloclab/rng.hpp"
#include "alloclab/sampler.hpp"
#include "alloclab/sum_distribution.hpp"

namespace alloclab {

/// One colour of a scheme: a family, its ball count, and an optional theta
/// override (kept only for diagnostics; it cannot change any conditional
/// law).
struct ColourSpec {
  PowerSeriesFamily family;
  std::int64_t balls = 0;
  std::optional<double> theta;
};

/// A fully resolved scheme: K colours, N boxes, fitted (or overridden)
/// theta per colour.
class SchemeConfig {
 public:
  /// Validates and fits.  Throws ValidationError (K = 0, N < 1, negative
  /// balls), DomainError (bad theta override) or RangeError labelled with
  /// the colour index when a density is unattainable for its family.
  SchemeConfig(std::vector<ColourSpec> colours, std::int64_t boxes,
               double fit_tol = 1e-10)
      : colours_(std::move(colours)), boxes_(boxes) {
    if (colours_.empty()) {
      throw ValidationError("scheme: need at least one colour");
    }
    if (boxes_ < 1) throw ValidationError("scheme: need at least one box");
    thetas_.reserve(colours_.size());
    alphas_.reserve(colours_.size());
    for (std::size_t i = 0; i < colours_.size(); ++i) {
      const auto& c = colours_[i];
      if (c.balls < 0) {
        throw ValidationError("scheme: colour " + std::to_string(i) +
                              " has a negative ball count");
      }
      const double alpha =
          static_cast<double>(c.balls) / static_cast<double>(boxes_);
      alphas_.push_back(alpha);
      if (c.theta) {
        check_theta(c.family, *c.theta);
        thetas_.push_back(*c.theta);
      } else if (c.balls == 0) {
        // Empty colour: the conditional row is identically zero, so any
        // valid theta does; pick a small interior point.
        thetas_.push_back(std::isfinite(c.family.radius())
                              ? c.family.radius() / 4.0
                              : 0.25);
      } else {
        try {
          thetas_.push_back(mean_inverse(c.family, alpha, fit_tol).value);
        } catch (const RangeError& e) {
          throw RangeError("scheme: colour " + std::to_string(i) + " ('" +
                           c.family.name() + "'): " + e.what());
        }
      }
    }
  }

  int num_colours() const { return static_cast<int>(colours_.size()); }
  std::int64_t boxes() const { return boxes_; }
  std::int64_t balls(int i) const { return at(i).balls; }
  double alpha(int i) const { return alphas_[static_cast<std::size_t>(i)]; }
  double theta(int i) const { return thetas_[static_cast<std::size_t>(i)]; }
  const PowerSeriesFamily& family(int i) const { return at(i).family; }
  const std::vector<ColourSpec>& colours() const { return colours_; }

 private:
  const ColourSpec& at(int i) const {
    if (i < 0 || i >= num_colours()) {
      throw ValidationError("scheme: colour index " + std::to_string(i) +
                            " outside [0, " + std::to_string(num_colours()) +
                            ")");
    }
    return colours_[static_cast<std::size_t>(i)];
  }

  std::vector<ColourSpec> colours_;
  std::int64_t boxes_ = 0;
  std::vector<double> thetas_;
  std::vector<double> alphas_;
};

/// Named constructor mirroring the fitting rule: theta_i = m_i^{-1}(n_i / N)
/// wherever no override is given.
inline SchemeConfig fit_thetas(std::vector<ColourSpec> colours,
                               std::int64_t boxes, double fit_tol = 1e-10) {
  return SchemeConfig(std::move(colours), boxes, fit_tol);
}

/// A sampled allocation: counts[i][j] = balls of colour i in box j, stored
/// row-major.
struct AllocationMatrix {
  int num_colours = 0;
  std::int64_t boxes = 0;
  std::vector<std::int64_t> counts;

  std::int64_t at(int colour, std::int64_t box) const {
    return counts[static_cast<std::size_t>(colour) *
                      static_cast<std::size_t>(boxes) +
                  static_cast<std::size_t>(box)];
  }

  std::int64_t row_sum(int colour) const {
    std::int64_t s = 0;
    for (std::int64_t j = 0; j < boxes; ++j) s += at(colour, j);
    return s;
  }

  /// Colour-blind content of one box.
  std::int64_t column_total(std::int64_t box) const {
    std::int64_t s = 0;
    for (int i = 0; i < num_colours; ++i) s += at(i, box);
    return s;
  }
};

/// What to count: boxes whose content vector equals s exactly, or boxes
/// whose colour-blind total equals a scalar s.
struct OccupancyTarget {
  enum class Kind { vector, total };
  Kind kind = Kind::vector;
  std::vector<std::int64_t> s;  // size K for vector, size 1 for total

  static OccupancyTarget vector_target(std::vector<std::int64_t> s) {
    return {Kind::vector, std::move(s)};
  }
  static OccupancyTarget total_target(std::int64_t s) {
    return {Kind::total, {s}};
  }

  std::string to_string() const {
    if (kind == Kind::total) return "total:" + std::to_string(s.at(0));
    std::string out;
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (i) out += ';';
      out += std::to_string(s[i]);
    }
    return out;
  }
};

/// mu = number of boxes whose content vector is exactly s.
inline std::int64_t count_occupancy_vector(const AllocationMatrix& m,
                                           const std::vector<std::int64_t>& s) {
  if (static_cast<int>(s.size()) != m.num_colours) {
    throw ValidationError("count_occupancy_vector: target has " +
                          std::to_string(s.size()) + " entries, expected " +
                          std::to_string(m.num_colours));
  }
  std::int64_t mu = 0;
  for (std::int64_t j = 0; j < m.boxes; ++j) {
    bool match = true;
    for (int i = 0; i < m.num_colours; ++i) {
      if (m.at(i, j) != s[static_cast<std::size_t>(i)]) {
        match = false;
        break;
      }
    }
    mu += match ? 1 : 0;
  }
  return mu;
}

/// mu = number of boxes whose colour-blind total is exactly s.
inline std::int64_t count_occupancy_total(const AllocationMatrix& m,
                                          std::int64_t s) {
  std::int64_t mu = 0;
  for (std::int64_t j = 0; j < m.boxes; ++j) {
    mu += (m.column_total(j) == s) ? 1 : 0;
  }
  return mu;
}

inline std::int64_t count_occupancy(const AllocationMatrix& m,
                                    const OccupancyTarget& target) {
  return target.kind == OccupancyTarget::Kind::vector
             ? count_occupancy_vector(m, target.s)
             : count_occupancy_total(m, target.s[0]);
}

/// Per-colour sampling strategy, resolved once and reused across draws.
/// Order of preference: the closed-form direct sampler (scales to any N),
/// then a full table when it fits the cell budget, then rejection.
struct SchemeSamplerOptions {
  /// Full-table route allowed up to this many cells (N * (n + 1)).
  double table_cell_cap = 2.0e6;
  TableOptions table;
  std::uint64_t rejection_max_attempts = 100'000'000;
};

class AllocationSampler {
 public:
  enum class Path { direct, table, rejection };

  explicit AllocationSampler(SchemeConfig config,
                             SchemeSamplerOptions opts = {})
      : config_(std::move(config)), opts_(opts) {
    const int K = config_.num_colours();
    paths_.reserve(static_cast<std::size_t>(K));
    tables_.resize(static_cast<std::size_t>(K));
    for (int i = 0; i < K; ++i) {
      if (has_direct_conditional_sampler(config_.family(i))) {
        paths_.push_back(Path::direct);
        continue;
      }
      const double cells = static_cast<double>(config_.boxes()) *
                           (static_cast<double>(config_.balls(i)) + 1.0);
      if (cells <= opts_.table_cell_cap) {
        tables_[static_cast<std::size_t>(i)] = SumDistributionTable::build(
            config_.family(i), config_.theta(i), config_.boxes(),
            config_.balls(i), SumDistributionTable::Mode::full, opts_.table);
        paths_.push_back(Path::table);
      } else {
        paths_.push_back(Path::rejection);
      }
    }
  }

  const SchemeConfig& config() const { return config_; }
  Path path(int colour) const {
    return paths_[static_cast<std::size_t>(colour)];
  }

  /// Draws one allocation matrix.  Rows are sampled independently, colour 0
  /// first.  Throws NonConvergenceError if a rejection-path colour exhausts
  /// its attempt budget (the budget is large; exhaustion means the scheme is
  /// badly off-centre and a table or direct route should be used).
  AllocationMatrix operator()(Rng& rng) const {
    AllocationMatrix m;
    m.num_colours = config_.num_colours();
    m.boxes = config_.boxes();
    m.counts.resize(static_cast<std::size_t>(m.num_colours) *
                    static_cast<std::size_t>(m.boxes));
    for (int i = 0; i < m.num_colours; ++i) {
      ConditionalRow row;
      switch (paths_[static_cast<std::size_t>(i)]) {
        case Path::direct:
          row = sample_conditional_direct(config_.family(i), config_.boxes(),
                                          config_.balls(i), rng);
          break;
        case Path::table:
          row = sample_exact(*tables_[static_cast<std::size_t>(i)], rng);
          break;
        case Path::rejection: {
          auto r = sample_rejection(config_.family(i), config_.theta(i),
                                    config_.boxes(), config_.balls(i), rng,
                                    opts_.rejection_max_attempts);
          if (!r.row) {
            throw NonConvergenceError(
                "allocation sampler: colour " + std::to_string(i) +
                " exhausted " + std::to_string(r.attempts) +
                " rejection attempts");
          }
          row = std::move(*r.row);
          break;
        }
      }
      std::copy(row.counts.begin(), row.counts.end(),
                m.counts.begin() + static_cast<std::ptrdiff_t>(
                                       static_cast<std::size_t>(i) *
                                       static_cast<std::size_t>(m.boxes)));
    }
    return m;
  }

 private:
  SchemeConfig config_;
  SchemeSamplerOptions opts_;
  std::vector<Path> paths_;
  std::vector<std::optional<SumDistributionTable>> tables_;
};

/// One-shot convenience wrapper; loops should hold an AllocationSampler.
inline AllocationMatrix sample_allocation(const SchemeConfig& config,
                                          Rng& rng) {
  return AllocationSampler(config)(rng);
}

}  // namespace alloclab
