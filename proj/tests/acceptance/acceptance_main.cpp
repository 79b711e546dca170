// SPDX-License-Identifier: Apache-2.0
//
// Acceptance gate: one pass/fail line per criterion, exit code = number of
// failures.  Statistical criteria run at a frozen master seed; reruns are
// deterministic reproductions, not fresh experiments.
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include <alloclab/alloclab.hpp>

#include "../oracle_helpers.hpp"

using namespace alloclab;

namespace {

constexpr std::uint64_t kMasterSeed = 0xACCE97EDull;

int g_failures = 0;

void report(int criterion, bool ok, const std::string& detail) {
  std::printf("%s criterion %d: %s\n", ok ? "PASS" : "FAIL", criterion,
              detail.c_str());
  std::fflush(stdout);
  if (!ok) ++g_failures;
}

std::string g12(double v) { return format_g12(v); }

double seconds_since(
    const std::chrono::steady_clock::time_point& t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
      .count();
}

ExperimentConfig slln_config(std::vector<ColourSpec> colours,
                             std::int64_t boxes,
                             std::vector<std::int64_t> balls,
                             OccupancyTarget target) {
  ExperimentConfig cfg;
  cfg.kind = ExperimentKind::slln;
  cfg.colours = std::move(colours);
  cfg.boxes = boxes;
  cfg.schedule = {{boxes, std::move(balls)}};
  cfg.target = std::move(target);
  cfg.replications = 20;
  cfg.master_seed = kMasterSeed;
  return cfg;
}

// -- criterion 1: single-colour occupancy limits ----------------------------

void criterion_1() {
  const auto t0 = std::chrono::steady_clock::now();
  const double e1 = std::exp(-1.0);
  const struct {
    std::int64_t s;
    double limit;
  } targets[] = {{0, e1}, {1, e1}, {2, e1 / 2.0}};
  bool ok = true;
  std::string detail = "single-colour occupancy limits:";
  for (const auto& t : targets) {
    auto cfg = slln_config({{PowerSeriesFamily::poisson(), 20000, {}}}, 20000,
                           {20000}, OccupancyTarget::vector_target({t.s}));
    const auto rep = run_slln(cfg);
    const double err =
        rep.summary.at("final_point_mean_abs_error").get<double>();
    const double theory =
        rep.summary.at("points").at(0).at("theory_value").get<double>();
    ok = ok && err < 0.01 && std::abs(theory - t.limit) <= 1e-12;
    detail += " s=" + std::to_string(t.s) + " mean|mu/N-limit|=" + g12(err);
  }
  const double el = seconds_since(t0);
  ok = ok && el < 60.0;
  detail += " elapsed=" + g12(el) + "s (budget 60)";
  report(1, ok, detail);
}

// -- criterion 2: two-colour product limit ----------------------------------

void criterion_2() {
  auto cfg = slln_config({{PowerSeriesFamily::poisson(), 20000, {}},
                          {PowerSeriesFamily::poisson(), 40000, {}}},
                         20000, {20000, 40000},
                         OccupancyTarget::vector_target({1, 1}));
  const auto rep = run_slln(cfg);
  const double limit = 2.0 * std::exp(-3.0);
  const auto& pt = rep.summary.at("points").at(0);
  const double theory = pt.at("theory_value").get<double>();
  const double mean_ratio = pt.at("mean_mu_over_N").get<double>();
  const double err = rep.summary.at("final_point_mean_abs_error").get<double>();
  const bool ok = std::abs(theory - limit) <= 1e-12 &&
                  std::abs(mean_ratio - limit) < 0.01 && err < 0.01;
  report(2, ok,
         "two-colour product limit: theory=" + g12(theory) +
             " mean mu/N=" + g12(mean_ratio) + " mean|err|=" + g12(err) +
             " (limit " + g12(limit) + ")");
}

// -- criterion 3: one-parameter convention arbitration ----------------------

void criterion_3() {
  auto cfg = slln_config({{PowerSeriesFamily::geometric(), 40000, {}}}, 20000,
                         {40000}, OccupancyTarget::vector_target({0}));
  const auto rep = run_slln(cfg);
  const auto& check = rep.summary.at("parameterization_check");
  const double fitted = check.at("fitted_parameter_value").get<double>();
  const double reciprocal =
      check.at("reciprocal_parameter_value").get<double>();
  const double oracle = check.at("finite_oracle_value").get<double>();
  const std::string verdict = check.at("verdict").get<std::string>();
  const double mc =
      rep.summary.at("points").at(0).at("mean_mu_over_N").get<double>();
  // A third value circulates for this point; it matches neither convention
  // and the finite-size oracle must reject it as well.
  const double quoted = 0.18394;
  const bool ok = std::abs(oracle - fitted) <= 0.005 &&
                  std::abs(oracle - quoted) > 0.05 &&
                  std::abs(oracle - reciprocal) > 0.05 &&
                  std::abs(mc - oracle) < 0.01 && verdict == "fitted";
  report(3, ok,
         "convention arbitration at density 2, s=0: oracle(N=2000)=" +
             g12(oracle) + " candidates fitted=" + g12(fitted) +
             " reciprocal=" + g12(reciprocal) + " quoted=" + g12(quoted) +
             " verdict=" + verdict + " mc mean mu/N=" + g12(mc));
}

// -- criterion 4: sampler exactness -----------------------------------------

void criterion_4() {
  const struct {
    PowerSeriesFamily family;
    double theta;
  } cases[] = {
      {PowerSeriesFamily::poisson(), 1.0},
      {PowerSeriesFamily::geometric(), 0.5},
      {PowerSeriesFamily::binomial(3), 0.6},
  };
  // 1e6 draws (not 1e5): at 1e5 the expected sampling noise of the
  // two-empirical comparison already exceeds the 0.005 allowance, so the
  // draw count is raised until the allowance sits ~3x above the noise.
  const std::int64_t draws = 1'000'000;
  bool ok = true;
  std::string detail = "sampler exactness (1e6 draws):";
  for (std::size_t ci = 0; ci < 3; ++ci) {
    const auto& c = cases[ci];
    const auto law = enumerate_conditional_law(c.family, 3, 4);
    double max_diff = 0.0;
    for (std::size_t i = 0; i < law.states.size(); ++i) {
      max_diff = std::max(
          max_diff, std::abs(law.probs[i] - exact_conditional_prob(
                                                c.family, 3, 4, law.states[i])));
    }
    const auto table = SumDistributionTable::build(c.family, c.theta, 3, 4);
    std::vector<double> freq_exact(law.states.size(), 0.0);
    Rng rng_e(derive_seed(kMasterSeed, 40 + ci, 0));
    bool indexed = true;
    for (std::int64_t i = 0; i < draws; ++i) {
      const auto idx = law.index_of(sample_exact(table, rng_e).counts);
      if (idx < 0) {
        indexed = false;
        break;
      }
      freq_exact[static_cast<std::size_t>(idx)] += 1.0;
    }
    std::vector<double> freq_rej(law.states.size(), 0.0);
    Rng rng_r(derive_seed(kMasterSeed, 40 + ci, 1));
    for (std::int64_t i = 0; indexed && i < draws; ++i) {
      const auto r = sample_rejection(c.family, c.theta, 3, 4, rng_r);
      const auto idx = r.row ? law.index_of(r.row->counts) : -1;
      if (idx < 0) {
        indexed = false;
        break;
      }
      freq_rej[static_cast<std::size_t>(idx)] += 1.0;
    }
    for (auto& f : freq_exact) f /= static_cast<double>(draws);
    for (auto& f : freq_rej) f /= static_cast<double>(draws);
    const double tv_exact = oracle::tv_distance(freq_exact, law.probs);
    const double tv_rej = oracle::tv_distance(freq_rej, freq_exact);
    ok = ok && indexed && max_diff <= 1e-12 && tv_exact < 0.005 &&
         tv_rej < 0.005;
    detail += " " + c.family.name() + ": max|p-enum|=" + g12(max_diff) +
              " tv(table,law)=" + g12(tv_exact) +
              " tv(rejection,table)=" + g12(tv_rej);
  }
  report(4, ok, detail);
}

// -- criterion 5: the conditional law ignores the parameter -----------------

void criterion_5() {
  const auto poisson = PowerSeriesFamily::poisson();
  const auto law = enumerate_conditional_law(poisson, 4, 5);

  double max_diff = 0.0;
  for (const auto& state : law.states) {
    const double a = exact_conditional_prob(poisson, 4, 5, state, 0.3);
    const double b = exact_conditional_prob(poisson, 4, 5, state, 0.7);
    max_diff = std::max(max_diff, std::abs(a - b));
  }

  // Two-empirical comparison at 1e6 draws; 1e5 leaves the expected noise of
  // a 56-state comparison above the 0.01 allowance.
  const std::int64_t draws = 1'000'000;
  const auto t3 = SumDistributionTable::build(poisson, 0.3, 4, 5);
  const auto t7 = SumDistributionTable::build(poisson, 0.7, 4, 5);
  std::vector<double> f3(law.states.size(), 0.0), f7(law.states.size(), 0.0);
  Rng r3(derive_seed(kMasterSeed, 50, 0));
  Rng r7(derive_seed(kMasterSeed, 50, 1));
  bool indexed = true;
  for (std::int64_t i = 0; indexed && i < draws; ++i) {
    const auto i3 = law.index_of(sample_exact(t3, r3).counts);
    const auto i7 = law.index_of(sample_exact(t7, r7).counts);
    if (i3 < 0 || i7 < 0) {
      indexed = false;
      break;
    }
    f3[static_cast<std::size_t>(i3)] += 1.0;
    f7[static_cast<std::size_t>(i7)] += 1.0;
  }
  for (auto& f : f3) f /= static_cast<double>(draws);
  for (auto& f : f7) f /= static_cast<double>(draws);
  const double tv = oracle::tv_distance(f3, f7);
  const bool ok = indexed && max_diff <= 1e-12 && tv < 0.01;
  report(5, ok,
         "parameter invariance (N=4, n=5): max|p(0.3)-p(0.7)|=" +
             g12(max_diff) + " tv(samplers at 0.3 vs 0.7)=" + g12(tv) +
             " at 1e6 draws");
}

// -- criterion 6: conditioning-event lower bound on a grid ------------------

void criterion_6() {
  const PowerSeriesFamily families[] = {PowerSeriesFamily::poisson(),
                                        PowerSeriesFamily::geometric()};
  bool ok = true;
  double min_margin = kInfinity;
  double max_rel_poisson = 0.0;
  double max_rel_geometric = 0.0;
  for (const auto& fam : families) {
    for (const double alpha : {0.5, 1.0, 2.0}) {
      for (const std::int64_t N : {100, 300, 1000, 3000}) {
        const std::int64_t n =
            std::llround(alpha * static_cast<double>(N));
        const double theta = mean_inverse(fam, alpha).value;
        const double log_pa = log_prob_event_A_auto(fam, theta, N, n);
        const double pa = std::exp(log_pa);
        const double bound = conditioning_event_lower_bound(fam, alpha, N);
        ok = ok && pa > bound;
        min_margin = std::min(min_margin, pa / bound);
        const auto cf = closed_form_log_sum_pmf(fam, theta, N, n);
        const double rel = std::abs(std::expm1(log_pa - *cf));
        if (fam.kind() == PowerSeriesFamily::Kind::poisson) {
          max_rel_poisson = std::max(max_rel_poisson, rel);
        } else {
          max_rel_geometric = std::max(max_rel_geometric, rel);
        }
      }
    }
  }
  ok = ok && max_rel_poisson <= 1e-9;
  report(6, ok,
         "event-probability lower bound over 24 grid points: min P(A)/bound=" +
             g12(min_margin) +
             " recursion-vs-closed-form rel err: poisson max=" +
             g12(max_rel_poisson) + " (gate 1e-9), geometric max=" +
             g12(max_rel_geometric) + " (informational)");
}

// -- criterion 7: one-box local approximation -------------------------------

void criterion_7() {
  const auto poisson = PowerSeriesFamily::poisson();
  MarginalOptions closed_form;
  closed_form.dp_cell_cap = 0.0;
  bool ok = true;
  std::string detail = "local approximation at density 1, s=1:";
  double prev = kInfinity;
  double last = kInfinity;
  for (const std::int64_t N : {100, 1000, 10000}) {
    const double exact =
        std::exp(log_marginal_prob_auto(poisson, N, N, 1, closed_form));
    // Independent spelling of the same marginal as a cross-check.
    const double binom = oracle::poisson_marginal(N, N, 1);
    ok = ok && std::abs(exact / binom - 1.0) <= 1e-10;
    const double approx = marginal_local_approx(poisson, N, N, 1);
    last = std::abs(approx / exact - 1.0);
    ok = ok && last < prev;
    prev = last;
    detail += " N=" + std::to_string(N) + " |ratio-1|=" + g12(last);
  }
  ok = ok && last < 0.02;
  report(7, ok, detail + " (decreasing, final < 0.02)");
}

// -- criterion 8: fluctuation bound along a geometric schedule --------------

void criterion_8() {
  const auto t0 = std::chrono::steady_clock::now();
  ExperimentConfig cfg;
  cfg.kind = ExperimentKind::lil;
  cfg.colours = {{PowerSeriesFamily::poisson(), 256, {}}};
  cfg.boxes = 256;
  cfg.schedule = parse_schedule_spec("pow2:8..17", 256, {256});
  cfg.target = OccupancyTarget::vector_target({0});
  cfg.replications = 50;
  cfg.master_seed = kMasterSeed;
  const auto rep = run_lil(cfg);
  const double bound = rep.summary.at("bound").get<double>();
  const double max_stat = rep.summary.at("max_statistic").get<double>();
  const bool all_within = rep.summary.at("all_within_bound").get<bool>();
  std::int64_t reps_within = 0;
  for (const auto& v : rep.summary.at("per_replication_max")) {
    if (v.get<double>() <= 4.89898) ++reps_within;
  }
  const double el = seconds_since(t0);
  const bool ok = all_within && reps_within == 50 &&
                  std::abs(bound - 4.898979485566356) <= 1e-12 && el < 600.0;
  report(8, ok,
         "fluctuation bound, N=2^8..2^17, 50 replications: max stat=" +
             g12(max_stat) + " bound=" + g12(bound) + " replications within=" +
             std::to_string(reps_within) + "/50 elapsed=" + g12(el) +
             "s (budget 600)");
}

// -- criterion 9: exponential tail bound ------------------------------------

void criterion_9() {
  ExperimentConfig cfg;
  cfg.kind = ExperimentKind::tail;
  cfg.colours = {{PowerSeriesFamily::poisson(), 1000, {}}};
  cfg.boxes = 1000;
  cfg.target = OccupancyTarget::vector_target({0});
  cfg.replications = 100'000;
  cfg.master_seed = kMasterSeed;
  const auto rep = run_tail(cfg);
  const bool ok = rep.summary.at("all_satisfied").get<bool>();
  std::string detail = "tail bound at N=1000, 1e5 replications:";
  for (const auto& e : rep.summary.at("points").at(0).at("epsilons")) {
    detail += " eps=" + g12(e.at("epsilon").get<double>()) + " freq=" +
              g12(e.at("empirical_exceedance").get<double>()) + " bound=" +
              g12(e.at("bound").get<double>()) + ";";
  }
  report(9, ok, detail);
}

// -- criterion 10: equal-split identities -----------------------------------

void criterion_10() {
  bool ok = true;
  double max_err = 0.0;
  for (const double alpha : {0.5, 1.0, 2.0}) {
    const auto rep = equal_split_identities(PowerSeriesFamily::poisson(), alpha,
                                        {2, 3, 5}, 5, 1e-12);
    ok = ok && rep.all_product_hold && rep.all_composition_hold;
    for (const auto& c : rep.product_cases) {
      max_err = std::max(max_err, std::abs(c.lhs - c.rhs));
    }
    for (const auto& c : rep.composition_cases) {
      max_err = std::max(max_err, std::abs(c.lhs - c.rhs));
    }
  }

  // Unequal densities: the colour-blind limit must still match the
  // one-parameter law at the summed density.
  const auto poisson = PowerSeriesFamily::poisson();
  double max_unequal = 0.0;
  for (std::int64_t s = 0; s <= 5; ++s) {
    const double want = pmf(poisson, 2.0, s);
    max_unequal = std::max(
        max_unequal, std::abs(slln_limit_total({poisson, poisson},
                                               {0.7, 1.3}, s) -
                              want));
    max_unequal = std::max(
        max_unequal, std::abs(slln_limit_total({poisson, poisson, poisson},
                                               {0.4, 0.6, 1.0}, s) -
                              want));
  }
  ok = ok && max_unequal <= 1e-12;

  const auto geo = equal_split_identities(PowerSeriesFamily::geometric(), 0.8,
                                      {2}, 3, 1e-12);
  const double gap = geo.product_cases.empty()
                         ? 0.0
                         : std::abs(geo.product_cases[0].lhs -
                                    geo.product_cases[0].rhs);
  ok = ok && !geo.all_product_hold && gap >= 0.1;

  report(10, ok,
         "equal-split identities: poisson max|lhs-rhs|=" + g12(max_err) +
             " unequal-density max err=" + g12(max_unequal) +
             " geometric K=2 alpha=0.8 gap=" + g12(gap) +
             " (must fail by >= 0.1)");
}

// -- criterion 11: determinism ----------------------------------------------

void criterion_11() {
  auto base = slln_config({{PowerSeriesFamily::poisson(), 500, {}}}, 500,
                          {500}, OccupancyTarget::vector_target({0}));
  base.schedule = {{250, {250}}, {500, {500}}};
  base.replications = 5;

  auto w1 = base;
  w1.workers = 1;
  auto w3 = base;
  w3.workers = 3;
  const auto r1 = run_slln(w1);
  const auto r3 = run_slln(w3);
  const auto r1b = run_slln(w1);
  const bool slln_ok = r1.to_csv() == r3.to_csv() &&
                       r1.to_csv() == r1b.to_csv() &&
                       report_to_json(r1).dump() == report_to_json(r3).dump();

  ExperimentConfig tail;
  tail.kind = ExperimentKind::tail;
  tail.colours = {{PowerSeriesFamily::poisson(), 64, {}}};
  tail.boxes = 64;
  tail.replications = 200;
  tail.master_seed = kMasterSeed;
  auto tw1 = tail;
  tw1.workers = 1;
  auto tw4 = tail;
  tw4.workers = 4;
  const bool tail_ok = run_tail(tw1).to_csv() == run_tail(tw4).to_csv();

  const bool ok = slln_ok && tail_ok && !r1.to_csv().empty();
  report(11, ok,
         std::string("determinism: occupancy-limit csv identical across "
                     "workers 1/3 and rerun (") +
             (slln_ok ? "yes" : "no") + "), tail csv identical across "
             "workers 1/4 (" + (tail_ok ? "yes" : "no") + ")");
}

}  // namespace

int main() {
  criterion_1();
  criterion_2();
  criterion_3();
  criterion_4();
  criterion_5();
  criterion_6();
  criterion_7();
  criterion_8();
  criterion_9();
  criterion_10();
  criterion_11();
  std::printf("acceptance: %d/11 passed\n", 11 - g_failures);
  return g_failures;
}
