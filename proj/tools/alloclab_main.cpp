// SPDX-License-Identifier: Apache-2.0
//
// alloclab: command-line harness for the conditional allocation scheme.
//
// Exit codes: 0 success, 1 invalid input or configuration, 2 runtime failure
// (resource caps, non-convergence, internal defects, I/O).
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include <alloclab/alloclab.hpp>

namespace al = alloclab;

namespace {

std::vector<std::string> split_list(const std::string& s) {
  std::string normalized = s;
  for (auto& c : normalized) {
    if (c == ';') c = ',';
  }
  std::vector<std::string> parts;
  if (normalized.empty()) return parts;
  std::size_t start = 0;
  while (true) {
    const auto pos = normalized.find(',', start);
    parts.push_back(normalized.substr(start, pos - start));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return parts;
}

std::vector<std::int64_t> parse_int_list(const std::string& s,
                                         const char* what) {
  std::vector<std::int64_t> out;
  for (const auto& p : split_list(s)) {
    out.push_back(al::detail::parse_int(p, what));
  }
  return out;
}

std::vector<double> parse_double_list(const std::string& s, const char* what) {
  std::vector<double> out;
  for (const auto& p : split_list(s)) {
    out.push_back(al::detail::parse_double(p, what));
  }
  return out;
}

al::OutputFormat parse_format(const std::string& s) {
  if (s == "csv") return al::OutputFormat::csv;
  if (s == "json") return al::OutputFormat::json;
  if (s == "both") return al::OutputFormat::both;
  throw al::ValidationError("format must be csv, json or both");
}

// Inline flags shared by the experiment subcommands.  Anything left at its
// sentinel keeps the value from --config (or the built-in default).
struct ExperimentFlags {
  std::string config_path;
  std::string families;       // comma-separated family specs
  std::string balls;          // comma-separated ball counts
  std::int64_t boxes = -1;
  std::string thetas;         // comma-separated overrides, one per colour
  std::string target;
  std::string schedule;
  std::string sector;         // "lo:hi,lo:hi"
  std::int64_t reps = -1;
  std::uint64_t seed = 0;
  bool seed_given = false;
  std::string eps_grid;
  double tolerance = -1.0;
  double slack = -1.0;
  int workers = -1;
  std::string out_path;
  std::string format = "both";
  // identities kind
  std::string alphas;
  std::string colour_counts;
  std::int64_t s_max = -1;
};

void add_experiment_flags(CLI::App* cmd, ExperimentFlags* f) {
  cmd->add_option("--config", f->config_path,
                  "JSON experiment configuration to start from");
  cmd->add_option("--family", f->families,
                  "comma-separated family specs (poisson, geometric, "
                  "binomial(M))");
  cmd->add_option("--n", f->balls, "comma-separated ball counts per colour");
  cmd->add_option("--N", f->boxes, "number of boxes");
  cmd->add_option("--theta", f->thetas,
                  "comma-separated theta overrides, one per colour");
  cmd->add_option("--target", f->target,
                  "occupancy target: \"1;0\" (vector) or \"total:2\"");
  cmd->add_option("--schedule", f->schedule,
                  "growth schedule: pow2:A..B or list:N1,N2,...");
  cmd->add_option("--sector", f->sector,
                  "per-colour density window lo:hi[,lo:hi...] (lil)");
  cmd->add_option("--reps", f->reps, "replications (0 keeps the kind default)");
  cmd->add_option("--seed", f->seed, "master seed")
      ->each([f](const std::string&) { f->seed_given = true; });
  cmd->add_option("--eps-grid", f->eps_grid,
                  "tail thresholds as multiples of sigma, comma-separated");
  cmd->add_option("--tol", f->tolerance, "convergence tolerance");
  cmd->add_option("--slack", f->slack, "tail bound slack multiplier (>= 1)");
  cmd->add_option("--workers", f->workers,
                  "worker threads (0: ALLOC_LAB_WORKERS or hardware)");
  cmd->add_option("--out", f->out_path, "output file stem or .csv/.json path");
  cmd->add_option("--format", f->format, "csv | json | both")
      ->default_val("both");
  cmd->add_option("--alphas", f->alphas,
                  "identity probe densities, comma-separated");
  cmd->add_option("--colour-counts", f->colour_counts,
                  "identity probe colour counts, comma-separated");
  cmd->add_option("--s-max", f->s_max,
                  "largest colour-blind target in identity probes");
}

al::ExperimentConfig build_experiment_config(al::ExperimentKind kind,
                                             const ExperimentFlags& f) {
  al::ExperimentConfig cfg;
  if (!f.config_path.empty()) {
    std::ifstream in(f.config_path);
    if (!in) {
      throw al::ValidationError("cannot read config '" + f.config_path + "'");
    }
    nlohmann::json j;
    in >> j;
    cfg = al::experiment_config_from_json(j);
  }
  cfg.kind = kind;

  if (!f.families.empty()) {
    cfg.colours.clear();
    for (const auto& spec : split_list(f.families)) {
      cfg.colours.push_back(al::ColourSpec{al::parse_family_spec(spec), 0,
                                           std::nullopt});
    }
  }
  if (f.boxes >= 0) cfg.boxes = f.boxes;
  if (!f.balls.empty()) {
    const auto balls = parse_int_list(f.balls, "--n");
    if (balls.size() != cfg.colours.size()) {
      throw al::ValidationError("--n needs one count per colour (" +
                                std::to_string(cfg.colours.size()) + ")");
    }
    for (std::size_t i = 0; i < balls.size(); ++i) {
      cfg.colours[i].balls = balls[i];
    }
  }
  if (!f.thetas.empty()) {
    const auto thetas = parse_double_list(f.thetas, "--theta");
    if (thetas.size() != cfg.colours.size()) {
      throw al::ValidationError("--theta needs one value per colour (" +
                                std::to_string(cfg.colours.size()) + ")");
    }
    for (std::size_t i = 0; i < thetas.size(); ++i) {
      cfg.colours[i].theta = thetas[i];
    }
  }
  if (!f.target.empty()) cfg.target = al::parse_target_spec(f.target);
  if (cfg.target.kind == al::OccupancyTarget::Kind::vector &&
      cfg.target.s.size() != cfg.colours.size() && !cfg.colours.empty()) {
    if (cfg.target.s == std::vector<std::int64_t>{0}) {
      // The all-empty box is the default target; widen it to the colours.
      cfg.target =
          al::OccupancyTarget::vector_target(
              std::vector<std::int64_t>(cfg.colours.size(), 0));
    }
  }
  if (!f.schedule.empty()) {
    std::vector<std::int64_t> base_balls;
    for (const auto& c : cfg.colours) base_balls.push_back(c.balls);
    cfg.schedule = al::parse_schedule_spec(f.schedule, cfg.boxes, base_balls);
  }
  if (!f.sector.empty()) {
    al::SectorBounds sector;
    for (const auto& part : split_list(f.sector)) {
      const auto colon = part.find(':');
      if (colon == std::string::npos) {
        throw al::ValidationError("--sector: expected lo:hi, got '" + part +
                                  "'");
      }
      sector.lo.push_back(
          al::detail::parse_double(part.substr(0, colon), "--sector"));
      sector.hi.push_back(
          al::detail::parse_double(part.substr(colon + 1), "--sector"));
    }
    cfg.sector = std::move(sector);
  }
  if (f.reps >= 0) cfg.replications = f.reps;
  if (f.seed_given) cfg.master_seed = f.seed;
  if (!f.eps_grid.empty()) {
    cfg.eps_multipliers = parse_double_list(f.eps_grid, "--eps-grid");
  }
  if (f.tolerance >= 0.0) cfg.tolerance = f.tolerance;
  if (f.slack >= 0.0) cfg.slack_multiplier = f.slack;
  if (f.workers >= 0) cfg.workers = f.workers;
  if (!f.alphas.empty()) {
    cfg.identities_alphas = parse_double_list(f.alphas, "--alphas");
  }
  if (!f.colour_counts.empty()) {
    cfg.identities_colour_counts.clear();
    for (const auto v : parse_int_list(f.colour_counts, "--colour-counts")) {
      cfg.identities_colour_counts.push_back(static_cast<int>(v));
    }
  }
  if (f.s_max >= 0) cfg.identities_s_max = f.s_max;
  return cfg;
}

int run_experiment_command(al::ExperimentKind kind, const ExperimentFlags& f) {
  const al::ExperimentConfig cfg = build_experiment_config(kind, f);
  const al::ExperimentReport report = al::run_experiment(cfg);
  if (!f.out_path.empty()) {
    const auto paths = al::emit_report(report, f.out_path,
                                       parse_format(f.format));
    if (paths.csv) std::cerr << "wrote " << *paths.csv << "\n";
    if (paths.json) std::cerr << "wrote " << *paths.json << "\n";
  }
  std::cout << al::report_to_json(report).dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"conditional allocation scheme laboratory"};
  app.require_subcommand(1);

  // families ---------------------------------------------------------------
  auto* families_cmd =
      app.add_subcommand("families", "list the built-in weight families");

  // theta ------------------------------------------------------------------
  auto* theta_cmd =
      app.add_subcommand("theta", "fit theta to a target mean density");
  std::string theta_family;
  double theta_alpha = 0.0;
  double theta_tol = 1e-10;
  theta_cmd->add_option("--family", theta_family, "family spec")->required();
  theta_cmd->add_option("--alpha", theta_alpha, "target mean")->required();
  theta_cmd->add_option("--tol", theta_tol, "fit tolerance");

  // prob -------------------------------------------------------------------
  auto* prob_cmd = app.add_subcommand(
      "prob", "exact conditional probabilities (row or one-box marginal)");
  std::string prob_family, prob_counts;
  std::int64_t prob_boxes = 0, prob_balls = 0, prob_s = -1;
  double prob_theta = -1.0;
  prob_cmd->add_option("--family", prob_family, "family spec")->required();
  prob_cmd->add_option("--N", prob_boxes, "number of boxes")->required();
  prob_cmd->add_option("--n", prob_balls, "number of balls")->required();
  prob_cmd->add_option("--counts", prob_counts,
                       "full content row k_1,...,k_N (exact row probability)");
  prob_cmd->add_option("--s", prob_s, "one-box content (marginal probability)");
  prob_cmd->add_option("--theta", prob_theta,
                       "evaluation theta for --counts (result is theta-free)");

  // sample -----------------------------------------------------------------
  auto* sample_cmd = app.add_subcommand(
      "sample", "draw conditioned content rows for one colour");
  std::string sample_family, sample_method = "auto";
  std::int64_t sample_boxes = 0, sample_balls = 0, sample_reps = 1;
  std::uint64_t sample_seed = 0x5EEDBA5Eull;
  double sample_theta = -1.0;
  sample_cmd->add_option("--family", sample_family, "family spec")->required();
  sample_cmd->add_option("--N", sample_boxes, "number of boxes")->required();
  sample_cmd->add_option("--n", sample_balls, "number of balls")->required();
  sample_cmd->add_option("--reps", sample_reps, "rows to draw");
  sample_cmd->add_option("--seed", sample_seed, "seed");
  sample_cmd->add_option("--theta", sample_theta,
                         "theta override (rejection route only)");
  sample_cmd
      ->add_option("--method", sample_method,
                   "auto | direct | table | rejection")
      ->default_val("auto");

  // experiments ------------------------------------------------------------
  ExperimentFlags slln_flags, lil_flags, tail_flags, validate_flags,
      identities_flags;
  auto* slln_cmd = app.add_subcommand(
      "slln", "mu/N along a growth schedule against its almost-sure limit");
  add_experiment_flags(slln_cmd, &slln_flags);
  auto* lil_cmd = app.add_subcommand(
      "lil", "normalized fluctuations against the iterated-logarithm bound");
  add_experiment_flags(lil_cmd, &lil_flags);
  auto* tail_cmd = app.add_subcommand(
      "tail", "exceedance frequencies against the exponential tail bound");
  add_experiment_flags(tail_cmd, &tail_flags);
  auto* validate_cmd = app.add_subcommand(
      "validate", "fixed battery of exactness and consistency checks");
  add_experiment_flags(validate_cmd, &validate_flags);
  auto* identities_cmd = app.add_subcommand(
      "identities", "equal-split product and composition identity probes");
  add_experiment_flags(identities_cmd, &identities_flags);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (families_cmd->parsed()) {
      std::printf("poisson        radius inf  support unbounded  "
                  "mean(theta) = theta\n");
      std::printf("geometric      radius 1    support unbounded  "
                  "mean(theta) = theta/(1-theta)\n");
      std::printf("binomial(M)    radius inf  support 0..M       "
                  "mean(theta) = M*theta/(1+theta)\n");
      std::printf("custom         JSON object {\"name\":...,\"coeffs\":[...],"
                  "\"radius\":number|\"inf\"}\n");
      return 0;
    }
    if (theta_cmd->parsed()) {
      const auto family = al::parse_family_spec(theta_family);
      std::printf("%s\n",
                  al::format_g12(
                      al::mean_inverse(family, theta_alpha, theta_tol).value)
                      .c_str());
      return 0;
    }
    if (prob_cmd->parsed()) {
      const auto family = al::parse_family_spec(prob_family);
      const bool have_counts = !prob_counts.empty();
      const bool have_s = prob_s >= 0;
      if (have_counts == have_s) {
        throw al::ValidationError("prob: pass exactly one of --counts / --s");
      }
      double value = 0.0;
      if (have_counts) {
        const auto counts = parse_int_list(prob_counts, "--counts");
        const std::optional<double> theta =
            prob_theta >= 0.0 ? std::optional<double>(prob_theta)
                              : std::nullopt;
        value = al::exact_conditional_prob(family, prob_boxes, prob_balls,
                                           counts, theta);
      } else {
        const double lp =
            al::log_marginal_prob_auto(family, prob_boxes, prob_balls, prob_s);
        value = lp == al::kNegInfinity ? 0.0 : std::exp(lp);
      }
      std::printf("%s\n", al::format_g12(value).c_str());
      return 0;
    }
    if (sample_cmd->parsed()) {
      const auto family = al::parse_family_spec(sample_family);
      if (sample_reps < 1) {
        throw al::ValidationError("sample: --reps must be >= 1");
      }
      al::Rng rng(sample_seed);
      double theta = 0.25;
      if (sample_theta >= 0.0) {
        al::check_theta(family, sample_theta);
        theta = sample_theta;
      } else if (sample_balls > 0) {
        theta = al::mean_inverse(family,
                                 static_cast<double>(sample_balls) /
                                     static_cast<double>(sample_boxes))
                    .value;
      }
      if (sample_method != "auto" && sample_method != "direct" &&
          sample_method != "table" && sample_method != "rejection") {
        throw al::ValidationError(
            "sample: method must be auto, direct, table or rejection");
      }
      std::optional<al::SumDistributionTable> table;
      if (sample_method == "table") {
        const double cells = static_cast<double>(sample_boxes) *
                             (static_cast<double>(sample_balls) + 1.0);
        if (cells > 5.0e7) {
          throw al::ValidationError(
              "sample: table route needs N*(n+1) <= 5e7 cells; use direct");
        }
        table = al::SumDistributionTable::build(
            family, theta, sample_boxes, sample_balls,
            al::SumDistributionTable::Mode::full);
      }
      std::optional<al::AllocationSampler> sampler;
      if (sample_method == "auto") {
        std::vector<al::ColourSpec> colours{
            al::ColourSpec{family, sample_balls, std::nullopt}};
        sampler.emplace(al::SchemeConfig(std::move(colours), sample_boxes));
      }
      for (std::int64_t r = 0; r < sample_reps; ++r) {
        al::ConditionalRow row;
        if (sample_method == "direct") {
          row = al::sample_conditional_direct(family, sample_boxes,
                                              sample_balls, rng);
        } else if (sample_method == "table") {
          row = al::sample_exact(*table, rng);
        } else if (sample_method == "rejection") {
          auto res = al::sample_rejection(family, theta, sample_boxes,
                                          sample_balls, rng);
          if (!res.row) {
            throw al::NonConvergenceError(
                "sample: rejection budget exhausted");
          }
          row = std::move(*res.row);
        } else {
          const al::AllocationMatrix m = (*sampler)(rng);
          row.counts.assign(m.counts.begin(), m.counts.end());
        }
        std::string line;
        for (std::size_t j = 0; j < row.counts.size(); ++j) {
          if (j) line += ' ';
          line += std::to_string(row.counts[j]);
        }
        std::printf("%s\n", line.c_str());
      }
      return 0;
    }
    if (slln_cmd->parsed()) {
      return run_experiment_command(al::ExperimentKind::slln, slln_flags);
    }
    if (lil_cmd->parsed()) {
      return run_experiment_command(al::ExperimentKind::lil, lil_flags);
    }
    if (tail_cmd->parsed()) {
      return run_experiment_command(al::ExperimentKind::tail, tail_flags);
    }
    if (validate_cmd->parsed()) {
      return run_experiment_command(al::ExperimentKind::validate,
                                    validate_flags);
    }
    if (identities_cmd->parsed()) {
      return run_experiment_command(al::ExperimentKind::identities,
                                    identities_flags);
    }
  } catch (const al::ValidationError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const al::DomainError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const al::RangeError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const al::InfeasibleError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const al::GuardError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "runtime error: %s\n", e.what());
    return 2;
  }
  return 1;
}
