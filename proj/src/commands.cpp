#include "poecal/commands.hpp"

#include "poecal/parallel.hpp"

#include <CLI11.hpp>

#include <bit>
#include <chrono>
#include <cstdio>
#include <iostream>

namespace poecal {
namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string truth_label(double truth) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "truth_%g", truth);
  return buf;
}

std::uint64_t truth_key(double truth) { return std::bit_cast<std::uint64_t>(truth); }

ToyConfig selected_toy(const CommandContext& ctx) {
  ToyConfig toy = ctx.config.toy;
  if (ctx.truth) toy.truths = {*ctx.truth};
  return toy;
}

Vector<double> pair(double a1, double a2) {
  Vector<double> a(2);
  a << a1, a2;
  return a;
}

Json node_json(const Vector<double>& a) { return Json{{"a1", a[0]}, {"a2", a[1]}}; }

}  // namespace

Json cmd_field(const CommandContext& ctx) {
  const ExperimentConfig& cfg = ctx.config;
  cfg.validate();
  const ToyConfig toy = selected_toy(ctx);
  const ToyProblem problem = build_toy_problem(toy, cfg.seed);
  const auto dir = ctx.out_dir / "field";

  Json measurements = Json::array();
  Json timing = Json::array();
  for (std::size_t t = 0; t < toy.truths.size(); ++t) {
    const auto start = Clock::now();
    const auto& meas = problem.measurements[t];
    const auto sub = dir / truth_label(toy.truths[t]);

    EvidenceOptions ev = cfg.evidence;
    ev.sampler.master_seed = derive_seed(cfg.seed, {tag(StreamPurpose::grid), truth_key(toy.truths[t])});
    const GradientGrid grid = build_gradient_grid(problem.experts, meas, cfg.grid, ev);
    const EvidenceField truth_field = analytic_field(problem.gaussians, meas, cfg.grid);
    const double logZ1 = analytic_evidence(problem.gaussians, pair(1, 0), meas);
    const double logZ2 = analytic_evidence(problem.gaussians, pair(0, 1), meas);
    const EvidenceField field = reconstruct_field(grid, logZ1, logZ2, cfg.p_weight, cfg.grid.weight_floor);

    const GridNode best = field_argmax(field);
    const GridNode best_truth = field_argmax(truth_field);
    const auto maximizer = maximize_analytic_evidence(problem.gaussians, meas, -2.0, 10.0, 0.5);

    write_gradient_csv(sub / "gradient_a1.csv", grid, 0);
    write_gradient_csv(sub / "gradient_a2.csv", grid, 1);
    write_field_csv(sub / "field_reconstructed.csv", field);
    write_field_csv(sub / "field_analytic.csv", truth_field);
    write_pgm(sub / "field_reconstructed.pgm", field);
    write_pgm(sub / "field_analytic.pgm", truth_field);

    Json rec{{"truth", toy.truths[t]},
             {"nrmse", nrmse(field, truth_field)},
             {"correlation", pearson(field, truth_field)},
             {"argmax", to_json(best)},
             {"argmax_analytic", to_json(best_truth)},
             {"argmax_cell_distance", std::max(std::abs(best.i - best_truth.i), std::abs(best.j - best_truth.j))},
             {"analytic_maximizer", node_json(maximizer.a)},
             {"logZ1", logZ1},
             {"logZ2", logZ2},
             {"normal_residual", field.normal_residual}};
    write_json(sub / "summary.json", Json{{"command", "field"}, {"config", cfg.echo()}, {"result", rec}});
    measurements.push_back(std::move(rec));
    timing.push_back(Json{{"truth", toy.truths[t]}, {"seconds", seconds_since(start)}});
  }
  Json summary{{"command", "field"}, {"config", cfg.echo()}, {"measurements", std::move(measurements)}};
  write_json(dir / "summary.json", summary);
  write_json(dir / "timing.json", Json{{"threads", thread_count()}, {"measurements", std::move(timing)}});
  return summary;
}

Json cmd_em(const CommandContext& ctx) {
  const ExperimentConfig& cfg = ctx.config;
  cfg.validate();
  const ToyConfig toy = selected_toy(ctx);
  const ToyProblem problem = build_toy_problem(toy, cfg.seed);
  const auto dir = ctx.out_dir / "em";

  Json measurements = Json::array();
  Json timing = Json::array();
  for (std::size_t t = 0; t < toy.truths.size(); ++t) {
    const auto& meas = problem.measurements[t];
    const auto sub = dir / truth_label(toy.truths[t]);
    const auto maximizer = maximize_analytic_evidence(problem.gaussians, meas, -2.0, 10.0, 0.5);
    const EvidenceField truth_field = analytic_field(problem.gaussians, meas, cfg.grid);
    const GridNode grid_best = field_argmax(truth_field);

    Json runs = Json::array();
    for (std::size_t k = 0; k < cfg.em_inits.size(); ++k) {
      const auto start = Clock::now();
      EMOptions opts = cfg.em_options();
      opts.evidence.sampler.master_seed =
          derive_seed(cfg.seed, {tag(StreamPurpose::em), truth_key(toy.truths[t]), std::uint64_t(k)});
      Vector<double> init = Eigen::Map<const Vector<double>>(cfg.em_inits[k].data(), 2);
      if (cfg.em_mode == ConstraintMode::sum_to_one) init[1] = 1.0 - init[0];
      const Exponents<double> a0(init, cfg.em_mode);

      const std::string stem = "init" + std::to_string(k);
      EMTrajectory<double> traj;
      try {
        traj = em_run(problem.experts, a0, meas, opts);
      } catch (const EMAbortedError<double>& e) {
        write_json(sub / ("trajectory_" + stem + ".json"), to_json(e.partial()));
        throw;
      }
      write_json(sub / ("trajectory_" + stem + ".json"), to_json(traj));
      write_samples_csv(sub / ("samples_" + stem + ".csv"), traj.final_posterior.samples);

      const Vector<double>& final_a = traj.final_exponents().values;
      runs.push_back(Json{{"init", to_json(init)},
                          {"final_a", to_json(final_a)},
                          {"distance_to_maximizer", (final_a - maximizer.a).norm()},
                          {"distance_to_grid_argmax", (final_a - pair(grid_best.a1, grid_best.a2)).norm()}});
      timing.push_back(Json{{"truth", toy.truths[t]}, {"init", k}, {"seconds", seconds_since(start)}});
    }
    Json rec{{"truth", toy.truths[t]},
             {"analytic_maximizer", node_json(maximizer.a)},
             {"analytic_grid_argmax", to_json(grid_best)},
             {"trajectories", std::move(runs)}};
    write_json(sub / "summary.json", Json{{"command", "em"}, {"config", cfg.echo()}, {"result", rec}});
    measurements.push_back(std::move(rec));
  }
  Json summary{{"command", "em"}, {"config", cfg.echo()}, {"measurements", std::move(measurements)}};
  write_json(dir / "summary.json", summary);
  write_json(dir / "timing.json", Json{{"threads", thread_count()}, {"runs", std::move(timing)}});
  return summary;
}

Json cmd_ablate(const CommandContext& ctx, const std::string& kind) {
  const ExperimentConfig& cfg = ctx.config;
  cfg.validate();
  const auto dir = ctx.out_dir / "ablate";

  if (kind == "weighting") {
    const auto start = Clock::now();
    ToyConfig toy = cfg.toy;
    toy.truths = {ctx.truth.value_or(cfg.ablation_truth)};
    std::vector<WeightingRow> rows;
    Json per_seed = Json::array();
    for (Index s = 0; s < cfg.ablation_seeds; ++s) {
      const std::uint64_t seed = cfg.seed + std::uint64_t(s);
      const ToyProblem problem = build_toy_problem(toy, seed);
      const auto& meas = problem.measurements.front();
      EvidenceOptions ev = cfg.evidence;
      ev.sampler.master_seed = derive_seed(seed, {tag(StreamPurpose::grid), truth_key(toy.truths.front())});
      const GradientGrid grid = build_gradient_grid(problem.experts, meas, cfg.grid, ev);
      const EvidenceField reference = analytic_field(problem.gaussians, meas, cfg.grid);
      const double logZ1 = analytic_evidence(problem.gaussians, pair(1, 0), meas);
      const double logZ2 = analytic_evidence(problem.gaussians, pair(0, 1), meas);
      const auto seed_rows = run_weighting_ablation(grid, reference, logZ1, logZ2, cfg.p_values, seed,
                                                    cfg.grid.weight_floor);
      const auto best = std::min_element(seed_rows.begin(), seed_rows.end(),
                                         [](const auto& a, const auto& b) { return a.nrmse < b.nrmse; });
      per_seed.push_back(Json{{"seed", seed}, {"best_p", best->p}});
      rows.insert(rows.end(), seed_rows.begin(), seed_rows.end());
    }
    write_weighting_csv(dir / "weighting.csv", rows);
    Json summary{{"command", "ablate"},
                 {"kind", "weighting"},
                 {"config", cfg.echo()},
                 {"truth", toy.truths.front()},
                 {"seeds", std::move(per_seed)}};
    write_json(dir / "weighting_summary.json", summary);
    write_json(dir / "weighting_timing.json", Json{{"threads", thread_count()}, {"seconds", seconds_since(start)}});
    return summary;
  }

  if (kind == "collapse") {
    const CollapseProblem problem = build_collapse_problem(cfg.collapse);
    const auto states = run_collapse(problem.prior, problem.meas, problem.truth, cfg.collapse.iterations);
    Json iterations = Json::array();
    for (const auto& s : states) iterations.push_back(to_json(s));
    Json summary{{"command", "ablate"},
                 {"kind", "collapse"},
                 {"config",
                  {{"A", {problem.meas.A(0, 0), problem.meas.A(0, 1)}},
                   {"y", problem.meas.y[0]},
                   {"sigma_y", problem.meas.sigma_y},
                   {"truth", {problem.truth[0], problem.truth[1]}},
                   {"iterations", cfg.collapse.iterations}}},
                 {"iterations", std::move(iterations)}};
    write_json(dir / "collapse.json", summary);
    return summary;
  }

  throw ConfigError("unknown ablation kind '" + kind + "' (expected weighting or collapse)", "ablate.kind");
}

Json cmd_gradient(const CommandContext& ctx, const std::vector<double>& a, bool sum_to_one) {
  const ExperimentConfig& cfg = ctx.config;
  cfg.validate();
  ToyConfig toy = cfg.toy;
  toy.truths = {ctx.truth.value_or(cfg.toy.truths.front())};
  const ToyProblem problem = build_toy_problem(toy, cfg.seed);
  const auto& meas = problem.measurements.front();
  if (a.size() != problem.experts.size()) {
    throw ConfigError("--a needs " + std::to_string(problem.experts.size()) + " comma-separated values", "a");
  }
  const Exponents<double> exps(Eigen::Map<const Vector<double>>(a.data(), Index(a.size())),
                               sum_to_one ? ConstraintMode::sum_to_one : ConstraintMode::unconstrained);
  const ProductPrior<double> prior(problem.experts, exps);

  EvidenceOptions ev = cfg.evidence;
  ev.sampler.master_seed = derive_seed(cfg.seed, {tag(StreamPurpose::posterior), truth_key(toy.truths.front())});
  const auto est = sum_to_one ? constrained_evidence_gradient(prior, meas, ev) : evidence_gradient(prior, meas, ev);
  Json out = to_json(est);
  out["truth"] = toy.truths.front();
  out["config"] = cfg.echo();
  write_json(ctx.out_dir / "gradient.json", out);
  return out;
}

namespace {

void print_error(const std::string& kind, const std::string& message, int code, const std::string& key = {}) {
  Json err{{"kind", kind}, {"message", message}, {"exit_code", code}};
  if (!key.empty()) err["key"] = key;
  std::cerr << Json{{"error", std::move(err)}}.dump() << std::endl;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"Calibrate product-of-experts priors from a single observation."};
  app.require_subcommand(1);

  std::string config_path;
  std::string preset = "paper-4.1";
  std::optional<std::uint64_t> seed;
  unsigned threads = 0;
  std::string out_dir = "out";
  bool reduced = false;
  std::optional<double> truth;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "Config file (sectioned key = value)");
    sub->add_option("--preset", preset, "Named preset (paper-4.1)");
    sub->add_option("--seed", seed, "Master seed");
    sub->add_option("--threads", threads, "Worker threads (0 = all cores)");
    sub->add_option("--out-dir", out_dir, "Output directory");
    sub->add_flag("--reduced", reduced, "Reduced scale (d=200, m=50)");
    sub->add_option("--truth", truth, "Run a single ground-truth level");
  };

  auto* field = app.add_subcommand("field", "Gridded evidence gradients and field reconstruction");
  auto* em = app.add_subcommand("em", "Generalized EM over exponents");
  auto* ablate = app.add_subcommand("ablate", "Ablations: weighting | collapse");
  auto* gradient = app.add_subcommand("gradient", "Single evidence-gradient evaluation");
  for (auto* sub : {field, em, ablate, gradient}) add_common(sub);

  std::string kind;
  ablate->add_option("kind", kind, "weighting or collapse")->required();
  std::string a_text;
  bool sum_to_one = false;
  gradient->add_option("--a", a_text, "Exponents, comma separated")->required();
  gradient->add_flag("--sum-to-one", sum_to_one, "Use the sum-to-one (constrained) estimator");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    print_error("config", e.what(), 2);
    return 2;
  }

  try {
    set_thread_count(threads);
    CommandContext ctx;
    ctx.config = config_path.empty() ? preset_config(preset, reduced) : load_experiment_config(config_path);
    if (reduced && !config_path.empty()) {
      ctx.config.reduced = true;
      ctx.config.toy.d = 200;
      ctx.config.toy.m = 50;
    }
    if (seed) ctx.config.seed = *seed;
    ctx.out_dir = out_dir;
    ctx.truth = truth;

    Json result;
    if (field->parsed()) result = cmd_field(ctx);
    else if (em->parsed()) result = cmd_em(ctx);
    else if (ablate->parsed()) result = cmd_ablate(ctx, kind);
    else result = cmd_gradient(ctx, parse_real_list(a_text, "a"), sum_to_one);
    std::cout << result.dump(2) << std::endl;
    return 0;
  } catch (const ConfigError& e) {
    print_error(e.kind(), e.what(), e.exit_code(), e.key());
    return e.exit_code();
  } catch (const Error& e) {
    print_error(e.kind(), e.what(), e.exit_code());
    return e.exit_code();
  } catch (const std::filesystem::filesystem_error& e) {
    print_error("io", e.what(), 2);
    return 2;
  } catch (const std::exception& e) {
    print_error("internal", e.what(), 3);
    return 3;
  }
}

}  // namespace poecal
