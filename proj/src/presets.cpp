#include "poecal/presets.hpp"

#include <bit>

namespace poecal {

void ToyConfig::validate() const {
  if (d < 1) throw ConfigError("toy.d must be >= 1", "toy.d");
  if (m < 1) throw ConfigError("toy.m must be >= 1", "toy.m");
  if (!(sigma_y > 0)) throw ConfigError("toy.sigma_y must be > 0", "toy.sigma_y");
  if (!(std_p_lo > 0) || !(std_p_hi >= std_p_lo)) throw ConfigError("toy std_p range is invalid", "toy.std_p_lo");
  if (!(std_q_lo > 0) || !(std_q_hi >= std_q_lo)) throw ConfigError("toy std_q range is invalid", "toy.std_q_lo");
  if (truths.empty()) throw ConfigError("toy.truths must not be empty", "toy.truths");
}

void ExperimentConfig::validate() const {
  toy.validate();
  evidence.validate();
  grid.validate();
  em_options().validate();
  if (!(p_weight >= 0)) throw ConfigError("field.p_weight must be >= 0", "field.p_weight");
  for (const auto& init : em_inits) {
    if (init.size() != 2) throw ConfigError("em.inits entries must have two exponents", "em.inits");
  }
  if (ablation_seeds < 1) throw ConfigError("ablation.seeds must be >= 1", "ablation.seeds");
  if (collapse.iterations < 0) throw ConfigError("collapse iterations must be >= 0", "collapse.iterations");
}

EMOptions ExperimentConfig::em_options() const {
  EMOptions o;
  o.iterations = em_iterations;
  o.eta = em_eta;
  o.c = em_c;
  o.eps_a = em_eps_a;
  o.evidence = evidence;
  return o;
}

Json ExperimentConfig::echo() const {
  const auto& s = evidence.sampler;
  const auto& dn = evidence.density;
  Json inits = Json::array();
  for (const auto& i : em_inits) inits.push_back(i);
  return Json{
      {"run", {{"preset", preset}, {"reduced", reduced}, {"seed", seed}}},
      {"toy",
       {{"d", toy.d},
        {"m", toy.m},
        {"sigma_y", toy.sigma_y},
        {"mean_p", toy.mean_p},
        {"mean_q", toy.mean_q},
        {"std_p", {toy.std_p_lo, toy.std_p_hi}},
        {"std_q", {toy.std_q_lo, toy.std_q_hi}},
        {"truths", toy.truths}}},
      {"sampler",
       {{"annealing_steps", s.annealing_steps},
        {"mixing_steps", s.mixing_steps},
        {"langevin_coef", s.langevin_coef},
        {"beta_coef", s.beta_coef},
        {"jacobian_mode", std::string(to_string(s.jacobian_mode))},
        {"sigma_max_eff", s.sigma_max_eff},
        {"sigma_min_eff", s.sigma_min_eff},
        {"rho", s.rho}}},
      {"density",
       {{"mode", std::string(to_string(evidence.mode))},
        {"integration_steps", dn.integration_steps},
        {"n_probes", dn.n_probes},
        {"probe_kind", std::string(to_string(dn.probe_kind))},
        {"terminal_sigma", dn.terminal_sigma},
        {"integrator", std::string(to_string(dn.integrator))}}},
      {"evidence", {{"n_posterior", evidence.n_posterior}, {"n_prior", evidence.n_prior}}},
      {"field",
       {{"grid_lo", grid.lo},
        {"grid_hi", grid.hi},
        {"grid_step", grid.step},
        {"mask_threshold", grid.mask_threshold},
        {"weight_floor", grid.weight_floor},
        {"p_weight", p_weight}}},
      {"em",
       {{"iterations", em_iterations},
        {"eta", em_eta},
        {"c", em_c},
        {"eps_a", em_eps_a},
        {"constraint_mode", std::string(to_string(em_mode))},
        {"inits", std::move(inits)}}},
      {"ablation", {{"p_values", p_values}, {"seeds", ablation_seeds}, {"truth", ablation_truth}}}};
}

const std::vector<ConfigKey>& experiment_schema() {
  static const std::vector<ConfigKey> schema{
      {"run.preset", ValueType::text},
      {"run.reduced", ValueType::boolean},
      {"run.seed", ValueType::integer},
      {"toy.d", ValueType::integer},
      {"toy.m", ValueType::integer},
      {"toy.sigma_y", ValueType::real},
      {"toy.mean_p", ValueType::real},
      {"toy.mean_q", ValueType::real},
      {"toy.std_p_lo", ValueType::real},
      {"toy.std_p_hi", ValueType::real},
      {"toy.std_q_lo", ValueType::real},
      {"toy.std_q_hi", ValueType::real},
      {"toy.truths", ValueType::real_list},
      {"sampler.annealing_steps", ValueType::integer},
      {"sampler.mixing_steps", ValueType::integer},
      {"sampler.langevin_coef", ValueType::real},
      {"sampler.beta_coef", ValueType::real},
      {"sampler.jacobian_mode", ValueType::text},
      {"sampler.sigma_max_eff", ValueType::real},
      {"sampler.sigma_min_eff", ValueType::real},
      {"sampler.rho", ValueType::real},
      {"density.mode", ValueType::text},
      {"density.integration_steps", ValueType::integer},
      {"density.n_probes", ValueType::integer},
      {"density.probe_kind", ValueType::text},
      {"density.terminal_sigma", ValueType::real},
      {"density.integrator", ValueType::text},
      {"evidence.n_posterior", ValueType::integer},
      {"evidence.n_prior", ValueType::integer},
      {"field.grid_lo", ValueType::real},
      {"field.grid_hi", ValueType::real},
      {"field.grid_step", ValueType::real},
      {"field.mask_threshold", ValueType::real},
      {"field.weight_floor", ValueType::real},
      {"field.p_weight", ValueType::real},
      {"em.iterations", ValueType::integer},
      {"em.eta", ValueType::real},
      {"em.c", ValueType::real},
      {"em.eps_a", ValueType::real},
      {"em.constraint_mode", ValueType::text},
      {"em.inits", ValueType::real_list},
      {"ablation.p_values", ValueType::real_list},
      {"ablation.seeds", ValueType::integer},
      {"ablation.truth", ValueType::real},
      {"collapse.iterations", ValueType::integer},
      {"collapse.sigma_y", ValueType::real},
      {"collapse.noise_offset", ValueType::real},
  };
  return schema;
}

CollapseConfig default_collapse_config() {
  CollapseConfig c;
  c.weights = Vector<double>(3);
  c.weights << 0.3, 0.4, 0.3;
  c.means = Matrix<double>(3, 2);
  c.means << -1.5, -1.0, 0.5, 1.0, 2.0, -0.5;
  c.stds = Matrix<double>(3, 2);
  c.stds << 0.7, 0.5, 0.6, 0.6, 0.5, 0.8;
  c.A = RowMajorMatrix<double>(1, 2);
  c.A << 1.0, 0.5;
  c.sigma_y = 0.3;
  c.truth = Eigen::Vector2d(0.4, 0.8);
  c.noise_offset = 0.45;
  c.iterations = 10;
  return c;
}

ExperimentConfig preset_config(const std::string& name, bool reduced) {
  if (name != "paper-4.1") throw ConfigError("unknown preset '" + name + "'", "run.preset");
  ExperimentConfig c;
  c.preset = name;
  c.reduced = reduced;
  if (reduced) {
    c.toy.d = 200;
    c.toy.m = 50;
  }
  auto& s = c.evidence.sampler;
  s.annealing_steps = 50;
  s.mixing_steps = 20;
  s.langevin_coef = 0.05;
  s.beta_coef = 0.005;
  s.sigma_max_eff = 50.0;
  s.sigma_min_eff = 0.01;
  s.rho = 7.0;
  s.jacobian_mode = JacobianMode::exact;
  c.evidence.mode = DensityMode::ode;
  c.evidence.density.integration_steps = 200;
  c.evidence.density.n_probes = 8;
  c.evidence.n_posterior = 20;
  c.evidence.n_prior = 20;
  c.collapse = default_collapse_config();
  return c;
}

ExperimentConfig apply_config(const ConfigFile& f) {
  const std::string preset = f.text("run.preset");
  const bool reduced = f.has("run.reduced") && f.boolean("run.reduced");
  ExperimentConfig c = preset == "custom" ? preset_config("paper-4.1", reduced) : preset_config(preset, reduced);
  c.preset = preset;
  if (f.has("run.seed")) c.seed = f.unsigned_integer("run.seed");

  if (preset == "custom") {
    // A custom problem must spell out every toy parameter.
    for (const char* key : {"toy.d", "toy.m", "toy.sigma_y", "toy.mean_p", "toy.mean_q", "toy.std_p_lo",
                            "toy.std_p_hi", "toy.std_q_lo", "toy.std_q_hi", "toy.truths"}) {
      if (!f.has(key)) throw ConfigError("custom preset: missing required key '" + std::string(key) + "'", key);
    }
  }
  if (f.has("toy.d")) c.toy.d = f.integer("toy.d");
  if (f.has("toy.m")) c.toy.m = f.integer("toy.m");
  if (f.has("toy.sigma_y")) c.toy.sigma_y = f.real("toy.sigma_y");
  if (f.has("toy.mean_p")) c.toy.mean_p = f.real("toy.mean_p");
  if (f.has("toy.mean_q")) c.toy.mean_q = f.real("toy.mean_q");
  if (f.has("toy.std_p_lo")) c.toy.std_p_lo = f.real("toy.std_p_lo");
  if (f.has("toy.std_p_hi")) c.toy.std_p_hi = f.real("toy.std_p_hi");
  if (f.has("toy.std_q_lo")) c.toy.std_q_lo = f.real("toy.std_q_lo");
  if (f.has("toy.std_q_hi")) c.toy.std_q_hi = f.real("toy.std_q_hi");
  if (f.has("toy.truths")) c.toy.truths = f.reals("toy.truths");

  auto& s = c.evidence.sampler;
  if (f.has("sampler.annealing_steps")) s.annealing_steps = f.integer("sampler.annealing_steps");
  if (f.has("sampler.mixing_steps")) s.mixing_steps = f.integer("sampler.mixing_steps");
  if (f.has("sampler.langevin_coef")) s.langevin_coef = f.real("sampler.langevin_coef");
  if (f.has("sampler.beta_coef")) s.beta_coef = f.real("sampler.beta_coef");
  if (f.has("sampler.jacobian_mode")) s.jacobian_mode = parse_jacobian_mode(f.text("sampler.jacobian_mode"));
  if (f.has("sampler.sigma_max_eff")) s.sigma_max_eff = f.real("sampler.sigma_max_eff");
  if (f.has("sampler.sigma_min_eff")) s.sigma_min_eff = f.real("sampler.sigma_min_eff");
  if (f.has("sampler.rho")) s.rho = f.real("sampler.rho");

  auto& dn = c.evidence.density;
  if (f.has("density.mode")) c.evidence.mode = parse_density_mode(f.text("density.mode"));
  if (f.has("density.integration_steps")) dn.integration_steps = f.integer("density.integration_steps");
  if (f.has("density.n_probes")) dn.n_probes = f.integer("density.n_probes");
  if (f.has("density.probe_kind")) dn.probe_kind = parse_probe_kind(f.text("density.probe_kind"));
  if (f.has("density.terminal_sigma")) dn.terminal_sigma = f.real("density.terminal_sigma");
  if (f.has("density.integrator")) dn.integrator = parse_integrator(f.text("density.integrator"));

  if (f.has("evidence.n_posterior")) c.evidence.n_posterior = f.integer("evidence.n_posterior");
  if (f.has("evidence.n_prior")) c.evidence.n_prior = f.integer("evidence.n_prior");

  if (f.has("field.grid_lo")) c.grid.lo = f.real("field.grid_lo");
  if (f.has("field.grid_hi")) c.grid.hi = f.real("field.grid_hi");
  if (f.has("field.grid_step")) c.grid.step = f.real("field.grid_step");
  if (f.has("field.mask_threshold")) c.grid.mask_threshold = f.real("field.mask_threshold");
  if (f.has("field.weight_floor")) c.grid.weight_floor = f.real("field.weight_floor");
  if (f.has("field.p_weight")) c.p_weight = f.real("field.p_weight");

  if (f.has("em.iterations")) c.em_iterations = f.integer("em.iterations");
  if (f.has("em.eta")) c.em_eta = f.real("em.eta");
  if (f.has("em.c")) c.em_c = f.real("em.c");
  if (f.has("em.eps_a")) c.em_eps_a = f.real("em.eps_a");
  if (f.has("em.constraint_mode")) c.em_mode = parse_constraint_mode(f.text("em.constraint_mode"));
  if (f.has("em.inits")) c.em_inits = parse_real_groups(f.text("em.inits"), "em.inits");

  if (f.has("ablation.p_values")) c.p_values = f.reals("ablation.p_values");
  if (f.has("ablation.seeds")) c.ablation_seeds = f.integer("ablation.seeds");
  if (f.has("ablation.truth")) c.ablation_truth = f.real("ablation.truth");
  if (f.has("collapse.iterations")) c.collapse.iterations = f.integer("collapse.iterations");
  if (f.has("collapse.sigma_y")) c.collapse.sigma_y = f.real("collapse.sigma_y");
  if (f.has("collapse.noise_offset")) c.collapse.noise_offset = f.real("collapse.noise_offset");

  c.validate();
  return c;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  return apply_config(ConfigFile::load(path, experiment_schema()));
}

std::uint64_t measurement_seed(std::uint64_t seed, double truth) {
  return derive_seed(seed, {tag(StreamPurpose::measurement), std::bit_cast<std::uint64_t>(truth)});
}

ToyProblem build_toy_problem(const ToyConfig& toy, std::uint64_t seed) {
  toy.validate();
  ToyProblem p;
  RandomStream stds(derive_seed(seed, {tag(StreamPurpose::preset), 0}));
  Vector<double> var_p(toy.d), var_q(toy.d);
  for (Index j = 0; j < toy.d; ++j) {
    const double sp = stds.uniform(toy.std_p_lo, toy.std_p_hi);
    var_p[j] = sp * sp;
  }
  for (Index j = 0; j < toy.d; ++j) {
    const double sq = stds.uniform(toy.std_q_lo, toy.std_q_hi);
    var_q[j] = sq * sq;
  }
  p.gaussians.emplace_back(Vector<double>::Constant(toy.d, toy.mean_p), var_p);
  p.gaussians.emplace_back(Vector<double>::Constant(toy.d, toy.mean_q), var_q);
  for (const auto& g : p.gaussians) p.experts.emplace_back(g);

  RandomStream forward(derive_seed(seed, {tag(StreamPurpose::forward)}));
  p.A.resize(toy.m, toy.d);
  const double scale = 1.0 / std::sqrt(double(toy.m));
  for (Index r = 0; r < toy.m; ++r)
    for (Index j = 0; j < toy.d; ++j) p.A(r, j) = scale * forward.gaussian();

  for (std::size_t t = 0; t < toy.truths.size(); ++t) {
    p.truths.push_back(Vector<double>::Constant(toy.d, toy.truths[t]));
    p.measurements.push_back(simulate_measurement<double>(
        p.truths.back(), p.A, toy.sigma_y, measurement_seed(seed, toy.truths[t])));
  }
  return p;
}

CollapseProblem build_collapse_problem(const CollapseConfig& cfg) {
  MixtureExpert<double> mix(cfg.weights, cfg.means, cfg.stds.array().square().matrix());
  const Vector<double> y = cfg.A * cfg.truth + Vector<double>::Constant(cfg.A.rows(), cfg.noise_offset);
  return {DenseMixture2::from_expert(mix), LinearGaussianMeasurement<double>(cfg.A, y, cfg.sigma_y), cfg.truth};
}

}  // namespace poecal
