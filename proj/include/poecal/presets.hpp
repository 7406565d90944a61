#pragma once

#include "poecal/ablations.hpp"
#include "poecal/config.hpp"
#include "poecal/em.hpp"
#include "poecal/io.hpp"

#include <optional>
#include <vector>

namespace poecal {

/// Two diagonal Gaussian experts p = N(mean_p 1, diag s_p^2) and
/// q = N(mean_q 1, diag s_q^2) with per-dimension stds drawn uniformly, a
/// Gaussian forward matrix with N(0, 1/m) entries, and constant ground truths.
struct ToyConfig {
  Index d = 1000;
  Index m = 200;
  double sigma_y = 0.2;
  double mean_p = 1.0;
  double mean_q = 0.0;
  double std_p_lo = 0.1, std_p_hi = 0.2;
  double std_q_lo = 0.1, std_q_hi = 1.0;
  std::vector<double> truths{0.9, 0.8, 0.7};

  void validate() const;
};

struct CollapseConfig {
  Vector<double> weights;
  Matrix<double> means;  // K x 2
  Matrix<double> stds;   // K x 2
  RowMajorMatrix<double> A;
  double sigma_y = 0.3;
  Eigen::Vector2d truth;
  double noise_offset = 0.45;  // y = A truth + noise_offset
  Index iterations = 10;
};

struct ExperimentConfig {
  std::string preset = "paper-4.1";
  bool reduced = false;
  std::uint64_t seed = 0;

  ToyConfig toy;
  EvidenceOptions evidence;
  GridSpec grid;
  double p_weight = 2.0;

  Index em_iterations = 12;
  double em_eta = 0.5;
  double em_c = 200.0;
  double em_eps_a = 0.05;
  ConstraintMode em_mode = ConstraintMode::unconstrained;
  std::vector<std::vector<double>> em_inits{{1, 0}, {0, 1}, {1, 1}};

  std::vector<double> p_values{0, 1, 2, 3, 4, 5, 6};
  Index ablation_seeds = 3;
  double ablation_truth = 0.9;
  CollapseConfig collapse;

  void validate() const;
  EMOptions em_options() const;
  Json echo() const;
};

const std::vector<ConfigKey>& experiment_schema();

/// Named presets: "paper-4.1" (d=1000, m=200) and its reduced variant
/// (d=200, m=50). Only the scale changes under `reduced`.
ExperimentConfig preset_config(const std::string& name, bool reduced);

/// Reads a config file. `[run] preset` picks the base; preset = custom
/// requires every [toy] key. All other keys override the base.
ExperimentConfig load_experiment_config(const std::filesystem::path& path);
ExperimentConfig apply_config(const ConfigFile& file);

struct ToyProblem {
  std::vector<GaussianExpert<double>> gaussians;
  std::vector<Expert<double>> experts;
  RowMajorMatrix<double> A;
  std::vector<Vector<double>> truths;
  std::vector<LinearGaussianMeasurement<double>> measurements;  // one per truth
};

/// Measurement noise is keyed by the truth value, so selecting a single
/// truth reproduces the same measurement as the full run.
std::uint64_t measurement_seed(std::uint64_t seed, double truth);

/// Experts and A are drawn once from the seed and shared by all truths.
ToyProblem build_toy_problem(const ToyConfig& toy, std::uint64_t seed);

/// 2-D mixture, A, measurement and truth of the collapse study.
struct CollapseProblem {
  DenseMixture2 prior;
  LinearGaussianMeasurement<double> meas;
  Eigen::Vector2d truth;
};
CollapseProblem build_collapse_problem(const CollapseConfig& cfg);
CollapseConfig default_collapse_config();

}  // namespace poecal
