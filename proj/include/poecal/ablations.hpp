#pragma once

#include "poecal/field.hpp"

#include <vector>

namespace poecal {

/// 2-D Gaussian mixture with full component covariances. Conjugate updates of
/// a diagonal mixture produce correlated components, so the collapse study
/// works on this type.
struct DenseMixture2 {
  Vector<double> weights;
  std::vector<Eigen::Vector2d> means;
  std::vector<Eigen::Matrix2d> covs;

  static DenseMixture2 from_expert(const MixtureExpert<double>& expert);

  Index components() const { return weights.size(); }
  void validate() const;
  double logdensity(const Eigen::Vector2d& x) const;
  Eigen::Vector2d mean() const;
  Eigen::Matrix2d covariance() const;  // total (law of total variance)
};

/// Exact posterior of a mixture prior under y = A x + N(0, sigma_y^2 I):
/// weights ∝ w_k N(y; A mu_k, A S_k A^T + sigma_y^2 I), Kalman-updated components.
DenseMixture2 exact_posterior_update(const DenseMixture2& prior, const LinearGaussianMeasurement<double>& meas);

struct CollapseState {
  Index k = 0;
  DenseMixture2 prior;
  double truth_logdensity = 0;  // log prior_k(x_true)
  double row_residual = 0;      // |A mean_k - y|
  double row_std = 0;           // sqrt(A Cov_k A^T)
  double null_std = 0;          // std along the unit null direction of A
};

/// prior_{k+1} = posterior(prior_k) for k = 0..iterations-1; returns
/// iterations + 1 states (state 0 is the initial prior). A must be 1 x 2.
std::vector<CollapseState> run_collapse(const DenseMixture2& prior0, const LinearGaussianMeasurement<double>& meas,
                                        const Eigen::Vector2d& truth, Index iterations);

struct WeightingRow {
  double p = 0;
  double nrmse = 0;
  std::uint64_t seed = 0;
};

/// Reconstructs the field from one shared gradient grid for every p and
/// scores it against the reference field.
std::vector<WeightingRow> run_weighting_ablation(const GradientGrid& grid, const EvidenceField& reference,
                                                 double logZ1, double logZ2, const std::vector<double>& p_values,
                                                 std::uint64_t seed, double weight_floor = 1e-12);

}  // namespace poecal
