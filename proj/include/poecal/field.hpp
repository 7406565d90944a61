#pragma once

#include "poecal/evidence.hpp"

#include <array>
#include <vector>

namespace poecal {

using MaskMatrix = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

/// Square exponent grid {lo, lo + step, ..., hi} on both axes.
struct GridSpec {
  double lo = 0.0;
  double hi = 1.0;
  double step = 0.1;
  double mask_threshold = 0.05;  // nodes with a1 + a2 < threshold are masked
  double weight_floor = 1e-12;

  Index count() const;
  Vector<double> coordinates() const;
  void validate() const;
};

struct GradientGrid {
  Vector<double> a1, a2;
  Matrix<double> g1, g2;    // rows index a1, columns index a2
  Matrix<double> se1, se2;  // Monte-Carlo standard errors
  MaskMatrix mask;          // true = valid node
  Matrix<double> w1, w2;
  double spacing = 0.1;

  Index rows() const { return a1.size(); }
  Index cols() const { return a2.size(); }
};

struct EvidenceField {
  Vector<double> a1, a2;
  Matrix<double> phi;  // NaN on masked nodes
  MaskMatrix mask;
  double spacing = 0.1;
  double normal_residual = 0.0;
};

struct GridNode {
  Index i = 0, j = 0;
  double a1 = 0, a2 = 0;
};

/// w = 1 / max(|g|^p, floor)
Matrix<double> gradient_weights(const Matrix<double>& g, double p_weight, double floor);

/// Evaluates evidence_gradient at every unmasked node of a two-expert grid.
/// Node (i, j) draws from seeds derived from (master seed, node index).
GradientGrid build_gradient_grid(const std::vector<Expert<double>>& experts,
                                 const LinearGaussianMeasurement<double>& meas, const GridSpec& spec,
                                 const EvidenceOptions& opts);

/// Weighted least-squares integration of the gradient grid with
/// phi(1,0) = logZ1 and phi(0,1) = logZ2 held fixed.
EvidenceField reconstruct_field(const GradientGrid& grid, double logZ1, double logZ2, double p_weight = 2.0,
                                double weight_floor = 1e-12);

/// log p_a(y) at every unmasked node.
EvidenceField analytic_field(const std::vector<GaussianExpert<double>>& gaussians,
                             const LinearGaussianMeasurement<double>& meas, const GridSpec& spec);

/// Noiseless gradient grid of the analytic field, from the closed-form gradient.
GradientGrid analytic_gradient_grid(const std::vector<GaussianExpert<double>>& gaussians,
                                    const LinearGaussianMeasurement<double>& meas, const GridSpec& spec);

double nrmse(const EvidenceField& phi, const EvidenceField& reference);
double pearson(const EvidenceField& phi, const EvidenceField& reference);
GridNode field_argmax(const EvidenceField& phi);

/// Grid index of the node at coordinate value, or -1.
Index find_coordinate(const Vector<double>& coords, double value);

}  // namespace poecal
