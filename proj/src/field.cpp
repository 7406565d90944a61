#include "poecal/field.hpp"

#include <functional>
#include <limits>
#include <queue>
#include <sstream>

namespace poecal {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct Stencil {
  std::array<Index, 3> offsets{};
  std::array<double, 3> coeffs{};
  int size = 0;
};

// Central difference when both neighbours are valid, otherwise a
// second-order one-sided stencil, otherwise a first-order one.
Stencil choose_stencil(const std::function<bool(Index)>& valid) {
  Stencil s;
  if (valid(-1) && valid(1)) {
    s.offsets = {-1, 1, 0};
    s.coeffs = {-0.5, 0.5, 0};
    s.size = 2;
  } else if (valid(1) && valid(2)) {
    s.offsets = {0, 1, 2};
    s.coeffs = {-1.5, 2.0, -0.5};
    s.size = 3;
  } else if (valid(-1) && valid(-2)) {
    s.offsets = {0, -1, -2};
    s.coeffs = {1.5, -2.0, 0.5};
    s.size = 3;
  } else if (valid(1)) {
    s.offsets = {0, 1, 0};
    s.coeffs = {-1.0, 1.0, 0};
    s.size = 2;
  } else if (valid(-1)) {
    s.offsets = {-1, 0, 0};
    s.coeffs = {-1.0, 1.0, 0};
    s.size = 2;
  }
  return s;
}

// Labels 4-connected components of the valid region; -1 on masked nodes.
Eigen::Array<Index, Eigen::Dynamic, Eigen::Dynamic> label_components(const MaskMatrix& mask, Index& count) {
  Eigen::Array<Index, Eigen::Dynamic, Eigen::Dynamic> label =
      Eigen::Array<Index, Eigen::Dynamic, Eigen::Dynamic>::Constant(mask.rows(), mask.cols(), -1);
  count = 0;
  for (Index i0 = 0; i0 < mask.rows(); ++i0) {
    for (Index j0 = 0; j0 < mask.cols(); ++j0) {
      if (!mask(i0, j0) || label(i0, j0) >= 0) continue;
      std::queue<std::pair<Index, Index>> q;
      q.emplace(i0, j0);
      label(i0, j0) = count;
      while (!q.empty()) {
        const auto [i, j] = q.front();
        q.pop();
        const Index di[] = {1, -1, 0, 0};
        const Index dj[] = {0, 0, 1, -1};
        for (int k = 0; k < 4; ++k) {
          const Index ni = i + di[k], nj = j + dj[k];
          if (ni < 0 || nj < 0 || ni >= mask.rows() || nj >= mask.cols()) continue;
          if (!mask(ni, nj) || label(ni, nj) >= 0) continue;
          label(ni, nj) = count;
          q.emplace(ni, nj);
        }
      }
      ++count;
    }
  }
  return label;
}

}  // namespace

Index GridSpec::count() const {
  validate();
  return Index(std::floor((hi - lo) / step + 0.5)) + 1;
}

Vector<double> GridSpec::coordinates() const {
  const Index n = count();
  Vector<double> c(n);
  for (Index k = 0; k < n; ++k) c[k] = lo + double(k) * step;
  c[n - 1] = hi;
  return c;
}

void GridSpec::validate() const {
  if (!(step > 0)) throw ConfigError("grid step must be > 0", "field.grid_step");
  if (!(hi > lo)) throw ConfigError("grid requires hi > lo", "field.grid_hi");
  if (!(mask_threshold >= 0)) throw ConfigError("mask threshold must be >= 0", "field.mask_threshold");
  if (!(weight_floor > 0)) throw ConfigError("weight floor must be > 0", "field.weight_floor");
}

Index find_coordinate(const Vector<double>& coords, double value) {
  for (Index k = 0; k < coords.size(); ++k) {
    if (std::abs(coords[k] - value) < 1e-9) return k;
  }
  return -1;
}

Matrix<double> gradient_weights(const Matrix<double>& g, double p_weight, double floor) {
  Matrix<double> w(g.rows(), g.cols());
  for (Index i = 0; i < g.rows(); ++i) {
    for (Index j = 0; j < g.cols(); ++j) {
      w(i, j) = std::isfinite(g(i, j)) ? 1.0 / std::max(std::pow(std::abs(g(i, j)), p_weight), floor) : 0.0;
    }
  }
  return w;
}

namespace {

GradientGrid empty_grid(const GridSpec& spec) {
  GradientGrid grid;
  grid.a1 = spec.coordinates();
  grid.a2 = grid.a1;
  grid.spacing = spec.step;
  const Index n = grid.a1.size();
  grid.g1 = grid.g2 = grid.se1 = grid.se2 = Matrix<double>::Constant(n, n, kNaN);
  grid.mask = MaskMatrix::Constant(n, n, false);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) grid.mask(i, j) = grid.a1[i] + grid.a2[j] >= spec.mask_threshold;
  return grid;
}

void finish_weights(GradientGrid& grid, const GridSpec& spec) {
  grid.w1 = gradient_weights(grid.g1, 2.0, spec.weight_floor);
  grid.w2 = gradient_weights(grid.g2, 2.0, spec.weight_floor);
}

}  // namespace

GradientGrid build_gradient_grid(const std::vector<Expert<double>>& experts,
                                 const LinearGaussianMeasurement<double>& meas, const GridSpec& spec,
                                 const EvidenceOptions& opts) {
  if (experts.size() != 2) throw ConfigError("field estimation requires exactly two experts");
  GradientGrid grid = empty_grid(spec);
  const Index n = grid.rows();
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) {
      if (!grid.mask(i, j)) continue;
      EvidenceOptions node = opts;
      node.sampler.master_seed =
          derive_seed(opts.sampler.master_seed, {tag(StreamPurpose::grid), std::uint64_t(i * n + j)});
      Vector<double> a(2);
      a << grid.a1[i], grid.a2[j];
      const ProductPrior<double> prior(experts, Exponents<double>(a));
      const auto est = evidence_gradient(prior, meas, node);
      grid.g1(i, j) = est.g[0];
      grid.g2(i, j) = est.g[1];
      grid.se1(i, j) = est.standard_error[0];
      grid.se2(i, j) = est.standard_error[1];
    }
  }
  finish_weights(grid, spec);
  return grid;
}

GradientGrid analytic_gradient_grid(const std::vector<GaussianExpert<double>>& gaussians,
                                    const LinearGaussianMeasurement<double>& meas, const GridSpec& spec) {
  if (gaussians.size() != 2) throw ConfigError("field estimation requires exactly two experts");
  GradientGrid grid = empty_grid(spec);
  for (Index i = 0; i < grid.rows(); ++i) {
    for (Index j = 0; j < grid.cols(); ++j) {
      if (!grid.mask(i, j)) continue;
      Vector<double> a(2);
      a << grid.a1[i], grid.a2[j];
      const Vector<double> g = analytic_evidence_gradient(gaussians, a, meas);
      grid.g1(i, j) = g[0];
      grid.g2(i, j) = g[1];
      grid.se1(i, j) = grid.se2(i, j) = 0.0;
    }
  }
  finish_weights(grid, spec);
  return grid;
}

EvidenceField analytic_field(const std::vector<GaussianExpert<double>>& gaussians,
                             const LinearGaussianMeasurement<double>& meas, const GridSpec& spec) {
  const GradientGrid shape = empty_grid(spec);
  EvidenceField field;
  field.a1 = shape.a1;
  field.a2 = shape.a2;
  field.mask = shape.mask;
  field.spacing = spec.step;
  field.phi = Matrix<double>::Constant(shape.rows(), shape.cols(), kNaN);
  for (Index i = 0; i < shape.rows(); ++i) {
    for (Index j = 0; j < shape.cols(); ++j) {
      if (!field.mask(i, j)) continue;
      Vector<double> a(2);
      a << field.a1[i], field.a2[j];
      field.phi(i, j) = analytic_evidence(gaussians, a, meas);
    }
  }
  return field;
}

EvidenceField reconstruct_field(const GradientGrid& grid, double logZ1, double logZ2, double p_weight,
                                double weight_floor) {
  const Index rows = grid.rows(), cols = grid.cols();
  require_shape(grid.g1.rows() == rows && grid.g1.cols() == cols && grid.g2.rows() == rows &&
                    grid.g2.cols() == cols && grid.mask.rows() == rows && grid.mask.cols() == cols,
                "reconstruct_field: grid shapes disagree");
  if (!(grid.spacing > 0)) throw DomainError("reconstruct_field: spacing must be > 0");

  const Index c1i = find_coordinate(grid.a1, 1.0), c1j = find_coordinate(grid.a2, 0.0);
  const Index c2i = find_coordinate(grid.a1, 0.0), c2j = find_coordinate(grid.a2, 1.0);
  if (c1i < 0 || c1j < 0 || c2i < 0 || c2j < 0 || !grid.mask(c1i, c1j) || !grid.mask(c2i, c2j)) {
    throw ReconstructionError("constraint nodes (1,0) and (0,1) must be valid grid nodes");
  }

  Index n_components = 0;
  const auto label = label_components(grid.mask, n_components);
  std::vector<bool> anchored(std::size_t(n_components), false);
  anchored[std::size_t(label(c1i, c1j))] = true;
  anchored[std::size_t(label(c2i, c2j))] = true;
  std::ostringstream loose;
  for (Index i = 0; i < rows; ++i) {
    for (Index j = 0; j < cols; ++j) {
      if (!grid.mask(i, j) || anchored[std::size_t(label(i, j))]) continue;
      if (loose.tellp() > 0) loose << ", ";
      loose << "component " << label(i, j) << " at (" << grid.a1[i] << "," << grid.a2[j] << ")";
      anchored[std::size_t(label(i, j))] = true;  // report each component once
    }
  }
  if (loose.tellp() > 0) {
    throw ReconstructionError("unmasked region is disconnected from the constraint nodes: " + loose.str());
  }

  // Unknown numbering: valid nodes except the two constrained ones.
  Eigen::Array<Index, Eigen::Dynamic, Eigen::Dynamic> column =
      Eigen::Array<Index, Eigen::Dynamic, Eigen::Dynamic>::Constant(rows, cols, -1);
  Matrix<double> fixed = Matrix<double>::Constant(rows, cols, kNaN);
  fixed(c1i, c1j) = logZ1;
  fixed(c2i, c2j) = logZ2;
  Index unknowns = 0;
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j)
      if (grid.mask(i, j) && std::isnan(fixed(i, j))) column(i, j) = unknowns++;

  const Matrix<double> w1 = gradient_weights(grid.g1, p_weight, weight_floor);
  const Matrix<double> w2 = gradient_weights(grid.g2, p_weight, weight_floor);

  struct Entry {
    Index row, col;
    double value;
  };
  std::vector<Entry> entries;
  std::vector<double> rhs;
  auto valid = [&](Index i, Index j) { return i >= 0 && j >= 0 && i < rows && j < cols && grid.mask(i, j); };

  for (int axis = 0; axis < 2; ++axis) {
    const Matrix<double>& g = axis == 0 ? grid.g1 : grid.g2;
    const Matrix<double>& w = axis == 0 ? w1 : w2;
    for (Index i = 0; i < rows; ++i) {
      for (Index j = 0; j < cols; ++j) {
        if (!grid.mask(i, j) || !std::isfinite(g(i, j)) || !(w(i, j) > 0)) continue;
        auto at = [&](Index off) { return axis == 0 ? std::pair{i + off, j} : std::pair{i, j + off}; };
        const Stencil s = choose_stencil([&](Index off) {
          const auto [ni, nj] = at(off);
          return valid(ni, nj);
        });
        if (s.size == 0) continue;
        const double sw = std::sqrt(w(i, j));
        const auto row = static_cast<Index>(rhs.size());
        double b = g(i, j);
        for (int k = 0; k < s.size; ++k) {
          const auto [ni, nj] = at(s.offsets[std::size_t(k)]);
          const double c = s.coeffs[std::size_t(k)] / grid.spacing;
          if (column(ni, nj) >= 0) {
            entries.push_back({row, column(ni, nj), sw * c});
          } else {
            b -= c * fixed(ni, nj);
          }
        }
        rhs.push_back(sw * b);
      }
    }
  }

  Matrix<double> B = Matrix<double>::Zero(Index(rhs.size()), unknowns);
  for (const auto& t : entries) B(t.row, t.col) += t.value;
  const Vector<double> c = Eigen::Map<const Vector<double>>(rhs.data(), Index(rhs.size()));

  Eigen::ColPivHouseholderQR<Matrix<double>> qr(B);
  if (qr.rank() < unknowns) {
    throw ReconstructionError("least-squares system is rank deficient (rank " + std::to_string(qr.rank()) +
                              " of " + std::to_string(unknowns) + ")");
  }
  const Vector<double> x = qr.solve(c);

  EvidenceField field;
  field.a1 = grid.a1;
  field.a2 = grid.a2;
  field.mask = grid.mask;
  field.spacing = grid.spacing;
  field.phi = fixed;
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j)
      if (column(i, j) >= 0) field.phi(i, j) = x[column(i, j)];

  const double bnorm = B.norm();
  const double denom = bnorm * (bnorm * x.norm() + c.norm());
  field.normal_residual = denom > 0 ? (B.transpose() * (B * x - c)).norm() / denom : 0.0;
  return field;
}

namespace {

void require_same_grid(const EvidenceField& a, const EvidenceField& b) {
  require_shape(a.phi.rows() == b.phi.rows() && a.phi.cols() == b.phi.cols() && a.mask.rows() == b.mask.rows() &&
                    a.mask.cols() == b.mask.cols(),
                "fields live on different grids");
}

}  // namespace

double nrmse(const EvidenceField& phi, const EvidenceField& reference) {
  require_same_grid(phi, reference);
  double lo = std::numeric_limits<double>::infinity(), hi = -lo, sq = 0;
  Index count = 0;
  for (Index i = 0; i < phi.phi.rows(); ++i) {
    for (Index j = 0; j < phi.phi.cols(); ++j) {
      if (!reference.mask(i, j) || !phi.mask(i, j)) continue;
      const double r = reference.phi(i, j);
      lo = std::min(lo, r);
      hi = std::max(hi, r);
      sq += (phi.phi(i, j) - r) * (phi.phi(i, j) - r);
      ++count;
    }
  }
  if (count == 0 || !(hi > lo)) throw DomainError("nrmse: reference field has no range");
  return std::sqrt(sq / double(count)) / (hi - lo);
}

double pearson(const EvidenceField& phi, const EvidenceField& reference) {
  require_shape(phi.phi.rows() == reference.phi.rows() && phi.phi.cols() == reference.phi.cols(),
                "fields live on different grids");
  std::vector<double> xs, ys;
  for (Index i = 0; i < phi.phi.rows(); ++i) {
    for (Index j = 0; j < phi.phi.cols(); ++j) {
      if (!reference.mask(i, j) || !phi.mask(i, j)) continue;
      xs.push_back(phi.phi(i, j));
      ys.push_back(reference.phi(i, j));
    }
  }
  const auto n = static_cast<Index>(xs.size());
  if (n < 2) throw DomainError("pearson: need at least two nodes");
  const Vector<double> x = Eigen::Map<Vector<double>>(xs.data(), n);
  const Vector<double> y = Eigen::Map<Vector<double>>(ys.data(), n);
  const Vector<double> xc = x.array() - x.mean();
  const Vector<double> yc = y.array() - y.mean();
  const double denom = xc.norm() * yc.norm();
  if (!(denom > 0)) throw DomainError("pearson: constant field");
  return xc.dot(yc) / denom;
}

GridNode field_argmax(const EvidenceField& phi) {
  GridNode best;
  double best_value = -std::numeric_limits<double>::infinity();
  bool found = false;
  for (Index i = 0; i < phi.phi.rows(); ++i) {
    for (Index j = 0; j < phi.phi.cols(); ++j) {
      if (!phi.mask(i, j) || !std::isfinite(phi.phi(i, j))) continue;
      if (!found || phi.phi(i, j) > best_value) {
        best = {i, j, phi.a1[i], phi.a2[j]};
        best_value = phi.phi(i, j);
        found = true;
      }
    }
  }
  if (!found) throw DomainError("field_argmax: no valid nodes");
  return best;
}

}  // namespace poecal
