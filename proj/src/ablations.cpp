#include "poecal/ablations.hpp"

namespace poecal {
namespace {

double log_gaussian(const Vector<double>& r, const Matrix<double>& cov) {
  Eigen::LLT<Matrix<double>> llt(cov);
  if (llt.info() != Eigen::Success) throw DomainError("collapse: covariance is not positive definite");
  const Vector<double> white = llt.matrixL().solve(r);
  const double logdet = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
  return -0.5 * (white.squaredNorm() + logdet + double(r.size()) * kLog2Pi<double>);
}

}  // namespace

DenseMixture2 DenseMixture2::from_expert(const MixtureExpert<double>& expert) {
  if (expert.dim() != 2) throw ShapeError("DenseMixture2 requires a 2-D mixture");
  expert.validate();
  DenseMixture2 out;
  out.weights = expert.weights;
  for (Index k = 0; k < expert.components(); ++k) {
    out.means.emplace_back(expert.means(k, 0), expert.means(k, 1));
    out.covs.push_back(Eigen::Vector2d(expert.vars(k, 0), expert.vars(k, 1)).asDiagonal());
  }
  return out;
}

void DenseMixture2::validate() const {
  require_shape(std::size_t(weights.size()) == means.size() && means.size() == covs.size() && !means.empty(),
                "DenseMixture2: one mean and covariance per weight");
  if ((weights.array() < 0).any() || std::abs(weights.sum() - 1.0) > 1e-9) {
    throw DomainError("DenseMixture2: weights must be nonnegative and sum to 1");
  }
  for (const auto& c : covs) {
    if (!(c(0, 0) > 0) || !(c.determinant() > 0)) throw DomainError("DenseMixture2: singular component covariance");
  }
}

double DenseMixture2::logdensity(const Eigen::Vector2d& x) const {
  Vector<double> terms(components());
  for (Index k = 0; k < components(); ++k) {
    const auto ks = std::size_t(k);
    terms[k] = std::log(weights[k]) + log_gaussian(x - means[ks], covs[ks]);
  }
  return detail::log_sum_exp(terms);
}

Eigen::Vector2d DenseMixture2::mean() const {
  Eigen::Vector2d m = Eigen::Vector2d::Zero();
  for (Index k = 0; k < components(); ++k) m += weights[k] * means[std::size_t(k)];
  return m;
}

Eigen::Matrix2d DenseMixture2::covariance() const {
  const Eigen::Vector2d m = mean();
  Eigen::Matrix2d c = Eigen::Matrix2d::Zero();
  for (Index k = 0; k < components(); ++k) {
    const auto ks = std::size_t(k);
    const Eigen::Vector2d dm = means[ks] - m;
    c += weights[k] * (covs[ks] + dm * dm.transpose());
  }
  return c;
}

DenseMixture2 exact_posterior_update(const DenseMixture2& prior, const LinearGaussianMeasurement<double>& meas) {
  prior.validate();
  require_shape(meas.d() == 2, "collapse: forward matrix must have 2 columns");
  meas.require_noise();
  const Matrix<double> A = meas.A;

  DenseMixture2 post;
  Vector<double> log_w(prior.components());
  for (Index k = 0; k < prior.components(); ++k) {
    const auto ks = std::size_t(k);
    const Eigen::Matrix2d& S = prior.covs[ks];
    Matrix<double> innov = A * S * A.transpose();
    innov.diagonal().array() += meas.sigma_y * meas.sigma_y;
    const Vector<double> r = meas.y - A * prior.means[ks];
    log_w[k] = std::log(prior.weights[k]) + log_gaussian(r, innov);

    Eigen::LLT<Matrix<double>> llt(innov);
    const Matrix<double> gain = llt.solve(A * S).transpose();  // S A^T innov^{-1}, 2 x m
    post.means.push_back(prior.means[ks] + gain * r);
    Eigen::Matrix2d cov = S - gain * A * S;
    cov = 0.5 * (cov + cov.transpose());
    post.covs.push_back(cov);
  }
  const double norm = detail::log_sum_exp(log_w);
  post.weights = (log_w.array() - norm).exp();
  post.weights /= post.weights.sum();
  post.validate();
  return post;
}

std::vector<CollapseState> run_collapse(const DenseMixture2& prior0, const LinearGaussianMeasurement<double>& meas,
                                        const Eigen::Vector2d& truth, Index iterations) {
  require_shape(meas.m() == 1 && meas.d() == 2, "collapse diagnostics require A to be 1 x 2");
  if (iterations < 0) throw ConfigError("collapse iterations must be >= 0", "ablation.collapse_iterations");
  const Eigen::RowVector2d a = meas.A.row(0);
  const Eigen::Vector2d null_dir = Eigen::Vector2d(-a[1], a[0]).normalized();

  auto diagnose = [&](Index k, DenseMixture2 prior) {
    CollapseState s;
    s.k = k;
    const Eigen::Vector2d mean = prior.mean();
    const Eigen::Matrix2d cov = prior.covariance();
    s.truth_logdensity = prior.logdensity(truth);
    s.row_residual = std::abs(a.dot(mean) - meas.y[0]);
    s.row_std = std::sqrt((a * cov * a.transpose()).value());
    s.null_std = std::sqrt(null_dir.dot(cov * null_dir));
    s.prior = std::move(prior);
    return s;
  };

  std::vector<CollapseState> states;
  states.push_back(diagnose(0, prior0));
  DenseMixture2 current = prior0;
  for (Index k = 1; k <= iterations; ++k) {
    current = exact_posterior_update(current, meas);
    states.push_back(diagnose(k, current));
  }
  return states;
}

std::vector<WeightingRow> run_weighting_ablation(const GradientGrid& grid, const EvidenceField& reference,
                                                 double logZ1, double logZ2, const std::vector<double>& p_values,
                                                 std::uint64_t seed, double weight_floor) {
  std::vector<WeightingRow> rows;
  rows.reserve(p_values.size());
  for (double p : p_values) {
    if (!(p >= 0)) throw ConfigError("weighting exponents must be >= 0", "ablation.p_values");
    const EvidenceField phi = reconstruct_field(grid, logZ1, logZ2, p, weight_floor);
    rows.push_back({p, nrmse(phi, reference), seed});
  }
  return rows;
}

}  // namespace poecal
