#pragma once

#include "poecal/density.hpp"
#include "poecal/sampler.hpp"

#include <vector>

namespace poecal {

struct EvidenceOptions {
  RunConfig sampler;
  DensityConfig density;
  DensityMode mode = DensityMode::exact;
  Index n_posterior = 20;
  Index n_prior = 20;

  void validate() const {
    sampler.validate();
    density.validate();
    if (n_posterior < 1) throw ConfigError("n_posterior must be >= 1", "evidence.n_posterior");
    if (n_prior < 1) throw ConfigError("n_prior must be >= 1", "evidence.n_prior");
  }
};

template <typename Scalar>
struct GradientEstimate {
  Vector<Scalar> g;
  Vector<Scalar> standard_error;
  Index n_posterior = 0;
  Index n_prior = 0;
  ConstraintMode mode = ConstraintMode::unconstrained;
  Vector<Scalar> exponents;
  std::uint64_t seed = 0;
};

/// Posterior and prior draws at one exponent setting, with log p_i evaluated
/// on every sample (rows = samples, columns = experts).
template <typename Scalar>
struct EvidenceBatches {
  SampleBatch<Scalar> posterior;
  SampleBatch<Scalar> prior;
  Matrix<Scalar> logp_posterior;
  Matrix<Scalar> logp_prior;
  std::uint64_t seed = 0;
};

namespace detail {

inline std::uint64_t side_seed(std::uint64_t master, StreamPurpose side) {
  return derive_seed(master, {tag(side)});
}

template <typename Scalar>
void require_finite_logp(const Matrix<Scalar>& logp, const char* side) {
  for (Index r = 0; r < logp.rows(); ++r) {
    for (Index i = 0; i < logp.cols(); ++i) {
      if (!std::isfinite(logp(r, i))) {
        throw NumericalError(std::string("non-finite log-density for expert ") + std::to_string(i) + " on " +
                             side + " sample " + std::to_string(r));
      }
    }
  }
}

template <typename Scalar>
Scalar sample_variance(const Eigen::Ref<const Vector<Scalar>>& v) {
  if (v.size() < 2) return Scalar(0);
  return (v.array() - v.mean()).square().sum() / Scalar(v.size() - 1);
}

}  // namespace detail

template <typename Scalar>
EvidenceBatches<Scalar> draw_evidence_batches(const ProductPrior<Scalar>& prior,
                                              const LinearGaussianMeasurement<Scalar>& meas,
                                              const EvidenceOptions& opts) {
  opts.validate();
  const auto schedule = opts.sampler.schedule<Scalar>();
  const std::uint64_t master = opts.sampler.master_seed;

  RunConfig post_cfg = opts.sampler;
  post_cfg.n_chains = opts.n_posterior;
  post_cfg.master_seed = detail::side_seed(master, StreamPurpose::posterior);
  RunConfig prior_cfg = opts.sampler;
  prior_cfg.n_chains = opts.n_prior;
  prior_cfg.master_seed = detail::side_seed(master, StreamPurpose::prior);

  EvidenceBatches<Scalar> out;
  out.seed = master;
  out.posterior = sample_posterior(prior, meas, schedule, post_cfg);
  out.prior = sample_unconditional(prior, schedule, prior_cfg);

  DensityConfig post_density = opts.density;
  post_density.probe_seed = derive_seed(master, {tag(StreamPurpose::probe), opts.density.probe_seed, 0});
  DensityConfig prior_density = opts.density;
  prior_density.probe_seed = derive_seed(master, {tag(StreamPurpose::probe), opts.density.probe_seed, 1});
  out.logp_posterior = batch_logdensity(prior.experts(), out.posterior.samples, post_density, opts.mode);
  out.logp_prior = batch_logdensity(prior.experts(), out.prior.samples, prior_density, opts.mode);
  detail::require_finite_logp(out.logp_posterior, "posterior");
  detail::require_finite_logp(out.logp_prior, "prior");
  return out;
}

/// g_i = mean_post log p_i - mean_prior log p_i.
template <typename Scalar>
GradientEstimate<Scalar> gradient_from_batches(const EvidenceBatches<Scalar>& b) {
  const Index n = b.logp_posterior.cols();
  const Index np = b.logp_posterior.rows();
  const Index nq = b.logp_prior.rows();
  if (np == 0 || nq == 0) throw ConfigError("evidence gradient requires non-empty batches");

  GradientEstimate<Scalar> est;
  est.g.resize(n);
  est.standard_error.resize(n);
  for (Index i = 0; i < n; ++i) {
    est.g[i] = b.logp_posterior.col(i).mean() - b.logp_prior.col(i).mean();
    est.standard_error[i] = std::sqrt(detail::sample_variance<Scalar>(b.logp_posterior.col(i)) / Scalar(np) +
                                      detail::sample_variance<Scalar>(b.logp_prior.col(i)) / Scalar(nq));
  }
  est.n_posterior = np;
  est.n_prior = nq;
  est.mode = ConstraintMode::unconstrained;
  est.exponents = b.posterior.exponents;
  est.seed = b.seed;
  return est;
}

/// Free components i < n-1 of the sum-to-one gradient, g_i - g_n, taken from
/// the unconstrained estimate on the same batches.
template <typename Scalar>
GradientEstimate<Scalar> constrained_gradient_from_batches(const EvidenceBatches<Scalar>& b) {
  const GradientEstimate<Scalar> full = gradient_from_batches(b);
  const Index n = full.g.size();
  const Index last = n - 1;
  const Index np = b.logp_posterior.rows();
  const Index nq = b.logp_prior.rows();

  GradientEstimate<Scalar> est = full;
  est.mode = ConstraintMode::sum_to_one;
  est.g.resize(last);
  est.standard_error.resize(last);
  for (Index i = 0; i < last; ++i) {
    est.g[i] = full.g[i] - full.g[last];
    const Vector<Scalar> dp = b.logp_posterior.col(i) - b.logp_posterior.col(last);
    const Vector<Scalar> dq = b.logp_prior.col(i) - b.logp_prior.col(last);
    est.standard_error[i] = std::sqrt(detail::sample_variance<Scalar>(dp) / Scalar(np) +
                                      detail::sample_variance<Scalar>(dq) / Scalar(nq));
  }
  return est;
}

template <typename Scalar>
GradientEstimate<Scalar> evidence_gradient(const ProductPrior<Scalar>& prior,
                                           const LinearGaussianMeasurement<Scalar>& meas,
                                           const EvidenceOptions& opts) {
  return gradient_from_batches(draw_evidence_batches(prior, meas, opts));
}

template <typename Scalar>
GradientEstimate<Scalar> constrained_evidence_gradient(const ProductPrior<Scalar>& prior,
                                                       const LinearGaussianMeasurement<Scalar>& meas,
                                                       const EvidenceOptions& opts) {
  if (prior.exponents().mode != ConstraintMode::sum_to_one) {
    throw DomainError("constrained gradient requires sum_to_one exponents");
  }
  return constrained_gradient_from_batches(draw_evidence_batches(prior, meas, opts));
}

// ---------------------------------------------------------------------------
// Closed-form oracle for Gaussian experts and a linear-Gaussian likelihood.

namespace detail {

template <typename Scalar>
struct AnalyticPosterior {
  GaussianProduct<Scalar> product;
  Vector<Scalar> post_mean;
  Vector<Scalar> post_var_diag;
  Scalar log_evidence;
};

template <typename Scalar>
AnalyticPosterior<Scalar> analytic_posterior(const std::vector<GaussianExpert<Scalar>>& gaussians,
                                             const Vector<Scalar>& a,
                                             const LinearGaussianMeasurement<Scalar>& meas,
                                             bool need_posterior) {
  meas.require_noise();
  auto product = analytic_product(gaussians, a);
  require_shape(meas.d() == product.gaussian.dim(), "analytic evidence: dimension mismatch");
  const Vector<Scalar>& prior_var = product.gaussian.var;

  // S = A diag(P) A^T + sigma_y^2 I
  const Matrix<Scalar> AP = meas.A * prior_var.asDiagonal();
  Matrix<Scalar> S = AP * meas.A.transpose();
  S.diagonal().array() += meas.sigma_y * meas.sigma_y;
  Eigen::LLT<Matrix<Scalar>> llt(S);
  if (llt.info() != Eigen::Success) throw DomainError("analytic evidence: covariance is not positive definite");

  const Vector<Scalar> r = meas.y - meas.A * product.gaussian.mean;
  const Vector<Scalar> white = llt.matrixL().solve(r);
  const Scalar logdet = Scalar(2) * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
  AnalyticPosterior<Scalar> out{product, {}, {}, Scalar(0)};
  out.log_evidence = Scalar(-0.5) * (white.squaredNorm() + logdet + Scalar(meas.m()) * kLog2Pi<Scalar>);

  if (need_posterior) {
    const Vector<Scalar> Sr = llt.solve(r);
    out.post_mean = out.product.gaussian.mean + AP.transpose() * Sr;
    const Matrix<Scalar> B = llt.matrixL().solve(AP);  // L^{-1} A P
    out.post_var_diag = out.product.gaussian.var - B.colwise().squaredNorm().transpose();
  }
  return out;
}

template <typename Scalar>
Scalar expected_log_gaussian(const GaussianExpert<Scalar>& g, const Vector<Scalar>& mean,
                             const Vector<Scalar>& var) {
  return Scalar(-0.5) * ((g.var.array().log() + kLog2Pi<Scalar>).sum() +
                         (((mean - g.mean).array().square() + var.array()) / g.var.array()).sum());
}

}  // namespace detail

/// log N(y; A m, A Λ^{-1} A^T + sigma_y^2 I) with (m, Λ) from analytic_product.
template <typename Scalar>
Scalar analytic_evidence(const std::vector<GaussianExpert<Scalar>>& gaussians, const Vector<Scalar>& a,
                         const LinearGaussianMeasurement<Scalar>& meas) {
  return detail::analytic_posterior(gaussians, a, meas, false).log_evidence;
}

/// Exact d log p_a(y) / d a_i = E_post[log p_i] - E_prior[log p_i], both
/// expectations in closed form.
template <typename Scalar>
Vector<Scalar> analytic_evidence_gradient(const std::vector<GaussianExpert<Scalar>>& gaussians,
                                          const Vector<Scalar>& a,
                                          const LinearGaussianMeasurement<Scalar>& meas) {
  const auto post = detail::analytic_posterior(gaussians, a, meas, true);
  Vector<Scalar> g(a.size());
  for (std::size_t i = 0; i < gaussians.size(); ++i) {
    g[Index(i)] = detail::expected_log_gaussian(gaussians[i], post.post_mean, post.post_var_diag) -
                  detail::expected_log_gaussian(gaussians[i], post.product.gaussian.mean, post.product.gaussian.var);
  }
  return g;
}

template <typename Scalar>
struct EvidenceMaximum {
  Vector<Scalar> a;
  Scalar log_evidence;
};

/// Maximizes analytic_evidence over the box [lower, upper]^n: coarse grid
/// start, then projected Newton steps with a finite-difference Hessian of
/// the analytic gradient.
template <typename Scalar>
EvidenceMaximum<Scalar> maximize_analytic_evidence(const std::vector<GaussianExpert<Scalar>>& gaussians,
                                                   const LinearGaussianMeasurement<Scalar>& meas,
                                                   Scalar lower = Scalar(0), Scalar upper = Scalar(5),
                                                   Scalar coarse_step = Scalar(0.25)) {
  const Index n = static_cast<Index>(gaussians.size());
  auto value = [&](const Vector<Scalar>& a) {
    if (!(a.sum() > 0)) return -std::numeric_limits<Scalar>::infinity();
    try {
      return analytic_evidence(gaussians, a, meas);
    } catch (const DomainError&) {
      return -std::numeric_limits<Scalar>::infinity();
    }
  };

  // Coarse grid (odometer over n axes).
  const Index per_axis = Index(std::floor((upper - lower) / coarse_step + Scalar(0.5))) + 1;
  Vector<Scalar> best = Vector<Scalar>::Constant(n, lower + coarse_step);
  Scalar best_value = value(best);
  std::vector<Index> idx(std::size_t(n), 0);
  for (;;) {
    Vector<Scalar> a(n);
    for (Index i = 0; i < n; ++i) a[i] = std::min(upper, lower + Scalar(idx[std::size_t(i)]) * coarse_step);
    const Scalar v = value(a);
    if (v > best_value) {
      best_value = v;
      best = a;
    }
    Index k = 0;
    while (k < n && ++idx[std::size_t(k)] == per_axis) idx[std::size_t(k++)] = 0;
    if (k == n) break;
  }

  auto project = [&](Vector<Scalar> a) { return a.cwiseMax(lower).cwiseMin(upper); };
  const Scalar h = Scalar(1e-5);
  for (int iter = 0; iter < 100; ++iter) {
    const Vector<Scalar> g = analytic_evidence_gradient(gaussians, best, meas);
    Matrix<Scalar> H(n, n);
    for (Index j = 0; j < n; ++j) {
      Vector<Scalar> ap = best, am = best;
      ap[j] += h;
      am[j] -= h;
      H.col(j) = (analytic_evidence_gradient(gaussians, ap, meas) - analytic_evidence_gradient(gaussians, am, meas)) /
                 (Scalar(2) * h);
    }
    H = Scalar(0.5) * (H + H.transpose());
    // Coordinates pinned at a bound with the gradient pointing outward stay fixed.
    std::vector<Index> free;
    for (Index i = 0; i < n; ++i) {
      const bool pinned = (best[i] <= lower && g[i] <= 0) || (best[i] >= upper && g[i] >= 0);
      if (!pinned) free.push_back(i);
    }
    if (free.empty()) break;
    const Index nf = Index(free.size());
    Matrix<Scalar> neg(nf, nf);
    Vector<Scalar> gf(nf);
    for (Index r = 0; r < nf; ++r) {
      gf[r] = g[free[std::size_t(r)]];
      for (Index c = 0; c < nf; ++c) neg(r, c) = -H(free[std::size_t(r)], free[std::size_t(c)]);
    }
    // Newton direction on the negated objective, shifted until positive definite.
    Scalar shift = 0;
    Eigen::LLT<Matrix<Scalar>> llt;
    for (int tries = 0; tries < 60; ++tries) {
      llt.compute(neg + shift * Matrix<Scalar>::Identity(nf, nf));
      if (llt.info() == Eigen::Success) break;
      shift = shift == 0 ? Scalar(1e-6) * (Scalar(1) + neg.norm()) : shift * 10;
    }
    const Vector<Scalar> df = llt.solve(gf);
    Vector<Scalar> dir = Vector<Scalar>::Zero(n);
    for (Index r = 0; r < nf; ++r) dir[free[std::size_t(r)]] = df[r];

    Scalar step = 1;
    Vector<Scalar> next = project(best + dir);
    Scalar next_value = value(next);
    while (!(next_value >= best_value) && step > Scalar(1e-10)) {
      step *= Scalar(0.5);
      next = project(best + step * dir);
      next_value = value(next);
    }
    if (!(next_value >= best_value)) break;
    const Scalar moved = (next - best).norm();
    best = next;
    best_value = next_value;
    if (moved < Scalar(1e-10)) break;
  }
  return {best, best_value};
}

}  // namespace poecal
