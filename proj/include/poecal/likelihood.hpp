#pragma once

#include "poecal/experts.hpp"
#include "poecal/random.hpp"

namespace poecal {

/// y = A x + eps, eps ~ N(0, sigma_y^2 I). A is dense and row-major.
template <typename Scalar>
struct LinearGaussianMeasurement {
  RowMajorMatrix<Scalar> A;
  Vector<Scalar> y;
  Scalar sigma_y = Scalar(1);

  LinearGaussianMeasurement() = default;
  LinearGaussianMeasurement(RowMajorMatrix<Scalar> forward, Vector<Scalar> obs, Scalar noise)
      : A(std::move(forward)), y(std::move(obs)), sigma_y(noise) {
    validate();
  }

  Index m() const { return A.rows(); }
  Index d() const { return A.cols(); }

  // sigma_y = 0 is representable (noiseless test measurements) but every
  // likelihood evaluation rejects it.
  void validate() const {
    require_shape(A.rows() >= 1 && A.cols() >= 1, "measurement: forward matrix is empty");
    require_shape(y.size() == A.rows(), "measurement: y length must equal rows of A");
    if (!A.allFinite() || !y.allFinite()) throw DomainError("measurement: non-finite entries");
    if (!(sigma_y >= 0) || !std::isfinite(sigma_y)) throw DomainError("measurement: sigma_y must be >= 0");
  }

  void require_noise() const {
    if (!(sigma_y > 0)) throw DomainError("likelihood requires sigma_y > 0");
  }
};

template <typename Scalar>
LinearGaussianMeasurement<Scalar> simulate_measurement(const VectorRef<Scalar>& x_true,
                                                       const RowMajorMatrix<Scalar>& A,
                                                       ScalarArg<Scalar> sigma_y, std::uint64_t seed) {
  require_shape(A.cols() == x_true.size(), "simulate_measurement: A columns must equal dim(x)");
  if (!(sigma_y >= 0)) throw DomainError("simulate_measurement: sigma_y must be >= 0");
  Vector<Scalar> y = A * x_true;
  if (sigma_y > 0) {
    RandomStream stream(derive_seed(seed, {tag(StreamPurpose::measurement)}));
    for (Index i = 0; i < y.size(); ++i) y[i] += sigma_y * Scalar(stream.gaussian());
  }
  return LinearGaussianMeasurement<Scalar>(A, std::move(y), sigma_y);
}

template <typename Scalar>
Scalar loglik(const LinearGaussianMeasurement<Scalar>& meas, const VectorRef<Scalar>& x) {
  require_shape(x.size() == meas.d(), "loglik: dimension mismatch");
  meas.require_noise();
  const Scalar s2 = meas.sigma_y * meas.sigma_y;
  return -(meas.y - meas.A * x).squaredNorm() / (Scalar(2) * s2) -
         Scalar(0.5) * Scalar(meas.m()) * (kLog2Pi<Scalar> + std::log(s2));
}

/// A^T (y - A x) / sigma_y^2
template <typename Scalar>
Vector<Scalar> loglik_gradient(const LinearGaussianMeasurement<Scalar>& meas, const VectorRef<Scalar>& x) {
  require_shape(x.size() == meas.d(), "loglik_gradient: dimension mismatch");
  meas.require_noise();
  return meas.A.transpose() * (meas.y - meas.A * x) / (meas.sigma_y * meas.sigma_y);
}

/// Scratch buffers so repeated guided-score evaluations do not allocate.
template <typename Scalar>
struct GuidanceWorkspace {
  Vector<Scalar> mu;
  Vector<Scalar> residual;
  Vector<Scalar> grad;

  void resize(Index d, Index m) {
    mu.resize(d);
    residual.resize(m);
    grad.resize(d);
  }
};

template <typename Scalar>
void require_guidance_support(const ProductPrior<Scalar>& prior, JacobianMode mode) {
  if (mode == JacobianMode::exact && !prior.all_gaussian()) {
    throw UnsupportedError("exact Jacobian mode requires Gaussian experts; select jacobian_mode=identity");
  }
}

/// out = product_score + beta * J^T A^T (y - A mu(x)) / sigma_y^2 with
/// mu(x) = x + sigma^2/sum(a) * product_score and J its (diagonal) Jacobian.
template <typename Scalar>
void guided_score_into(const ProductPrior<Scalar>& prior, const LinearGaussianMeasurement<Scalar>& meas,
                       const VectorRef<Scalar>& x, ScalarArg<Scalar> sigma, ScalarArg<Scalar> beta,
                       JacobianMode mode, GuidanceWorkspace<Scalar>& ws, VectorOut<Scalar> out) {
  product_score_into(prior, x, sigma, out);
  if (beta == Scalar(0)) return;

  const Scalar total = prior.exponent_sum();
  const Scalar s2 = sigma * sigma;
  ws.mu.noalias() = x + (s2 / total) * out;
  ws.residual.noalias() = meas.y - meas.A * ws.mu;
  ws.grad.noalias() = meas.A.transpose() * ws.residual;
  ws.grad /= meas.sigma_y * meas.sigma_y;

  if (mode == JacobianMode::exact) {
    // J = I - (sigma^2 / sum a) * sum_i a_i diag(1 / (s_i^2 + sigma^2))
    const auto& a = prior.exponents().values;
    Vector<Scalar>& shrink = ws.mu;  // mu is no longer needed
    shrink.setZero();
    for (Index i = 0; i < prior.size(); ++i) {
      const auto& g = std::get<GaussianExpert<Scalar>>(prior.experts()[i]);
      shrink.array() += a[i] / (g.var.array() + s2);
    }
    ws.grad.array() *= Scalar(1) - (s2 / total) * shrink.array();
  }
  out += beta * ws.grad;
}

template <typename Scalar>
Vector<Scalar> guided_score(const ProductPrior<Scalar>& prior, const LinearGaussianMeasurement<Scalar>& meas,
                            const VectorRef<Scalar>& x, ScalarArg<Scalar> sigma, ScalarArg<Scalar> beta,
                            JacobianMode mode) {
  require_shape(x.size() == prior.dim() && meas.d() == prior.dim(), "guided_score: dimension mismatch");
  if (!(beta >= 0 && beta <= 1)) throw DomainError("guided_score: beta must lie in [0, 1]");
  if (!(prior.exponent_sum() > 0)) throw DomainError("guided_score requires sum(a) > 0");
  if (beta > 0) meas.require_noise();
  require_guidance_support(prior, mode);
  GuidanceWorkspace<Scalar> ws;
  ws.resize(prior.dim(), meas.m());
  Vector<Scalar> out(prior.dim());
  guided_score_into(prior, meas, x, sigma, beta, mode, ws, out);
  return out;
}

}  // namespace poecal
