#pragma once

#include "poecal/core.hpp"

#include <numbers>
#include <type_traits>
#include <variant>
#include <vector>

namespace poecal {

// Arguments that should not take part in template deduction (so a Vector,
// a matrix row or a plain double literal can all be passed).
template <typename Scalar>
using VectorRef = Eigen::Ref<const Vector<std::type_identity_t<Scalar>>>;
template <typename Scalar>
using VectorOut = Eigen::Ref<Vector<std::type_identity_t<Scalar>>>;
template <typename Scalar>
using ScalarArg = std::type_identity_t<Scalar>;

template <typename Scalar>
inline constexpr Scalar kLog2Pi = Scalar(1.8378770664093454835606594728112);

/// Diagonal Gaussian N(mean, diag(var)).
template <typename Scalar>
struct GaussianExpert {
  Vector<Scalar> mean;
  Vector<Scalar> var;

  GaussianExpert() = default;
  GaussianExpert(Vector<Scalar> mu, Vector<Scalar> variances)
      : mean(std::move(mu)), var(std::move(variances)) {
    validate();
  }

  Index dim() const { return mean.size(); }

  void validate() const {
    require_shape(mean.size() == var.size(), "gaussian expert: mean/var length mismatch");
    if (mean.size() == 0) throw ShapeError("gaussian expert: empty dimension");
    if (!mean.allFinite() || !var.allFinite() || !(var.array() > Scalar(0)).all()) {
      throw DomainError("gaussian expert: variances must be finite and positive");
    }
  }
};

/// Mixture of diagonal Gaussians; row k of means/vars is component k.
template <typename Scalar>
struct MixtureExpert {
  Vector<Scalar> weights;
  Matrix<Scalar> means;
  Matrix<Scalar> vars;

  MixtureExpert() = default;
  MixtureExpert(Vector<Scalar> w, Matrix<Scalar> mu, Matrix<Scalar> v)
      : weights(std::move(w)), means(std::move(mu)), vars(std::move(v)) {
    validate();
  }

  Index dim() const { return means.cols(); }
  Index components() const { return weights.size(); }

  void validate() const {
    require_shape(means.rows() == weights.size() && vars.rows() == weights.size(),
                  "mixture expert: one row of means/vars per weight");
    require_shape(means.cols() == vars.cols(), "mixture expert: means/vars width mismatch");
    if (weights.size() == 0 || means.cols() == 0) throw ShapeError("mixture expert: empty");
    if ((weights.array() < Scalar(0)).any() ||
        std::abs(weights.sum() - Scalar(1)) > Scalar(1e-9)) {
      throw DomainError("mixture expert: weights must be nonnegative and sum to 1");
    }
    if (!means.allFinite() || !vars.allFinite() || !(vars.array() > Scalar(0)).all()) {
      throw DomainError("mixture expert: variances must be finite and positive");
    }
  }
};

template <typename Scalar>
using Expert = std::variant<GaussianExpert<Scalar>, MixtureExpert<Scalar>>;

template <typename Scalar>
Index expert_dim(const Expert<Scalar>& expert) {
  return std::visit([](const auto& e) { return e.dim(); }, expert);
}

template <typename Scalar>
bool is_gaussian(const Expert<Scalar>& expert) {
  return std::holds_alternative<GaussianExpert<Scalar>>(expert);
}

// ---------------------------------------------------------------------------
// Noisy-marginal log-density and score. At noise sigma the expert is
// convolved with N(0, sigma^2 I): Gaussian -> N(mu, s^2 + sigma^2).

template <typename Scalar>
Scalar expert_logdensity(const GaussianExpert<Scalar>& e, const VectorRef<Scalar>& x,
                         ScalarArg<Scalar> sigma) {
  require_shape(x.size() == e.dim(), "expert_logdensity: dimension mismatch");
  const auto total = (e.var.array() + sigma * sigma);
  return Scalar(-0.5) * ((x - e.mean).array().square() / total).sum() -
         Scalar(0.5) * (total.log().sum() + Scalar(e.dim()) * kLog2Pi<Scalar>);
}

namespace detail {

/// Per-component log weights log w_k + log N(x; mu_k, v_k + sigma^2).
template <typename Scalar>
Vector<Scalar> mixture_log_terms(const MixtureExpert<Scalar>& e, const VectorRef<Scalar>& x,
                                 Scalar sigma) {
  const Index k_count = e.components();
  Vector<Scalar> terms(k_count);
  for (Index k = 0; k < k_count; ++k) {
    const auto total = e.vars.row(k).transpose().array() + sigma * sigma;
    terms[k] = std::log(e.weights[k]) -
               Scalar(0.5) * ((x - e.means.row(k).transpose()).array().square() / total).sum() -
               Scalar(0.5) * (total.log().sum() + Scalar(e.dim()) * kLog2Pi<Scalar>);
  }
  return terms;
}

template <typename Scalar>
Scalar log_sum_exp(const Vector<Scalar>& v) {
  const Scalar top = v.maxCoeff();
  if (!std::isfinite(top)) return top;
  return top + std::log((v.array() - top).exp().sum());
}

/// Softmax responsibilities, stabilised by the max term.
template <typename Scalar>
Vector<Scalar> responsibilities(const Vector<Scalar>& log_terms) {
  Vector<Scalar> r = (log_terms.array() - log_terms.maxCoeff()).exp();
  return r / r.sum();
}

}  // namespace detail

template <typename Scalar>
Scalar expert_logdensity(const MixtureExpert<Scalar>& e, const VectorRef<Scalar>& x,
                         ScalarArg<Scalar> sigma) {
  require_shape(x.size() == e.dim(), "expert_logdensity: dimension mismatch");
  return detail::log_sum_exp(detail::mixture_log_terms(e, x, sigma));
}

template <typename Scalar>
Scalar expert_logdensity(const Expert<Scalar>& expert, const VectorRef<Scalar>& x,
                         ScalarArg<Scalar> sigma) {
  return std::visit([&](const auto& e) { return expert_logdensity(e, x, sigma); }, expert);
}

/// out += weight * score(x, sigma)
template <typename Scalar>
void add_score(const GaussianExpert<Scalar>& e, const VectorRef<Scalar>& x, ScalarArg<Scalar> sigma,
               ScalarArg<Scalar> weight, VectorOut<Scalar> out) {
  require_shape(x.size() == e.dim() && out.size() == e.dim(), "score: dimension mismatch");
  out.array() += weight * (-(x - e.mean).array() / (e.var.array() + sigma * sigma));
}

template <typename Scalar>
void add_score(const MixtureExpert<Scalar>& e, const VectorRef<Scalar>& x, ScalarArg<Scalar> sigma,
               ScalarArg<Scalar> weight, VectorOut<Scalar> out) {
  require_shape(x.size() == e.dim() && out.size() == e.dim(), "score: dimension mismatch");
  const Vector<Scalar> r = detail::responsibilities(detail::mixture_log_terms(e, x, sigma));
  for (Index k = 0; k < e.components(); ++k) {
    out.array() += (weight * r[k]) * (-(x - e.means.row(k).transpose()).array() /
                                      (e.vars.row(k).transpose().array() + sigma * sigma));
  }
}

template <typename Scalar>
void add_score(const Expert<Scalar>& expert, const VectorRef<Scalar>& x, ScalarArg<Scalar> sigma,
               ScalarArg<Scalar> weight, VectorOut<Scalar> out) {
  std::visit([&](const auto& e) { add_score(e, x, sigma, weight, out); }, expert);
}

template <typename Scalar>
Vector<Scalar> expert_score(const Expert<Scalar>& expert, const VectorRef<Scalar>& x,
                            ScalarArg<Scalar> sigma) {
  if (sigma < 0) throw DomainError("expert_score: sigma must be >= 0");
  require_shape(x.size() == expert_dim(expert), "expert_score: dimension mismatch");
  Vector<Scalar> out = Vector<Scalar>::Zero(x.size());
  add_score(expert, x, sigma, Scalar(1), out);
  return out;
}

template <typename Scalar>
Vector<Scalar> expert_score(const GaussianExpert<Scalar>& e, const VectorRef<Scalar>& x,
                            ScalarArg<Scalar> sigma) {
  return expert_score(Expert<Scalar>(e), x, sigma);
}

/// Jacobian-vector product of the score, (d score / d x) v.
template <typename Scalar>
Vector<Scalar> expert_score_jvp(const GaussianExpert<Scalar>& e, const VectorRef<Scalar>& x,
                                ScalarArg<Scalar> sigma, const VectorRef<Scalar>& v) {
  require_shape(x.size() == e.dim() && v.size() == e.dim(), "score jvp: dimension mismatch");
  return (-v.array() / (e.var.array() + sigma * sigma)).matrix();
}

template <typename Scalar>
Vector<Scalar> expert_score_jvp(const MixtureExpert<Scalar>& e, const VectorRef<Scalar>& x,
                                ScalarArg<Scalar> sigma, const VectorRef<Scalar>& v) {
  require_shape(x.size() == e.dim() && v.size() == e.dim(), "score jvp: dimension mismatch");
  // J = sum_k r_k (-D_k) + sum_k r_k s_k s_k^T - sbar sbar^T
  const Vector<Scalar> r = detail::responsibilities(detail::mixture_log_terms(e, x, sigma));
  Vector<Scalar> out = Vector<Scalar>::Zero(e.dim());
  Vector<Scalar> sbar = Vector<Scalar>::Zero(e.dim());
  for (Index k = 0; k < e.components(); ++k) {
    const auto total = e.vars.row(k).transpose().array() + sigma * sigma;
    const Vector<Scalar> s_k = (-(x - e.means.row(k).transpose()).array() / total).matrix();
    out.array() -= r[k] * v.array() / total;
    out += (r[k] * s_k.dot(v)) * s_k;
    sbar += r[k] * s_k;
  }
  out -= sbar.dot(v) * sbar;
  return out;
}

template <typename Scalar>
Vector<Scalar> expert_score_jvp(const Expert<Scalar>& expert, const VectorRef<Scalar>& x,
                                ScalarArg<Scalar> sigma, const VectorRef<Scalar>& v) {
  return std::visit([&](const auto& e) { return expert_score_jvp(e, x, sigma, v); }, expert);
}

// ---------------------------------------------------------------------------
// Product-of-experts prior pi_a(x) ∝ prod_i p_i(x)^{a_i}.

template <typename Scalar>
class ProductPrior {
 public:
  ProductPrior(std::vector<Expert<Scalar>> experts, Exponents<Scalar> exponents)
      : experts_(std::move(experts)), exponents_(std::move(exponents)) {
    if (experts_.empty()) throw ShapeError("product prior needs at least one expert");
    require_shape(exponents_.size() == static_cast<Index>(experts_.size()),
                  "product prior: one exponent per expert");
    const Index d = expert_dim(experts_.front());
    for (const auto& e : experts_) {
      require_shape(expert_dim(e) == d, "product prior: experts disagree on dimension");
    }
    exponents_.validate();
  }

  const std::vector<Expert<Scalar>>& experts() const { return experts_; }
  const Exponents<Scalar>& exponents() const { return exponents_; }
  Index dim() const { return expert_dim(experts_.front()); }
  Index size() const { return static_cast<Index>(experts_.size()); }
  Scalar exponent_sum() const { return exponents_.sum(); }

  ProductPrior with_exponents(Exponents<Scalar> a) const { return ProductPrior(experts_, std::move(a)); }

  bool all_gaussian() const {
    for (const auto& e : experts_)
      if (!is_gaussian(e)) return false;
    return true;
  }

  std::vector<GaussianExpert<Scalar>> gaussians() const {
    std::vector<GaussianExpert<Scalar>> out;
    out.reserve(experts_.size());
    for (const auto& e : experts_) {
      if (!is_gaussian(e)) throw UnsupportedError("operation requires all-Gaussian experts");
      out.push_back(std::get<GaussianExpert<Scalar>>(e));
    }
    return out;
  }

 private:
  std::vector<Expert<Scalar>> experts_;
  Exponents<Scalar> exponents_;
};

template <typename Scalar>
void product_score_into(const ProductPrior<Scalar>& prior, const VectorRef<Scalar>& x,
                        ScalarArg<Scalar> sigma, VectorOut<Scalar> out) {
  out.setZero();
  const auto& a = prior.exponents().values;
  for (Index i = 0; i < prior.size(); ++i) add_score(prior.experts()[i], x, sigma, a[i], out);
}

/// Score of the product: sum_i a_i * score_i(x, sigma).
template <typename Scalar>
Vector<Scalar> product_score(const ProductPrior<Scalar>& prior, const VectorRef<Scalar>& x,
                             ScalarArg<Scalar> sigma) {
  if (sigma < 0) throw DomainError("product_score: sigma must be >= 0");
  require_shape(x.size() == prior.dim(), "product_score: dimension mismatch");
  Vector<Scalar> out(x.size());
  product_score_into(prior, x, sigma, out);
  return out;
}

template <typename Scalar>
Scalar effective_noise(Scalar sigma, const Exponents<Scalar>& a) {
  const Scalar total = a.sum();
  if (!(total > 0)) throw DomainError("effective noise requires sum(a) > 0");
  return sigma / std::sqrt(total);
}

/// Tweedie mean of the product at its effective noise:
/// x + sigma^2 / sum(a) * product_score(x, sigma).
template <typename Scalar>
Vector<Scalar> surrogate_denoiser_mean(const ProductPrior<Scalar>& prior, const VectorRef<Scalar>& x,
                                       ScalarArg<Scalar> sigma) {
  const Scalar total = prior.exponent_sum();
  if (!(total > 0)) throw DomainError("surrogate denoiser requires sum(a) > 0");
  return x + (sigma * sigma / total) * product_score(prior, x, sigma);
}

// ---------------------------------------------------------------------------
// Closed-form product of Gaussian experts.

template <typename Scalar>
struct GaussianProduct {
  GaussianExpert<Scalar> gaussian;
  Scalar log_normalizer;  // log ∫ prod_i N(x; mu_i, s_i^2)^{a_i} dx
};

template <typename Scalar>
GaussianProduct<Scalar> analytic_product(const std::vector<GaussianExpert<Scalar>>& gaussians,
                                         const Vector<Scalar>& a) {
  require_shape(!gaussians.empty() && a.size() == static_cast<Index>(gaussians.size()),
                "analytic_product: one exponent per expert");
  const Index d = gaussians.front().dim();
  Vector<Scalar> precision = Vector<Scalar>::Zero(d);
  Vector<Scalar> weighted_mean = Vector<Scalar>::Zero(d);
  for (std::size_t i = 0; i < gaussians.size(); ++i) {
    const auto& g = gaussians[i];
    require_shape(g.dim() == d, "analytic_product: dimension mismatch");
    precision.array() += a[Index(i)] / g.var.array();
    weighted_mean.array() += a[Index(i)] * g.mean.array() / g.var.array();
  }
  if (!(precision.array() > Scalar(0)).all()) {
    throw DomainError("analytic_product: resulting precision is not positive");
  }
  Vector<Scalar> mean = (weighted_mean.array() / precision.array()).matrix();

  // Per dimension: -1/2 sum a_i log(2 pi s_i^2) - 1/2 sum a_i (mu_i - m)^2 / s_i^2
  //                + 1/2 log(2 pi / precision)
  Scalar log_z = Scalar(0.5) * (Scalar(d) * kLog2Pi<Scalar> - precision.array().log().sum());
  for (std::size_t i = 0; i < gaussians.size(); ++i) {
    const auto& g = gaussians[i];
    log_z -= Scalar(0.5) * a[Index(i)] *
             ((g.var.array().log() + kLog2Pi<Scalar>).sum() +
              ((g.mean - mean).array().square() / g.var.array()).sum());
  }
  Vector<Scalar> var = precision.cwiseInverse();
  return {GaussianExpert<Scalar>(std::move(mean), std::move(var)), log_z};
}

}  // namespace poecal
