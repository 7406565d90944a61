#pragma once

#include "poecal/likelihood.hpp"
#include "poecal/parallel.hpp"
#include "poecal/random.hpp"

namespace poecal {

enum class SampleKind { prior, posterior };

inline std::string_view to_string(SampleKind kind) {
  return kind == SampleKind::prior ? "prior" : "posterior";
}

template <typename Scalar>
struct SampleBatch {
  Matrix<Scalar> samples;  // n_chains x d
  SampleKind kind = SampleKind::prior;
  Index annealing_steps = 0;
  Index mixing_steps = 0;
  std::uint64_t seed = 0;
  Vector<Scalar> exponents;

  Index size() const { return samples.rows(); }
  Index dim() const { return samples.cols(); }
};

/// i.i.d. N(0, sigma_max_eff^2 I) rows; chain c draws from its own stream.
template <typename Scalar>
Matrix<Scalar> init_state(const NoiseSchedule<Scalar>& schedule, const Exponents<Scalar>& a,
                          std::uint64_t seed, Index n_chains, Index dim) {
  if (!(a.sum() > 0)) throw DomainError("init_state requires sum(a) > 0");
  if (n_chains < 1 || dim < 1) throw ConfigError("init_state requires n_chains >= 1 and d >= 1");
  Matrix<Scalar> x(n_chains, dim);
  for (Index c = 0; c < n_chains; ++c) {
    RandomStream stream(derive_seed(seed, {tag(StreamPurpose::init), std::uint64_t(c)}));
    for (Index j = 0; j < dim; ++j) x(c, j) = schedule.sigma_max_eff() * Scalar(stream.gaussian());
  }
  return x;
}

/// x + 0.5 (sigma_curr^2 - sigma_next^2) * product_score(x, sigma_curr * sqrt(sum a)),
/// with both sigmas in effective-noise space. `score` is scratch of size d.
template <typename Scalar>
void predictor_step_inplace(VectorOut<Scalar> x, const ProductPrior<Scalar>& prior,
                            ScalarArg<Scalar> sigma_eff_next, ScalarArg<Scalar> sigma_eff_curr,
                            VectorOut<Scalar> score) {
  if (sigma_eff_curr < sigma_eff_next) {
    throw DomainError("predictor_step: noise must not increase along the schedule");
  }
  if (sigma_eff_curr == sigma_eff_next) return;
  const Scalar sigma_model = sigma_eff_curr * std::sqrt(prior.exponent_sum());
  product_score_into(prior, x, sigma_model, score);
  x += (Scalar(0.5) * (sigma_eff_curr * sigma_eff_curr - sigma_eff_next * sigma_eff_next)) * score;
}

template <typename Scalar>
Vector<Scalar> predictor_step(const VectorRef<Scalar>& x, const ProductPrior<Scalar>& prior,
                              ScalarArg<Scalar> sigma_eff_next, ScalarArg<Scalar> sigma_eff_curr) {
  require_shape(x.size() == prior.dim(), "predictor_step: dimension mismatch");
  if (!(sigma_eff_next > 0)) throw DomainError("predictor_step: noise levels must be positive");
  Vector<Scalar> out = x;
  Vector<Scalar> score(x.size());
  predictor_step_inplace(out, prior, sigma_eff_next, sigma_eff_curr, score);
  return out;
}

/// ULA: x + lr * score + sqrt(2 lr) * z.
template <typename Scalar>
void langevin_step_inplace(VectorOut<Scalar> x, const VectorRef<Scalar>& score, ScalarArg<Scalar> lr,
                           RandomStream& stream) {
  const Scalar noise = std::sqrt(Scalar(2) * lr);
  for (Index j = 0; j < x.size(); ++j) x[j] += lr * score[j] + noise * Scalar(stream.gaussian());
}

template <typename Scalar>
Vector<Scalar> langevin_step(const VectorRef<Scalar>& x, const VectorRef<Scalar>& score,
                             ScalarArg<Scalar> lr, RandomStream& stream) {
  require_shape(x.size() == score.size(), "langevin_step: dimension mismatch");
  if (!(lr > 0)) throw DomainError("langevin_step: lr must be > 0");
  Vector<Scalar> out = x;
  langevin_step_inplace<Scalar>(out, score, lr, stream);
  return out;
}

namespace detail {

template <typename Scalar>
SampleBatch<Scalar> run_chains(const ProductPrior<Scalar>& prior,
                               const LinearGaussianMeasurement<Scalar>* meas,
                               const NoiseSchedule<Scalar>& schedule, const RunConfig& cfg) {
  cfg.validate();
  const Index d = prior.dim();
  const Scalar total = prior.exponent_sum();
  if (!(total > 0)) throw DomainError("sampling requires sum(a) > 0");
  if (meas) {
    require_shape(meas->d() == d, "sample_posterior: measurement dimension mismatch");
    meas->require_noise();
    require_guidance_support(prior, cfg.jacobian_mode);
  }

  SampleBatch<Scalar> batch;
  batch.kind = meas ? SampleKind::posterior : SampleKind::prior;
  batch.annealing_steps = schedule.steps();
  batch.mixing_steps = cfg.mixing_steps;
  batch.seed = cfg.master_seed;
  batch.exponents = prior.exponents().values;
  batch.samples = init_state(schedule, prior.exponents(), cfg.master_seed, cfg.n_chains, d);

  const Scalar sqrt_total = std::sqrt(total);
  parallel_for(cfg.n_chains, [&](Index c) {
    RandomStream stream(derive_seed(cfg.master_seed, {tag(StreamPurpose::langevin), std::uint64_t(c)}));
    Vector<Scalar> x = batch.samples.row(c).transpose();
    Vector<Scalar> score(d);
    GuidanceWorkspace<Scalar> ws;
    if (meas) ws.resize(d, meas->m());

    for (Index t = 0; t < schedule.steps(); ++t) {
      const Scalar sigma_eff = schedule[t];
      if (t > 0) predictor_step_inplace<Scalar>(x, prior, sigma_eff, schedule[t - 1], score);
      const Scalar sigma_model = sigma_eff * sqrt_total;
      const Scalar lr = Scalar(cfg.langevin_coef) * sigma_eff * sigma_eff;
      const Scalar beta = cfg.fixed_beta ? Scalar(*cfg.fixed_beta)
                                         : beta_schedule(sigma_eff, Scalar(cfg.beta_coef));
      for (Index k = 0; k < cfg.mixing_steps; ++k) {
        if (meas) {
          guided_score_into(prior, *meas, x, sigma_model, beta, cfg.jacobian_mode, ws, score);
        } else {
          product_score_into(prior, x, sigma_model, score);
        }
        langevin_step_inplace<Scalar>(x, score, lr, stream);
      }
      if (!x.allFinite()) {
        throw NumericalError("sampler diverged at annealing step " + std::to_string(t) + " (chain " +
                             std::to_string(c) + ")");
      }
    }
    batch.samples.row(c) = x.transpose();
  });
  return batch;
}

}  // namespace detail

/// Annealed predictor-corrector sampling of pi_a.
template <typename Scalar>
SampleBatch<Scalar> sample_unconditional(const ProductPrior<Scalar>& prior,
                                         const NoiseSchedule<Scalar>& schedule, const RunConfig& cfg) {
  return detail::run_chains<Scalar>(prior, nullptr, schedule, cfg);
}

/// Same loop along the twisted path pi_a(x_t) p(y | mu(x_t))^beta_t.
template <typename Scalar>
SampleBatch<Scalar> sample_posterior(const ProductPrior<Scalar>& prior,
                                     const LinearGaussianMeasurement<Scalar>& meas,
                                     const NoiseSchedule<Scalar>& schedule, const RunConfig& cfg) {
  return detail::run_chains<Scalar>(prior, &meas, schedule, cfg);
}

}  // namespace poecal
