#pragma once

#include "poecal/evidence.hpp"

#include <chrono>
#include <vector>

namespace poecal {

struct EMOptions {
  Index iterations = 12;
  double eta = 0.5;
  double c = 200.0;
  double eps_a = 0.05;  // floor on sum(a) in the unconstrained and box modes
  EvidenceOptions evidence;

  void validate() const {
    if (iterations < 0) throw ConfigError("em iterations must be >= 0", "em.iterations");
    if (!(eta > 0)) throw ConfigError("em eta must be > 0", "em.eta");
    if (!(c >= 0)) throw ConfigError("em c must be >= 0", "em.c");
    if (!(eps_a > 0)) throw ConfigError("em eps_a must be > 0", "em.eps_a");
    evidence.validate();
  }
};

/// a + eta * g / (||g|| + c), followed by the projection of a's mode.
/// In sum_to_one mode g holds the free components only.
template <typename Scalar>
Exponents<Scalar> gradient_step(const Exponents<Scalar>& a, const Vector<Scalar>& g, ScalarArg<Scalar> eta,
                                ScalarArg<Scalar> c, ScalarArg<Scalar> eps_a = Scalar(0.05)) {
  const Index n = a.size();
  const Index free = a.mode == ConstraintMode::sum_to_one ? n - 1 : n;
  require_shape(g.size() == free, "gradient_step: gradient length does not match the free exponents");
  const Scalar norm = g.norm();
  const Scalar denom = norm + c;
  Vector<Scalar> step = denom > 0 ? Vector<Scalar>(eta * g / denom) : Vector<Scalar>::Zero(free);

  Exponents<Scalar> out = a;
  switch (a.mode) {
    case ConstraintMode::sum_to_one:
      return Exponents<Scalar>::from_free(a.values.head(free) + step);
    case ConstraintMode::box_01:
      out.values = (a.values + step).cwiseMax(Scalar(0)).cwiseMin(Scalar(1));
      break;
    case ConstraintMode::unconstrained:
      out.values = a.values + step;
      break;
  }
  // Keep the prior proper: shift uniformly until sum(a) = eps_a.
  const Scalar total = out.values.sum();
  if (total < eps_a) {
    out.values.array() += (eps_a - total) / Scalar(n);
    if (out.mode == ConstraintMode::box_01) out.values = out.values.cwiseMax(Scalar(0)).cwiseMin(Scalar(1));
  }
  return out;
}

template <typename Scalar>
Exponents<Scalar> gradient_step(const Exponents<Scalar>& a, const GradientEstimate<Scalar>& g,
                                ScalarArg<Scalar> eta, ScalarArg<Scalar> c, ScalarArg<Scalar> eps_a = Scalar(0.05)) {
  return gradient_step(a, g.g, eta, c, eps_a);
}

template <typename Scalar>
struct EMIterate {
  Exponents<Scalar> a;
  std::optional<GradientEstimate<Scalar>> gradient;  // empty on the final iterate
  Vector<Scalar> step;                               // a_{k+1} - a_k
  double wall_seconds = 0.0;
};

template <typename Scalar>
struct EMTrajectory {
  std::vector<EMIterate<Scalar>> iterates;
  SampleBatch<Scalar> final_posterior;
  EMOptions options;
  std::uint64_t seed = 0;

  const Exponents<Scalar>& final_exponents() const { return iterates.back().a; }
};

/// Thrown when an E- or M-step fails; carries the trajectory so far and the
/// exit code of the underlying failure.
template <typename Scalar>
class EMAbortedError : public Error {
 public:
  EMAbortedError(const Error& cause, Index iteration, EMTrajectory<Scalar> partial)
      : Error(cause.kind(), "EM aborted at iteration " + std::to_string(iteration) + ": " + cause.what(),
              cause.exit_code()),
        partial_(std::move(partial)) {}
  const EMTrajectory<Scalar>& partial() const { return partial_; }

 private:
  EMTrajectory<Scalar> partial_;
};

/// Generalized EM: each iteration samples posterior and prior at a_k with
/// fresh seeds (master, em, k), forms the evidence gradient and steps.
template <typename Scalar>
EMTrajectory<Scalar> em_run(const std::vector<Expert<Scalar>>& experts, const Exponents<Scalar>& init,
                            const LinearGaussianMeasurement<Scalar>& meas, const EMOptions& opts) {
  opts.validate();
  init.validate();
  EMTrajectory<Scalar> traj;
  traj.options = opts;
  traj.seed = opts.evidence.sampler.master_seed;

  Exponents<Scalar> a = init;
  for (Index k = 0; k < opts.iterations; ++k) {
    const auto start = std::chrono::steady_clock::now();
    try {
      EvidenceOptions ev = opts.evidence;
      ev.sampler.master_seed = derive_seed(traj.seed, {tag(StreamPurpose::em), std::uint64_t(k)});
      const ProductPrior<Scalar> prior(experts, a);
      auto batches = draw_evidence_batches(prior, meas, ev);
      auto g = a.mode == ConstraintMode::sum_to_one ? constrained_gradient_from_batches(batches)
                                                    : gradient_from_batches(batches);
      Exponents<Scalar> next = gradient_step(a, g, Scalar(opts.eta), Scalar(opts.c), Scalar(opts.eps_a));
      EMIterate<Scalar> it{a, std::move(g), next.values - a.values, 0.0};
      it.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      traj.iterates.push_back(std::move(it));
      traj.final_posterior = std::move(batches.posterior);
      a = std::move(next);
    } catch (const Error& e) {
      traj.iterates.push_back({a, std::nullopt, Vector<Scalar>::Zero(a.size()), 0.0});
      throw EMAbortedError<Scalar>(e, k, std::move(traj));
    }
  }
  traj.iterates.push_back({a, std::nullopt, Vector<Scalar>::Zero(a.size()), 0.0});
  return traj;
}

}  // namespace poecal
