#include "oracles.hpp"

#include "poecal/em.hpp"

#include <doctest.h>

using namespace poecal;
using oracle::Vec;

namespace {

Vec vec2(double a, double b) {
  Vec v(2);
  v << a, b;
  return v;
}

struct Toy {
  oracle::TwoExperts ex;
  LinearGaussianMeasurement<double> meas;
};

Toy toy(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Toy t{oracle::make_two_experts(4, rng, 0.8, 1.2, -0.2, 0.2, 0.2, 0.5), {}};
  t.meas = simulate_measurement<double>(Vec::Constant(4, 0.8), oracle::gaussian_matrix(3, 4, rng), 0.2, seed);
  return t;
}

EMOptions quick_options() {
  EMOptions o;
  o.iterations = 3;
  o.evidence.n_posterior = o.evidence.n_prior = 8;
  o.evidence.sampler.annealing_steps = 8;
  o.evidence.sampler.mixing_steps = 3;
  o.evidence.sampler.master_seed = 21;
  return o;
}

}  // namespace

TEST_SUITE("em") {
  TEST_CASE("normalized additive step") {
    const Exponents<double> a(vec2(0.5, 0.5));
    const auto next = gradient_step(a, Vec(vec2(3, 4)), 0.5, 1.0);
    CHECK(next.values[0] == doctest::Approx(0.5 + 0.25));
    CHECK(next.values[1] == doctest::Approx(0.5 + 1.0 / 3));
    CHECK((gradient_step(a, Vec(Vec::Zero(2)), 0.5, 200.0).values - a.values).norm() == 0.0);
    const auto big = gradient_step(a, Vec(vec2(3e9, 4e9)), 0.5, 1.0);
    CHECK((big.values - a.values).norm() == doctest::Approx(0.5).epsilon(1e-8));
  }

  TEST_CASE("projection keeps the product proper") {
    const Exponents<double> a(vec2(0.05, 0.05));
    const auto next = gradient_step(a, Vec(vec2(-3, -4)), 0.5, 1.0, 0.05);
    CHECK(next.values.sum() == doctest::Approx(0.05));
    // Uniform shift preserves the direction of the raw step difference.
    CHECK(next.values[0] - next.values[1] == doctest::Approx(1.0 / 3 - 0.25));
  }

  TEST_CASE("box projection clamps into the unit square") {
    const Exponents<double> a(vec2(0.9, 0.1), ConstraintMode::box_01);
    const auto next = gradient_step(a, Vec(vec2(100, -100)), 0.5, 0.0);
    CHECK(next.values[0] == 1.0);
    CHECK(next.values[1] == 0.0);
    CHECK_NOTHROW(next.validate());
  }

  TEST_CASE("sum-to-one step moves free coordinates and fixes the last") {
    Vec a(3);
    a << 0.2, 0.3, 0.5;
    const Exponents<double> e(a, ConstraintMode::sum_to_one);
    const auto next = gradient_step(e, Vec(vec2(3, 4)), 0.5, 1.0);
    CHECK(next.values[0] == doctest::Approx(0.45));
    CHECK(next.values[1] == doctest::Approx(0.3 + 1.0 / 3));
    CHECK(next.values.sum() == doctest::Approx(1.0).epsilon(1e-15));
    CHECK_THROWS_AS(gradient_step(e, Vec(Vec::Zero(3)), 0.5, 1.0), ShapeError);
  }

  TEST_CASE("trajectory layout and determinism") {
    const auto t = toy(1);
    const auto opts = quick_options();
    const auto traj = em_run(t.ex.experts, Exponents<double>(vec2(1, 0)), t.meas, opts);
    CHECK(traj.iterates.size() == 4);
    for (std::size_t k = 0; k < 3; ++k) {
      CHECK(traj.iterates[k].gradient.has_value());
      CHECK((traj.iterates[k + 1].a.values - traj.iterates[k].a.values - traj.iterates[k].step).norm() < 1e-15);
    }
    CHECK_FALSE(traj.iterates.back().gradient.has_value());
    CHECK(traj.final_posterior.size() == 8);
    const auto again = em_run(t.ex.experts, Exponents<double>(vec2(1, 0)), t.meas, opts);
    CHECK((again.final_exponents().values.array() == traj.final_exponents().values.array()).all());
  }

  TEST_CASE("single expert in sum-to-one mode stays at one") {
    const auto t = toy(2);
    const std::vector<Expert<double>> one{t.ex.experts[0]};
    const auto traj = em_run(one, Exponents<double>(Vec::Ones(1), ConstraintMode::sum_to_one), t.meas, quick_options());
    for (const auto& it : traj.iterates) CHECK(it.a.values[0] == 1.0);
  }

  TEST_CASE("EM ascends the analytic evidence") {
    const auto t = toy(3);
    auto opts = quick_options();
    opts.iterations = 5;
    opts.c = 0.0;
    opts.eta = 0.2;
    opts.evidence.n_posterior = opts.evidence.n_prior = 2000;
    opts.evidence.sampler.annealing_steps = 100;
    opts.evidence.sampler.mixing_steps = 20;
    const auto traj = em_run(t.ex.experts, Exponents<double>(vec2(0.3, 0.3)), t.meas, opts);
    const double first = analytic_evidence(t.ex.gaussians, traj.iterates.front().a.values, t.meas);
    const double last = analytic_evidence(t.ex.gaussians, traj.iterates.back().a.values, t.meas);
    CHECK(last > first);
  }

  TEST_CASE("failures abort with the partial trajectory") {
    const auto t = toy(4);
    auto opts = quick_options();
    opts.evidence.sampler.langevin_coef = 1e20;
    try {
      em_run(t.ex.experts, Exponents<double>(vec2(1, 1)), t.meas, opts);
      FAIL("expected abort");
    } catch (const EMAbortedError<double>& e) {
      CHECK(e.exit_code() == 3);
      CHECK(e.partial().iterates.size() == 1);
    }
  }

  TEST_CASE("invalid options are configuration errors") {
    const auto t = toy(5);
    auto opts = quick_options();
    opts.eta = 0;
    CHECK_THROWS_AS(em_run(t.ex.experts, Exponents<double>(vec2(1, 1)), t.meas, opts), ConfigError);
    CHECK_THROWS_AS(em_run(t.ex.experts, Exponents<double>(vec2(0, 0)), t.meas, quick_options()), DomainError);
  }
}
