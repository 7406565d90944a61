#include "poecal/core.hpp"
#include "poecal/parallel.hpp"
#include "poecal/random.hpp"

#include <doctest.h>

#include <atomic>
#include <cmath>
#include <set>

using namespace poecal;

TEST_SUITE("core") {
  TEST_CASE("schedule endpoints are exact and levels strictly decrease") {
    const auto s = build_schedule<double>(50.0, 0.01, 50, 7.0);
    CHECK(s.steps() == 50);
    CHECK(s[0] == 50.0);
    CHECK(s[49] == 0.01);
    for (Index i = 1; i < s.steps(); ++i) CHECK(s[i] < s[i - 1]);
  }

  TEST_CASE("schedule interior matches the rho interpolation") {
    const double hi = 80, lo = 0.002, rho = 7;
    const Index n = 18;
    const auto s = build_schedule<double>(hi, lo, n, rho);
    for (Index i = 1; i + 1 < n; ++i) {
      const double t = double(i) / double(n - 1);
      const double expected =
          std::pow(std::pow(hi, 1 / rho) + t * (std::pow(lo, 1 / rho) - std::pow(hi, 1 / rho)), rho);
      CHECK(s[i] == doctest::Approx(expected).epsilon(1e-12));
    }
  }

  TEST_CASE("schedule works in single precision") {
    const auto s = build_schedule<float>(10.0f, 0.1f, 5);
    CHECK(s[0] == 10.0f);
    CHECK(s[4] == 0.1f);
  }

  TEST_CASE("schedule rejects invalid arguments") {
    CHECK_THROWS_AS(build_schedule<double>(1.0, 2.0, 10), ConfigError);
    CHECK_THROWS_AS(build_schedule<double>(1.0, 0.0, 10), ConfigError);
    CHECK_THROWS_AS(build_schedule<double>(1.0, 0.1, 1), ConfigError);
    CHECK_THROWS_AS(build_schedule<double>(1.0, 0.1, 10, 0.5), ConfigError);
    Vector<double> flat(3);
    flat << 1.0, 1.0, 0.5;
    CHECK_THROWS_AS(NoiseSchedule<double>(flat, 7.0), ConfigError);
  }

  TEST_CASE("beta schedule saturates at one") {
    CHECK(beta_schedule(50.0, 0.005) == doctest::Approx(0.005 / 2500));
    CHECK(beta_schedule(0.01, 0.005) == 1.0);
    CHECK(beta_schedule(std::sqrt(0.005), 0.005) == doctest::Approx(1.0));
    CHECK_THROWS_AS(beta_schedule(0.0, 0.005), DomainError);
  }

  TEST_CASE("exponent validation per mode") {
    Vector<double> a(2);
    a << 0.4, 0.6;
    CHECK_NOTHROW(Exponents<double>(a, ConstraintMode::sum_to_one).validate());
    CHECK_NOTHROW(Exponents<double>(a, ConstraintMode::box_01).validate());
    a << 0.4, 0.7;
    CHECK_THROWS_AS(Exponents<double>(a, ConstraintMode::sum_to_one).validate(), DomainError);
    a << 1.2, 0.1;
    CHECK_THROWS_AS(Exponents<double>(a, ConstraintMode::box_01).validate(), DomainError);
    a << 0.0, 0.0;
    CHECK_THROWS_AS(Exponents<double>(a).validate(), DomainError);
    a << -1.0, 0.5;
    CHECK_THROWS_AS(Exponents<double>(a).validate(), DomainError);
    a << std::nan(""), 1.0;
    CHECK_THROWS_AS(Exponents<double>(a).validate(), DomainError);
    CHECK_THROWS_AS(Exponents<double>(Vector<double>()).validate(), DomainError);
  }

  TEST_CASE("sum-to-one exponents from free coordinates") {
    Vector<double> free(2);
    free << 0.2, 0.3;
    const auto a = Exponents<double>::from_free(free);
    CHECK(a.size() == 3);
    CHECK(a[2] == doctest::Approx(0.5));
    CHECK(a.mode == ConstraintMode::sum_to_one);
    CHECK_NOTHROW(a.validate());
  }

  TEST_CASE("enum text round trips") {
    for (auto m : {ConstraintMode::unconstrained, ConstraintMode::box_01, ConstraintMode::sum_to_one}) {
      CHECK(parse_constraint_mode(to_string(m)) == m);
    }
    for (auto m : {JacobianMode::exact, JacobianMode::identity}) CHECK(parse_jacobian_mode(to_string(m)) == m);
    CHECK_THROWS_AS(parse_constraint_mode("sideways"), ConfigError);
  }

  TEST_CASE("run config validation") {
    RunConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    cfg.mixing_steps = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = RunConfig{};
    cfg.fixed_beta = 1.5;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
  }

  TEST_CASE("error exit codes") {
    CHECK(ConfigError("x").exit_code() == 2);
    CHECK(DomainError("x").exit_code() == 2);
    CHECK(ShapeError("x").exit_code() == 2);
    CHECK(UnsupportedError("x").exit_code() == 2);
    CHECK(NumericalError("x").exit_code() == 3);
    CHECK(ReconstructionError("x").exit_code() == 3);
  }

  TEST_CASE("derived seeds are deterministic and distinct") {
    CHECK(derive_seed(1, {2, 3}) == derive_seed(1, {2, 3}));
    std::set<std::uint64_t> seen;
    for (std::uint64_t base : {0u, 1u, 2u})
      for (std::uint64_t t = 0; t < 100; ++t) seen.insert(derive_seed(base, {tag(StreamPurpose::langevin), t}));
    CHECK(seen.size() == 300);
    CHECK(derive_seed(1, {2, 3}) != derive_seed(1, {3, 2}));
  }

  TEST_CASE("random stream moments") {
    RandomStream s(42);
    double sum = 0, sq = 0, rad = 0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
      const double g = s.gaussian();
      sum += g;
      sq += g * g;
      const double r = s.rademacher();
      CHECK((r == 1.0 || r == -1.0));
      rad += r;
    }
    CHECK(std::abs(sum / n) < 0.01);
    CHECK(sq / n == doctest::Approx(1.0).epsilon(0.01));
    CHECK(std::abs(rad / n) < 0.01);
  }

  TEST_CASE("parallel_for visits every index once for any thread count") {
    for (unsigned threads : {1u, 2u, 7u}) {
      set_thread_count(threads);
      std::vector<std::atomic<int>> hits(1000);
      parallel_for(1000, [&](Index i) { hits[std::size_t(i)]++; });
      for (const auto& h : hits) CHECK(h.load() == 1);
    }
    set_thread_count(1);
  }

  TEST_CASE("parallel_for rethrows the lowest failing index") {
    set_thread_count(4);
    try {
      parallel_for(100, [](Index i) {
        if (i == 37 || i == 80) throw NumericalError("fail " + std::to_string(i));
      });
      FAIL("expected an exception");
    } catch (const NumericalError& e) {
      CHECK(std::string(e.what()).find("37") != std::string::npos);
    }
    set_thread_count(1);
  }
}
