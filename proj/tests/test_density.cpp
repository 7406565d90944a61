#include "oracles.hpp"

#include "poecal/density.hpp"
#include "poecal/parallel.hpp"

#include <doctest.h>

using namespace poecal;
using oracle::Vec;

namespace {

MixtureExpert<double> bimodal_1d() {
  Vector<double> w(2);
  w << 0.35, 0.65;
  Matrix<double> mu(2, 1), var(2, 1);
  mu << -1.0, 1.5;
  var << 0.3, 0.6;
  return {w, mu, var};
}

}  // namespace

TEST_SUITE("density") {
  TEST_CASE("sigma grid runs from the start level to the terminal level") {
    DensityConfig cfg;
    cfg.integration_steps = 20;
    const Vec s = cfg.sigma_grid<double>();
    CHECK(s.size() == 21);
    CHECK(s[0] == 0.0);
    CHECK(s[20] == cfg.terminal_sigma);
    for (Index i = 1; i < s.size(); ++i) CHECK(s[i] > s[i - 1]);
  }

  TEST_CASE("probes have the requested distribution and are reproducible") {
    DensityConfig cfg;
    cfg.n_probes = 6;
    const auto p = draw_probes<double>(cfg, 50, 3);
    CHECK(p.rows() == 50);
    CHECK(p.cols() == 6);
    CHECK((p.array().abs() == 1.0).all());
    CHECK((draw_probes<double>(cfg, 50, 3).array() == p.array()).all());
    CHECK((draw_probes<double>(cfg, 50, 4).array() != p.array()).any());
    cfg.probe_kind = ProbeKind::gaussian;
    CHECK((draw_probes<double>(cfg, 50, 3).array().abs() != 1.0).any());
  }

  TEST_CASE("ODE log-density of a centred gaussian is accurate") {
    const Index d = 6;
    Vec var(d);
    var << 0.3, 0.5, 0.8, 1.0, 1.4, 2.0;
    const Expert<double> e = GaussianExpert<double>(Vec::Zero(d), var);
    Vec x(d);
    x << 0.2, -0.5, 1.0, 0.1, -1.3, 0.7;
    // The terminal density ignores the data variance, which costs about
    // sum(var) / (2 terminal_sigma^2) nats.
    DensityConfig cfg;
    const double exact = exact_logdensity(e, x);
    const double bias = var.sum() / (2 * cfg.terminal_sigma * cfg.terminal_sigma);
    CHECK(std::abs(ode_logdensity(e, x, cfg) - exact) < 2 * bias);
    cfg.integration_steps = 800;
    CHECK(std::abs(ode_logdensity(e, x, cfg) - exact) < 2 * bias);

    // Euler is first order: doubling the steps roughly halves the error.
    cfg.integrator = Integrator::euler;
    cfg.integration_steps = 1000;
    const double err1 = std::abs(ode_logdensity(e, x, cfg) - exact);
    cfg.integration_steps = 2000;
    const double err2 = std::abs(ode_logdensity(e, x, cfg) - exact);
    CHECK(err2 < 0.1);
    CHECK(err2 < 0.65 * err1);
  }

  TEST_CASE("ODE log-density of a symmetric one-dimensional mixture matches the closed form") {
    // One dimension makes every probe exact; a centred mixture keeps the
    // terminal approximation small.
    Vector<double> w(2);
    w << 0.5, 0.5;
    Matrix<double> mu(2, 1), var(2, 1);
    mu << -1.0, 1.0;
    var << 0.3, 0.3;
    const Expert<double> e = MixtureExpert<double>(w, mu, var);
    DensityConfig cfg;
    cfg.integration_steps = 400;
    for (double x : {-2.0, -0.5, 0.3, 1.5, 2.8}) {
      const Vec v = Vec::Constant(1, x);
      CHECK(ode_logdensity(e, v, cfg) == doctest::Approx(exact_logdensity(e, v)).epsilon(2e-3));
    }
  }

  TEST_CASE("off-centre mixture only carries the terminal offset") {
    const Expert<double> e = bimodal_1d();
    DensityConfig cfg;
    cfg.integration_steps = 400;
    for (double x : {-2.0, -0.5, 0.3, 1.5, 2.8}) {
      const Vec v = Vec::Constant(1, x);
      CHECK(std::abs(ode_logdensity(e, v, cfg) - exact_logdensity(e, v)) < 0.05);
    }
  }

  TEST_CASE("mixture ODE log-density integrates to one") {
    const Expert<double> e = bimodal_1d();
    DensityConfig cfg;
    cfg.integration_steps = 100;
    const double mass =
        oracle::simpson([&](double x) { return std::exp(ode_logdensity(e, Vec(Vec::Constant(1, x)), cfg)); }, -8, 9,
                        400);
    CHECK(mass == doctest::Approx(1.0).epsilon(5e-3));
  }

  TEST_CASE("exact log-density of an analytic product") {
    Vec m(2), v(2), a(1);
    m << 0.5, -0.5;
    v << 0.2, 0.4;
    a << 2.0;
    const auto p = analytic_product(std::vector<GaussianExpert<double>>{{m, v}}, a);
    const Expert<double> tempered = GaussianExpert<double>(m, v / 2.0);
    const Vec x = Vec::Constant(2, 0.1);
    CHECK(exact_logdensity(p, x) == doctest::Approx(exact_logdensity(tempered, x)).epsilon(1e-13));
  }

  TEST_CASE("batch log-density shape, modes and thread invariance") {
    std::mt19937_64 rng(1);
    const auto ex = oracle::make_two_experts(8, rng, -1, 1, -1, 1, 0.5, 1.5);
    std::vector<Expert<double>> experts = ex.experts;
    Vector<double> w(2);
    w << 0.5, 0.5;
    Matrix<double> mu = Matrix<double>::Zero(2, 8), var = Matrix<double>::Ones(2, 8);
    mu.row(1).setConstant(1.0);
    experts.emplace_back(MixtureExpert<double>(w, mu, var));
    Matrix<double> xs(9, 8);
    std::normal_distribution<double> n(0, 1);
    for (Index i = 0; i < xs.size(); ++i) xs.data()[i] = n(rng);

    DensityConfig cfg;
    cfg.integration_steps = 50;
    set_thread_count(1);
    const auto ode1 = batch_logdensity(experts, xs, cfg, DensityMode::ode);
    set_thread_count(3);
    const auto ode3 = batch_logdensity(experts, xs, cfg, DensityMode::ode);
    set_thread_count(1);
    CHECK(ode1.rows() == 9);
    CHECK(ode1.cols() == 3);
    CHECK((ode1.array() == ode3.array()).all());

    const auto exact = batch_logdensity(experts, xs, cfg, DensityMode::exact);
    for (Index i = 0; i < 9; ++i)
      for (Index k = 0; k < 3; ++k) CHECK(exact(i, k) == exact_logdensity(experts[std::size_t(k)], Vec(xs.row(i))));

    CHECK(batch_logdensity(experts, Matrix<double>(0, 8), cfg, DensityMode::ode).rows() == 0);
  }

  TEST_CASE("density config validation") {
    DensityConfig cfg;
    cfg.integration_steps = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = DensityConfig{};
    cfg.n_probes = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = DensityConfig{};
    cfg.terminal_sigma = -1;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    CHECK(parse_integrator(to_string(Integrator::euler)) == Integrator::euler);
    CHECK(parse_probe_kind(to_string(ProbeKind::gaussian)) == ProbeKind::gaussian);
    CHECK(parse_density_mode(to_string(DensityMode::ode)) == DensityMode::ode);
  }
}
