#pragma once

#include "poecal/experts.hpp"
#include "poecal/parallel.hpp"
#include "poecal/random.hpp"

#include <vector>

namespace poecal {

enum class ProbeKind { rademacher, gaussian };
enum class Integrator { midpoint, euler };
enum class DensityMode { exact, ode };

std::string_view to_string(ProbeKind kind);
std::string_view to_string(Integrator integrator);
std::string_view to_string(DensityMode mode);
ProbeKind parse_probe_kind(std::string_view text);
Integrator parse_integrator(std::string_view text);
DensityMode parse_density_mode(std::string_view text);

struct DensityConfig {
  Index integration_steps = 200;
  Index n_probes = 8;
  ProbeKind probe_kind = ProbeKind::rademacher;
  std::uint64_t probe_seed = 0;
  double terminal_sigma = 50.0;
  double start_sigma = 0.0;
  double rho = 7.0;
  Integrator integrator = Integrator::midpoint;

  void validate() const {
    if (integration_steps < 2) throw ConfigError("integration_steps must be >= 2", "density.integration_steps");
    if (n_probes < 1) throw ConfigError("n_probes must be >= 1", "density.n_probes");
    if (!(terminal_sigma > start_sigma) || !(start_sigma >= 0)) {
      throw ConfigError("density requires terminal_sigma > start_sigma >= 0", "density.terminal_sigma");
    }
    if (!(rho >= 1)) throw ConfigError("density rho must be >= 1", "density.rho");
  }

  /// Increasing integration nodes start_sigma = s_0 < ... < s_N = terminal_sigma.
  template <typename Scalar>
  Vector<Scalar> sigma_grid() const {
    validate();
    Vector<Scalar> s(integration_steps + 1);
    const double lo = std::pow(start_sigma, 1.0 / rho);
    const double hi = std::pow(terminal_sigma, 1.0 / rho);
    for (Index k = 0; k <= integration_steps; ++k) {
      const double u = double(k) / double(integration_steps);
      s[k] = Scalar(std::pow(lo + u * (hi - lo), rho));
    }
    s[0] = Scalar(start_sigma);
    s[integration_steps] = Scalar(terminal_sigma);
    return s;
  }
};

/// Probe vectors for one sample, keyed by (probe_seed, sample index) so every
/// expert evaluated at that sample sees the same probes.
template <typename Scalar>
Matrix<Scalar> draw_probes(const DensityConfig& cfg, Index dim, Index sample_index) {
  RandomStream stream(derive_seed(cfg.probe_seed, {tag(StreamPurpose::probe), std::uint64_t(sample_index)}));
  Matrix<Scalar> probes(dim, cfg.n_probes);
  for (Index p = 0; p < cfg.n_probes; ++p) {
    for (Index j = 0; j < dim; ++j) {
      probes(j, p) = Scalar(cfg.probe_kind == ProbeKind::rademacher ? stream.rademacher() : stream.gaussian());
    }
  }
  return probes;
}

// ---------------------------------------------------------------------------
// Exact densities (sigma = 0).

template <typename Scalar>
Scalar exact_logdensity(const Expert<Scalar>& expert, const VectorRef<Scalar>& x) {
  return expert_logdensity(expert, x, Scalar(0));
}

/// Normalized product density: sum_i a_i log p_i(x) - log Z(a).
template <typename Scalar>
Scalar exact_logdensity(const GaussianProduct<Scalar>& product, const VectorRef<Scalar>& x) {
  return expert_logdensity(product.gaussian, x, Scalar(0));
}

// ---------------------------------------------------------------------------
// PF-ODE log-density. With dx/dsigma = -sigma * score(x, sigma):
//   log p_0(x_0) = log N(x_T; 0, sigma_T^2 I) + ∫ sigma * tr(d score/dx) dsigma  (sign: tr < 0)
// and the trace comes from Hutchinson probes.

namespace detail {

/// Hutchinson estimate of tr(d score / dx) averaged over probe columns.
template <typename Scalar>
Scalar score_trace(const GaussianExpert<Scalar>& e, const VectorRef<Scalar>&, Scalar sigma,
                   const Matrix<Scalar>&, const Vector<Scalar>& probe_sq_mean) {
  // Diagonal Jacobian: eps^T J eps = sum_j eps_j^2 J_jj.
  return -(probe_sq_mean.array() / (e.var.array() + sigma * sigma)).sum();
}

template <typename Scalar>
Scalar score_trace(const MixtureExpert<Scalar>& e, const VectorRef<Scalar>& x, Scalar sigma,
                   const Matrix<Scalar>& probes, const Vector<Scalar>&) {
  Scalar acc = 0;
  for (Index p = 0; p < probes.cols(); ++p) {
    acc += probes.col(p).dot(expert_score_jvp(e, x, sigma, probes.col(p)));
  }
  return acc / Scalar(probes.cols());
}

template <typename Scalar>
Scalar ode_logdensity_with_probes(const Expert<Scalar>& expert, const VectorRef<Scalar>& x0,
                                  const DensityConfig& cfg, const Vector<Scalar>& sigmas,
                                  const Matrix<Scalar>& probes) {
  const Vector<Scalar> probe_sq_mean = probes.array().square().rowwise().mean();
  const Index d = x0.size();
  Vector<Scalar> x = x0;
  Vector<Scalar> x_mid(d);
  Vector<Scalar> drift(d);

  auto drift_at = [&](const Vector<Scalar>& at, Scalar sigma, Vector<Scalar>& out) {
    out.setZero();
    add_score(expert, at, sigma, -sigma, out);
  };
  auto divergence_at = [&](const Vector<Scalar>& at, Scalar sigma) {
    return std::visit([&](const auto& e) { return sigma * score_trace(e, at, sigma, probes, probe_sq_mean); },
                      expert);
  };

  Scalar integral = 0;
  for (Index k = 0; k + 1 < sigmas.size(); ++k) {
    const Scalar s0 = sigmas[k];
    const Scalar h = sigmas[k + 1] - s0;
    if (cfg.integrator == Integrator::euler) {
      integral += h * divergence_at(x, s0);
      drift_at(x, s0, drift);
      x += h * drift;
    } else {
      const Scalar sm = s0 + Scalar(0.5) * h;
      drift_at(x, s0, drift);
      x_mid = x + (Scalar(0.5) * h) * drift;
      integral += h * divergence_at(x_mid, sm);
      drift_at(x_mid, sm, drift);
      x += h * drift;
    }
    if (!x.allFinite() || !std::isfinite(integral)) {
      throw NumericalError("PF-ODE integration diverged at step " + std::to_string(k));
    }
  }
  const Scalar sT = sigmas[sigmas.size() - 1];
  const Scalar terminal = Scalar(-0.5) * x.squaredNorm() / (sT * sT) -
                          Scalar(0.5) * Scalar(d) * (kLog2Pi<Scalar> + Scalar(2) * std::log(sT));
  // d/dsigma log p_sigma(x(sigma)) = sigma * tr(J), so log p_0 = log p_T - integral.
  return terminal - integral;
}

}  // namespace detail

template <typename Scalar>
Scalar ode_logdensity(const Expert<Scalar>& expert, const VectorRef<Scalar>& x0, const DensityConfig& cfg,
                      Index sample_index = 0) {
  require_shape(x0.size() == expert_dim(expert), "ode_logdensity: dimension mismatch");
  const Vector<Scalar> sigmas = cfg.sigma_grid<Scalar>();
  const Matrix<Scalar> probes = draw_probes<Scalar>(cfg, x0.size(), sample_index);
  return detail::ode_logdensity_with_probes(expert, x0, cfg, sigmas, probes);
}

/// log p_i(x) for every (sample row, expert) pair; probes are shared across
/// experts per sample. Rows are evaluated in parallel.
template <typename Scalar>
Matrix<Scalar> batch_logdensity(const std::vector<Expert<Scalar>>& experts, const Matrix<Scalar>& xs,
                                const DensityConfig& cfg, DensityMode mode) {
  const auto n = static_cast<Index>(experts.size());
  Matrix<Scalar> out(xs.rows(), n);
  if (xs.rows() == 0) return out;
  for (const auto& e : experts) require_shape(expert_dim(e) == xs.cols(), "batch_logdensity: dimension mismatch");

  Vector<Scalar> sigmas;
  if (mode == DensityMode::ode) sigmas = cfg.sigma_grid<Scalar>();
  parallel_for(xs.rows(), [&](Index r) {
    const Vector<Scalar> x = xs.row(r).transpose();
    if (mode == DensityMode::exact) {
      for (Index i = 0; i < n; ++i) out(r, i) = exact_logdensity(experts[std::size_t(i)], x);
    } else {
      const Matrix<Scalar> probes = draw_probes<Scalar>(cfg, xs.cols(), r);
      for (Index i = 0; i < n; ++i) {
        out(r, i) = detail::ode_logdensity_with_probes(experts[std::size_t(i)], x, cfg, sigmas, probes);
      }
    }
  });
  return out;
}

}  // namespace poecal
