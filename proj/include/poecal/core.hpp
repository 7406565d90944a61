#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace poecal {

using Index = Eigen::Index;

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

template <typename Scalar>
using RowMajorMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// ---------------------------------------------------------------------------
// Errors. Every failure surfaced to the CLI maps onto one of these; the exit
// code is carried by the type (2 = configuration/domain, 3 = numerical).

class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& message, int exit_code)
      : std::runtime_error(message), kind_(std::move(kind)), exit_code_(exit_code) {}

  const std::string& kind() const noexcept { return kind_; }
  int exit_code() const noexcept { return exit_code_; }

 private:
  std::string kind_;
  int exit_code_;
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& message, std::string key = {})
      : Error("config", message, 2), key_(std::move(key)) {}
  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

class DomainError : public Error {
 public:
  explicit DomainError(const std::string& message) : Error("domain", message, 2) {}
};

class ShapeError : public Error {
 public:
  explicit ShapeError(const std::string& message) : Error("shape", message, 2) {}
};

class UnsupportedError : public Error {
 public:
  explicit UnsupportedError(const std::string& message) : Error("unsupported", message, 2) {}
};

class NumericalError : public Error {
 public:
  explicit NumericalError(const std::string& message) : Error("numerical", message, 3) {}
};

class ReconstructionError : public Error {
 public:
  explicit ReconstructionError(const std::string& message) : Error("reconstruction", message, 3) {}
};

inline void require_shape(bool ok, const std::string& what) {
  if (!ok) throw ShapeError(what);
}

// ---------------------------------------------------------------------------
// Noise schedule in effective-noise space.

template <typename Scalar>
class NoiseSchedule {
 public:
  NoiseSchedule() = default;

  /// Levels must be strictly decreasing and positive.
  NoiseSchedule(Vector<Scalar> levels, Scalar rho) : levels_(std::move(levels)), rho_(rho) {
    if (levels_.size() < 2) throw ConfigError("noise schedule requires at least 2 steps");
    for (Index i = 0; i < levels_.size(); ++i) {
      if (!(levels_[i] > 0)) throw ConfigError("noise levels must be positive");
      if (i > 0 && !(levels_[i] < levels_[i - 1])) {
        throw ConfigError("noise levels must be strictly decreasing");
      }
    }
  }

  Index steps() const { return levels_.size(); }
  Scalar operator[](Index i) const { return levels_[i]; }
  const Vector<Scalar>& levels() const { return levels_; }
  Scalar sigma_max_eff() const { return levels_[0]; }
  Scalar sigma_min_eff() const { return levels_[levels_.size() - 1]; }
  Scalar rho() const { return rho_; }

 private:
  Vector<Scalar> levels_;
  Scalar rho_ = Scalar(7);
};

/// Karras-style interpolation in sigma^(1/rho) between the two endpoints.
/// Endpoints are stored bit-equal to the inputs.
template <typename Scalar>
NoiseSchedule<Scalar> build_schedule(Scalar sigma_max_eff, Scalar sigma_min_eff, Index steps,
                                     Scalar rho = Scalar(7)) {
  if (!(sigma_min_eff > 0) || !(sigma_max_eff > sigma_min_eff)) {
    throw ConfigError("noise schedule requires sigma_max_eff > sigma_min_eff > 0");
  }
  if (steps < 2) throw ConfigError("noise schedule requires at least 2 steps");
  if (!(rho >= 1)) throw ConfigError("noise schedule exponent rho must be >= 1");

  Vector<Scalar> levels(steps);
  const Scalar hi = std::pow(sigma_max_eff, Scalar(1) / rho);
  const Scalar lo = std::pow(sigma_min_eff, Scalar(1) / rho);
  for (Index i = 0; i < steps; ++i) {
    const Scalar u = Scalar(i) / Scalar(steps - 1);
    levels[i] = std::pow(hi + u * (lo - hi), rho);
  }
  levels[0] = sigma_max_eff;
  levels[steps - 1] = sigma_min_eff;
  return NoiseSchedule<Scalar>(std::move(levels), rho);
}

/// Likelihood tempering min(1, coef / sigma_eff^2).
template <typename Scalar>
Scalar beta_schedule(Scalar sigma_eff, Scalar beta_coef) {
  if (!(sigma_eff > 0)) throw DomainError("beta_schedule requires sigma_eff > 0");
  return std::min(Scalar(1), beta_coef / (sigma_eff * sigma_eff));
}

// ---------------------------------------------------------------------------
// Exponents of the product prior.

enum class ConstraintMode { unconstrained, box_01, sum_to_one };

std::string_view to_string(ConstraintMode mode);
ConstraintMode parse_constraint_mode(std::string_view text);

template <typename Scalar>
struct Exponents {
  Vector<Scalar> values;
  ConstraintMode mode = ConstraintMode::unconstrained;

  Exponents() = default;
  explicit Exponents(Vector<Scalar> a, ConstraintMode m = ConstraintMode::unconstrained)
      : values(std::move(a)), mode(m) {}

  Index size() const { return values.size(); }
  Scalar sum() const { return values.sum(); }
  Scalar operator[](Index i) const { return values[i]; }

  /// Throws DomainError when the vector violates its constraint mode.
  void validate() const {
    if (values.size() == 0) throw DomainError("exponent vector is empty");
    if (!values.allFinite()) throw DomainError("exponent vector has non-finite entries");
    switch (mode) {
      case ConstraintMode::unconstrained:
        break;
      case ConstraintMode::box_01:
        if ((values.array() < Scalar(0)).any() || (values.array() > Scalar(1)).any()) {
          throw DomainError("box_01 exponents must lie in [0, 1]");
        }
        break;
      case ConstraintMode::sum_to_one: {
        const Scalar tol = Scalar(8) * std::numeric_limits<Scalar>::epsilon() *
                           (Scalar(1) + values.cwiseAbs().sum());
        if (std::abs(sum() - Scalar(1)) > tol) {
          throw DomainError("sum_to_one exponents must sum to 1");
        }
        return;
      }
    }
    if (!(sum() > 0)) throw DomainError("exponents must satisfy sum(a) > 0");
  }

  /// Builds a sum_to_one vector from its free components; the last entry is
  /// the dependent one, 1 - sum(free).
  static Exponents from_free(const Vector<Scalar>& free) {
    Vector<Scalar> a(free.size() + 1);
    a.head(free.size()) = free;
    a[free.size()] = Scalar(1) - free.sum();
    return Exponents(std::move(a), ConstraintMode::sum_to_one);
  }
};

// ---------------------------------------------------------------------------
// Sampler run configuration.

enum class JacobianMode { exact, identity };

std::string_view to_string(JacobianMode mode);
JacobianMode parse_jacobian_mode(std::string_view text);

struct RunConfig {
  Index annealing_steps = 50;
  Index mixing_steps = 20;
  double langevin_coef = 0.05;
  double beta_coef = 0.005;
  Index n_chains = 20;
  std::uint64_t master_seed = 0;
  JacobianMode jacobian_mode = JacobianMode::exact;
  double sigma_max_eff = 50.0;
  double sigma_min_eff = 0.01;
  double rho = 7.0;
  // Replaces the beta schedule with a constant when set (0 disables guidance).
  std::optional<double> fixed_beta;

  void validate() const {
    if (annealing_steps < 2) throw ConfigError("annealing_steps must be >= 2", "sampler.annealing_steps");
    if (mixing_steps < 1) throw ConfigError("mixing_steps must be >= 1", "sampler.mixing_steps");
    if (!(langevin_coef > 0)) throw ConfigError("langevin_coef must be > 0", "sampler.langevin_coef");
    if (!(beta_coef > 0)) throw ConfigError("beta_coef must be > 0", "sampler.beta_coef");
    if (n_chains < 1) throw ConfigError("n_chains must be >= 1", "sampler.n_chains");
    if (fixed_beta && !(*fixed_beta >= 0 && *fixed_beta <= 1)) {
      throw ConfigError("fixed_beta must lie in [0, 1]");
    }
  }

  template <typename Scalar>
  NoiseSchedule<Scalar> schedule() const {
    return build_schedule<Scalar>(Scalar(sigma_max_eff), Scalar(sigma_min_eff), annealing_steps,
                                  Scalar(rho));
  }
};

}  // namespace poecal
