#pragma once

#include "poecal/core.hpp"

#include <cstdint>
#include <initializer_list>
#include <random>

namespace poecal {

// Every randomized routine draws from a stream whose seed is derived from a
// master seed plus a tuple of tags (purpose, chain index, grid node, ...).
// Streams never depend on scheduling, so results are thread-count invariant.

enum class StreamPurpose : std::uint64_t {
  measurement = 1,
  init = 2,
  langevin = 3,
  probe = 4,
  posterior = 5,
  prior = 6,
  grid = 7,
  em = 8,
  preset = 9,
  forward = 10,
};

std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> tags);

inline std::uint64_t tag(StreamPurpose purpose) { return static_cast<std::uint64_t>(purpose); }

class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed) : engine_(seed) {}

  double gaussian() { return normal_(engine_); }
  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(engine_); }
  double rademacher() { return (engine_() >> 63) ? 1.0 : -1.0; }

  template <typename Derived>
  void fill_gaussian(Eigen::MatrixBase<Derived>& out) {
    using Scalar = typename Derived::Scalar;
    for (Index j = 0; j < out.cols(); ++j)
      for (Index i = 0; i < out.rows(); ++i) out(i, j) = Scalar(gaussian());
  }

  template <typename Derived>
  void fill_gaussian(Eigen::MatrixBase<Derived>&& out) {
    fill_gaussian(out);
  }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_;
};

}  // namespace poecal
