#pragma once

// Independent reference computations used by the tests. Everything here is
// written with dense matrices and plain loops and never calls the closed-form
// helpers of the library under test.

#include "poecal/evidence.hpp"

#include <cmath>
#include <functional>
#include <random>
#include <vector>

namespace oracle {

using poecal::Index;
using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

constexpr double kPi = 3.14159265358979323846;

struct Gaussian {
  Vec mean;
  Mat cov;
};

// Product of diagonal Gaussians raised to exponents, by accumulating dense
// precision matrices one dimension at a time.
inline Gaussian product_of_gaussians(const std::vector<Vec>& means, const std::vector<Vec>& vars, const Vec& a) {
  const Index d = means.front().size();
  Mat precision = Mat::Zero(d, d);
  Vec h = Vec::Zero(d);
  for (std::size_t i = 0; i < means.size(); ++i) {
    for (Index j = 0; j < d; ++j) {
      precision(j, j) += a[Index(i)] / vars[i][j];
      h[j] += a[Index(i)] * means[i][j] / vars[i][j];
    }
  }
  Mat cov = precision.inverse();
  return {cov * h, cov};
}

inline double log_normal_dense(const Vec& x, const Vec& mean, const Mat& cov) {
  const Vec r = x - mean;
  const double quad = r.dot(cov.inverse() * r);
  return -0.5 * (quad + std::log(cov.determinant()) + double(x.size()) * std::log(2 * kPi));
}

// log N(y; A m, A P A^T + s^2 I) for the prior N(m, P).
inline double log_evidence(const Gaussian& prior, const Mat& A, const Vec& y, double sigma_y) {
  Mat S = A * prior.cov * A.transpose();
  S += sigma_y * sigma_y * Mat::Identity(A.rows(), A.rows());
  return log_normal_dense(y, A * prior.mean, S);
}

// Conjugate posterior of N(m, P) under y = A x + N(0, s^2 I), information form.
inline Gaussian conjugate_posterior(const Gaussian& prior, const Mat& A, const Vec& y, double sigma_y) {
  const Mat prior_prec = prior.cov.inverse();
  const Mat prec = prior_prec + A.transpose() * A / (sigma_y * sigma_y);
  const Mat cov = prec.inverse();
  const Vec mean = cov * (prior_prec * prior.mean + A.transpose() * y / (sigma_y * sigma_y));
  return {mean, cov};
}

inline double central_difference(const std::function<double(double)>& f, double x, double h) {
  return (f(x + h) - f(x - h)) / (2 * h);
}

// Composite Simpson rule on [lo, hi] with n (even) intervals.
inline double simpson(const std::function<double(double)>& f, double lo, double hi, int n) {
  const double h = (hi - lo) / n;
  double acc = f(lo) + f(hi);
  for (int k = 1; k < n; ++k) acc += (k % 2 ? 4.0 : 2.0) * f(lo + k * h);
  return acc * h / 3.0;
}

inline double mean(const std::vector<double>& v) {
  double s = 0;
  for (double x : v) s += x;
  return s / double(v.size());
}

inline double variance(const std::vector<double>& v) {
  const double m = mean(v);
  double s = 0;
  for (double x : v) s += (x - m) * (x - m);
  return s / double(v.size() - 1);
}

inline double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  const double mx = mean(x), my = mean(y);
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  return sxy / std::sqrt(sxx * syy);
}

// Two diagonal Gaussian experts with per-dimension parameters drawn uniformly.
struct TwoExperts {
  std::vector<Vec> means, vars;
  std::vector<poecal::GaussianExpert<double>> gaussians;
  std::vector<poecal::Expert<double>> experts;
};

inline TwoExperts make_two_experts(Index d, std::mt19937_64& rng, double mean_lo0, double mean_hi0, double mean_lo1,
                                   double mean_hi1, double std_lo, double std_hi) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto draw = [&](double lo, double hi) {
    Vec v(d);
    for (Index j = 0; j < d; ++j) v[j] = lo + (hi - lo) * u(rng);
    return v;
  };
  TwoExperts out;
  out.means = {draw(mean_lo0, mean_hi0), draw(mean_lo1, mean_hi1)};
  for (int i = 0; i < 2; ++i) out.vars.push_back(draw(std_lo, std_hi).array().square().matrix());
  for (int i = 0; i < 2; ++i) {
    out.gaussians.emplace_back(out.means[i], out.vars[i]);
    out.experts.emplace_back(out.gaussians.back());
  }
  return out;
}

inline poecal::RowMajorMatrix<double> gaussian_matrix(Index m, Index d, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0 / std::sqrt(double(m)));
  poecal::RowMajorMatrix<double> A(m, d);
  for (Index i = 0; i < m; ++i)
    for (Index j = 0; j < d; ++j) A(i, j) = n(rng);
  return A;
}

}  // namespace oracle
