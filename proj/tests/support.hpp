#pragma once

// Generators and brute-force oracles shared by the unit and acceptance tests.
// Oracles are written from the defining formulas, deliberately avoiding the
// library's factorizations and helpers.

#include <maipp/types.hpp>

#include <Eigen/Dense>

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

namespace testing {

using maipp::Points2d;
using maipp::Rng;
using maipp::Vec2;

inline Vec2 random_point(Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double x = u(rng);
  return {x, u(rng)};
}

inline Points2d random_points(Rng& rng, int n) {
  Points2d p(n, 2);
  for (int i = 0; i < n; ++i) p.row(i) = random_point(rng).transpose();
  return p;
}

inline Eigen::VectorXd random_vector(Rng& rng, Eigen::Index n, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = u(rng);
  return v;
}

inline int random_int(Rng& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

inline double oracle_matern(double d, double ell, double sf2) {
  const double r = std::sqrt(3.0) * d / ell;
  return sf2 * (1.0 + r) * std::exp(-r);
}

inline Eigen::MatrixXd oracle_kernel(const Points2d& a, const Points2d& b, double ell, double sf2) {
  Eigen::MatrixXd k(a.rows(), b.rows());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < b.rows(); ++j) {
      const double dx = a(i, 0) - b(j, 0), dy = a(i, 1) - b(j, 1);
      k(i, j) = oracle_matern(std::sqrt(dx * dx + dy * dy), ell, sf2);
    }
  return k;
}

struct OraclePosterior {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};

/// mu = K*x (Kxx + s I)^-1 y ; P = K** - K*x (Kxx + s I)^-1 Kx*, explicit inverse.
inline OraclePosterior oracle_posterior(const Points2d& x, const Eigen::VectorXd& y, const Points2d& targets,
                                        double ell, double sf2, double diag) {
  const Eigen::MatrixXd kss = oracle_kernel(targets, targets, ell, sf2);
  if (x.rows() == 0) return {Eigen::VectorXd::Zero(targets.rows()), kss};
  Eigen::MatrixXd kxx = oracle_kernel(x, x, ell, sf2);
  kxx.diagonal().array() += diag;
  const Eigen::MatrixXd inv = kxx.fullPivLu().inverse();
  const Eigen::MatrixXd ksx = oracle_kernel(targets, x, ell, sf2);
  return {ksx * inv * y, kss - ksx * inv * ksx.transpose()};
}

/// Grid cell centers, row-major with x fastest.
inline Points2d oracle_grid(int r) {
  Points2d g(r * r, 2);
  int k = 0;
  for (int row = 0; row < r; ++row)
    for (int col = 0; col < r; ++col, ++k) g.row(k) << (col + 0.5) / r, (row + 0.5) / r;
  return g;
}

inline double oracle_gaussian_pdf(const Vec2& x, const Vec2& mu, const Eigen::Matrix2d& cov) {
  const double det = cov(0, 0) * cov(1, 1) - cov(0, 1) * cov(1, 0);
  const double dx = x.x() - mu.x(), dy = x.y() - mu.y();
  // Explicit 2x2 inverse.
  const double q = (cov(1, 1) * dx * dx - 2.0 * cov(0, 1) * dx * dy + cov(0, 0) * dy * dy) / det;
  return std::exp(-0.5 * q) / (2.0 * std::numbers::pi * std::sqrt(det));
}

}  // namespace testing
