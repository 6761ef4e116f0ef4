#pragma once

// Gaussian-process regression with a Matern 3/2 kernel and zero prior mean.
//
// Everything here is templated on the scalar type and works on row-major
// location sets (`Points<Scalar>`, one 2-D location per row). The central
// object is `GpConditioner`, the Cholesky factor of the noisy Gram matrix of
// a set of measurement locations. Because the posterior covariance depends on
// locations only, virtual ("hypothetical") measurements extend the factor by a
// block Cholesky step without refactorizing.

#include <maipp/types.hpp>

#include <cmath>
#include <stdexcept>
#include <string>

namespace maipp {

template <typename Scalar>
struct GpHyperParams {
  Scalar lengthscale{0.45};
  Scalar signal_variance{1};
  Scalar noise_variance{0.01};

  void validate() const {
    if (!(lengthscale > 0) || !(signal_variance > 0) || !(noise_variance > 0))
      throw std::invalid_argument("GP hyperparameters must be strictly positive");
  }
};

/// Diagonal regularization added on top of the noise variance.
inline constexpr double kGramJitter = 1e-8;

template <typename Scalar>
Scalar matern32(Scalar d, const GpHyperParams<Scalar>& h) {
  if (d < 0) throw std::invalid_argument("matern32: negative distance");
  using std::exp;
  using std::sqrt;
  const Scalar r = sqrt(Scalar(3)) * d / h.lengthscale;
  return h.signal_variance * (Scalar(1) + r) * exp(-r);
}

template <typename DerivedA, typename DerivedB>
Eigen::Matrix<typename DerivedA::Scalar, Eigen::Dynamic, Eigen::Dynamic> kernel_matrix(
    const Eigen::MatrixBase<DerivedA>& a, const Eigen::MatrixBase<DerivedB>& b,
    const GpHyperParams<typename DerivedA::Scalar>& h) {
  using Scalar = typename DerivedA::Scalar;
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> k(a.rows(), b.rows());
  const Scalar a2 = std::sqrt(Scalar(3)) / h.lengthscale;
  for (Eigen::Index j = 0; j < b.rows(); ++j) {
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
      const Scalar dx = a(i, 0) - b(j, 0);
      const Scalar dy = a(i, 1) - b(j, 1);
      const Scalar r = a2 * std::sqrt(dx * dx + dy * dy);
      k(i, j) = h.signal_variance * (Scalar(1) + r) * std::exp(-r);
    }
  }
  return k;
}

/// Lower Cholesky factor of K(X,X) + (noise + jitter) I for a location set X.
template <typename Scalar>
class GpConditioner {
 public:
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  GpConditioner() = default;

  GpConditioner(Points<Scalar> locations, GpHyperParams<Scalar> hyper)
      : locations_(std::move(locations)), hyper_(hyper) {
    hyper_.validate();
    const Eigen::Index n = locations_.rows();
    Matrix gram = kernel_matrix(locations_, locations_, hyper_);
    gram.diagonal().array() += diag_shift();
    factor_ = Matrix::Zero(n, n);
    if (n > 0) {
      Eigen::LLT<Matrix> llt(gram);
      if (llt.info() != Eigen::Success) throw std::runtime_error("GP Gram matrix factorization failed");
      factor_ = llt.matrixL();
    }
  }

  Eigen::Index size() const { return locations_.rows(); }
  const Points<Scalar>& locations() const { return locations_; }
  const GpHyperParams<Scalar>& hyper() const { return hyper_; }
  const Matrix& factor() const { return factor_; }
  Scalar diag_shift() const { return hyper_.noise_variance + Scalar(kGramJitter); }

  /// L^{-1} rhs.
  template <typename Derived>
  Matrix whiten(const Eigen::MatrixBase<Derived>& rhs) const {
    if (size() == 0) return Matrix(0, rhs.cols());
    return factor_.template triangularView<Eigen::Lower>().solve(rhs);
  }

  /// Factor of the union X ∪ extra via one block Cholesky step.
  GpConditioner extended(const Points<Scalar>& extra) const {
    const Eigen::Index n = size();
    const Eigen::Index e = extra.rows();
    if (e == 0) return *this;
    GpConditioner out;
    out.hyper_ = hyper_;
    out.locations_.resize(n + e, 2);
    out.locations_.topRows(n) = locations_;
    out.locations_.bottomRows(e) = extra;
    const Matrix cross = whiten(kernel_matrix(locations_, extra, hyper_));
    Matrix schur = kernel_matrix(extra, extra, hyper_);
    schur.diagonal().array() += diag_shift();
    if (n > 0) schur.noalias() -= cross.transpose() * cross;
    Eigen::LLT<Matrix> llt(schur);
    if (llt.info() != Eigen::Success) throw std::runtime_error("GP Schur complement factorization failed");
    out.factor_ = Matrix::Zero(n + e, n + e);
    out.factor_.topLeftCorner(n, n) = factor_;
    out.factor_.bottomLeftCorner(e, n) = cross.transpose();
    out.factor_.bottomRightCorner(e, e) = llt.matrixL();
    return out;
  }

 private:
  Points<Scalar> locations_{0, 2};
  GpHyperParams<Scalar> hyper_{};
  Matrix factor_;
};

/// Posterior restricted to a fixed target set T. Caches W = L^{-1} K(X,T) so
/// that variances under additional virtual measurements cost O(e·(n+e)·|T|).
template <typename Scalar>
class TargetPosterior {
 public:
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  TargetPosterior() = default;

  TargetPosterior(GpConditioner<Scalar> cond, Points<Scalar> targets)
      : cond_(std::move(cond)), targets_(std::move(targets)) {
    weights_ = cond_.whiten(kernel_matrix(cond_.locations(), targets_, cond_.hyper()));
    variance_ = Vector::Constant(targets_.rows(), cond_.hyper().signal_variance);
    if (cond_.size() > 0) variance_ -= weights_.colwise().squaredNorm().transpose();
  }

  const GpConditioner<Scalar>& conditioner() const { return cond_; }
  const Points<Scalar>& targets() const { return targets_; }
  const Vector& variances() const { return variance_; }
  Scalar trace() const { return variance_.sum(); }

  /// Posterior mean at the targets for measurement values y (aligned with X).
  Vector mean(const Vector& y) const {
    if (y.size() != cond_.size()) throw std::invalid_argument("mean: |Y| != |X|");
    if (cond_.size() == 0) return Vector::Zero(targets_.rows());
    return weights_.transpose() * cond_.whiten(y);
  }

  /// Full posterior covariance over the targets.
  Matrix covariance() const {
    Matrix p = kernel_matrix(targets_, targets_, cond_.hyper());
    if (cond_.size() > 0) p.noalias() -= weights_.transpose() * weights_;
    return p;
  }

  /// Whitened cross-covariance rows contributed by extra locations.
  Matrix extra_weights(const Points<Scalar>& extra) const {
    const auto& h = cond_.hyper();
    const Matrix cross = cond_.whiten(kernel_matrix(cond_.locations(), extra, h));
    Matrix schur = kernel_matrix(extra, extra, h);
    schur.diagonal().array() += cond_.diag_shift();
    Matrix c = kernel_matrix(extra, targets_, h);
    if (cond_.size() > 0) {
      schur.noalias() -= cross.transpose() * cross;
      c.noalias() -= cross.transpose() * weights_;
    }
    Eigen::LLT<Matrix> llt(schur);
    if (llt.info() != Eigen::Success) throw std::runtime_error("GP Schur complement factorization failed");
    return llt.matrixL().solve(c);
  }

  Vector variances_with(const Points<Scalar>& extra) const {
    if (extra.rows() == 0) return variance_;
    return variance_ - extra_weights(extra).colwise().squaredNorm().transpose();
  }

  Scalar trace_with(const Points<Scalar>& extra) const {
    if (extra.rows() == 0) return trace();
    return trace() - extra_weights(extra).squaredNorm();
  }

  TargetPosterior with_extra(const Points<Scalar>& extra) const {
    if (extra.rows() == 0) return *this;
    const Matrix w = extra_weights(extra);
    TargetPosterior out;
    out.cond_ = cond_.extended(extra);
    out.targets_ = targets_;
    out.weights_.resize(weights_.rows() + w.rows(), targets_.rows());
    out.weights_.topRows(weights_.rows()) = weights_;
    out.weights_.bottomRows(w.rows()) = w;
    out.variance_ = variance_ - w.colwise().squaredNorm().transpose();
    return out;
  }

 private:
  GpConditioner<Scalar> cond_;
  Points<Scalar> targets_{0, 2};
  Matrix weights_;
  Vector variance_;
};

}  // namespace maipp
