#pragma once

#include <cmath>
#include <numbers>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "pathdrift/errors.hpp"

namespace pathdrift {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using VectorRef = Eigen::Ref<Vector>;
using ConstVectorRef = Eigen::Ref<const Vector>;
using ConstMatrixRef = Eigen::Ref<const Matrix>;

inline bool all_finite(ConstVectorRef v) { return v.allFinite(); }

/// Symmetric positive-definite matrix with its Cholesky factor, inverse and
/// log-determinant cached. Used as the covariance of Gaussian kernels.
class SpdMatrix {
 public:
  SpdMatrix() = default;

  explicit SpdMatrix(const Matrix& a, double symmetry_tol = 1e-12) : a_(a) {
    if (a.rows() != a.cols() || a.rows() == 0) {
      throw DomainError("SPD matrix must be square and non-empty");
    }
    const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
    if ((a - a.transpose()).cwiseAbs().maxCoeff() > symmetry_tol * scale) {
      throw DomainError("matrix is not symmetric");
    }
    llt_.compute(a);
    if (llt_.info() != Eigen::Success || !a.allFinite()) {
      throw DomainError("matrix is not positive definite");
    }
    const auto& l = llt_.matrixL();
    Matrix lower = l;
    log_det_ = 2.0 * lower.diagonal().array().log().sum();
    if (!std::isfinite(log_det_)) throw DomainError("matrix is not positive definite");
    inverse_ = llt_.solve(Matrix::Identity(a.rows(), a.cols()));
  }

  [[nodiscard]] Eigen::Index dim() const { return a_.rows(); }
  [[nodiscard]] const Matrix& matrix() const { return a_; }
  [[nodiscard]] const Matrix& inverse() const { return inverse_; }
  [[nodiscard]] Matrix lower() const { return llt_.matrixL(); }
  [[nodiscard]] double log_det() const { return log_det_; }
  [[nodiscard]] Vector solve(ConstVectorRef v) const { return llt_.solve(v); }

 private:
  Matrix a_;
  Matrix inverse_;
  Eigen::LLT<Matrix> llt_;
  double log_det_ = 0.0;
};

/// Density of N(x, A) evaluated at y.
inline double gaussian_density(const SpdMatrix& a, ConstVectorRef x, ConstVectorRef y) {
  if (x.size() != a.dim() || y.size() != a.dim()) throw DomainError("dimension mismatch");
  const Vector diff = y - x;
  const double quad = diff.dot(a.solve(diff));
  const double d = static_cast<double>(a.dim());
  return std::exp(-0.5 * quad - 0.5 * d * std::log(2.0 * std::numbers::pi) - 0.5 * a.log_det());
}

/// One-dimensional N(mean, variance) density.
inline double normal_pdf(double z, double mean, double variance) {
  const double u = z - mean;
  return std::exp(-0.5 * u * u / variance) / std::sqrt(2.0 * std::numbers::pi * variance);
}

}  // namespace pathdrift
