#pragma once

#include <cmath>
#include <cstddef>
#include <numbers>
#include <vector>

#include <Eigen/Eigenvalues>

#include "pathdrift/errors.hpp"
#include "pathdrift/linalg.hpp"

namespace pathdrift {

struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

namespace detail {

// Golub-Welsch: nodes are the eigenvalues of the Jacobi matrix of the
// three-term recurrence, weights mu0 * (first eigenvector component)^2.
inline QuadratureRule golub_welsch(const Vector& diag, const Vector& offdiag, double mu0) {
  const Eigen::Index n = diag.size();
  Matrix jacobi = Matrix::Zero(n, n);
  jacobi.diagonal() = diag;
  for (Eigen::Index i = 0; i + 1 < n; ++i) {
    jacobi(i, i + 1) = offdiag[i];
    jacobi(i + 1, i) = offdiag[i];
  }
  Eigen::SelfAdjointEigenSolver<Matrix> eig(jacobi);
  QuadratureRule rule;
  rule.nodes.resize(static_cast<std::size_t>(n));
  rule.weights.resize(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    rule.nodes[static_cast<std::size_t>(i)] = eig.eigenvalues()[i];
    const double v0 = eig.eigenvectors()(0, i);
    rule.weights[static_cast<std::size_t>(i)] = mu0 * v0 * v0;
  }
  return rule;
}

}  // namespace detail

/// Gauss-Legendre rule on [lo, hi].
inline QuadratureRule gauss_legendre(std::size_t n, double lo = -1.0, double hi = 1.0) {
  if (n == 0) throw DomainError("gauss_legendre: need at least one node");
  Vector diag = Vector::Zero(static_cast<Eigen::Index>(n));
  Vector off(static_cast<Eigen::Index>(n > 0 ? n - 1 : 0));
  for (std::size_t k = 1; k < n; ++k) {
    const double kk = static_cast<double>(k);
    off[static_cast<Eigen::Index>(k - 1)] = kk / std::sqrt(4.0 * kk * kk - 1.0);
  }
  QuadratureRule rule = detail::golub_welsch(diag, off, 2.0);
  const double half = 0.5 * (hi - lo);
  const double mid = 0.5 * (hi + lo);
  for (std::size_t i = 0; i < n; ++i) {
    rule.nodes[i] = mid + half * rule.nodes[i];
    rule.weights[i] *= half;
  }
  return rule;
}

/// Gauss-Hermite rule for the weight exp(-u^2) on R.
inline QuadratureRule gauss_hermite(std::size_t n) {
  if (n == 0) throw DomainError("gauss_hermite: need at least one node");
  Vector diag = Vector::Zero(static_cast<Eigen::Index>(n));
  Vector off(static_cast<Eigen::Index>(n > 0 ? n - 1 : 0));
  for (std::size_t k = 1; k < n; ++k) off[static_cast<Eigen::Index>(k - 1)] = std::sqrt(static_cast<double>(k) / 2.0);
  return detail::golub_welsch(diag, off, std::sqrt(std::numbers::pi));
}

}  // namespace pathdrift
