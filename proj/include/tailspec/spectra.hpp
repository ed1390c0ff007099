#pragma once

#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

namespace tailspec {

// Full spectrum of a symmetric matrix: eigenvalues in descending order with
// orthonormal eigenvector columns whose first component larger than 1e-12 in
// absolute value is positive.
struct SpectralResult {
  Eigen::VectorXd eigenvalues;
  Eigen::MatrixXd eigenvectors;
};

namespace detail {

inline void apply_sign_convention(Eigen::MatrixXd& vectors) {
  for (Eigen::Index j = 0; j < vectors.cols(); ++j) {
    for (Eigen::Index i = 0; i < vectors.rows(); ++i) {
      const double x = vectors(i, j);
      if (std::abs(x) > 1e-12) {
        if (x < 0.0) vectors.col(j) = -vectors.col(j);
        break;
      }
    }
  }
}

}  // namespace detail

inline SpectralResult symmetric_eigen(const Eigen::MatrixXd& m,
                                      double residual_tol = 1e-9) {
  if (m.rows() != m.cols())
    throw std::invalid_argument("symmetric_eigen: matrix must be square");
  const double scale = m.cwiseAbs().maxCoeff();
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-9 * std::max(1.0, scale))
    throw std::invalid_argument("symmetric_eigen: matrix not symmetric");

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(0.5 * (m + m.transpose()));
  if (solver.info() != Eigen::Success)
    throw std::runtime_error("symmetric_eigen: eigensolver failed to converge");

  SpectralResult out;
  out.eigenvalues = solver.eigenvalues().reverse();
  out.eigenvectors = solver.eigenvectors().rowwise().reverse();
  detail::apply_sign_convention(out.eigenvectors);

  // Residual check per pair: ||A v - lambda v|| <= tol * ||A||_2.
  const double norm2 = std::max(std::abs(out.eigenvalues(0)),
                                std::abs(out.eigenvalues(out.eigenvalues.size() - 1)));
  const Eigen::MatrixXd residual =
      m * out.eigenvectors - out.eigenvectors * out.eigenvalues.asDiagonal();
  const double worst = residual.colwise().norm().maxCoeff();
  if (worst > residual_tol * std::max(norm2, 1e-300))
    throw std::runtime_error("symmetric_eigen: residual exceeds tolerance");
  return out;
}

// Reorders a spectrum by decreasing absolute eigenvalue and replaces the
// eigenvalues by their absolute values, i.e. the singular values of the
// symmetric input.  Ties keep their descending-eigenvalue order.
inline SpectralResult singular_order(const SpectralResult& spec) {
  const Eigen::Index n = spec.eigenvalues.size();
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](Eigen::Index a, Eigen::Index b) {
    return std::abs(spec.eigenvalues(a)) > std::abs(spec.eigenvalues(b));
  });
  SpectralResult out;
  out.eigenvalues.resize(n);
  out.eigenvectors.resize(spec.eigenvectors.rows(), n);
  for (Eigen::Index j = 0; j < n; ++j) {
    out.eigenvalues(j) = std::abs(spec.eigenvalues(idx[static_cast<std::size_t>(j)]));
    out.eigenvectors.col(j) = spec.eigenvectors.col(idx[static_cast<std::size_t>(j)]);
  }
  return out;
}

}  // namespace tailspec
