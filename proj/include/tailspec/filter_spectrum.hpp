#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

#include "tailspec/linear_process.hpp"
#include "tailspec/spectra.hpp"

namespace tailspec {

// Lag-s Gram matrix of the filter rows:
//   M(s)_{ij} = sum_l h_{il} h_{j,l+s},
// returned as a dense block indexed by the filter's row support, i.e. entry
// (r, c) corresponds to row offsets (k_min + r, k_min + c).
inline Eigen::MatrixXd build_M(const FilterCoefficients& filter, int s) {
  filter.validate();
  if (s < 0) throw std::invalid_argument("build_M: lag must be >= 0");
  const Eigen::Index rows = filter.coeffs.rows();
  const Eigen::Index cols = filter.coeffs.cols();
  Eigen::MatrixXd shifted = Eigen::MatrixXd::Zero(rows, cols);
  if (s < cols) {
    shifted.leftCols(cols - s) = filter.coeffs.rightCols(cols - s);
  }
  return filter.coeffs * shifted.transpose();
}

// Spectrum of the deterministic matrix that scales and shapes the largest
// sample eigenvalues.  For the plain variant the matrix is
//   K = sum_{s=s1}^{s2} M(s) M(s)'   (positive semi-definite),
// and `eigenvalues` holds its eigenvalues v_j^2.  For the symmetrized
// variant the matrix is sum_s (M(s) + M(s)')/2 and `eigenvalues` holds its
// singular values, ordered by decreasing absolute eigenvalue.
struct KSpectrum {
  int s1 = 0;
  int s2 = 0;
  Eigen::MatrixXd block;         // the dense matrix on the row support
  Eigen::VectorXd eigenvalues;   // descending (v_j^2, or singular values)
  Eigen::MatrixXd eigenvectors;  // orthonormal columns, sign-normalized
  int rank = 0;                  // #{ j : eigenvalue_j > rank_tol * top }
  double rank_tol = 1e-12;
  std::int64_t k_min = 0;        // row offset of block coordinate 0
  bool symmetrized = false;

  // Strict gaps among the nonzero eigenvalues, needed for identifiable
  // eigenvector predictions.
  bool has_strict_gaps() const {
    for (int j = 0; j + 1 < rank; ++j) {
      if (!(eigenvalues(j) > eigenvalues(j + 1))) return false;
    }
    return true;
  }
};

namespace detail {

inline int count_rank(const Eigen::VectorXd& values, double rank_tol) {
  const double top = values.size() ? std::abs(values(0)) : 0.0;
  int r = 0;
  for (Eigen::Index j = 0; j < values.size(); ++j) {
    if (std::abs(values(j)) > rank_tol * top) ++r;
  }
  return r;
}

}  // namespace detail

inline KSpectrum build_K(const FilterCoefficients& filter, int s1, int s2,
                         double rank_tol = 1e-12) {
  if (s1 < 0 || s1 > s2)
    throw std::invalid_argument("build_K: need 0 <= s1 <= s2");
  const Eigen::Index r = filter.coeffs.rows();
  Eigen::MatrixXd k = Eigen::MatrixXd::Zero(r, r);
  for (int s = s1; s <= s2; ++s) {
    const Eigen::MatrixXd m = build_M(filter, s);
    k.noalias() += m * m.transpose();
  }
  if (k.cwiseAbs().maxCoeff() == 0.0)
    throw std::domain_error("null K-matrix for lags (" + std::to_string(s1) +
                            ", " + std::to_string(s2) + ")");
  KSpectrum out;
  out.s1 = s1;
  out.s2 = s2;
  out.block = k;
  SpectralResult spec = symmetric_eigen(k);
  out.eigenvalues = std::move(spec.eigenvalues);
  out.eigenvectors = std::move(spec.eigenvectors);
  out.rank = detail::count_rank(out.eigenvalues, rank_tol);
  out.rank_tol = rank_tol;
  out.k_min = filter.k_min;
  return out;
}

inline KSpectrum build_K_sym(const FilterCoefficients& filter, int s1, int s2,
                             double rank_tol = 1e-12) {
  if (s1 < 0 || s1 > s2)
    throw std::invalid_argument("build_K_sym: need 0 <= s1 <= s2");
  const Eigen::Index r = filter.coeffs.rows();
  Eigen::MatrixXd k = Eigen::MatrixXd::Zero(r, r);
  for (int s = s1; s <= s2; ++s) {
    const Eigen::MatrixXd m = build_M(filter, s);
    k.noalias() += 0.5 * (m + m.transpose());
  }
  if (k.cwiseAbs().maxCoeff() == 0.0)
    throw std::domain_error("null K-matrix (symmetrized) for lags (" +
                            std::to_string(s1) + ", " + std::to_string(s2) +
                            ")");
  KSpectrum out;
  out.s1 = s1;
  out.s2 = s2;
  out.block = k;
  SpectralResult spec = singular_order(symmetric_eigen(k));
  out.eigenvalues = std::move(spec.eigenvalues);
  out.eigenvectors = std::move(spec.eigenvectors);
  out.rank = detail::count_rank(out.eigenvalues, rank_tol);
  out.rank_tol = rank_tol;
  out.k_min = filter.k_min;
  out.symmetrized = true;
  return out;
}

// Places a small block into a p x p matrix so that block coordinate j maps to
// (1-based) position a + first_offset + j.  Rows and columns falling outside
// 1..p are dropped; everything else is zero.
inline Eigen::MatrixXd embed_matrix_at(const Eigen::MatrixXd& block,
                                       std::int64_t a, Eigen::Index p,
                                       std::int64_t first_offset) {
  if (block.rows() != block.cols())
    throw std::invalid_argument("embed_matrix: block must be square");
  if (a < 1 || a > p)
    throw std::invalid_argument("embed_matrix: position out of range");
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(p, p);
  const std::int64_t start = a + first_offset;  // position of block index 0
  for (Eigen::Index i = 0; i < block.rows(); ++i) {
    const std::int64_t pi = start + i;
    if (pi < 1 || pi > p) continue;
    for (Eigen::Index j = 0; j < block.cols(); ++j) {
      const std::int64_t pj = start + j;
      if (pj < 1 || pj > p) continue;
      out(pi - 1, pj - 1) = block(i, j);
    }
  }
  return out;
}

// Centers an odd-sized block at position a; block middle maps to a.
inline Eigen::MatrixXd embed_matrix(const Eigen::MatrixXd& block,
                                    std::int64_t a, Eigen::Index p) {
  return embed_matrix_at(block, a, p, -((block.rows() - 1) / 2));
}

// Places the coordinates of u at (1-based) positions a + first_offset + j,
// clipped to 1..p, without renormalizing after clipping.  The default
// first_offset = 0 starts the vector at position a.
inline Eigen::VectorXd embed_vector(const Eigen::VectorXd& u, std::int64_t a,
                                    Eigen::Index p,
                                    std::int64_t first_offset = 0) {
  if (a < 1 || a > p)
    throw std::invalid_argument("embed_vector: position out of range");
  Eigen::VectorXd out = Eigen::VectorXd::Zero(p);
  const std::int64_t start = a + first_offset;
  for (Eigen::Index j = 0; j < u.size(); ++j) {
    const std::int64_t pj = start + j;
    if (pj < 1 || pj > p) continue;
    out(pj - 1) = u(j);
  }
  return out;
}

}  // namespace tailspec
