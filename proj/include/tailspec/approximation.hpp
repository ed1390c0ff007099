#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "tailspec/autocovariance.hpp"
#include "tailspec/filter_spectrum.hpp"
#include "tailspec/noise.hpp"

namespace tailspec {

// Predicted ordered eigenvalues: the top-p values of the product set
// {weight_i * v_j^2} with labels identifying the source of each entry.
// row_index[i] is the 0-based noise row behind entry i, eig_index[i] the
// 0-based index of the K-eigenvalue it multiplies.
struct ApproxSpectrum {
  Eigen::VectorXd values;  // descending
  std::vector<Eigen::Index> row_index;  // a(i)
  std::vector<int> eig_index;           // b(i)
  double a_np4 = 0.0;       // normalization, when the caller provides it
  bool regime_warning = false;  // delta used outside alpha < 2(1+beta)
};

namespace detail {

struct ProductEntry {
  double value;
  double weight;  // the order statistic the product came from
  Eigen::Index row;
  int eig;
  int weight_rank;
};

// Top `count` products of sorted weights and eigenvalues.  Ties in the value
// break toward the larger weight, then the smaller eigenvalue index.
inline ApproxSpectrum top_products(const Eigen::VectorXd& weights_sorted,
                                   const std::vector<Eigen::Index>& rows,
                                   const Eigen::VectorXd& eigenvalues,
                                   Eigen::Index count) {
  std::vector<ProductEntry> entries;
  entries.reserve(static_cast<std::size_t>(weights_sorted.size()) *
                  static_cast<std::size_t>(eigenvalues.size()));
  for (Eigen::Index i = 0; i < weights_sorted.size(); ++i) {
    for (Eigen::Index j = 0; j < eigenvalues.size(); ++j) {
      entries.push_back({weights_sorted(i) * eigenvalues(j), weights_sorted(i),
                         rows[static_cast<std::size_t>(i)], static_cast<int>(j),
                         static_cast<int>(i)});
    }
  }
  auto cmp = [](const ProductEntry& a, const ProductEntry& b) {
    if (a.value != b.value) return a.value > b.value;
    if (a.weight != b.weight) return a.weight > b.weight;
    if (a.eig != b.eig) return a.eig < b.eig;
    return a.weight_rank < b.weight_rank;
  };
  const std::size_t keep =
      std::min(entries.size(), static_cast<std::size_t>(count));
  std::partial_sort(entries.begin(), entries.begin() + keep, entries.end(), cmp);

  ApproxSpectrum out;
  out.values.resize(static_cast<Eigen::Index>(keep));
  out.row_index.resize(keep);
  out.eig_index.resize(keep);
  for (std::size_t i = 0; i < keep; ++i) {
    out.values(static_cast<Eigen::Index>(i)) = entries[i].value;
    out.row_index[i] = entries[i].row;
    out.eig_index[i] = entries[i].eig;
  }
  return out;
}

}  // namespace detail

// gamma_i: top-p ordered values of {D_i^2 v_j^2} with (a(i), b(i)) labels.
inline ApproxSpectrum gamma_values(const RowSums& rowsums,
                                   const KSpectrum& kspec, Eigen::Index p) {
  if (kspec.rank < 1) throw std::domain_error("gamma_values: null K-spectrum");
  if (p < 1 || p > rowsums.d2_sorted.size())
    throw std::invalid_argument("gamma_values: p out of range");
  Eigen::VectorXd weights = rowsums.d2_sorted.head(p);
  std::vector<Eigen::Index> rows(rowsums.order.begin(),
                                 rowsums.order.begin() + p);
  return detail::top_products(weights, rows, kspec.eigenvalues, p);
}

// delta_i: top-p ordered values of {Z^4_(i) v_j^2}, where the fourth-power
// order statistics run over the whole p x n noise block.  Meant for the
// regime alpha < 2(1+beta); outside it the result carries a warning flag.
inline ApproxSpectrum delta_values(const NoiseField& noise, Eigen::Index p,
                                   Eigen::Index n, const KSpectrum& kspec) {
  if (kspec.rank < 1) throw std::domain_error("delta_values: null K-spectrum");
  const auto z = noise.block(1, 1, p, n);

  struct Cell {
    double z4;
    Eigen::Index row;
  };
  std::vector<Cell> cells;
  cells.reserve(static_cast<std::size_t>(p * n));
  for (Eigen::Index i = 0; i < p; ++i) {
    for (Eigen::Index t = 0; t < n; ++t) {
      const double sq = z(i, t) * z(i, t);
      cells.push_back({sq * sq, i});
    }
  }
  const std::size_t keep = static_cast<std::size_t>(p);
  std::partial_sort(cells.begin(), cells.begin() + keep, cells.end(),
                    [](const Cell& a, const Cell& b) { return a.z4 > b.z4; });

  Eigen::VectorXd weights(p);
  std::vector<Eigen::Index> rows(keep);
  for (std::size_t i = 0; i < keep; ++i) {
    weights(static_cast<Eigen::Index>(i)) = cells[i].z4;
    rows[i] = cells[i].row;
  }
  ApproxSpectrum out = detail::top_products(weights, rows, kspec.eigenvalues, p);

  const double beta = std::log(static_cast<double>(p)) /
                      std::log(static_cast<double>(n));
  out.regime_warning = !(noise.dist.tail_index() < 2.0 * (1.0 + beta));
  return out;
}

// Predicted unit eigenvectors: the i-th prediction places the K-eigenvector
// u_{b(i)} at rows a(i) .. a(i) + block - 1 (shifted by the filter's row
// offset) and is zero elsewhere.  Requires strict gaps among the nonzero
// K-eigenvalues.
inline std::vector<Eigen::VectorXd> predicted_eigenvectors(
    const ApproxSpectrum& approx, const KSpectrum& kspec,
    const RowSums& rowsums, Eigen::Index p, Eigen::Index count) {
  if (!kspec.has_strict_gaps())
    throw std::domain_error(
        "predicted_eigenvectors: tied nonzero K-eigenvalues violate "
        "condition H (no ties)");
  if (count > approx.values.size())
    throw std::invalid_argument("predicted_eigenvectors: count exceeds labels");
  std::vector<Eigen::VectorXd> out;
  out.reserve(static_cast<std::size_t>(count));
  for (Eigen::Index i = 0; i < count; ++i) {
    const int b = approx.eig_index[static_cast<std::size_t>(i)];
    if (b >= kspec.rank)
      throw std::domain_error(
          "predicted_eigenvectors: label points at a zero K-eigenvalue");
    const Eigen::Index a = approx.row_index[static_cast<std::size_t>(i)];
    // Sanity: the label must reproduce the predicted value exactly.
    const double d2 = rowsums.d(a) * rowsums.d(a);
    if (d2 * kspec.eigenvalues(b) != approx.values(i))
      throw std::logic_error("predicted_eigenvectors: inconsistent labels");
    out.push_back(embed_vector(kspec.eigenvectors.col(b), a + 1, p, kspec.k_min));
  }
  return out;
}

// Block-diagonal approximation sum_{i<k} D_(i)^2 * K embedded at the rows of
// the k largest D^2.  Overlapping blocks simply add.
inline Eigen::MatrixXd block_approximation(const RowSums& rowsums,
                                           const KSpectrum& kspec,
                                           Eigen::Index p, Eigen::Index k) {
  if (k > static_cast<Eigen::Index>(rowsums.order.size()))
    throw std::invalid_argument("block_approximation: k exceeds row count");
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(p, p);
  for (Eigen::Index i = 0; i < k; ++i) {
    const Eigen::Index a = rowsums.order[static_cast<std::size_t>(i)];
    out += rowsums.d2_sorted(i) *
           embed_matrix_at(kspec.block, a + 1, p, kspec.k_min);
  }
  return out;
}

// Default block count: floor(p^(1/4)), one admissible choice of a sequence
// with k^2 = o(p).
inline Eigen::Index default_block_count(Eigen::Index p) {
  return std::max<Eigen::Index>(
      1, static_cast<Eigen::Index>(std::floor(std::pow(double(p), 0.25))));
}

// a_np^{-4} max_i |lambda_i - gamma_i| over the entries provided.
inline double approximation_error(const Eigen::Ref<const Eigen::VectorXd>& lambda,
                                  const Eigen::Ref<const Eigen::VectorXd>& approx,
                                  double a_np) {
  if (lambda.size() != approx.size())
    throw std::invalid_argument("approximation_error: length mismatch");
  if (!(a_np > 0.0))
    throw std::invalid_argument("approximation_error: a_np must be positive");
  const double norm = std::pow(a_np, 4.0);
  return (lambda - approx).cwiseAbs().maxCoeff() / norm;
}

inline double approximation_error(const Eigen::Ref<const Eigen::VectorXd>& lambda,
                                  const ApproxSpectrum& approx, double a_np) {
  return approximation_error(lambda, approx.values, a_np);
}

// |<y, u>| for two unit vectors.
inline double alignment(const Eigen::Ref<const Eigen::VectorXd>& y,
                        const Eigen::Ref<const Eigen::VectorXd>& u_pred) {
  if (y.size() != u_pred.size())
    throw std::invalid_argument("alignment: length mismatch");
  if (std::abs(y.norm() - 1.0) > 1e-8 || std::abs(u_pred.norm() - 1.0) > 1e-8)
    throw std::invalid_argument("alignment: inputs must be unit vectors");
  return std::abs(y.dot(u_pred));
}

}  // namespace tailspec
