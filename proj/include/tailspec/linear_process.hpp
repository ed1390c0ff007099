#pragma once

#include <cstdint>
#include <stdexcept>

#include <Eigen/Core>

#include "tailspec/noise.hpp"

namespace tailspec {

// Finite filter (h_kl) stored as a dense block over its support
// [k_min, k_max] x [l_min, l_max]; zero outside.
struct FilterCoefficients {
  Eigen::MatrixXd coeffs;  // coeffs(k - k_min, l - l_min) = h_kl
  std::int64_t k_min = 0;
  std::int64_t l_min = 0;

  std::int64_t k_max() const { return k_min + coeffs.rows() - 1; }
  std::int64_t l_max() const { return l_min + coeffs.cols() - 1; }

  double at(std::int64_t k, std::int64_t l) const {
    if (k < k_min || k > k_max() || l < l_min || l > l_max()) return 0.0;
    return coeffs(k - k_min, l - l_min);
  }

  // Smallest m with h_kl = 0 whenever |k| or |l| exceeds m.
  std::int64_t extent() const {
    std::int64_t m = 0;
    m = std::max(m, std::abs(k_min));
    m = std::max(m, std::abs(k_max()));
    m = std::max(m, std::abs(l_min));
    m = std::max(m, std::abs(l_max()));
    return m;
  }

  void validate() const {
    if (coeffs.size() == 0 || coeffs.cwiseAbs().maxCoeff() == 0.0)
      throw std::invalid_argument("filter: needs at least one nonzero entry");
  }

  // h_kl = d_k * c_l on [0, len(d)) x [0, len(c)).
  static FilterCoefficients separable(const Eigen::VectorXd& d,
                                      const Eigen::VectorXd& c) {
    FilterCoefficients f;
    f.coeffs = d * c.transpose();
    f.validate();
    return f;
  }

  static FilterCoefficients identity() {
    FilterCoefficients f;
    f.coeffs = Eigen::MatrixXd::Ones(1, 1);
    return f;
  }
};

// Realization of the process X_it = sum_{k,l} h_kl Z_{i-k,t-l} for
// i = 1..p and t = 1..n+s_max, together with the noise that produced it.
// The noise extends over the full index box touched by the convolution,
// so X is exact rather than truncated at the boundary.
struct DataMatrix {
  Eigen::MatrixXd values;  // p x (n + s_max)
  Eigen::Index p = 0;
  Eigen::Index n = 0;
  int s_max = 0;
  NoiseField noise;
  FilterCoefficients filter;

  // The noise block aligned with the rows/columns of X: logical rows 1..p,
  // columns 1..n.
  Eigen::Block<const Eigen::MatrixXd> core_noise() const {
    return noise.block(1, 1, p, n);
  }
};

inline DataMatrix generate_process(const FilterCoefficients& filter,
                                   const TailDistribution& dist, Eigen::Index p,
                                   Eigen::Index n, int s_max,
                                   std::uint64_t seed) {
  filter.validate();
  if (p < 1 || n < 1)
    throw std::invalid_argument("generate_process: dimensions must be >= 1");
  if (s_max < 0)
    throw std::invalid_argument("generate_process: s_max must be >= 0");

  const Eigen::Index cols = n + s_max;
  const std::int64_t row_start = 1 - filter.k_max();
  const std::int64_t col_start = 1 - filter.l_max();
  const Eigen::Index noise_rows = p - filter.k_min - row_start + 1;
  const Eigen::Index noise_cols = cols - filter.l_min - col_start + 1;

  DataMatrix out;
  out.noise = sample_noise(dist, noise_rows, noise_cols, seed, row_start, col_start);
  out.filter = filter;
  out.p = p;
  out.n = n;
  out.s_max = s_max;
  out.values = Eigen::MatrixXd::Zero(p, cols);
  for (std::int64_t k = filter.k_min; k <= filter.k_max(); ++k) {
    for (std::int64_t l = filter.l_min; l <= filter.l_max(); ++l) {
      const double h = filter.at(k, l);
      if (h == 0.0) continue;
      // X(i, t) += h * Z(i - k, t - l) for i = 1..p, t = 1..cols.
      out.values.noalias() += h * out.noise.block(1 - k, 1 - l, p, cols);
    }
  }
  return out;
}

// Columns 1+s .. n+s of the realization, the lag-s window.
inline Eigen::Block<const Eigen::MatrixXd> lagged_view(const DataMatrix& x,
                                                       int s) {
  if (s < 0 || s > x.s_max)
    throw std::invalid_argument("lagged_view: lag exceeds s_max");
  return x.values.block(0, s, x.p, x.n);
}

}  // namespace tailspec
