#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "tailspec/linear_process.hpp"

namespace tailspec {

// Autocovariances of the filter coefficients,
//   gamma_kl = sum_{u,v} h_uv h_{u-k,v-l},
// stored on the symmetric difference set of the support.
struct CoeffAutocovariance {
  Eigen::MatrixXd values;  // values(k - k_min, l - l_min)
  std::int64_t k_min = 0;
  std::int64_t l_min = 0;

  double at(std::int64_t k, std::int64_t l) const {
    if (k < k_min || k >= k_min + values.rows() || l < l_min ||
        l >= l_min + values.cols())
      return 0.0;
    return values(k - k_min, l - l_min);
  }
};

inline CoeffAutocovariance coeff_autocovariance(const FilterCoefficients& filter) {
  filter.validate();
  const std::int64_t dk = filter.coeffs.rows() - 1;
  const std::int64_t dl = filter.coeffs.cols() - 1;
  CoeffAutocovariance out;
  out.k_min = -dk;
  out.l_min = -dl;
  out.values = Eigen::MatrixXd::Zero(2 * dk + 1, 2 * dl + 1);
  for (std::int64_t k = -dk; k <= dk; ++k) {
    for (std::int64_t l = -dl; l <= dl; ++l) {
      double sum = 0.0;
      for (std::int64_t u = filter.k_min; u <= filter.k_max(); ++u) {
        for (std::int64_t v = filter.l_min; v <= filter.l_max(); ++v) {
          sum += filter.at(u, v) * filter.at(u - k, v - l);
        }
      }
      out.values(k + dk, l + dl) = sum;
    }
  }
  return out;
}

// Bivariate spectral density f(x, y) = sum_{k,l} gamma_kl e^{-2 pi i (kx+ly)}.
// The imaginary parts cancel by the symmetry gamma_kl = gamma_{-k,-l}; the
// real value is clipped at zero against roundoff.
inline double spectral_density(const CoeffAutocovariance& gammas, double x,
                               double y) {
  double sum = 0.0;
  for (Eigen::Index r = 0; r < gammas.values.rows(); ++r) {
    for (Eigen::Index c = 0; c < gammas.values.cols(); ++c) {
      const double g = gammas.values(r, c);
      if (g == 0.0) continue;
      const double k = static_cast<double>(gammas.k_min + r);
      const double l = static_cast<double>(gammas.l_min + c);
      sum += g * std::cos(2.0 * std::numbers::pi * (k * x + l * y));
    }
  }
  return std::max(sum, 0.0);
}

struct StieltjesSolution {
  double gamma = 0.0;            // dimension-to-sample ratio p/n
  std::complex<double> z;        // evaluation point, Im z > 0
  Eigen::VectorXd grid;          // quadrature nodes on [0, 1]
  Eigen::VectorXcd h;            // h(x, z) on the grid
  std::complex<double> s;        // integral of h over [0, 1]
  int iterations = 0;
  double residual = 0.0;         // sup-change of the last iteration
};

class SolverError : public std::runtime_error {
 public:
  SolverError(const std::string& what, double residual)
      : std::runtime_error(what), residual_(residual) {}
  double residual() const { return residual_; }

 private:
  double residual_;
};

// Solves the fixed-point equation
//   h(x, z) = ( -z + int_0^1 f(x, t) / (1 + gamma int_0^1 f(u, t) h(u, z) du) dt )^{-1}
// on a trapezoid grid over [0, 1] by damped iteration from h = -1/z (or a
// warm start), and returns s(z) = int_0^1 h(x, z) dx: the Stieltjes
// transform of the limiting spectral distribution of n^{-1} X X'.
inline StieltjesSolution solve_stieltjes(
    const FilterCoefficients& filter, double gamma, std::complex<double> z,
    int grid_points = 64, double tol = 1e-10, int max_iter = 20000,
    double damping = 0.5, const Eigen::VectorXcd* warm_start = nullptr) {
  if (!(z.imag() > 0.0))
    throw std::invalid_argument("solve_stieltjes: need Im z > 0");
  if (!(gamma > 0.0))
    throw std::invalid_argument("solve_stieltjes: need gamma > 0");
  if (grid_points < 2)
    throw std::invalid_argument("solve_stieltjes: need at least 2 grid points");
  if (!(damping > 0.0 && damping <= 1.0))
    throw std::invalid_argument("solve_stieltjes: damping must lie in (0, 1]");

  const int g = grid_points;
  StieltjesSolution out;
  out.gamma = gamma;
  out.z = z;
  out.grid = Eigen::VectorXd::LinSpaced(g, 0.0, 1.0);

  Eigen::VectorXd weights = Eigen::VectorXd::Constant(g, 1.0 / (g - 1));
  weights(0) *= 0.5;
  weights(g - 1) *= 0.5;

  const CoeffAutocovariance gammas = coeff_autocovariance(filter);
  Eigen::MatrixXcd f(g, g);  // f(x_i, t_j)
  for (int i = 0; i < g; ++i) {
    for (int j = 0; j < g; ++j) {
      f(i, j) = spectral_density(gammas, out.grid(i), out.grid(j));
    }
  }
  const Eigen::VectorXcd wc = weights.cast<std::complex<double>>();

  Eigen::VectorXcd h = warm_start && warm_start->size() == g
                           ? *warm_start
                           : Eigen::VectorXcd::Constant(g, -1.0 / z);
  Eigen::VectorXcd inner(g), target(g);
  double change = 0.0;
  for (int it = 1; it <= max_iter; ++it) {
    inner.noalias() = f.transpose() * wc.cwiseProduct(h);
    for (int j = 0; j < g; ++j) {
      inner(j) = weights(j) / (1.0 + gamma * inner(j));
    }
    target.noalias() = f * inner;
    for (int i = 0; i < g; ++i) {
      target(i) = 1.0 / (-z + target(i));
    }
    change = (target - h).cwiseAbs().maxCoeff();
    h = damping * target + (1.0 - damping) * h;
    if (change < tol) {
      out.h = h;
      out.s = wc.cwiseProduct(h).sum();
      out.iterations = it;
      out.residual = change;
      return out;
    }
  }
  throw SolverError("solve_stieltjes: no convergence after " +
                        std::to_string(max_iter) +
                        " iterations (residual " + std::to_string(change) + ")",
                    change);
}

// Closed-form Stieltjes transform of the Marchenko-Pastur law with ratio
// gamma, the iid special case of the fixed-point equation.  The square-root
// branch is chosen per evaluation so that Im s(z) > 0.
inline std::complex<double> mp_stieltjes(double gamma, std::complex<double> z) {
  if (!(z.imag() > 0.0))
    throw std::invalid_argument("mp_stieltjes: need Im z > 0");
  if (!(gamma > 0.0))
    throw std::invalid_argument("mp_stieltjes: need gamma > 0");
  const std::complex<double> one(1.0, 0.0);
  const std::complex<double> w =
      std::sqrt((one + gamma - z) * (one + gamma - z) - 4.0 * gamma);
  const std::complex<double> denom = 2.0 * gamma * z;
  const std::complex<double> s_plus = (one - gamma - z + w) / denom;
  const std::complex<double> s_minus = (one - gamma - z - w) / denom;
  return s_plus.imag() > s_minus.imag() ? s_plus : s_minus;
}

// Density of the Marchenko-Pastur law on its bulk [a, b],
// a = (1 - sqrt(gamma))^2, b = (1 + sqrt(gamma))^2; zero outside.  For
// gamma > 1 the point mass 1 - 1/gamma at zero is reported separately by
// mp_point_mass.
inline double mp_density(double gamma, double x) {
  if (!(gamma > 0.0))
    throw std::invalid_argument("mp_density: need gamma > 0");
  if (x < 0.0) throw std::invalid_argument("mp_density: need x >= 0");
  const double root = std::sqrt(gamma);
  const double a = (1.0 - root) * (1.0 - root);
  const double b = (1.0 + root) * (1.0 + root);
  if (x <= a || x >= b) return 0.0;
  return std::sqrt((b - x) * (x - a)) /
         (2.0 * std::numbers::pi * x * gamma);
}

inline double mp_point_mass(double gamma) {
  if (!(gamma > 0.0))
    throw std::invalid_argument("mp_point_mass: need gamma > 0");
  return std::max(0.0, 1.0 - 1.0 / gamma);
}

// Stieltjes inversion: density(x) ~ Im s(x + i eps) / pi for small eps > 0.
inline std::vector<double> density_from_stieltjes(
    const std::vector<std::complex<double>>& s_values, double eps) {
  if (!(eps > 0.0))
    throw std::invalid_argument("density_from_stieltjes: need eps > 0");
  std::vector<double> out;
  out.reserve(s_values.size());
  for (const auto& s : s_values) {
    out.push_back(s.imag() / std::numbers::pi);
  }
  return out;
}

}  // namespace tailspec
