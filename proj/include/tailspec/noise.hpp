#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>

#include <Eigen/Core>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>

#include "tailspec/rng.hpp"

namespace tailspec {

enum class TailKind { kPareto, kSymmetricPareto, kStudentT, kGaussian };

inline const char* to_string(TailKind kind) {
  switch (kind) {
    case TailKind::kPareto: return "pareto";
    case TailKind::kSymmetricPareto: return "symmetric_pareto";
    case TailKind::kStudentT: return "student_t";
    case TailKind::kGaussian: return "gaussian";
  }
  return "?";
}

// An entry distribution with a power-law tail of index alpha (except for
// the gaussian case, which has no tail index).  For student_t, alpha is the
// number of degrees of freedom, which is also the tail index.
struct TailDistribution {
  TailKind kind = TailKind::kGaussian;
  double alpha = 0.0;    // tail index; ignored for gaussian
  double p_plus = 0.5;   // weight of the right tail (symmetric_pareto)
  double p_minus = 0.5;  // weight of the left tail (symmetric_pareto)
  double scale = 1.0;

  static TailDistribution pareto(double alpha, double scale = 1.0) {
    return validated({TailKind::kPareto, alpha, 1.0, 0.0, scale});
  }
  static TailDistribution symmetric_pareto(double alpha, double p_plus = 0.5,
                                           double scale = 1.0) {
    return validated(
        {TailKind::kSymmetricPareto, alpha, p_plus, 1.0 - p_plus, scale});
  }
  static TailDistribution student_t(double dof, double scale = 1.0) {
    return validated({TailKind::kStudentT, dof, 0.5, 0.5, scale});
  }
  static TailDistribution gaussian(double scale = 1.0) {
    return validated({TailKind::kGaussian, 0.0, 0.5, 0.5, scale});
  }

  void validate() const {
    if (scale <= 0.0) throw std::invalid_argument("noise: scale must be positive");
    if (kind != TailKind::kGaussian && alpha <= 0.0)
      throw std::invalid_argument("noise: tail index alpha must be positive");
    if (kind == TailKind::kSymmetricPareto) {
      if (p_plus < 0.0 || p_minus < 0.0 ||
          std::abs(p_plus + p_minus - 1.0) > 1e-12)
        throw std::invalid_argument(
            "noise: tail weights p_plus, p_minus must be nonnegative and sum to 1");
    }
  }

  bool regularly_varying() const { return kind != TailKind::kGaussian; }

  // Tail index; +infinity for gaussian, so threshold comparisons of the form
  // alpha > 2(1+beta) resolve the way an all-moments distribution should.
  double tail_index() const {
    return regularly_varying() ? alpha : std::numeric_limits<double>::infinity();
  }

  bool has_finite_second_moment() const {
    return kind == TailKind::kGaussian || alpha > 2.0;
  }

  double second_moment() const {
    switch (kind) {
      case TailKind::kGaussian:
        return scale * scale;
      case TailKind::kPareto:
      case TailKind::kSymmetricPareto:
        if (alpha <= 2.0)
          throw std::domain_error("noise: E[Z^2] infinite for alpha <= 2");
        return alpha * scale * scale / (alpha - 2.0);
      case TailKind::kStudentT:
        if (alpha <= 2.0)
          throw std::domain_error("noise: E[Z^2] infinite for dof <= 2");
        return scale * scale * alpha / (alpha - 2.0);
    }
    throw std::logic_error("noise: unknown kind");
  }

  // P(|Z| > x).
  double abs_survival(double x) const {
    if (x < 0.0) return 1.0;
    switch (kind) {
      case TailKind::kPareto:
      case TailKind::kSymmetricPareto:
        return x <= scale ? 1.0 : std::pow(x / scale, -alpha);
      case TailKind::kStudentT: {
        boost::math::students_t_distribution<double> t(alpha);
        return 2.0 * boost::math::cdf(boost::math::complement(t, x / scale));
      }
      case TailKind::kGaussian:
        return std::erfc(x / (scale * std::sqrt(2.0)));
    }
    throw std::logic_error("noise: unknown kind");
  }

  // Inverse CDF; u must lie strictly inside (0, 1).
  double quantile(double u) const {
    switch (kind) {
      case TailKind::kPareto:
        return scale * std::pow(1.0 - u, -1.0 / alpha);
      case TailKind::kSymmetricPareto:
        if (u < p_minus)
          return -scale * std::pow(u / p_minus, -1.0 / alpha);
        return scale * std::pow((1.0 - u) / p_plus, -1.0 / alpha);
      case TailKind::kStudentT: {
        boost::math::students_t_distribution<double> t(alpha);
        return scale * boost::math::quantile(t, u);
      }
      case TailKind::kGaussian: {
        boost::math::normal_distribution<double> g(0.0, scale);
        return boost::math::quantile(g, u);
      }
    }
    throw std::logic_error("noise: unknown kind");
  }

 private:
  static TailDistribution validated(TailDistribution d) {
    d.validate();
    return d;
  }
};

// A matrix of iid draws addressed by logical (row, col) indices, which may
// be negative.  Entry (i, t) is a pure function of (dist, seed, i, t): the
// same logical cell holds the same value in any field that contains it,
// whatever the field's extent.
struct NoiseField {
  Eigen::MatrixXd values;
  std::int64_t row_start = 1;  // logical index of values(0, 0)
  std::int64_t col_start = 1;
  TailDistribution dist;
  std::uint64_t seed = 0;

  double at(std::int64_t row, std::int64_t col) const {
    return values(row - row_start, col - col_start);
  }

  // The block with logical rows row0..row0+rows-1 and cols col0..col0+cols-1.
  Eigen::Block<const Eigen::MatrixXd> block(std::int64_t row0, std::int64_t col0,
                                            Eigen::Index rows,
                                            Eigen::Index cols) const {
    return values.block(row0 - row_start, col0 - col_start, rows, cols);
  }
};

inline NoiseField sample_noise(const TailDistribution& dist, Eigen::Index rows,
                               Eigen::Index cols, std::uint64_t seed,
                               std::int64_t row_start = 1,
                               std::int64_t col_start = 1) {
  dist.validate();
  if (rows < 1 || cols < 1)
    throw std::invalid_argument("sample_noise: dimensions must be >= 1");
  NoiseField field;
  field.values.resize(rows, cols);
  field.row_start = row_start;
  field.col_start = col_start;
  field.dist = dist;
  field.seed = seed;
  for (Eigen::Index r = 0; r < rows; ++r) {
    const std::int64_t row = row_start + r;
    for (Eigen::Index c = 0; c < cols; ++c) {
      CounterRng rng(seed, row, col_start + c);
      field.values(r, c) = dist.quantile(rng.next_unit());
    }
  }
  return field;
}

// The exact (1 - 1/k)-quantile of |Z|, i.e. the solution of
// P(|Z| > a_k) = 1/k.  Requires a regularly varying distribution.
inline double normalizing_constant(const TailDistribution& dist,
                                   std::uint64_t k) {
  dist.validate();
  if (!dist.regularly_varying())
    throw std::invalid_argument("normalizing_constant: not regularly varying");
  if (k < 2) throw std::invalid_argument("normalizing_constant: need k >= 2");
  const double kd = static_cast<double>(k);
  switch (dist.kind) {
    case TailKind::kPareto:
    case TailKind::kSymmetricPareto:
      return dist.scale * std::pow(kd, 1.0 / dist.alpha);
    case TailKind::kStudentT: {
      boost::math::students_t_distribution<double> t(dist.alpha);
      // P(|Z| > x) = 2 (1 - F(x/scale)) by symmetry.
      return dist.scale *
             boost::math::quantile(boost::math::complement(t, 0.5 / kd));
    }
    default:
      throw std::logic_error("normalizing_constant: unknown kind");
  }
}

}  // namespace tailspec
