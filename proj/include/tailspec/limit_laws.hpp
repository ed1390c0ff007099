#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "tailspec/filter_spectrum.hpp"
#include "tailspec/rng.hpp"

namespace tailspec {

// Arrival times of a unit-rate Poisson process: partial sums of iid
// standard exponentials.
struct GammaSequence {
  Eigen::VectorXd arrivals;  // strictly increasing
  std::uint64_t seed = 0;
};

inline GammaSequence sample_gamma_sequence(Eigen::Index count,
                                           std::uint64_t seed) {
  if (count < 1)
    throw std::invalid_argument("sample_gamma_sequence: need count >= 1");
  GammaSequence out;
  out.seed = seed;
  out.arrivals.resize(count);
  double sum = 0.0;
  for (Eigen::Index i = 0; i < count; ++i) {
    CounterRng rng(seed, i, 0);
    sum += -std::log(rng.next_unit());
    out.arrivals(i) = sum;
  }
  return out;
}

inline void require_alpha_range(double alpha, const char* where) {
  if (!(alpha > 0.0 && alpha < 4.0))
    throw std::invalid_argument(std::string(where) +
                                ": tail index must lie in (0, 4)");
}

// The `top` largest points of the limiting eigenvalue point process,
// {Gamma_i^{-4/alpha} v_j^2} over the supplied arrivals and K-eigenvalues.
inline std::vector<double> limit_eigen_points(const KSpectrum& kspec,
                                              const GammaSequence& gammas,
                                              double alpha, Eigen::Index top) {
  require_alpha_range(alpha, "limit_eigen_points");
  if (top < 1)
    throw std::invalid_argument("limit_eigen_points: need top >= 1");
  std::vector<double> points;
  points.reserve(static_cast<std::size_t>(gammas.arrivals.size()) *
                 static_cast<std::size_t>(kspec.eigenvalues.size()));
  for (Eigen::Index i = 0; i < gammas.arrivals.size(); ++i) {
    const double g = std::pow(gammas.arrivals(i), -4.0 / alpha);
    for (Eigen::Index j = 0; j < kspec.eigenvalues.size(); ++j) {
      points.push_back(g * kspec.eigenvalues(j));
    }
  }
  const std::size_t keep =
      std::min(points.size(), static_cast<std::size_t>(top));
  std::partial_sort(points.begin(), points.begin() + keep, points.end(),
                    std::greater<double>());
  points.resize(keep);
  return points;
}

// Limit law of the largest normalized eigenvalue: a Frechet distribution of
// shape alpha/4 rescaled by the top K-eigenvalue,
//   F(x) = exp(-x^{-alpha/4} (v_1^2)^{alpha/4}).
inline double frechet_cdf(double x, double alpha, double v1_sq) {
  require_alpha_range(alpha, "frechet_cdf");
  if (!(x > 0.0)) throw std::invalid_argument("frechet_cdf: need x > 0");
  if (!(v1_sq > 0.0))
    throw std::invalid_argument("frechet_cdf: need v1_sq > 0");
  const double shape = alpha / 4.0;
  return std::exp(-std::pow(x, -shape) * std::pow(v1_sq, shape));
}

// Successive eigenvalue ratios lambda_{i+1}/lambda_i for i = 1..kmax and the
// index attaining the smallest ratio (the spectral-gap factor count
// estimator).  argmin_index is the 1-based i, first index on ties.
struct RatioStatistics {
  Eigen::VectorXd ratios;
  int argmin_index = 1;
};

inline RatioStatistics ratio_statistics(
    const Eigen::Ref<const Eigen::VectorXd>& lambda, int kmax) {
  if (kmax < 1)
    throw std::invalid_argument("ratio_statistics: need kmax >= 1");
  if (lambda.size() < kmax + 1)
    throw std::invalid_argument("ratio_statistics: need kmax + 1 eigenvalues");
  RatioStatistics out;
  out.ratios.resize(kmax);
  for (int i = 0; i < kmax; ++i) {
    if (!(lambda(i + 1) > 0.0))
      throw std::domain_error("ratio_statistics: nonpositive eigenvalue");
    out.ratios(i) = lambda(i + 1) / lambda(i);
    if (out.ratios(i) < out.ratios(out.argmin_index - 1)) {
      out.argmin_index = i + 1;
    }
  }
  return out;
}

// reps independent draws of the limiting ratio vector
// ((Gamma_1/Gamma_2)^{4/alpha}, ..., (Gamma_kmax/Gamma_{kmax+1})^{4/alpha}).
// Row r of the result is one replication.  The transform
// -i * log(ratio_i) * (alpha/4) is standard exponential, independent over i.
inline Eigen::MatrixXd limit_ratio_sample(int kmax, double alpha,
                                          std::uint64_t seed, Eigen::Index reps) {
  require_alpha_range(alpha, "limit_ratio_sample");
  if (kmax < 1 || reps < 1)
    throw std::invalid_argument("limit_ratio_sample: need kmax, reps >= 1");
  Eigen::MatrixXd out(reps, kmax);
  for (Eigen::Index r = 0; r < reps; ++r) {
    const GammaSequence g =
        sample_gamma_sequence(kmax + 1, derive_seed(seed, r));
    for (int i = 0; i < kmax; ++i) {
      out(r, i) = std::pow(g.arrivals(i) / g.arrivals(i + 1), 4.0 / alpha);
    }
  }
  return out;
}

// Truncated-series draws of the limiting trace
//   sum_j v_j^2 sum_{i<=N} Gamma_i^{-4/alpha}   (a positive alpha/4-stable
// variable in the N -> infinity limit), together with the self-normalized
// statistic v_1^2 Gamma_1^{-4/alpha} / series per draw, and an estimate of
// the omitted tail using Gamma_i ~ i.
struct TraceLimitSample {
  Eigen::VectorXd trace_draws;
  Eigen::VectorXd self_normalized;  // in (0, 1]
  double tail_bound = 0.0;
};

inline TraceLimitSample trace_limit_sample(const KSpectrum& kspec, double alpha,
                                           Eigen::Index n_trunc,
                                           std::uint64_t seed,
                                           Eigen::Index reps) {
  require_alpha_range(alpha, "trace_limit_sample");
  if (n_trunc < 1 || reps < 1)
    throw std::invalid_argument("trace_limit_sample: need n_trunc, reps >= 1");
  const double v_total = kspec.eigenvalues.sum();
  const double v1 = kspec.eigenvalues(0);
  TraceLimitSample out;
  out.trace_draws.resize(reps);
  out.self_normalized.resize(reps);
  const double expo = 4.0 / alpha;
  for (Eigen::Index r = 0; r < reps; ++r) {
    const GammaSequence g = sample_gamma_sequence(n_trunc, derive_seed(seed, r));
    double series = 0.0;
    for (Eigen::Index i = 0; i < n_trunc; ++i) {
      series += std::pow(g.arrivals(i), -expo);
    }
    out.trace_draws(r) = v_total * series;
    out.self_normalized(r) =
        v1 * std::pow(g.arrivals(0), -expo) / (v_total * series);
  }
  // sum_{i>N} i^{-4/alpha} <= integral bound N^{1-4/alpha} / (4/alpha - 1).
  out.tail_bound = v_total *
                   std::pow(static_cast<double>(n_trunc), 1.0 - expo) /
                   (expo - 1.0);
  return out;
}

// Two-sided Kolmogorov-Smirnov distance between the empirical CDF of the
// sample and a reference CDF.  The lower-side excursion evaluates the
// reference just below each sample point, so a point mass against a matching
// step CDF scores zero.
inline double ks_distance(std::vector<double> sample,
                          const std::function<double(double)>& cdf) {
  if (sample.empty()) throw std::invalid_argument("ks_distance: empty sample");
  std::sort(sample.begin(), sample.end());
  const double n = static_cast<double>(sample.size());
  double dist = 0.0;
  std::size_t i = 0;
  while (i < sample.size()) {
    std::size_t j = i;
    while (j < sample.size() && sample[j] == sample[i]) ++j;
    const double x = sample[i];
    const double f_hi = static_cast<double>(j) / n;   // F_hat(x)
    const double f_lo = static_cast<double>(i) / n;   // F_hat(x-)
    dist = std::max(dist, f_hi - cdf(x));
    dist = std::max(dist, cdf(std::nextafter(x, -HUGE_VAL)) - f_lo);
    i = j;
  }
  return std::max(dist, 0.0);
}

}  // namespace tailspec
