#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "tailspec/filter_spectrum.hpp"
#include "tailspec/linear_process.hpp"
#include "tailspec/noise.hpp"
#include "tailspec/rng.hpp"
#include "tailspec/spectra.hpp"

namespace tailspec {

enum class CenteringMode { kAuto, kOn, kOff };

inline const char* to_string(CenteringMode mode) {
  switch (mode) {
    case CenteringMode::kAuto: return "auto";
    case CenteringMode::kOn: return "on";
    case CenteringMode::kOff: return "off";
  }
  return "?";
}

// Whether sample autocovariances and row sums subtract their expectation.
// In auto mode the rule is: center iff alpha > 2(1 + beta), with
// beta = log p / log n unless a hint overrides it.  The boundary
// alpha == 2(1 + beta) resolves to off and is flagged.
struct CenteringPolicy {
  CenteringMode mode = CenteringMode::kAuto;
  std::optional<double> beta_hint;

  struct Resolution {
    bool center = false;
    double beta = 0.0;
    bool boundary = false;  // alpha == 2(1 + beta) exactly
  };

  Resolution resolve(const TailDistribution& dist, Eigen::Index p,
                     Eigen::Index n) const {
    Resolution res;
    res.beta = beta_hint ? *beta_hint
                         : std::log(static_cast<double>(p)) /
                               std::log(static_cast<double>(n));
    if (mode == CenteringMode::kOn) {
      res.center = true;
    } else if (mode == CenteringMode::kOff) {
      res.center = false;
    } else {
      const double threshold = 2.0 * (1.0 + res.beta);
      const double alpha = dist.tail_index();
      if (alpha == threshold) {
        res.boundary = true;
        res.center = false;
      } else {
        res.center = alpha > threshold;
      }
    }
    return res;
  }
};

// Row sums of squared noise D_i (optionally centered by n E[Z^2]) together
// with the descending order statistics of D_i^2 and the permutation behind
// them: order[i] is the 0-based original row index of the i-th largest D^2.
// Exact ties are randomized over the tied rows with the recorded sub-seed.
struct RowSums {
  Eigen::VectorXd d;
  Eigen::VectorXd d2_sorted;
  std::vector<Eigen::Index> order;
  bool centered = false;
  bool had_ties = false;
  std::uint64_t tie_seed = 0;
};

namespace detail {

// n E[Z^2] * (Toeplitz band whose (j - i)-th diagonal holds the matching
// diagonal sum of M(s)): the entrywise expectation of the lag-s sample
// autocovariance of the process, computed from the filter alone.
inline Eigen::MatrixXd expected_autocov(const FilterCoefficients& filter,
                                        const TailDistribution& dist,
                                        Eigen::Index p, Eigen::Index n, int s) {
  const Eigen::MatrixXd m = build_M(filter, s);
  const double ez2 = dist.second_moment();
  const Eigen::Index r = m.rows();
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(p, p);
  for (std::int64_t delta = -(r - 1); delta <= r - 1; ++delta) {
    double g = 0.0;
    for (Eigen::Index k = std::max<std::int64_t>(0, -delta);
         k < std::min<std::int64_t>(r, r - delta); ++k) {
      g += m(k, k + delta);
    }
    if (g == 0.0) continue;
    const double value = static_cast<double>(n) * ez2 * g;
    for (Eigen::Index i = std::max<std::int64_t>(0, -delta);
         i < std::min<std::int64_t>(p, p - delta); ++i) {
      out(i, i + delta) = value;
    }
  }
  return out;
}

inline void require_second_moment(const TailDistribution& dist) {
  if (!dist.has_finite_second_moment())
    throw std::domain_error(
        "centering requires a finite second moment (alpha > 2)");
}

}  // namespace detail

// Lag-s sample autocovariance X_n(0) X_n(s)', minus its expectation when the
// centering policy resolves to on.
inline Eigen::MatrixXd sample_autocov(const DataMatrix& x, int s,
                                      const CenteringPolicy& centering = {}) {
  const auto res = centering.resolve(x.noise.dist, x.p, x.n);
  Eigen::MatrixXd c = lagged_view(x, 0) * lagged_view(x, s).transpose();
  if (res.center) {
    detail::require_second_moment(x.noise.dist);
    c -= detail::expected_autocov(x.filter, x.noise.dist, x.p, x.n, s);
  }
  return c;
}

// P(s1, s2) = sum_{s=s1}^{s2} C(s) C(s)', a symmetric PSD sum of Gram
// matrices.  Symmetry is exact by construction.
inline Eigen::MatrixXd power_sum(const DataMatrix& x, int s1, int s2,
                                 const CenteringPolicy& centering = {}) {
  if (s1 < 0 || s1 > s2)
    throw std::invalid_argument("power_sum: need 0 <= s1 <= s2");
  Eigen::MatrixXd p = Eigen::MatrixXd::Zero(x.p, x.p);
  for (int s = s1; s <= s2; ++s) {
    const Eigen::MatrixXd c = sample_autocov(x, s, centering);
    p.selfadjointView<Eigen::Lower>().rankUpdate(c);
  }
  p.triangularView<Eigen::StrictlyUpper>() =
      p.transpose().triangularView<Eigen::StrictlyUpper>();
  return p;
}

// A(s1, s2) = sum_{s=s1}^{s2} (C(s) + C(s)')/2, symmetric but possibly
// indefinite.
inline Eigen::MatrixXd symmetrized_sum(const DataMatrix& x, int s1, int s2,
                                       const CenteringPolicy& centering = {}) {
  if (s1 < 0 || s1 > s2)
    throw std::invalid_argument("symmetrized_sum: need 0 <= s1 <= s2");
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(x.p, x.p);
  for (int s = s1; s <= s2; ++s) {
    const Eigen::MatrixXd c = sample_autocov(x, s, centering);
    a += 0.5 * (c + c.transpose());
  }
  return a;
}

// D_i = sum_t z(i, t)^2, centered by n E[Z^2] when the policy resolves to on,
// plus the descending order statistics of D_i^2.
inline RowSums row_sum_squares(const Eigen::Ref<const Eigen::MatrixXd>& z,
                               const TailDistribution& dist,
                               const CenteringPolicy& centering = {},
                               std::uint64_t tie_seed = 0) {
  const Eigen::Index p = z.rows();
  const Eigen::Index n = z.cols();
  if (p < 1 || n < 1)
    throw std::invalid_argument("row_sum_squares: empty block");
  const auto res = centering.resolve(dist, p, n);

  RowSums out;
  out.tie_seed = tie_seed;
  out.centered = res.center;
  out.d = z.array().square().rowwise().sum();
  if (res.center) {
    detail::require_second_moment(dist);
    out.d.array() -= static_cast<double>(n) * dist.second_moment();
  }

  out.order.resize(static_cast<std::size_t>(p));
  std::iota(out.order.begin(), out.order.end(), Eigen::Index{0});
  const Eigen::VectorXd d2 = out.d.array().square();
  std::stable_sort(out.order.begin(), out.order.end(),
                   [&](Eigen::Index a, Eigen::Index b) { return d2(a) > d2(b); });

  // Randomize runs of exactly tied D^2 with a Fisher-Yates shuffle driven by
  // the recorded sub-seed.
  std::size_t run = 0;
  while (run < out.order.size()) {
    std::size_t end = run + 1;
    while (end < out.order.size() &&
           d2(out.order[end]) == d2(out.order[run])) {
      ++end;
    }
    if (end - run > 1) {
      out.had_ties = true;
      CounterRng rng(tie_seed, static_cast<std::int64_t>(run), 0);
      for (std::size_t i = end - 1; i > run; --i) {
        const std::size_t j =
            run + static_cast<std::size_t>(rng.next_u64() % (i - run + 1));
        std::swap(out.order[i], out.order[j]);
      }
    }
    run = end;
  }

  out.d2_sorted.resize(p);
  for (Eigen::Index i = 0; i < p; ++i) out.d2_sorted(i) = d2(out.order[i]);
  return out;
}

// (1/p) sum_i 1/(lambda_i - z) for Im z > 0.
inline std::complex<double> empirical_stieltjes(
    const Eigen::Ref<const Eigen::VectorXd>& eigs, std::complex<double> z) {
  if (!(z.imag() > 0.0))
    throw std::invalid_argument("empirical_stieltjes: need Im z > 0");
  if (eigs.size() == 0)
    throw std::invalid_argument("empirical_stieltjes: empty spectrum");
  std::complex<double> sum = 0.0;
  for (Eigen::Index i = 0; i < eigs.size(); ++i) {
    sum += 1.0 / (eigs(i) - z);
  }
  return sum / static_cast<double>(eigs.size());
}

}  // namespace tailspec
