// The sample estimating equation
//
//   Psi(mu) = (1/n+) sum_i w_i+ (y_i+ - mu)_+  -  (1/n-) sum_i w_i- (mu - y_i-)_+
//
// built from two weighted samples (y = f(x), w = p_u(x)/q(x)). Psi is
// continuous, nonincreasing and piecewise linear with breakpoints at the
// sampled y values, so after one O(n log n) sort the root is available in
// closed form per segment: on each segment Psi(mu) = A - B*mu with A, B read
// off prefix sums and B >= 0. No iterative solver, no tolerance knob.
//
// Existence requires positive total weight on both sides; uniqueness is
// governed by the dichotomy f_bar > f_underbar, where f_bar is the largest
// plus-side y with positive weight and f_underbar the smallest minus-side y
// with positive weight. When f_bar <= f_underbar, {Psi = 0} is the interval
// [f_bar, f_underbar]; its midpoint is returned together with the interval.

#ifndef EESNIS_PSI_HPP
#define EESNIS_PSI_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <optional>
#include <utility>
#include <vector>

#include "eesnis/core.hpp"

namespace eesnis {

namespace detail {

// One side of the estimating equation: y ascending with prefix sums of w and
// of w*y (cum arrays have size n+1, cum[i] = sum over the first i entries).
struct PsiSide {
  std::vector<double> y;
  std::vector<double> w;
  std::vector<double> cum_w;
  std::vector<double> cum_wy;
  double count = 0.0;  // n+ or n- as the averaging divisor

  void build(const std::vector<WeightedObservation>& obs, double weight_scale) {
    const std::size_t n = obs.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&obs](std::size_t a, std::size_t b) {
      return obs[a].y < obs[b].y;
    });
    y.resize(n);
    w.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      y[i] = obs[order[i]].y;
      w[i] = (weight_scale == 1.0) ? obs[order[i]].w : weight_scale * obs[order[i]].w;
    }
    cum_w.assign(n + 1, 0.0);
    cum_wy.assign(n + 1, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      cum_w[i + 1] = cum_w[i] + w[i];
      cum_wy[i + 1] = cum_wy[i] + w[i] * y[i];
    }
    count = static_cast<double>(n);
  }

  std::size_t size() const { return y.size(); }
  double total_w() const { return cum_w.back(); }

  // Suffix sums over entries with y > mu.
  std::size_t first_above(double mu) const {
    return static_cast<std::size_t>(
        std::upper_bound(y.begin(), y.end(), mu) - y.begin());
  }
  // Prefix count of entries with y < mu.
  std::size_t count_below(double mu) const {
    return static_cast<std::size_t>(
        std::lower_bound(y.begin(), y.end(), mu) - y.begin());
  }
  double suffix_w(std::size_t idx) const { return cum_w.back() - cum_w[idx]; }
  double suffix_wy(std::size_t idx) const { return cum_wy.back() - cum_wy[idx]; }
};

}  // namespace detail

struct PsiFunction {
  detail::PsiSide plus;
  detail::PsiSide minus;
  std::vector<double> breakpoints;  // sorted unique union of all stored y
  std::optional<double> f_bar;       // max plus-side y with w > 0
  std::optional<double> f_underbar;  // min minus-side y with w > 0

  std::size_t n_plus() const { return plus.size(); }
  std::size_t n_minus() const { return minus.size(); }

  bool is_breakpoint(double mu) const {
    return std::binary_search(breakpoints.begin(), breakpoints.end(), mu);
  }
};

/// Builds the sorted-breakpoint representation from the two samples.
/// norm_ratio is c_{q-}/c_{q+} for unnormalized proposal pairs with a known
/// constant ratio; it scales the minus-side weights (default 1).
inline PsiFunction build_psi(const WeightedSample& sample_plus,
                             const WeightedSample& sample_minus,
                             double norm_ratio = 1.0) {
  if (sample_plus.observations.empty() || sample_minus.observations.empty()) {
    throw std::invalid_argument("build_psi: both samples must be non-empty");
  }
  PsiFunction psi;
  psi.plus.build(sample_plus.observations, 1.0);
  psi.minus.build(sample_minus.observations, norm_ratio);
  psi.breakpoints.reserve(psi.plus.size() + psi.minus.size());
  std::merge(psi.plus.y.begin(), psi.plus.y.end(), psi.minus.y.begin(),
             psi.minus.y.end(), std::back_inserter(psi.breakpoints));
  psi.breakpoints.erase(
      std::unique(psi.breakpoints.begin(), psi.breakpoints.end()),
      psi.breakpoints.end());
  for (std::size_t i = psi.plus.size(); i-- > 0;) {
    if (psi.plus.w[i] > 0.0) {
      psi.f_bar = psi.plus.y[i];
      break;
    }
  }
  for (std::size_t i = 0; i < psi.minus.size(); ++i) {
    if (psi.minus.w[i] > 0.0) {
      psi.f_underbar = psi.minus.y[i];
      break;
    }
  }
  return psi;
}

/// Exact value of Psi at mu via the prefix sums.
inline double psi_eval(const PsiFunction& psi, double mu) {
  const auto& P = psi.plus;
  const auto& M = psi.minus;
  const std::size_t pi = P.first_above(mu);
  const std::size_t mi = M.count_below(mu);
  const double plus_term = (P.suffix_wy(pi) - mu * P.suffix_w(pi)) / P.count;
  const double minus_term = (M.cum_wy[mi] - mu * M.cum_w[mi]) / M.count;
  return plus_term + minus_term;
}

enum class Side { left, right };

/// One-sided derivative (slope of the adjoining linear segment).
inline double psi_derivative(const PsiFunction& psi, double mu, Side side) {
  const auto& P = psi.plus;
  const auto& M = psi.minus;
  std::size_t pi, mi;
  if (side == Side::left) {
    pi = P.count_below(mu);  // plus entries with y >= mu stay active
    mi = M.count_below(mu);
  } else {
    pi = P.first_above(mu);
    mi = M.first_above(mu);  // minus entries with y <= mu are active
  }
  return -(P.suffix_w(pi) / P.count + M.cum_w[mi] / M.count);
}

/// Derivative at a non-breakpoint mu; throws AtBreakpoint when mu coincides
/// with a stored y (request a one-sided derivative there instead).
inline double psi_derivative(const PsiFunction& psi, double mu) {
  if (psi.is_breakpoint(mu)) {
    throw AtBreakpoint("psi_derivative: mu is a breakpoint; specify a side");
  }
  return psi_derivative(psi, mu, Side::right);
}

/// Root report. Variance fields are filled in by sandwich_variance (NaN until
/// then); the root fields come from solve_root.
struct EeSnisReport {
  double mu_hat = std::numeric_limits<double>::quiet_NaN();
  double psi_at_root = std::numeric_limits<double>::quiet_NaN();
  std::optional<double> f_bar;
  std::optional<double> f_underbar;
  bool unique = false;
  std::optional<std::pair<double, double>> root_interval;  // set when !unique
  double psi_dot_at_root = std::numeric_limits<double>::quiet_NaN();
  std::size_t n_plus = 0;
  std::size_t n_minus = 0;
  // Sandwich block:
  double sigma_plus_hat = std::numeric_limits<double>::quiet_NaN();
  double sigma_minus_hat = std::numeric_limits<double>::quiet_NaN();
  double std_error = std::numeric_limits<double>::quiet_NaN();
  double theta_star = std::numeric_limits<double>::quiet_NaN();
  bool degenerate_variance = false;
  std::optional<double> pair_covariance;  // coupled estimates only
};

/// Exact root by segment scan. Requires positive total weight on both sides
/// (otherwise Psi has no sign change and NonExistence is thrown).
inline EeSnisReport solve_root(const PsiFunction& psi) {
  const auto& P = psi.plus;
  const auto& M = psi.minus;
  if (!(P.total_w() > 0.0)) {
    throw NonExistence("solve_root: plus-side sample has no positive weight");
  }
  if (!(M.total_w() > 0.0)) {
    throw NonExistence("solve_root: minus-side sample has no positive weight");
  }

  EeSnisReport report;
  report.n_plus = P.size();
  report.n_minus = M.size();
  report.f_bar = psi.f_bar;
  report.f_underbar = psi.f_underbar;
  report.unique = *psi.f_bar > *psi.f_underbar;

  const auto& t = psi.breakpoints;
  const std::size_t m = t.size();

  // Closed-form root of the segment whose lower end (exclusive) is `lo`;
  // lo = -inf selects the leftmost segment. The cross-multiplied form keeps
  // the estimate exactly invariant to a common factor in the weights.
  const auto segment_root = [&](double lo, std::size_t* plus_idx_out,
                                std::size_t* minus_idx_out) {
    const std::size_t pi = std::isinf(lo) ? 0 : P.first_above(lo);
    const std::size_t mi = std::isinf(lo) ? 0 : M.first_above(lo);
    if (plus_idx_out) *plus_idx_out = pi;
    if (minus_idx_out) *minus_idx_out = mi;
    const double num = M.count * P.suffix_wy(pi) + P.count * M.cum_wy[mi];
    const double den = M.count * P.suffix_w(pi) + P.count * M.cum_w[mi];
    return std::pair<double, double>(num / den, den);  // (root, scaled slope)
  };

  // Psi at successive breakpoints, stopping at the first non-positive value.
  std::size_t j = m;
  double psi_j = 0.0;
  for (std::size_t k = 0; k < m; ++k) {
    psi_j = psi_eval(psi, t[k]);
    if (psi_j <= 0.0) {
      j = k;
      break;
    }
  }

  if (j == m) {
    // Still positive at the last breakpoint: root lies right of all y values,
    // where only the minus side is active.
    report.mu_hat = M.cum_wy.back() / M.cum_w.back();
    if (report.mu_hat < t.back()) report.mu_hat = t.back();
    report.psi_dot_at_root = -(M.total_w() / M.count);
  } else if (psi_j < 0.0) {
    if (j == 0) {
      // Negative already at the first breakpoint: root left of all y values.
      auto [root, den] = segment_root(-std::numeric_limits<double>::infinity(),
                                      nullptr, nullptr);
      report.mu_hat = std::min(root, t[0]);
      report.psi_dot_at_root = -(P.total_w() / P.count);
    } else {
      auto [root, den] = segment_root(t[j - 1], nullptr, nullptr);
      report.mu_hat = std::clamp(root, t[j - 1], t[j]);
      report.psi_dot_at_root = -den / (P.count * M.count);
    }
  } else {
    // Psi hits zero exactly at breakpoint j; find the extent of the zero set.
    std::size_t j2 = j;
    while (j2 + 1 < m && psi_eval(psi, t[j2 + 1]) == 0.0) ++j2;
    if (j2 > j || !report.unique) {
      report.root_interval = std::make_pair(t[j], t[j2]);
      report.mu_hat = 0.5 * (t[j] + t[j2]);
      report.psi_dot_at_root = 0.0;
      if (j2 > j) report.unique = false;
    } else {
      // Unique root landing exactly on a breakpoint. The sign change was
      // produced inside the segment to its left; use that segment's slope.
      report.mu_hat = t[j];
      if (j == 0) {
        report.psi_dot_at_root = -(P.total_w() / P.count);
      } else {
        const std::size_t pi = P.first_above(t[j - 1]);
        const std::size_t mi = M.first_above(t[j - 1]);
        report.psi_dot_at_root = -(P.suffix_w(pi) / P.count + M.cum_w[mi] / M.count);
      }
    }
  }

  report.psi_at_root = psi_eval(psi, report.mu_hat);
  return report;
}

}  // namespace eesnis

#endif  // EESNIS_PSI_HPP
