// The estimating-equation self-normalized importance sampler (EE-SNIS):
// draw one sample per side, build Psi, take its exact root, and report a
// sandwich standard error together with the recommended budget allocation.
//
// The sandwich divides by |dPsi(mu_hat)|, which is the sample plug-in for the
// normalizing constant c_p; the ratio is therefore computable without ever
// knowing c_p. The per-side spreads sigma_hat_{+,-} are the sample standard
// deviations of the summands w*(y - mu_hat)_{+,-}, centered at their own
// sample means.

#ifndef EESNIS_EE_SNIS_HPP
#define EESNIS_EE_SNIS_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>

#include "eesnis/coupling.hpp"
#include "eesnis/core.hpp"
#include "eesnis/psi.hpp"
#include "eesnis/running_moments.hpp"

namespace eesnis {

struct SandwichVariance {
  double sigma_plus_hat = 0.0;
  double sigma_minus_hat = 0.0;
  double std_error = 0.0;
  double theta_star = 0.5;
  bool degenerate = false;  // both sigma hats zero (zero-variance regime)
};

namespace detail {

inline double plus_summand(const WeightedObservation& o, double mu) {
  return o.y > mu ? o.w * (o.y - mu) : 0.0;
}
inline double minus_summand(const WeightedObservation& o, double mu) {
  return o.y < mu ? o.w * (mu - o.y) : 0.0;
}

inline double psi_slope_at(const PsiFunction& psi, double mu_hat) {
  // At a breakpoint root the scan reached zero from the left segment; use its
  // slope (equivalently, the derivative one ulp into that segment).
  return psi.is_breakpoint(mu_hat) ? psi_derivative(psi, mu_hat, Side::left)
                                   : psi_derivative(psi, mu_hat, Side::right);
}

}  // namespace detail

/// Sandwich variance pieces at the root. Precondition: solve_root succeeded
/// with unique = true (the slope at mu_hat must be nonzero).
inline SandwichVariance sandwich_variance(const PsiFunction& psi, double mu_hat) {
  RunningMoments plus_acc, minus_acc;
  for (std::size_t i = 0; i < psi.plus.size(); ++i) {
    plus_acc.add(psi.plus.y[i] > mu_hat ? psi.plus.w[i] * (psi.plus.y[i] - mu_hat)
                                        : 0.0);
  }
  for (std::size_t i = 0; i < psi.minus.size(); ++i) {
    minus_acc.add(psi.minus.y[i] < mu_hat ? psi.minus.w[i] * (mu_hat - psi.minus.y[i])
                                          : 0.0);
  }
  SandwichVariance out;
  out.sigma_plus_hat = plus_acc.sd();
  out.sigma_minus_hat = minus_acc.sd();
  if (out.sigma_plus_hat == 0.0 && out.sigma_minus_hat == 0.0) {
    out.degenerate = true;
    out.std_error = 0.0;
    out.theta_star = 0.5;
    return out;
  }
  const double dpsi = detail::psi_slope_at(psi, mu_hat);
  if (!(dpsi < 0.0)) {
    throw std::invalid_argument(
        "sandwich_variance: slope at mu_hat is not negative (non-unique root?)");
  }
  const double var_psi = plus_acc.variance() / psi.plus.count +
                         minus_acc.variance() / psi.minus.count;
  out.std_error = std::sqrt(var_psi) / std::fabs(dpsi);
  out.theta_star = out.sigma_plus_hat / (out.sigma_plus_hat + out.sigma_minus_hat);
  return out;
}

inline void apply_sandwich(EeSnisReport& report, const SandwichVariance& s) {
  report.sigma_plus_hat = s.sigma_plus_hat;
  report.sigma_minus_hat = s.sigma_minus_hat;
  report.std_error = s.std_error;
  report.theta_star = s.theta_star;
  report.degenerate_variance = s.degenerate;
}

/// End-to-end EE-SNIS: two independent samples, exact root, sandwich.
/// norm_ratio is c_{q-}/c_{q+} when the proposals are unnormalized with a
/// known constant ratio (default 1 = both normalized).
inline EeSnisReport ee_snis_estimate(const Integrand& f,
                                     const UnnormalizedTarget& target,
                                     const Proposal& q_plus,
                                     const Proposal& q_minus, std::size_t n_plus,
                                     std::size_t n_minus, RandomStream& stream_plus,
                                     RandomStream& stream_minus,
                                     double norm_ratio = 1.0) {
  const WeightedSample sp = draw_weighted_sample(target, f, q_plus, n_plus, stream_plus);
  const WeightedSample sm = draw_weighted_sample(target, f, q_minus, n_minus, stream_minus);
  const PsiFunction psi = build_psi(sp, sm, norm_ratio);
  EeSnisReport report = solve_root(psi);
  if (report.unique) {
    apply_sandwich(report, sandwich_variance(psi, report.mu_hat));
  }
  return report;
}

/// Coupled EE-SNIS: n pairs (x_i+, x_i-) drawn jointly with marginals q_+,
/// q_-. Same root as the independent version on the induced samples; the
/// standard error uses the paired variance
///   (sigma+^2 + sigma-^2 - 2*cov(s+, s-)) / n
/// with the empirical covariance of the plus/minus summand pairs.
inline EeSnisReport coupled_ee_snis_estimate(const Integrand& f,
                                             const UnnormalizedTarget& target,
                                             const CoupledProposal& joint,
                                             std::size_t n, RandomStream& stream,
                                             double norm_ratio = 1.0) {
  if (n == 0) throw std::invalid_argument("coupled_ee_snis_estimate: n must be >= 1");
  RandomStream secondary = stream.spawn(1);
  WeightedSample sp, sm;
  sp.observations.reserve(n);
  sm.observations.reserve(n);
  sp.source_seed = stream.key();
  sm.source_seed = stream.key();
  sp.proposal_id = joint.q1.id;
  sm.proposal_id = joint.q2.id;
  for (std::size_t i = 0; i < n; ++i) {
    const auto [xp, xm] = joint.draw_pair(stream, secondary);
    const double qp = joint.q1.pdf(xp);
    const double qm = joint.q2.pdf(xm);
    if (!(qp > 0.0) || !(qm > 0.0)) {
      throw SupportViolation("coupled draw outside its own marginal support");
    }
    const double wp = importance_weight(target, joint.q1, xp, qp);
    double wm = importance_weight(target, joint.q2, xm, qm);
    if (norm_ratio != 1.0) wm *= norm_ratio;
    sp.observations.push_back({f.eval(xp), wp});
    sm.observations.push_back({f.eval(xm), wm});
  }
  const PsiFunction psi = build_psi(sp, sm, 1.0);
  EeSnisReport report = solve_root(psi);
  if (!report.unique) return report;

  // Paired sandwich from the observations in pair order.
  RunningMoments plus_acc, minus_acc;
  for (std::size_t i = 0; i < n; ++i) {
    plus_acc.add(detail::plus_summand(sp.observations[i], report.mu_hat));
    minus_acc.add(detail::minus_summand(sm.observations[i], report.mu_hat));
  }
  double cov = 0.0;
  if (n >= 2) {
    for (std::size_t i = 0; i < n; ++i) {
      cov += (detail::plus_summand(sp.observations[i], report.mu_hat) - plus_acc.mean) *
             (detail::minus_summand(sm.observations[i], report.mu_hat) - minus_acc.mean);
    }
    cov /= static_cast<double>(n - 1);
  }
  report.pair_covariance = cov;
  SandwichVariance s;
  s.sigma_plus_hat = plus_acc.sd();
  s.sigma_minus_hat = minus_acc.sd();
  if (s.sigma_plus_hat == 0.0 && s.sigma_minus_hat == 0.0) {
    s.degenerate = true;
  } else {
    const double dpsi = detail::psi_slope_at(psi, report.mu_hat);
    if (!(dpsi < 0.0)) {
      throw std::invalid_argument("coupled_ee_snis_estimate: zero slope at root");
    }
    const double var_pair = std::max(
        plus_acc.variance() + minus_acc.variance() - 2.0 * cov, 0.0);
    s.std_error = std::sqrt(var_pair / static_cast<double>(n)) / std::fabs(dpsi);
    s.theta_star = s.sigma_plus_hat / (s.sigma_plus_hat + s.sigma_minus_hat);
  }
  apply_sandwich(report, s);
  return report;
}

/// x -> f(x) - g0(x), for a caller-supplied mean-zero g0; targets the same
/// mu_0 while reshaping the positive/negative split.
inline Integrand recenter(const Integrand& f, const Integrand& g0) {
  check_same_dimension(f.dimension, g0.dimension, "recenter");
  Integrand out;
  out.dimension = f.dimension;
  out.id = f.id + "-" + (g0.id.empty() ? std::string("g0") : g0.id);
  auto fe = f.eval;
  auto ge = g0.eval;
  out.eval = [fe, ge](const Point& x) { return fe(x) - ge(x); };
  return out;
}

}  // namespace eesnis

#endif  // EESNIS_EE_SNIS_HPP
