// The comparison estimators: plain MC, ordinary importance sampling (OIS),
// self-normalized importance sampling (SNIS) with the delta-method standard
// error, positivised OIS (POIS) and its generalized form (GPOIS), the
// double-proposal ratio estimator (DPIS/AMCI), the three- and four-proposal
// positivised ratio estimators (TABI, TABI4) and the generalized TABI
// (GTABI), the coupled generalized SNIS, and the coupling-quality objective.
//
// Ratio estimates are computed in cross-multiplied form, e.g.
//   (S1 * n2) / (S2 * n1),
// so that an exactly-representable common factor in the weights cancels bit
// for bit. Standard errors: exact/plug-in formulas where the estimator has
// one (MC, OIS, SNIS, POIS, GPOIS), a nonparametric bootstrap with 200
// resamples for the multi-sample ratio estimators.

#ifndef EESNIS_ESTIMATORS_HPP
#define EESNIS_ESTIMATORS_HPP

#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "eesnis/core.hpp"
#include "eesnis/coupling.hpp"
#include "eesnis/running_moments.hpp"

namespace eesnis {

struct EstimatorReport {
  double estimate = 0.0;
  std::optional<double> std_error;
  std::size_t n_total = 0;
  std::map<std::string, double> diagnostics;
};

/// g with a known mean theta = E_p g(x); theta is supplied by an oracle or by
/// construction, never estimated internally.
struct CenteringFunction {
  Integrand g;
  double theta = 0.0;
};

inline Integrand positive_part(const Integrand& f) {
  Integrand out;
  out.dimension = f.dimension;
  out.id = f.id + "+";
  auto fe = f.eval;
  out.eval = [fe](const Point& x) { return std::max(fe(x), 0.0); };
  return out;
}

inline Integrand negative_part(const Integrand& f) {
  Integrand out;
  out.dimension = f.dimension;
  out.id = f.id + "-";
  auto fe = f.eval;
  out.eval = [fe](const Point& x) { return std::max(-fe(x), 0.0); };
  return out;
}

namespace detail {

constexpr int kBootstrapResamples = 200;
constexpr std::uint64_t kBootstrapStreamId = 0xB002;

inline void note_ess(EstimatorReport& r, const std::string& key,
                     const std::vector<WeightedObservation>& obs) {
  r.diagnostics[key] = effective_sample_size(obs);
}

// Nonparametric bootstrap of a statistic defined by per-component term sums.
// Components are resampled independently unless `paired` (then all components
// must have equal length and share resample indices). Resamples where the
// statistic is non-finite (e.g. a zero denominator) are skipped; if more than
// half degenerate, no standard error is reported.
template <class EstFromSums>
std::optional<double> bootstrap_se(
    const std::vector<const std::vector<double>*>& components,
    const EstFromSums& est_from_sums, RandomStream stream, bool paired,
    std::map<std::string, double>* diagnostics) {
  RunningMoments acc;
  std::vector<double> sums(components.size());
  int degenerate = 0;
  for (int b = 0; b < kBootstrapResamples; ++b) {
    if (paired) {
      const std::size_t n = components.front()->size();
      std::fill(sums.begin(), sums.end(), 0.0);
      for (std::size_t i = 0; i < n; ++i) {
        const auto idx = static_cast<std::size_t>(stream.uniform01() * static_cast<double>(n));
        const std::size_t j = idx < n ? idx : n - 1;
        for (std::size_t c = 0; c < components.size(); ++c) {
          sums[c] += (*components[c])[j];
        }
      }
    } else {
      for (std::size_t c = 0; c < components.size(); ++c) {
        const auto& comp = *components[c];
        const std::size_t n = comp.size();
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
          const auto idx = static_cast<std::size_t>(stream.uniform01() * static_cast<double>(n));
          s += comp[idx < n ? idx : n - 1];
        }
        sums[c] = s;
      }
    }
    const double est = est_from_sums(sums);
    if (std::isfinite(est)) {
      acc.add(est);
    } else {
      ++degenerate;
    }
  }
  if (diagnostics && degenerate > 0) {
    (*diagnostics)["bootstrap_degenerate"] = degenerate;
  }
  if (acc.count < kBootstrapResamples / 2 || acc.count < 2) return std::nullopt;
  return acc.sd();
}

}  // namespace detail

// ---------------------------------------------------------------------------

/// Plain Monte Carlo; oracle problems only (requires a sampleable normalized p).
inline EstimatorReport mc_estimate(const Integrand& f, const Proposal& p_sampler,
                                   std::size_t n, RandomStream& stream) {
  check_same_dimension(f.dimension, p_sampler.dimension, "mc_estimate");
  if (n == 0) throw std::invalid_argument("mc_estimate: n must be >= 1");
  RunningMoments acc;
  for (std::size_t i = 0; i < n; ++i) {
    acc.add(f.eval(p_sampler.draw(stream)));
  }
  EstimatorReport r;
  r.estimate = acc.mean;
  r.n_total = n;
  if (n >= 2) {
    r.std_error = acc.sd() / std::sqrt(static_cast<double>(n));
  } else {
    r.diagnostics["se_undefined"] = 1.0;
  }
  return r;
}

/// OIS: mean of f(x) p(x)/q(x) under draws from q. Requires a normalized p.
inline EstimatorReport ois_estimate(const Integrand& f, const Proposal& p,
                                    const Proposal& q, std::size_t n,
                                    RandomStream& stream) {
  check_same_dimension(f.dimension, q.dimension, "ois_estimate");
  if (n == 0) throw std::invalid_argument("ois_estimate: n must be >= 1");
  RunningMoments acc;
  std::vector<WeightedObservation> ratios;
  ratios.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Point x = q.draw(stream);
    const double qx = q.pdf(x);
    const double px = p.pdf(x);
    const double fx = f.eval(x);
    if (!(qx > 0.0)) {
      if (fx * px != 0.0) {
        throw SupportViolation("ois_estimate: q(x) = 0 at a point with f*p != 0");
      }
      ratios.push_back({fx, 0.0});
      acc.add(0.0);
      continue;
    }
    const double w = px / qx;
    const double term = fx * w;
    if (!std::isfinite(term)) {
      throw NonFiniteWeight("ois_estimate: non-finite summand");
    }
    ratios.push_back({fx, w});
    acc.add(term);
  }
  EstimatorReport r;
  r.estimate = acc.mean;
  r.n_total = n;
  if (n >= 2) {
    r.std_error = acc.sd() / std::sqrt(static_cast<double>(n));
  } else {
    r.diagnostics["se_undefined"] = 1.0;
  }
  detail::note_ess(r, "ess", ratios);
  return r;
}

/// SNIS: sum f(x_i) w_i / sum w_i with w = p_u/q. Standard error is the
/// delta-method plug-in sqrt(sum w_i^2 (y_i - mu)^2) / sum w_i.
inline EstimatorReport snis_estimate(const Integrand& f,
                                     const UnnormalizedTarget& target,
                                     const Proposal& q, std::size_t n,
                                     RandomStream& stream) {
  const WeightedSample sample = draw_weighted_sample(target, f, q, n, stream);
  WeightedMean wm;
  for (const auto& o : sample.observations) wm.add(o.y, o.w);
  if (!(wm.weight_sum > 0.0)) {
    throw ZeroWeightSum("snis_estimate: all weights are zero (every draw in a hole)");
  }
  EstimatorReport r;
  r.estimate = wm.mean;
  r.n_total = n;
  double s2 = 0.0;
  for (const auto& o : sample.observations) {
    const double d = o.y - wm.mean;
    s2 += o.w * o.w * d * d;
  }
  if (n >= 2) {
    r.std_error = std::sqrt(s2) / wm.weight_sum;
  } else {
    r.diagnostics["se_undefined"] = 1.0;
  }
  detail::note_ess(r, "ess", sample.observations);
  r.diagnostics["sum_w"] = wm.weight_sum;
  return r;
}

/// POIS: OIS on f_+ under q_+ minus OIS on f_- under q_-, independent streams.
inline EstimatorReport pois_estimate(const Integrand& f, const Proposal& p,
                                     const Proposal& q_plus, const Proposal& q_minus,
                                     std::size_t n_plus, std::size_t n_minus,
                                     RandomStream& stream_plus,
                                     RandomStream& stream_minus) {
  const EstimatorReport plus = ois_estimate(positive_part(f), p, q_plus, n_plus, stream_plus);
  const EstimatorReport minus = ois_estimate(negative_part(f), p, q_minus, n_minus, stream_minus);
  EstimatorReport r;
  r.estimate = plus.estimate - minus.estimate;
  r.n_total = n_plus + n_minus;
  if (plus.std_error && minus.std_error) {
    r.std_error = std::sqrt(*plus.std_error * *plus.std_error +
                            *minus.std_error * *minus.std_error);
  } else {
    r.diagnostics["se_undefined"] = 1.0;
  }
  r.diagnostics["estimate_plus"] = plus.estimate;
  r.diagnostics["estimate_minus"] = minus.estimate;
  return r;
}

/// GPOIS: POIS applied to f - g, plus the known mean of g.
inline EstimatorReport gpois_estimate(const Integrand& f, const Proposal& p,
                                      const CenteringFunction& g,
                                      const Proposal& q_plus, const Proposal& q_minus,
                                      std::size_t n_plus, std::size_t n_minus,
                                      RandomStream& stream_plus,
                                      RandomStream& stream_minus) {
  Integrand h;
  h.dimension = f.dimension;
  h.id = f.id + "-" + g.g.id;
  auto fe = f.eval;
  auto ge = g.g.eval;
  h.eval = [fe, ge](const Point& x) { return fe(x) - ge(x); };
  EstimatorReport r = pois_estimate(h, p, q_plus, q_minus, n_plus, n_minus,
                                    stream_plus, stream_minus);
  r.estimate = r.estimate + g.theta;
  return r;
}

namespace detail {

// Per-sample numerator/denominator terms for one ratio-estimator sample.
struct RatioSample {
  std::vector<double> terms;  // the per-draw summands
  double sum = 0.0;
  std::vector<WeightedObservation> obs;  // for diagnostics
};

template <class TermFn>
RatioSample collect_terms(const Proposal& q, std::size_t n, RandomStream& stream,
                          const TermFn& term_of_point) {
  RatioSample s;
  s.terms.reserve(n);
  s.obs.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Point x = q.draw(stream);
    const double qx = q.pdf(x);
    if (!(qx > 0.0)) {
      throw SupportViolation("ratio estimator: q(x) <= 0 on its own draw");
    }
    const auto [term, w] = term_of_point(x, qx);
    if (!std::isfinite(term)) {
      throw NonFiniteWeight("ratio estimator: non-finite summand");
    }
    s.terms.push_back(term);
    s.sum += term;
    s.obs.push_back({term, w});
  }
  return s;
}

}  // namespace detail

/// DPIS/AMCI: independent numerator and denominator samples,
///   [mean of f p_u/q1 over S1] / [mean of p_u/q2 over S2].
inline EstimatorReport dpis_estimate(const Integrand& f,
                                     const UnnormalizedTarget& target,
                                     const Proposal& q1, const Proposal& q2,
                                     std::size_t n1, std::size_t n2,
                                     RandomStream& s1, RandomStream& s2) {
  if (n1 == 0 || n2 == 0) throw std::invalid_argument("dpis_estimate: sizes must be >= 1");
  WeightedMean wm;  // weighted mean of y under w1, so constants pass through
  double w1_sum = 0.0;
  std::vector<double> num_terms;
  num_terms.reserve(n1);
  std::vector<WeightedObservation> num_obs;
  num_obs.reserve(n1);
  for (std::size_t i = 0; i < n1; ++i) {
    const Point x = q1.draw(s1);
    const double qx = q1.pdf(x);
    if (!(qx > 0.0)) throw SupportViolation("dpis_estimate: q1(x) <= 0 on its own draw");
    const double w = importance_weight(target, q1, x, qx);
    const double y = f.eval(x);
    if (w > 0.0 && !std::isfinite(y)) {
      throw NonFiniteWeight("dpis_estimate: integrand non-finite at positive weight");
    }
    wm.add(y, w);
    w1_sum += w;
    num_terms.push_back(w > 0.0 ? y * w : 0.0);
    num_obs.push_back({y, w});
  }
  auto den = detail::collect_terms(q2, n2, s2, [&](const Point& x, double qx) {
    const double w = importance_weight(target, q2, x, qx);
    return std::pair<double, double>(w, w);
  });
  if (!(den.sum > 0.0)) {
    throw ZeroWeightSum("dpis_estimate: denominator sample has zero weight sum");
  }
  EstimatorReport r;
  r.estimate = (wm.mean * (w1_sum / den.sum)) *
               (static_cast<double>(n2) / static_cast<double>(n1));
  r.n_total = n1 + n2;
  const double dn1 = static_cast<double>(n1);
  const double dn2 = static_cast<double>(n2);
  r.std_error = detail::bootstrap_se(
      {&num_terms, &den.terms},
      [dn1, dn2](const std::vector<double>& sums) {
        return (sums[0] * dn2) / (sums[1] * dn1);
      },
      s1.spawn(detail::kBootstrapStreamId), /*paired=*/false, &r.diagnostics);
  detail::note_ess(r, "ess_q1", num_obs);
  detail::note_ess(r, "ess_q2", den.obs);
  return r;
}

namespace detail {

// Shared TABI/TABI4/GTABI arithmetic:
//   (S1*n3)/(S3*n1) - (S2*n4)/(S4*n2).
// TABI passes S4 = S3, n4 = n3, which makes the four-proposal estimator with
// q3 = q4 on a shared stream agree bit for bit with the three-proposal one.
inline double positivised_ratio(double s1, double n1, double s2, double n2,
                                double s3, double n3, double s4, double n4) {
  return (s1 * n3) / (s3 * n1) - (s2 * n4) / (s4 * n2);
}

template <class PlusFn, class MinusFn>
EstimatorReport tabi_like(const UnnormalizedTarget& target, const PlusFn& h_plus,
                          const MinusFn& h_minus, const Proposal& q1,
                          const Proposal& q2, const Proposal& q3,
                          const Proposal* q4, std::size_t n1, std::size_t n2,
                          std::size_t n3, std::size_t n4, RandomStream& s1,
                          RandomStream& s2, RandomStream& s3, RandomStream* s4,
                          double theta) {
  auto num_plus = collect_terms(q1, n1, s1, [&](const Point& x, double qx) {
    const double w = importance_weight(target, q1, x, qx);
    return std::pair<double, double>(w > 0.0 ? h_plus(x) * w : 0.0, w);
  });
  auto num_minus = collect_terms(q2, n2, s2, [&](const Point& x, double qx) {
    const double w = importance_weight(target, q2, x, qx);
    return std::pair<double, double>(w > 0.0 ? h_minus(x) * w : 0.0, w);
  });
  auto den3 = collect_terms(q3, n3, s3, [&](const Point& x, double qx) {
    const double w = importance_weight(target, q3, x, qx);
    return std::pair<double, double>(w, w);
  });
  detail::RatioSample den4;
  const bool has_q4 = (q4 != nullptr);
  if (has_q4) {
    den4 = collect_terms(*q4, n4, *s4, [&](const Point& x, double qx) {
      const double w = importance_weight(target, *q4, x, qx);
      return std::pair<double, double>(w, w);
    });
  }
  const double S3 = den3.sum;
  const double S4 = has_q4 ? den4.sum : den3.sum;
  if (!(S3 > 0.0) || !(S4 > 0.0)) {
    throw ZeroWeightSum("tabi estimator: denominator sample has zero weight sum");
  }
  const double d1 = static_cast<double>(n1);
  const double d2 = static_cast<double>(n2);
  const double d3 = static_cast<double>(n3);
  const double d4 = static_cast<double>(has_q4 ? n4 : n3);
  EstimatorReport r;
  r.estimate = positivised_ratio(num_plus.sum, d1, num_minus.sum, d2, S3, d3, S4, d4);
  if (theta != 0.0) r.estimate += theta;
  r.n_total = n1 + n2 + n3 + (has_q4 ? n4 : 0);

  std::vector<const std::vector<double>*> comps = {&num_plus.terms, &num_minus.terms,
                                                   &den3.terms};
  if (has_q4) comps.push_back(&den4.terms);
  r.std_error = bootstrap_se(
      comps,
      [=](const std::vector<double>& sums) {
        const double b3 = sums[2];
        const double b4 = has_q4 ? sums[3] : sums[2];
        if (!(b3 > 0.0) || !(b4 > 0.0)) {
          return std::numeric_limits<double>::quiet_NaN();
        }
        double est = positivised_ratio(sums[0], d1, sums[1], d2, b3, d3, b4, d4);
        if (theta != 0.0) est += theta;
        return est;
      },
      s1.spawn(kBootstrapStreamId), /*paired=*/false, &r.diagnostics);
  note_ess(r, "ess_q1", num_plus.obs);
  note_ess(r, "ess_q2", num_minus.obs);
  note_ess(r, "ess_q3", den3.obs);
  if (has_q4) note_ess(r, "ess_q4", den4.obs);
  return r;
}

}  // namespace detail

/// TABI: (positive-part OIS sum - negative-part OIS sum) / (p_u/q3 mean).
inline EstimatorReport tabi_estimate(const Integrand& f,
                                     const UnnormalizedTarget& target,
                                     const Proposal& q1, const Proposal& q2,
                                     const Proposal& q3, std::size_t n1,
                                     std::size_t n2, std::size_t n3,
                                     RandomStream& s1, RandomStream& s2,
                                     RandomStream& s3) {
  auto fe = f.eval;
  return detail::tabi_like(
      target, [fe](const Point& x) { return std::max(fe(x), 0.0); },
      [fe](const Point& x) { return std::max(-fe(x), 0.0); }, q1, q2, q3, nullptr,
      n1, n2, n3, 0, s1, s2, s3, nullptr, 0.0);
}

/// TABI with two denominator approximations q3 and q4.
inline EstimatorReport tabi4_estimate(const Integrand& f,
                                      const UnnormalizedTarget& target,
                                      const Proposal& q1, const Proposal& q2,
                                      const Proposal& q3, const Proposal& q4,
                                      std::size_t n1, std::size_t n2,
                                      std::size_t n3, std::size_t n4,
                                      RandomStream& s1, RandomStream& s2,
                                      RandomStream& s3, RandomStream& s4) {
  auto fe = f.eval;
  return detail::tabi_like(
      target, [fe](const Point& x) { return std::max(fe(x), 0.0); },
      [fe](const Point& x) { return std::max(-fe(x), 0.0); }, q1, q2, q3, &q4, n1,
      n2, n3, n4, s1, s2, s3, &s4, 0.0);
}

/// GTABI: TABI applied to f - g, plus the known mean of g.
inline EstimatorReport gtabi_estimate(const Integrand& f,
                                      const UnnormalizedTarget& target,
                                      const CenteringFunction& g,
                                      const Proposal& q1, const Proposal& q2,
                                      const Proposal& q3, std::size_t n1,
                                      std::size_t n2, std::size_t n3,
                                      RandomStream& s1, RandomStream& s2,
                                      RandomStream& s3) {
  auto fe = f.eval;
  auto ge = g.g.eval;
  return detail::tabi_like(
      target,
      [fe, ge](const Point& x) { return std::max(fe(x) - ge(x), 0.0); },
      [fe, ge](const Point& x) { return std::max(-(fe(x) - ge(x)), 0.0); }, q1, q2,
      q3, nullptr, n1, n2, n3, 0, s1, s2, s3, nullptr, g.theta);
}

/// Generalized SNIS over jointly drawn pairs (x_i, z_i):
///   [mean of f(x_i) p_u(x_i)/q1(x_i)] / [mean of p_u(z_i)/q2(z_i)].
/// With the identity coupling and q1 = q2 this is exactly snis_estimate.
inline EstimatorReport coupled_snis_estimate(const Integrand& f,
                                             const UnnormalizedTarget& target,
                                             const CoupledProposal& joint,
                                             std::size_t n, RandomStream& stream) {
  if (n == 0) throw std::invalid_argument("coupled_snis_estimate: n must be >= 1");
  RandomStream secondary = stream.spawn(1);
  WeightedMean wm;
  double w1_sum = 0.0;
  double w2_sum = 0.0;
  std::vector<double> num_terms, den_terms;
  num_terms.reserve(n);
  den_terms.reserve(n);
  std::vector<WeightedObservation> num_obs, den_obs;
  num_obs.reserve(n);
  den_obs.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto [x, z] = joint.draw_pair(stream, secondary);
    const double q1x = joint.q1.pdf(x);
    const double q2z = joint.q2.pdf(z);
    if (!(q1x > 0.0) || !(q2z > 0.0)) {
      throw SupportViolation("coupled_snis_estimate: draw outside marginal support");
    }
    const double w1 = importance_weight(target, joint.q1, x, q1x);
    const double w2 = importance_weight(target, joint.q2, z, q2z);
    const double y = f.eval(x);
    if (w1 > 0.0 && !std::isfinite(y)) {
      throw NonFiniteWeight("coupled_snis_estimate: integrand non-finite");
    }
    wm.add(y, w1);
    w1_sum += w1;
    w2_sum += w2;
    num_terms.push_back(w1 > 0.0 ? y * w1 : 0.0);
    den_terms.push_back(w2);
    num_obs.push_back({y, w1});
    den_obs.push_back({0.0, w2});
  }
  if (!(w2_sum > 0.0)) {
    throw ZeroWeightSum("coupled_snis_estimate: denominator weight sum is zero");
  }
  EstimatorReport r;
  r.estimate = (wm.mean * (w1_sum / w2_sum)) * 1.0;
  r.n_total = n;
  const double dn = static_cast<double>(n);
  r.std_error = detail::bootstrap_se(
      {&num_terms, &den_terms},
      [dn](const std::vector<double>& sums) { return (sums[0] * dn) / (sums[1] * dn); },
      stream.spawn(detail::kBootstrapStreamId), /*paired=*/true, &r.diagnostics);
  detail::note_ess(r, "ess_q1", num_obs);
  detail::note_ess(r, "ess_q2", den_obs);
  return r;
}

/// Monte Carlo estimate of the coupling-quality objective
///   E_q[ q1*(x) q2*(z) / (q1(x) q2(z)) ]
/// for oracle-constructed optimal marginals q1*, q2*. Reported and compared
/// only; never optimized here.
inline double coupling_objective(const CoupledProposal& joint,
                                 const Proposal& q1_star, const Proposal& q2_star,
                                 std::size_t n, RandomStream& stream) {
  if (n == 0) throw std::invalid_argument("coupling_objective: n must be >= 1");
  RandomStream secondary = stream.spawn(1);
  RunningMoments acc;
  for (std::size_t i = 0; i < n; ++i) {
    const auto [x, z] = joint.draw_pair(stream, secondary);
    const double num = q1_star.pdf(x) * q2_star.pdf(z);
    const double den = joint.q1.pdf(x) * joint.q2.pdf(z);
    acc.add(num / den);
  }
  return acc.mean;
}

}  // namespace eesnis

#endif  // EESNIS_ESTIMATORS_HPP
