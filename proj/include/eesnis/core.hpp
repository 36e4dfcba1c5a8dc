// Domain types shared by every estimator: unnormalized targets, normalized
// proposals, integrands, and weighted samples.
//
// Estimators only ever see p_u through UnnormalizedTarget::eval; normalizing
// constants are oracle-side knowledge. Weights are computed as the direct
// ratio p_u(x)/q(x) so that rescaling p_u by an exactly-representable factor
// rescales every weight exactly (scale invariance of the ratio estimators is
// bit-level, see the invariants tests). A log-space fallback covers targets
// peaked enough to over/underflow the direct ratio.

#ifndef EESNIS_CORE_HPP
#define EESNIS_CORE_HPP

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "eesnis/rng.hpp"

namespace eesnis {

using Point = std::vector<double>;

inline Point point1(double x) { return Point{x}; }

// ---------------------------------------------------------------------------
// Error types. All estimator-level failures derive from EstimatorError so the
// replication harness can record a failure code without stringly matching.

enum class FailureCode {
  none,
  non_finite_weight,
  support_violation,
  zero_weight_sum,
  non_existence,
  at_breakpoint,
  degenerate_problem,
  empty_side,
};

inline const char* failure_code_name(FailureCode c) {
  switch (c) {
    case FailureCode::none: return "none";
    case FailureCode::non_finite_weight: return "non_finite_weight";
    case FailureCode::support_violation: return "support_violation";
    case FailureCode::zero_weight_sum: return "zero_weight_sum";
    case FailureCode::non_existence: return "non_existence";
    case FailureCode::at_breakpoint: return "at_breakpoint";
    case FailureCode::degenerate_problem: return "degenerate_problem";
    case FailureCode::empty_side: return "empty_side";
  }
  return "unknown";
}

class EstimatorError : public std::runtime_error {
 public:
  EstimatorError(FailureCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  FailureCode code() const { return code_; }

 private:
  FailureCode code_;
};

struct NonFiniteWeight : EstimatorError {
  explicit NonFiniteWeight(const std::string& what)
      : EstimatorError(FailureCode::non_finite_weight, what) {}
};
struct SupportViolation : EstimatorError {
  explicit SupportViolation(const std::string& what)
      : EstimatorError(FailureCode::support_violation, what) {}
};
struct ZeroWeightSum : EstimatorError {
  explicit ZeroWeightSum(const std::string& what)
      : EstimatorError(FailureCode::zero_weight_sum, what) {}
};
struct NonExistence : EstimatorError {
  explicit NonExistence(const std::string& what)
      : EstimatorError(FailureCode::non_existence, what) {}
};
struct AtBreakpoint : EstimatorError {
  explicit AtBreakpoint(const std::string& what)
      : EstimatorError(FailureCode::at_breakpoint, what) {}
};
struct DegenerateProblem : EstimatorError {
  explicit DegenerateProblem(const std::string& what)
      : EstimatorError(FailureCode::degenerate_problem, what) {}
};
struct EmptySide : EstimatorError {
  explicit EmptySide(const std::string& what)
      : EstimatorError(FailureCode::empty_side, what) {}
};

// ---------------------------------------------------------------------------
// Targets, proposals, integrands.

/// Evaluable nonnegative p_u(x). Never sampled directly; its normalizing
/// constant is unknown to every estimator.
struct UnnormalizedTarget {
  int dimension = 1;
  std::function<double(const Point&)> eval;
  /// Optional log p_u for peaked targets; defaults to log(eval(x)).
  std::function<double(const Point&)> log_eval;
  std::string id;

  double log_value(const Point& x) const {
    return log_eval ? log_eval(x) : std::log(eval(x));
  }
};

struct Integrand {
  int dimension = 1;
  std::function<double(const Point&)> eval;
  std::string id;
};

/// A normalized density we can evaluate and sample. `quantile`, when present,
/// maps u in (0,1) monotonically onto the support (1-D proposals only); it is
/// the hook the couplings and inverse-CDF samplers use.
struct Proposal {
  int dimension = 1;
  std::function<double(const Point&)> pdf;
  std::function<Point(RandomStream&)> draw;
  std::function<bool(const Point&)> in_support;  // defaults to pdf(x) > 0
  std::function<Point(double)> quantile;         // optional
  std::function<double(const Point&)> log_pdf;   // optional
  std::string id;

  bool supports(const Point& x) const {
    return in_support ? in_support(x) : pdf(x) > 0.0;
  }
  double log_density(const Point& x) const {
    return log_pdf ? log_pdf(x) : std::log(pdf(x));
  }
};

struct WeightedObservation {
  double y = 0.0;  // f(x)
  double w = 0.0;  // p_u(x) / q(x)
};

struct WeightedSample {
  std::vector<WeightedObservation> observations;
  std::uint64_t source_seed = 0;
  std::string proposal_id;
};

// ---------------------------------------------------------------------------

inline void check_same_dimension(int a, int b, const char* what) {
  if (a != b) {
    throw std::invalid_argument(std::string("dimension mismatch in ") + what +
                                ": " + std::to_string(a) + " vs " + std::to_string(b));
  }
}

/// Likelihood ratio p_u(x)/q(x). Direct ratio first; exp(log p_u - log q)
/// only when the direct ratio over/underflows.
inline double importance_weight(const UnnormalizedTarget& target,
                                const Proposal& q, const Point& x, double qx) {
  const double v = target.eval(x);
  if (std::isnan(v) || v < 0.0) {
    throw NonFiniteWeight("target evaluated to NaN or negative value");
  }
  if (v == 0.0) return 0.0;  // a hole: zero weight, not an error
  double w = v / qx;
  if (!std::isfinite(w)) {
    w = std::exp(target.log_value(x) - q.log_density(x));
  }
  if (!std::isfinite(w)) {
    throw NonFiniteWeight("p_u/q evaluated non-finite; proposal/target mismatch");
  }
  return w;
}

/// Draws n points from q and caches y_i = f(x_i), w_i = p_u(x_i)/q(x_i).
inline WeightedSample draw_weighted_sample(const UnnormalizedTarget& target,
                                           const Integrand& f, const Proposal& q,
                                           std::size_t n, RandomStream& stream) {
  check_same_dimension(target.dimension, q.dimension, "draw_weighted_sample(target, q)");
  check_same_dimension(target.dimension, f.dimension, "draw_weighted_sample(target, f)");
  if (n == 0) {
    throw std::invalid_argument("draw_weighted_sample: n must be >= 1");
  }
  WeightedSample sample;
  sample.observations.reserve(n);
  sample.source_seed = stream.key();
  sample.proposal_id = q.id;
  for (std::size_t i = 0; i < n; ++i) {
    const Point x = q.draw(stream);
    const double qx = q.pdf(x);
    if (!(qx > 0.0)) {
      throw SupportViolation("proposal drew a point with q(x) <= 0");
    }
    const double w = importance_weight(target, q, x, qx);
    double y = f.eval(x);
    if (w > 0.0 && !std::isfinite(y)) {
      throw NonFiniteWeight("integrand non-finite at a point with positive weight");
    }
    if (!std::isfinite(y)) y = 0.0;  // zero-weight observation; value is inert
    sample.observations.push_back({y, w});
  }
  return sample;
}

/// Importance-sampling health diagnostic: (sum w)^2 / sum w^2.
inline double effective_sample_size(const std::vector<WeightedObservation>& obs) {
  double s = 0.0, s2 = 0.0;
  for (const auto& o : obs) {
    s += o.w;
    s2 += o.w * o.w;
  }
  if (s2 == 0.0) return 0.0;
  return s * s / s2;
}

}  // namespace eesnis

#endif  // EESNIS_CORE_HPP
