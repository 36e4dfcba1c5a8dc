// Numerically stable streaming moments (Welford) with an associative merge
// (Chan et al.), so replication workers can accumulate independently and
// reduce at the end.

#ifndef EESNIS_RUNNING_MOMENTS_HPP
#define EESNIS_RUNNING_MOMENTS_HPP

#include <cmath>
#include <cstddef>

namespace eesnis {

struct RunningMoments {
  std::size_t count = 0;
  double mean = 0.0;
  double m2 = 0.0;  // sum of squared deviations from the mean

  void add(double x) {
    ++count;
    const double d = x - mean;
    mean += d / static_cast<double>(count);
    m2 += d * (x - mean);
  }

  void merge(const RunningMoments& other) {
    if (other.count == 0) return;
    if (count == 0) {
      *this = other;
      return;
    }
    const double na = static_cast<double>(count);
    const double nb = static_cast<double>(other.count);
    const double delta = other.mean - mean;
    const double n = na + nb;
    mean += delta * (nb / n);
    m2 += other.m2 + delta * delta * (na * nb / n);
    count += other.count;
  }

  double variance() const {
    return count >= 2 ? m2 / static_cast<double>(count - 1) : 0.0;
  }
  double sd() const { return std::sqrt(variance()); }
};

/// Weighted mean with the incremental update mean += (w/W)(y - mean); exactly
/// reproduces a constant y and is bit-invariant to an exact common factor in
/// the weights.
struct WeightedMean {
  double mean = 0.0;
  double weight_sum = 0.0;

  void add(double y, double w) {
    if (!(w > 0.0)) return;  // zero-weight observations are inert
    weight_sum += w;
    mean += (w / weight_sum) * (y - mean);
  }
};

}  // namespace eesnis

#endif  // EESNIS_RUNNING_MOMENTS_HPP
