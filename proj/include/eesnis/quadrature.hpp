// Deterministic 1-D quadrature used only on the oracle side: adaptive Simpson
// with interval bisection to a relative tolerance, plus a fixed 5-point
// Gauss-Legendre rule for short smooth cells.

#ifndef EESNIS_QUADRATURE_HPP
#define EESNIS_QUADRATURE_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace eesnis {

/// Thrown when adaptive refinement stalls before reaching tolerance.
class QuadratureFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline double simpson(double a, double fa, double b, double fb, double fm) {
  return (b - a) / 6.0 * (fa + 4.0 * fm + fb);
}

template <class F>
double adaptive_simpson_rec(const F& f, double a, double fa, double b, double fb,
                            double m, double fm, double whole, double tol,
                            int depth_left, int force_splits, std::size_t& used,
                            std::size_t cap) {
  const double lm = 0.5 * (a + m);
  const double rm = 0.5 * (m + b);
  const double flm = f(lm);
  const double frm = f(rm);
  const double left = simpson(a, fa, m, fm, flm);
  const double right = simpson(m, fm, b, fb, frm);
  const double delta = left + right - whole;
  if (force_splits <= 0 && std::fabs(delta) <= 15.0 * tol) {
    return left + right + delta / 15.0;
  }
  if (depth_left <= 0) {
    // Interval width below ~2^-52 of the original range: nothing left to
    // resolve (e.g. a kink landing one ulp inside the piece). The local
    // estimate is already exact to within width * max|f|.
    return left + right + delta / 15.0;
  }
  if (used >= cap) {
    throw QuadratureFailure("adaptive Simpson: subinterval cap reached before tolerance");
  }
  used += 2;
  return adaptive_simpson_rec(f, a, fa, m, fm, lm, flm, left, 0.5 * tol,
                              depth_left - 1, force_splits - 1, used, cap) +
         adaptive_simpson_rec(f, m, fm, b, fb, rm, frm, right, 0.5 * tol,
                              depth_left - 1, force_splits - 1, used, cap);
}

}  // namespace detail

/// Integrates f over [a, b] to relative tolerance rel_tol (with a small
/// absolute floor for integrals near zero). Hard cap of 2^20 subintervals.
template <class F>
double integrate(const F& f, double a, double b, double rel_tol = 1e-10,
                 std::size_t cap = (std::size_t{1} << 20)) {
  if (a == b) return 0.0;
  const double fa = f(a);
  const double fb = f(b);
  const double m = 0.5 * (a + b);
  const double fm = f(m);
  const double whole = detail::simpson(a, fa, b, fb, fm);
  // Coarse scale estimate for converting the relative tolerance to absolute.
  double scale = std::fabs(whole);
  {
    const int kProbe = 16;
    double acc = 0.0;
    for (int i = 0; i < kProbe; ++i) {
      const double x = a + (b - a) * (i + 0.5) / kProbe;
      acc += std::fabs(f(x));
    }
    scale = std::max(scale, acc * std::fabs(b - a) / kProbe);
  }
  const double tol = std::max(rel_tol * scale, 1e-300);
  std::size_t used = 1;
  // Two forced splits guard against symmetric integrands whose first Simpson
  // estimate looks spuriously converged.
  return detail::adaptive_simpson_rec(f, a, fa, b, fb, m, fm, whole, tol, 52, 2,
                                      used, cap);
}

/// Integrates over [a, b] split at the given interior breakpoints (kinks of
/// the integrand); each smooth piece is integrated independently.
template <class F>
double integrate_piecewise(const F& f, double a, double b,
                           const std::vector<double>& breakpoints,
                           double rel_tol = 1e-10) {
  std::vector<double> cuts;
  cuts.push_back(a);
  for (double t : breakpoints) {
    if (t > a && t < b) cuts.push_back(t);
  }
  cuts.push_back(b);
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    total += integrate(f, cuts[i], cuts[i + 1], rel_tol);
  }
  return total;
}

/// Fixed 5-point Gauss-Legendre rule on [a, b]; exact through degree 9.
template <class F>
double gauss_legendre5(const F& f, double a, double b) {
  static constexpr double x1 = 0.5384693101056830910363144;
  static constexpr double x2 = 0.9061798459386639927976269;
  static constexpr double w0 = 0.5688888888888888888888889;
  static constexpr double w1 = 0.4786286704993664680412915;
  static constexpr double w2 = 0.2369268850561890875142640;
  const double c = 0.5 * (a + b);
  const double h = 0.5 * (b - a);
  return h * (w0 * f(c) + w1 * (f(c - h * x1) + f(c + h * x1)) +
              w2 * (f(c - h * x2) + f(c + h * x2)));
}

}  // namespace eesnis

#endif  // EESNIS_QUADRATURE_HPP
