// Tabulated 1-D density for sampling from shape functions like
// (f(x)-c)_+ * p_u(x): cell masses on a fine grid (5-point Gauss-Legendre per
// cell, cell boundaries include the integrand's kink points), inverse-CDF
// sampling with linear CDF interpolation inside a cell.
//
// The proposal built on top reports the exact normalized shape shape(x)/Z as
// its pdf, with Z the summed cell masses. That exactness is what gives the
// zero-variance fixtures their bit-level degeneracy: the importance ratio
// p_u/q is constant wherever the shape is proportional to the weighted
// integrand, independent of where the draws actually land.

#ifndef EESNIS_GRID_DENSITY_HPP
#define EESNIS_GRID_DENSITY_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "eesnis/core.hpp"
#include "eesnis/quadrature.hpp"

namespace eesnis {

class GridDensity1D {
 public:
  GridDensity1D() = default;

  /// Tabulates `shape` (nonnegative) over [lo, hi] on n_cells uniform cells
  /// plus one boundary at every interior kink.
  GridDensity1D(std::function<double(double)> shape, double lo, double hi,
                std::size_t n_cells, const std::vector<double>& kinks) {
    if (!(hi > lo)) throw std::invalid_argument("GridDensity1D: hi must exceed lo");
    if (n_cells < 2) throw std::invalid_argument("GridDensity1D: need at least 2 cells");
    shape_ = std::move(shape);
    nodes_.reserve(n_cells + 1 + kinks.size());
    for (std::size_t k = 0; k <= n_cells; ++k) {
      nodes_.push_back(lo + (hi - lo) * static_cast<double>(k) /
                                static_cast<double>(n_cells));
    }
    for (double t : kinks) {
      if (t > lo && t < hi) nodes_.push_back(t);
    }
    std::sort(nodes_.begin(), nodes_.end());
    nodes_.erase(std::unique(nodes_.begin(), nodes_.end()), nodes_.end());

    const std::size_t m = nodes_.size() - 1;
    cum_.assign(m + 1, 0.0);
    for (std::size_t k = 0; k < m; ++k) {
      const double mass = gauss_legendre5(shape_, nodes_[k], nodes_[k + 1]);
      cum_[k + 1] = cum_[k] + std::max(mass, 0.0);
    }
    total_ = cum_.back();
  }

  double total() const { return total_; }
  double lo() const { return nodes_.front(); }
  double hi() const { return nodes_.back(); }
  const std::vector<double>& nodes() const { return nodes_; }
  double cell_mass(std::size_t k) const { return cum_[k + 1] - cum_[k]; }
  std::size_t cell_count() const { return nodes_.size() - 1; }

  /// Exact normalized density shape(x)/Z inside [lo, hi], 0 outside.
  double pdf(double x) const {
    if (x < nodes_.front() || x > nodes_.back()) return 0.0;
    const double s = shape_(x);
    return s > 0.0 ? s / total_ : 0.0;
  }

  /// Monotone u in (0,1) -> x; linear CDF interpolation within the cell.
  double quantile(double u) const {
    const double target = u * total_;
    std::size_t k = static_cast<std::size_t>(
        std::upper_bound(cum_.begin(), cum_.end(), target) - cum_.begin());
    k = (k == 0) ? 0 : k - 1;
    if (k >= cell_count()) k = cell_count() - 1;
    // Never land in a zero-mass cell (can only happen at exact boundaries).
    while (k > 0 && cell_mass(k) <= 0.0) --k;
    while (k + 1 < cell_count() && cell_mass(k) <= 0.0) ++k;
    const double mass = cell_mass(k);
    const double frac = mass > 0.0 ? (target - cum_[k]) / mass : 0.5;
    double x = nodes_[k] + (nodes_[k + 1] - nodes_[k]) * std::clamp(frac, 0.0, 1.0);
    if (shape_(x) <= 0.0) {
      // Nudged off a kink edge where the shape vanishes.
      x = nodes_[k] + (nodes_[k + 1] - nodes_[k]) *
                          std::clamp(frac, 0x1.0p-30, 1.0 - 0x1.0p-30);
      if (shape_(x) <= 0.0) x = 0.5 * (nodes_[k] + nodes_[k + 1]);
    }
    return x;
  }

 private:
  std::function<double(double)> shape_;
  std::vector<double> nodes_;
  std::vector<double> cum_;
  double total_ = 0.0;
};

/// Roots of g in [lo, hi] located by a scan over n_scan intervals plus
/// bisection to machine precision; used to align grid cells with the kinks of
/// shapes like (f - c)_+ * p_u.
template <class G>
std::vector<double> find_sign_changes(const G& g, double lo, double hi,
                                      std::size_t n_scan = 4096) {
  std::vector<double> roots;
  double x0 = lo;
  double g0 = g(x0);
  for (std::size_t i = 1; i <= n_scan; ++i) {
    const double x1 = lo + (hi - lo) * static_cast<double>(i) /
                               static_cast<double>(n_scan);
    const double g1 = g(x1);
    if (g0 == 0.0) roots.push_back(x0);
    if ((g0 < 0.0 && g1 > 0.0) || (g0 > 0.0 && g1 < 0.0)) {
      double a = x0, b = x1, ga = g0;
      for (int it = 0; it < 90; ++it) {
        const double m = 0.5 * (a + b);
        const double gm = g(m);
        if (gm == 0.0) {
          a = b = m;
          break;
        }
        if ((ga < 0.0) == (gm < 0.0)) {
          a = m;
          ga = gm;
        } else {
          b = m;
        }
      }
      roots.push_back(0.5 * (a + b));
    }
    x0 = x1;
    g0 = g1;
  }
  if (g0 == 0.0) roots.push_back(x0);
  std::sort(roots.begin(), roots.end());
  roots.erase(std::unique(roots.begin(), roots.end()), roots.end());
  return roots;
}

/// Wraps a grid density as a 1-D Proposal with draw/quantile/pdf.
inline Proposal make_grid_proposal(std::shared_ptr<const GridDensity1D> grid,
                                   std::string id) {
  Proposal q;
  q.dimension = 1;
  q.id = std::move(id);
  q.pdf = [grid](const Point& x) { return grid->pdf(x[0]); };
  q.quantile = [grid](double u) { return point1(grid->quantile(u)); };
  q.draw = [grid](RandomStream& s) { return point1(grid->quantile(s.uniform_open01())); };
  return q;
}

}  // namespace eesnis

#endif  // EESNIS_GRID_DENSITY_HPP
