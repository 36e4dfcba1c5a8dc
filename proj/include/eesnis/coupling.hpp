// Joint samplers with prescribed marginals, for the coupled variants of the
// ratio estimators. draw_pair receives a primary and a secondary stream; the
// identity/comonotone/antithetic couplings consume only the primary (which is
// what makes the identity coupling reproduce plain SNIS bit for bit), while
// the independent coupling draws its second marginal from the secondary.

#ifndef EESNIS_COUPLING_HPP
#define EESNIS_COUPLING_HPP

#include <functional>
#include <stdexcept>
#include <string>
#include <utility>

#include "eesnis/core.hpp"

namespace eesnis {

struct CoupledProposal {
  Proposal q1;
  Proposal q2;
  std::function<std::pair<Point, Point>(RandomStream&, RandomStream&)> draw_pair;
  std::string id;
};

/// z = x with a shared marginal. Pr(x = z) = 1.
inline CoupledProposal identity_coupling(const Proposal& q) {
  CoupledProposal c;
  c.q1 = q;
  c.q2 = q;
  c.id = "identity(" + q.id + ")";
  c.draw_pair = [q](RandomStream& primary, RandomStream&) {
    Point x = q.draw(primary);
    return std::make_pair(x, x);
  };
  return c;
}

inline CoupledProposal independent_coupling(const Proposal& q1, const Proposal& q2) {
  CoupledProposal c;
  c.q1 = q1;
  c.q2 = q2;
  c.id = "independent(" + q1.id + "," + q2.id + ")";
  c.draw_pair = [q1, q2](RandomStream& primary, RandomStream& secondary) {
    return std::make_pair(q1.draw(primary), q2.draw(secondary));
  };
  return c;
}

namespace detail {
inline void require_quantile(const Proposal& q, const char* what) {
  if (!q.quantile) {
    throw std::invalid_argument(std::string(what) +
                                ": proposal '" + q.id + "' has no quantile function");
  }
}
}  // namespace detail

/// Both marginals driven by one shared uniform variate (1-D proposals with a
/// quantile function only).
inline CoupledProposal comonotone_coupling(const Proposal& q1, const Proposal& q2) {
  detail::require_quantile(q1, "comonotone_coupling");
  detail::require_quantile(q2, "comonotone_coupling");
  CoupledProposal c;
  c.q1 = q1;
  c.q2 = q2;
  c.id = "comonotone(" + q1.id + "," + q2.id + ")";
  c.draw_pair = [q1, q2](RandomStream& primary, RandomStream&) {
    const double u = primary.uniform_open01();
    return std::make_pair(q1.quantile(u), q2.quantile(u));
  };
  return c;
}

/// x from u, z from 1-u.
inline CoupledProposal antithetic_coupling(const Proposal& q1, const Proposal& q2) {
  detail::require_quantile(q1, "antithetic_coupling");
  detail::require_quantile(q2, "antithetic_coupling");
  CoupledProposal c;
  c.q1 = q1;
  c.q2 = q2;
  c.id = "antithetic(" + q1.id + "," + q2.id + ")";
  c.draw_pair = [q1, q2](RandomStream& primary, RandomStream&) {
    const double u = primary.uniform_open01();
    return std::make_pair(q1.quantile(u), q2.quantile(1.0 - u));
  };
  return c;
}

}  // namespace eesnis

#endif  // EESNIS_COUPLING_HPP
