// Oracle-equipped test problems. Each problem bundles an unnormalized target,
// an integrand, and (oracle-side only) a sampleable normalized p; oracles
// deliver exact mu0, c_p, mu_+/-, sigma2_+/- and tau2_q by exact summation
// (discrete) or adaptive quadrature (continuous 1-D). Proposal constructors
// cover categorical, Gaussian, grid-tabulated optimal parts, and epsilon
// defensive mixtures.

#ifndef EESNIS_PROBLEMS_HPP
#define EESNIS_PROBLEMS_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "eesnis/core.hpp"
#include "eesnis/grid_density.hpp"
#include "eesnis/normal.hpp"
#include "eesnis/quadrature.hpp"

namespace eesnis::problems {

enum class ProblemKind { discrete, continuous_1d };
enum class SignSide { plus, minus };

struct DiscreteAtom {
  Point x;
  double mass;  // p_u at the atom (counting-measure mass)
  double f;     // integrand value at the atom
};

/// Immutable atom table with exact-coordinate lookup.
class DiscreteTable {
 public:
  explicit DiscreteTable(std::vector<DiscreteAtom> atoms) : atoms_(std::move(atoms)) {
    for (std::size_t i = 0; i < atoms_.size(); ++i) {
      index_[atoms_[i].x] = i;
      total_mass_ += atoms_[i].mass;
    }
  }

  const std::vector<DiscreteAtom>& atoms() const { return atoms_; }
  double total_mass() const { return total_mass_; }
  std::size_t size() const { return atoms_.size(); }

  std::optional<std::size_t> find(const Point& x) const {
    const auto it = index_.find(x);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  double mass_at(const Point& x) const {
    const auto i = find(x);
    return i ? atoms_[*i].mass : 0.0;
  }

  double f_at(const Point& x) const {
    const auto i = find(x);
    if (!i) throw std::invalid_argument("DiscreteTable: integrand queried off the atoms");
    return atoms_[*i].f;
  }

 private:
  std::vector<DiscreteAtom> atoms_;
  std::map<Point, std::size_t> index_;
  double total_mass_ = 0.0;
};

struct ProblemSpec {
  UnnormalizedTarget target;
  Integrand f;
  std::optional<Proposal> p_sampler;  // oracle-only sampleable normalized p
  ProblemKind kind = ProblemKind::discrete;
  std::string label;

  // Oracle-side data.
  std::shared_ptr<const DiscreteTable> atoms;  // discrete problems
  double support_lo = 0.0;                      // continuous problems
  double support_hi = 0.0;
  double gauss_mean = 0.0;
  double gauss_sd = 1.0;
  double mu0 = 0.0;    // exact (summation / quadrature / analytic)
  double c_p = 0.0;    // exact normalizing constant
  double var_f = 0.0;  // Var_p f
};

struct OracleValues {
  double mu0 = 0.0;
  double c_p = 0.0;
  double mu_plus = 0.0;
  double mu_minus = 0.0;
  double var_f = 0.0;
  std::optional<double> sigma2_plus;   // per supplied q_+
  std::optional<double> sigma2_minus;  // per supplied q_-
  std::optional<double> tau2_q;        // per supplied q (normalized-p convention)
};

// ---------------------------------------------------------------------------
// Proposal constructors.

inline Proposal categorical_proposal(std::shared_ptr<const DiscreteTable> table,
                                     std::vector<double> probs, std::string id) {
  if (probs.size() != table->size()) {
    throw std::invalid_argument("categorical_proposal: probability size mismatch");
  }
  auto cum = std::make_shared<std::vector<double>>();
  cum->reserve(probs.size());
  double acc = 0.0;
  for (double p : probs) {
    if (p < 0.0) throw std::invalid_argument("categorical_proposal: negative probability");
    acc += p;
    cum->push_back(acc);
  }
  if (!(acc > 0.0)) throw std::invalid_argument("categorical_proposal: zero total probability");
  auto prob_vec = std::make_shared<std::vector<double>>(std::move(probs));
  const double total = acc;

  Proposal q;
  q.dimension = static_cast<int>(table->atoms().front().x.size());
  q.id = std::move(id);
  q.pdf = [table, prob_vec](const Point& x) {
    const auto i = table->find(x);
    return i ? (*prob_vec)[*i] : 0.0;
  };
  auto pick = [table, cum, total](double u) {
    const double target = u * total;
    std::size_t k = static_cast<std::size_t>(
        std::upper_bound(cum->begin(), cum->end(), target) - cum->begin());
    if (k >= cum->size()) k = cum->size() - 1;
    return table->atoms()[k].x;
  };
  q.quantile = pick;
  q.draw = [pick](RandomStream& s) { return pick(s.uniform01()); };
  return q;
}

inline Proposal gaussian_proposal(double mean, double sd, std::string id) {
  Proposal q;
  q.dimension = 1;
  q.id = std::move(id);
  q.pdf = [mean, sd](const Point& x) { return norm_pdf((x[0] - mean) / sd) / sd; };
  q.log_pdf = [mean, sd](const Point& x) {
    const double z = (x[0] - mean) / sd;
    return -0.5 * z * z - std::log(sd) - 0.9189385332046727;  // log sqrt(2 pi)
  };
  q.quantile = [mean, sd](double u) { return point1(mean + sd * norm_quantile(u)); };
  q.draw = [mean, sd](RandomStream& s) {
    return point1(mean + sd * norm_quantile(s.uniform_open01()));
  };
  return q;
}

/// Uniform over all atoms (including zero-mass holes).
inline Proposal uniform_atoms_proposal(const ProblemSpec& problem) {
  const double p = 1.0 / static_cast<double>(problem.atoms->size());
  return categorical_proposal(problem.atoms,
                              std::vector<double>(problem.atoms->size(), p),
                              problem.label + ":uniform");
}

/// The problem's widest natural proposal: uniform over atoms for discrete,
/// a Gaussian with 3x the target sd for continuous.
inline Proposal defensive_proposal(const ProblemSpec& problem) {
  if (problem.kind == ProblemKind::discrete) {
    return uniform_atoms_proposal(problem);
  }
  return gaussian_proposal(problem.gauss_mean, 3.0 * problem.gauss_sd,
                           problem.label + ":defensive");
}

struct DefensiveMixtureProposal {
  double epsilon = 0.0;
  Proposal optimal_part;
  Proposal defensive_part;
  Proposal mixed;  // pdf = (1-eps) optimal + eps defensive
};

namespace detail {

inline Proposal mix_proposals(const Proposal& opt, const Proposal& def, double eps,
                              std::string id) {
  if (eps == 0.0) {
    Proposal q = opt;
    q.id = std::move(id);
    return q;
  }
  if (eps == 1.0) {
    Proposal q = def;
    q.id = std::move(id);
    return q;
  }
  Proposal q;
  q.dimension = opt.dimension;
  q.id = std::move(id);
  auto opt_pdf = opt.pdf;
  auto def_pdf = def.pdf;
  q.pdf = [opt_pdf, def_pdf, eps](const Point& x) {
    return (1.0 - eps) * opt_pdf(x) + eps * def_pdf(x);
  };
  auto opt_draw = opt.draw;
  auto def_draw = def.draw;
  q.draw = [opt_draw, def_draw, eps](RandomStream& s) {
    return s.uniform01() < eps ? def_draw(s) : opt_draw(s);
  };
  return q;
}

}  // namespace detail

/// Normalized density proportional to (f - center)_{side} * p_u, blended with
/// a defensive component: pdf = (1-eps) optimal + eps defensive. For
/// continuous problems the optimal part is tabulated on a quadrature grid
/// (cells aligned with the roots of f - center) and sampled by inverse-CDF
/// interpolation; its reported pdf is the exact normalized shape.
inline DefensiveMixtureProposal optimal_proposal(const ProblemSpec& problem,
                                                 SignSide side, double center,
                                                 double epsilon,
                                                 const Proposal& defensive) {
  if (!(epsilon >= 0.0 && epsilon < 1.0 + 1e-15)) {
    throw std::invalid_argument("optimal_proposal: epsilon must lie in [0, 1]");
  }
  const bool plus = (side == SignSide::plus);
  const char* side_tag = plus ? "+" : "-";
  DefensiveMixtureProposal out;
  out.epsilon = epsilon;
  out.defensive_part = defensive;

  if (problem.kind == ProblemKind::discrete) {
    const auto& atoms = problem.atoms->atoms();
    std::vector<double> wts(atoms.size());
    double total = 0.0;
    for (std::size_t k = 0; k < atoms.size(); ++k) {
      const double d = plus ? atoms[k].f - center : center - atoms[k].f;
      wts[k] = d > 0.0 ? d * atoms[k].mass : 0.0;
      total += wts[k];
    }
    if (!(total > 0.0)) {
      throw EmptySide(std::string("optimal_proposal: (f-center)") + side_tag +
                      " p_u has no mass");
    }
    for (auto& w : wts) w /= total;
    out.optimal_part = categorical_proposal(
        problem.atoms, wts, problem.label + ":opt" + side_tag);
    if (epsilon == 0.0) {
      out.mixed = out.optimal_part;
      return out;
    }
    // Exact mixture of two categoricals over the same atom set.
    std::vector<double> mixture(atoms.size());
    for (std::size_t k = 0; k < atoms.size(); ++k) {
      mixture[k] = (1.0 - epsilon) * wts[k] + epsilon * defensive.pdf(atoms[k].x);
    }
    out.mixed = categorical_proposal(problem.atoms, mixture,
                                     problem.label + ":mix" + side_tag);
    return out;
  }

  auto f_eval = problem.f.eval;
  auto t_eval = problem.target.eval;
  const auto shape = [f_eval, t_eval, plus, center](double x) {
    const double d = plus ? f_eval(point1(x)) - center : center - f_eval(point1(x));
    return d > 0.0 ? d * t_eval(point1(x)) : 0.0;
  };
  const auto kinks = find_sign_changes(
      [f_eval, center](double x) { return f_eval(point1(x)) - center; },
      problem.support_lo, problem.support_hi);
  auto grid = std::make_shared<GridDensity1D>(shape, problem.support_lo,
                                              problem.support_hi, 4096, kinks);
  if (!(grid->total() > 0.0)) {
    throw EmptySide(std::string("optimal_proposal: (f-center)") + side_tag +
                    " p_u has no mass");
  }
  out.optimal_part = make_grid_proposal(grid, problem.label + ":opt" + side_tag);
  out.mixed = detail::mix_proposals(out.optimal_part, defensive, epsilon,
                                    problem.label + ":mix" + side_tag);
  return out;
}

/// Normalized density proportional to |f - center| * p_u blended with the
/// defensive component; the OIS/SNIS-style single-proposal analogue of
/// optimal_proposal (center 0 targets |f| p, center mu0 targets |f - mu0| p).
inline DefensiveMixtureProposal abs_optimal_proposal(const ProblemSpec& problem,
                                                     double center, double epsilon,
                                                     const Proposal& defensive) {
  DefensiveMixtureProposal out;
  out.epsilon = epsilon;
  out.defensive_part = defensive;
  if (problem.kind == ProblemKind::discrete) {
    const auto& atoms = problem.atoms->atoms();
    std::vector<double> wts(atoms.size());
    double total = 0.0;
    for (std::size_t k = 0; k < atoms.size(); ++k) {
      wts[k] = std::fabs(atoms[k].f - center) * atoms[k].mass;
      total += wts[k];
    }
    if (!(total > 0.0)) {
      throw DegenerateProblem("abs_optimal_proposal: |f - center| p_u has no mass");
    }
    for (auto& w : wts) w /= total;
    out.optimal_part =
        categorical_proposal(problem.atoms, wts, problem.label + ":opt-abs");
    if (epsilon == 0.0) {
      out.mixed = out.optimal_part;
      return out;
    }
    std::vector<double> mixture(atoms.size());
    for (std::size_t k = 0; k < atoms.size(); ++k) {
      mixture[k] = (1.0 - epsilon) * wts[k] + epsilon * defensive.pdf(atoms[k].x);
    }
    out.mixed = categorical_proposal(problem.atoms, mixture,
                                     problem.label + ":mix-abs");
    return out;
  }
  auto fe = problem.f.eval;
  auto te = problem.target.eval;
  const auto shape = [fe, te, center](double x) {
    return std::fabs(fe(point1(x)) - center) * te(point1(x));
  };
  const auto kinks = find_sign_changes(
      [fe, center](double x) { return fe(point1(x)) - center; },
      problem.support_lo, problem.support_hi);
  auto grid = std::make_shared<GridDensity1D>(shape, problem.support_lo,
                                              problem.support_hi, 4096, kinks);
  if (!(grid->total() > 0.0)) {
    throw DegenerateProblem("abs_optimal_proposal: |f - center| p_u has no mass");
  }
  out.optimal_part = make_grid_proposal(grid, problem.label + ":opt-abs");
  out.mixed = detail::mix_proposals(out.optimal_part, defensive, epsilon,
                                    problem.label + ":mix-abs");
  return out;
}

/// Mixture whose optimal part is the normalized target itself (density
/// proportional to p_u); the denominator target of the ratio estimators.
inline DefensiveMixtureProposal p_mixture_proposal(const ProblemSpec& problem,
                                                   double epsilon,
                                                   const Proposal& defensive) {
  DefensiveMixtureProposal out;
  out.epsilon = epsilon;
  out.defensive_part = defensive;
  if (problem.kind == ProblemKind::discrete) {
    const auto& atoms = problem.atoms->atoms();
    std::vector<double> wts(atoms.size());
    for (std::size_t k = 0; k < atoms.size(); ++k) {
      wts[k] = atoms[k].mass / problem.c_p;
    }
    out.optimal_part = categorical_proposal(problem.atoms, wts, problem.label + ":opt-p");
    if (epsilon == 0.0) {
      out.mixed = out.optimal_part;
      return out;
    }
    std::vector<double> mixture(atoms.size());
    for (std::size_t k = 0; k < atoms.size(); ++k) {
      mixture[k] = (1.0 - epsilon) * wts[k] + epsilon * defensive.pdf(atoms[k].x);
    }
    out.mixed = categorical_proposal(problem.atoms, mixture, problem.label + ":mix-p");
    return out;
  }
  auto te = problem.target.eval;
  auto grid = std::make_shared<GridDensity1D>(
      [te](double x) { return te(point1(x)); }, problem.support_lo,
      problem.support_hi, 4096, std::vector<double>{});
  out.optimal_part = make_grid_proposal(grid, problem.label + ":opt-p");
  out.mixed = detail::mix_proposals(out.optimal_part, defensive, epsilon,
                                    problem.label + ":mix-p");
  return out;
}

/// Normalized density proportional to p(x) |f(x) - mu0|; the SNIS variance
/// floor is attained at this proposal.
inline Proposal snis_optimal_proposal(const ProblemSpec& problem) {
  if (problem.kind == ProblemKind::discrete) {
    const auto& atoms = problem.atoms->atoms();
    std::vector<double> wts(atoms.size());
    double total = 0.0;
    for (std::size_t k = 0; k < atoms.size(); ++k) {
      wts[k] = std::fabs(atoms[k].f - problem.mu0) * atoms[k].mass;
      total += wts[k];
    }
    if (!(total > 0.0)) {
      throw DegenerateProblem("snis_optimal_proposal: f = mu0 almost surely");
    }
    for (auto& w : wts) w /= total;
    return categorical_proposal(problem.atoms, wts, problem.label + ":snis-opt");
  }
  auto f_eval = problem.f.eval;
  auto t_eval = problem.target.eval;
  const double mu0 = problem.mu0;
  const auto shape = [f_eval, t_eval, mu0](double x) {
    return std::fabs(f_eval(point1(x)) - mu0) * t_eval(point1(x));
  };
  const auto kinks = find_sign_changes(
      [f_eval, mu0](double x) { return f_eval(point1(x)) - mu0; },
      problem.support_lo, problem.support_hi);
  auto grid = std::make_shared<GridDensity1D>(shape, problem.support_lo,
                                              problem.support_hi, 4096, kinks);
  if (!(grid->total() > 0.0)) {
    throw DegenerateProblem("snis_optimal_proposal: f = mu0 almost surely");
  }
  return make_grid_proposal(grid, problem.label + ":snis-opt");
}

// ---------------------------------------------------------------------------
// Problem constructors.

inline ProblemSpec discrete_problem(std::vector<DiscreteAtom> atom_list,
                                    std::string label,
                                    bool allow_degenerate = false) {
  if (atom_list.size() < 2) {
    throw std::invalid_argument("discrete_problem: need at least 2 atoms");
  }
  double total = 0.0;
  for (const auto& a : atom_list) {
    if (a.mass < 0.0 || !std::isfinite(a.mass)) {
      throw std::invalid_argument("discrete_problem: masses must be finite and >= 0");
    }
    total += a.mass;
  }
  if (!(total > 0.0)) {
    throw std::invalid_argument("discrete_problem: total mass must be positive");
  }
  auto table = std::make_shared<const DiscreteTable>(std::move(atom_list));

  ProblemSpec pr;
  pr.kind = ProblemKind::discrete;
  pr.label = std::move(label);
  pr.atoms = table;
  pr.c_p = table->total_mass();
  double mu0 = 0.0;
  for (const auto& a : table->atoms()) mu0 += a.f * a.mass;
  mu0 /= pr.c_p;
  pr.mu0 = mu0;
  double var = 0.0;
  for (const auto& a : table->atoms()) {
    var += (a.f - mu0) * (a.f - mu0) * a.mass;
  }
  pr.var_f = var / pr.c_p;
  if (!allow_degenerate && !(pr.var_f > 0.0)) {
    throw DegenerateProblem("discrete_problem: Var_p f = 0");
  }

  const int dim = static_cast<int>(table->atoms().front().x.size());
  pr.target.dimension = dim;
  pr.target.id = pr.label + ":p_u";
  pr.target.eval = [table](const Point& x) { return table->mass_at(x); };
  pr.f.dimension = dim;
  pr.f.id = pr.label + ":f";
  pr.f.eval = [table](const Point& x) { return table->f_at(x); };

  std::vector<double> p_probs;
  p_probs.reserve(table->size());
  for (const auto& a : table->atoms()) p_probs.push_back(a.mass / pr.c_p);
  pr.p_sampler = categorical_proposal(table, p_probs, pr.label + ":p");
  return pr;
}

/// p_u(x) = exp(-(x - mean)^2 / (2 sd^2)); c_p = sd sqrt(2 pi) analytically.
/// mu0 is taken from `mu0_analytic` when supplied, otherwise by quadrature.
inline ProblemSpec gaussian_problem(double mean, double sd, Integrand f,
                                    std::string label,
                                    std::optional<double> mu0_analytic = std::nullopt) {
  if (!(sd > 0.0)) throw std::invalid_argument("gaussian_problem: sd must be positive");
  ProblemSpec pr;
  pr.kind = ProblemKind::continuous_1d;
  pr.label = std::move(label);
  pr.gauss_mean = mean;
  pr.gauss_sd = sd;
  pr.support_lo = mean - 9.0 * sd;
  pr.support_hi = mean + 9.0 * sd;
  pr.target.dimension = 1;
  pr.target.id = pr.label + ":p_u";
  pr.target.eval = [mean, sd](const Point& x) {
    const double z = (x[0] - mean) / sd;
    return std::exp(-0.5 * z * z);
  };
  pr.target.log_eval = [mean, sd](const Point& x) {
    const double z = (x[0] - mean) / sd;
    return -0.5 * z * z;
  };
  pr.f = std::move(f);
  pr.c_p = sd * std::sqrt(2.0 * M_PI);
  auto fe = pr.f.eval;
  auto te = pr.target.eval;
  if (mu0_analytic) {
    pr.mu0 = *mu0_analytic;
  } else {
    pr.mu0 = integrate([fe, te](double x) { return fe(point1(x)) * te(point1(x)); },
                       pr.support_lo, pr.support_hi, 1e-12) /
             pr.c_p;
  }
  const double mu0 = pr.mu0;
  pr.var_f = integrate(
                 [fe, te, mu0](double x) {
                   const double d = fe(point1(x)) - mu0;
                   return d * d * te(point1(x));
                 },
                 pr.support_lo, pr.support_hi, 1e-12) /
             pr.c_p;
  pr.p_sampler = gaussian_proposal(mean, sd, pr.label + ":p");
  return pr;
}

// ---------------------------------------------------------------------------
// Oracles.

/// Exact population estimating-equation value: c_p (mu0 - mu).
inline double population_psi(const ProblemSpec& problem, double mu) {
  if (problem.kind == ProblemKind::discrete) {
    double acc = 0.0;
    for (const auto& a : problem.atoms->atoms()) acc += (a.f - mu) * a.mass;
    return acc;
  }
  auto fe = problem.f.eval;
  auto te = problem.target.eval;
  return integrate([fe, te, mu](double x) { return (fe(point1(x)) - mu) * te(point1(x)); },
                   problem.support_lo, problem.support_hi, 1e-11);
}

namespace detail {

// Integrates with a prescan for support violations: where q = 0 but the
// numerator shape is positive, the population value is infinite.
template <class Num, class Den>
double ratio_integral(const Num& numerator, const Den& q_pdf, double lo, double hi,
                      const std::vector<double>& kinks) {
  const std::size_t kProbe = 2048;
  for (std::size_t i = 0; i <= kProbe; ++i) {
    const double x = lo + (hi - lo) * static_cast<double>(i) / kProbe;
    if (!(q_pdf(x) > 0.0) && numerator(x) > 1e-300) {
      return std::numeric_limits<double>::infinity();
    }
  }
  return integrate_piecewise(
      [&](double x) {
        const double q = q_pdf(x);
        if (!(q > 0.0)) return 0.0;
        return numerator(x) / q;
      },
      lo, hi, kinks, 1e-10);
}

}  // namespace detail

/// All oracle constants; sigma2_+/- only when q_+/- supplied, tau2_q only
/// when q supplied. Continuous problems use adaptive quadrature (rel. tol
/// 1e-10) over the stated support interval; extra_kinks lets callers pass
/// known non-smooth points of the supplied proposals.
inline OracleValues oracle_values(const ProblemSpec& problem,
                                  const Proposal* q_plus = nullptr,
                                  const Proposal* q_minus = nullptr,
                                  const Proposal* q = nullptr,
                                  const std::vector<double>& extra_kinks = {}) {
  OracleValues out;
  out.mu0 = problem.mu0;
  out.c_p = problem.c_p;
  out.var_f = problem.var_f;
  const double mu0 = problem.mu0;

  if (problem.kind == ProblemKind::discrete) {
    const auto& atoms = problem.atoms->atoms();
    for (const auto& a : atoms) {
      const double d = a.f - mu0;
      if (d > 0.0) out.mu_plus += d * a.mass;
      if (d < 0.0) out.mu_minus += -d * a.mass;
    }
    const auto sigma2_side = [&](const Proposal& qs, bool plus) {
      double acc = 0.0;
      const double mu_side = plus ? out.mu_plus : out.mu_minus;
      for (const auto& a : atoms) {
        const double d = plus ? a.f - mu0 : mu0 - a.f;
        const double s = d > 0.0 ? d * a.mass : 0.0;
        const double qk = qs.pdf(a.x);
        if (!(qk > 0.0)) {
          if (s > 0.0) return std::numeric_limits<double>::infinity();
          continue;
        }
        const double dev = s - mu_side * qk;
        acc += dev * dev / qk;
      }
      return acc;
    };
    if (q_plus) out.sigma2_plus = sigma2_side(*q_plus, true);
    if (q_minus) out.sigma2_minus = sigma2_side(*q_minus, false);
    if (q) {
      double acc = 0.0;
      for (const auto& a : atoms) {
        const double pk = a.mass / problem.c_p;
        const double qk = q->pdf(a.x);
        const double d = a.f - mu0;
        if (!(qk > 0.0)) {
          if (pk * d * d > 0.0) {
            acc = std::numeric_limits<double>::infinity();
            break;
          }
          continue;
        }
        acc += pk * pk * d * d / qk;
      }
      out.tau2_q = acc;
    }
    return out;
  }

  auto fe = problem.f.eval;
  auto te = problem.target.eval;
  std::vector<double> kinks = find_sign_changes(
      [fe, mu0](double x) { return fe(point1(x)) - mu0; }, problem.support_lo,
      problem.support_hi);
  kinks.insert(kinks.end(), extra_kinks.begin(), extra_kinks.end());
  std::sort(kinks.begin(), kinks.end());
  kinks.erase(std::unique(kinks.begin(), kinks.end()), kinks.end());

  out.mu_plus = integrate_piecewise(
      [fe, te, mu0](double x) {
        return std::max(fe(point1(x)) - mu0, 0.0) * te(point1(x));
      },
      problem.support_lo, problem.support_hi, kinks, 1e-11);
  out.mu_minus = integrate_piecewise(
      [fe, te, mu0](double x) {
        return std::max(mu0 - fe(point1(x)), 0.0) * te(point1(x));
      },
      problem.support_lo, problem.support_hi, kinks, 1e-11);

  const auto sigma2_side = [&](const Proposal& qs, bool plus) {
    const double mu_side = plus ? out.mu_plus : out.mu_minus;
    auto q_pdf = qs.pdf;
    return detail::ratio_integral(
        [fe, te, mu0, mu_side, plus, q_pdf](double x) {
          const double d = plus ? fe(point1(x)) - mu0 : mu0 - fe(point1(x));
          const double s = d > 0.0 ? d * te(point1(x)) : 0.0;
          const double dev = s - mu_side * q_pdf(point1(x));
          return dev * dev;
        },
        [q_pdf](double x) { return q_pdf(point1(x)); }, problem.support_lo,
        problem.support_hi, kinks);
  };
  if (q_plus) out.sigma2_plus = sigma2_side(*q_plus, true);
  if (q_minus) out.sigma2_minus = sigma2_side(*q_minus, false);
  if (q) {
    auto q_pdf = q->pdf;
    const double cp = problem.c_p;
    out.tau2_q = detail::ratio_integral(
        [fe, te, mu0, cp](double x) {
          const double p = te(point1(x)) / cp;
          const double d = fe(point1(x)) - mu0;
          return p * p * d * d;
        },
        [q_pdf](double x) { return q_pdf(point1(x)); }, problem.support_lo,
        problem.support_hi, kinks);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Built-in fixtures.

namespace detail {

inline std::vector<DiscreteAtom> atoms_1d(const std::vector<std::pair<double, double>>& mf) {
  std::vector<DiscreteAtom> atoms;
  atoms.reserve(mf.size());
  for (std::size_t k = 0; k < mf.size(); ++k) {
    atoms.push_back({point1(static_cast<double>(k)), mf[k].first, mf[k].second});
  }
  return atoms;
}

inline ProblemSpec build_discrete20() {
  // Fixed-seed randomized fixture: 20 atoms, signed integrand, uneven masses.
  RandomStream s = derive_stream(20, 0);
  std::vector<DiscreteAtom> atoms;
  atoms.reserve(20);
  for (int k = 0; k < 20; ++k) {
    const double mass = 0.2 + 2.0 * s.uniform01();
    const double f = 3.0 * (s.uniform01() - 0.45);
    atoms.push_back({point1(static_cast<double>(k)), mass, f});
  }
  atoms[0].f = -1.5;  // pin both signs regardless of the draw
  atoms[1].f = 2.0;
  return discrete_problem(std::move(atoms), "discrete20");
}

inline Integrand integrand_1d(std::function<double(double)> g, std::string id) {
  Integrand f;
  f.dimension = 1;
  f.id = std::move(id);
  f.eval = [g = std::move(g)](const Point& x) { return g(x[0]); };
  return f;
}

}  // namespace detail

/// Built-in problem registry, by label. Labels:
///   discrete2, discrete3, discrete20, discrete-asym, discrete-holes,
///   dyadic16, gauss-x, gauss-x2, gauss-cubic.
inline const ProblemSpec& by_label(const std::string& label) {
  static const std::map<std::string, ProblemSpec> registry = [] {
    std::map<std::string, ProblemSpec> m;
    m.emplace("discrete2", discrete_problem(
                               detail::atoms_1d({{1.0, 1.0}, {1.0, -1.0}}), "discrete2"));
    m.emplace("discrete3", discrete_problem(
                               detail::atoms_1d({{2.0, 3.0}, {1.0, 0.0}}), "discrete3"));
    m.emplace("discrete20", detail::build_discrete20());
    // Asymmetric per-side spreads: with uniform two-atom proposals per side,
    // sigma_+ / sigma_- = |a1 - 2 a2| / |b1 - 2 b2| = 1.5 / 0.5 = 3.
    m.emplace("discrete-asym",
              discrete_problem(detail::atoms_1d({{2.5, 1.0},
                                                 {0.5, 2.0},
                                                 {2.0, -1.0},
                                                 {0.75, -2.0}}),
                               "discrete-asym"));
    m.emplace("discrete-holes",
              discrete_problem(detail::atoms_1d({{1.0, 1.0},
                                                 {0.0, 5.0},
                                                 {2.0, -1.0},
                                                 {0.0, -4.0},
                                                 {1.5, 0.5}}),
                               "discrete-holes"));
    {
      // Dyadic fixture: integer masses, f = (2k-15)/8, uniform 1/16 proposals;
      // every product in the estimator pipeline is exact in binary64.
      std::vector<std::pair<double, double>> mf;
      for (int k = 0; k < 16; ++k) {
        mf.push_back({static_cast<double>((k * 5) % 7 + 1),
                      static_cast<double>(2 * k - 15) / 8.0});
      }
      m.emplace("dyadic16", discrete_problem(detail::atoms_1d(mf), "dyadic16"));
    }
    m.emplace("gauss-x",
              gaussian_problem(0.0, 1.0,
                               detail::integrand_1d([](double x) { return x; }, "x"),
                               "gauss-x", 0.0));
    m.emplace("gauss-x2",
              gaussian_problem(0.0, 1.0,
                               detail::integrand_1d([](double x) { return x * x; }, "x^2"),
                               "gauss-x2", 1.0));
    m.emplace("gauss-cubic",
              gaussian_problem(0.0, 1.0,
                               detail::integrand_1d(
                                   [](double x) { return x * x * x - 2.0 * x; }, "x^3-2x"),
                               "gauss-cubic", 0.0));
    return m;
  }();
  const auto it = registry.find(label);
  if (it == registry.end()) {
    std::string names;
    for (const auto& [k, v] : registry) {
      if (!names.empty()) names += ", ";
      names += k;
    }
    throw std::invalid_argument("unknown problem label '" + label +
                                "'; available: " + names);
  }
  return it->second;
}

}  // namespace eesnis::problems

#endif  // EESNIS_PROBLEMS_HPP
