#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "eesnis/ee_snis.hpp"
#include "eesnis/psi.hpp"
#include "eesnis/rng.hpp"

namespace {

using namespace eesnis;

WeightedSample make_sample(std::vector<WeightedObservation> obs) {
  WeightedSample s;
  s.observations = std::move(obs);
  return s;
}

// Independent oracle: direct O(n) summation of the estimating equation.
double naive_psi(const WeightedSample& plus, const WeightedSample& minus,
                 double mu, double norm_ratio = 1.0) {
  double a = 0.0;
  for (const auto& o : plus.observations) a += o.w * std::max(o.y - mu, 0.0);
  a /= static_cast<double>(plus.observations.size());
  double b = 0.0;
  for (const auto& o : minus.observations) b += o.w * std::max(mu - o.y, 0.0);
  b /= static_cast<double>(minus.observations.size());
  return a - norm_ratio * b;
}

// Independent oracle: bisection on psi_eval. Converges to a zero of Psi.
double bisect_root(const PsiFunction& psi, int iterations = 200) {
  double ymin = 1e300, ymax = -1e300, wsum = 0.0;
  for (std::size_t i = 0; i < psi.plus.size(); ++i) {
    ymin = std::min(ymin, psi.plus.y[i]);
    ymax = std::max(ymax, psi.plus.y[i]);
    wsum += psi.plus.w[i];
  }
  for (std::size_t i = 0; i < psi.minus.size(); ++i) {
    ymin = std::min(ymin, psi.minus.y[i]);
    ymax = std::max(ymax, psi.minus.y[i]);
    wsum += psi.minus.w[i];
  }
  double a = ymin - 1.0 - wsum;
  double b = ymax + 1.0 + wsum;
  for (int it = 0; it < iterations; ++it) {
    const double m = 0.5 * (a + b);
    if (psi_eval(psi, m) > 0.0) {
      a = m;
    } else {
      b = m;
    }
  }
  return 0.5 * (a + b);
}

struct RandomInstance {
  WeightedSample plus;
  WeightedSample minus;
};

RandomInstance random_instance(RandomStream& s) {
  RandomInstance inst;
  const auto gen_side = [&s](std::size_t n) {
    std::vector<WeightedObservation> obs(n);
    for (auto& o : obs) {
      o.y = 6.0 * s.uniform01() - 3.0;
      o.w = s.uniform01() < 0.2 ? 0.0 : 2.0 * s.uniform01();
    }
    obs[static_cast<std::size_t>(s.uniform01() * n) % n].w = 0.5 + s.uniform01();
    return obs;
  };
  inst.plus = make_sample(gen_side(1 + static_cast<std::size_t>(s.uniform01() * 100)));
  inst.minus = make_sample(gen_side(1 + static_cast<std::size_t>(s.uniform01() * 100)));
  return inst;
}

TEST(PsiEval, HandValuesFromSinglePoints) {
  const auto psi = build_psi(make_sample({{2.0, 1.0}}), make_sample({{0.0, 1.0}}));
  EXPECT_DOUBLE_EQ(psi_eval(psi, 0.0), 2.0);
  EXPECT_DOUBLE_EQ(psi_eval(psi, 2.0), -2.0);
}

TEST(PsiEval, TwoPointHandCase) {
  // plus = {(3,2)}, minus = {(1,1)}: Psi(2) = 2*(3-2) - 1*(2-1) = 1.
  const auto plus = make_sample({{3.0, 2.0}});
  const auto minus = make_sample({{1.0, 1.0}});
  const auto psi = build_psi(plus, minus);
  EXPECT_DOUBLE_EQ(psi_eval(psi, 2.0), 1.0);
  EXPECT_DOUBLE_EQ(psi_eval(psi, 2.0), naive_psi(plus, minus, 2.0));
}

TEST(PsiEval, TailFormulas) {
  RandomStream s = derive_stream(21, 0);
  const auto inst = random_instance(s);
  const auto psi = build_psi(inst.plus, inst.minus);
  const double lo = psi.breakpoints.front() - 2.0;
  const double hi = psi.breakpoints.back() + 2.0;
  // Below every y only the plus side is active; above, only the minus side.
  double plus_all = 0.0;
  for (const auto& o : inst.plus.observations) plus_all += o.w * (o.y - lo);
  plus_all /= inst.plus.observations.size();
  EXPECT_NEAR(psi_eval(psi, lo), plus_all, 1e-12 * (1.0 + std::fabs(plus_all)));
  double minus_all = 0.0;
  for (const auto& o : inst.minus.observations) minus_all += o.w * (hi - o.y);
  minus_all /= inst.minus.observations.size();
  EXPECT_NEAR(psi_eval(psi, hi), -minus_all, 1e-12 * (1.0 + minus_all));
}

TEST(PsiEval, MatchesNaiveSummationOnRandomProbes) {
  RandomStream s = derive_stream(22, 0);
  for (int rep = 0; rep < 20; ++rep) {
    const auto inst = random_instance(s);
    const auto psi = build_psi(inst.plus, inst.minus);
    for (int k = 0; k < 100; ++k) {
      const double mu = 8.0 * s.uniform01() - 4.0;
      const double direct = naive_psi(inst.plus, inst.minus, mu);
      EXPECT_NEAR(psi_eval(psi, mu), direct, 1e-12 * (1.0 + std::fabs(direct)))
          << "rep=" << rep << " mu=" << mu;
    }
  }
}

TEST(PsiEval, AllPlusWeightsZeroIsNonpositive) {
  const auto plus = make_sample({{1.0, 0.0}, {2.0, 0.0}});
  const auto minus = make_sample({{0.0, 1.0}});
  const auto psi = build_psi(plus, minus);
  for (double mu = -3.0; mu <= 3.0; mu += 0.25) {
    EXPECT_LE(psi_eval(psi, mu), 0.0);
  }
  EXPECT_FALSE(psi.f_bar.has_value());
  EXPECT_THROW(solve_root(psi), NonExistence);
}

TEST(PsiDerivative, HandValues) {
  const auto psi = build_psi(make_sample({{3.0, 2.0}}), make_sample({{1.0, 1.0}}));
  // Below all y: all plus indicators on, all minus off.
  EXPECT_DOUBLE_EQ(psi_derivative(psi, 0.0), -2.0);
  // mu = 2: plus point above, minus point below -> -2 - 1 = -3.
  EXPECT_DOUBLE_EQ(psi_derivative(psi, 2.0), -3.0);
  // At a stored breakpoint the two-sided derivative is refused.
  EXPECT_THROW(psi_derivative(psi, 3.0), AtBreakpoint);
  EXPECT_DOUBLE_EQ(psi_derivative(psi, 3.0, Side::left), -3.0);
  EXPECT_DOUBLE_EQ(psi_derivative(psi, 3.0, Side::right), -1.0);
}

TEST(PsiDerivative, FiniteDifferenceWithinSegments) {
  RandomStream s = derive_stream(23, 0);
  for (int rep = 0; rep < 30; ++rep) {
    const auto inst = random_instance(s);
    const auto psi = build_psi(inst.plus, inst.minus);
    const auto& t = psi.breakpoints;
    for (std::size_t k = 0; k + 1 < t.size(); ++k) {
      const double gap = t[k + 1] - t[k];
      if (gap < 1e-5) continue;
      const double mu = 0.5 * (t[k] + t[k + 1]);
      const double h = std::min(1e-7 * (1.0 + std::fabs(mu)), 0.25 * gap);
      const double fd = (psi_eval(psi, mu + h) - psi_eval(psi, mu - h)) / (2.0 * h);
      const double d = psi_derivative(psi, mu);
      ASSERT_LE(d, 0.0);
      if (std::fabs(d) > 1e-9) {
        EXPECT_NEAR(fd, d, 1e-4 * std::fabs(d)) << "segment " << k;
      }
    }
  }
}

TEST(SolveRoot, SymmetricPairGivesMidpoint) {
  const auto psi = build_psi(make_sample({{2.0, 1.0}}), make_sample({{0.0, 1.0}}));
  const auto r = solve_root(psi);
  EXPECT_DOUBLE_EQ(r.mu_hat, 1.0);
  EXPECT_TRUE(r.unique);
  EXPECT_DOUBLE_EQ(*r.f_bar, 2.0);
  EXPECT_DOUBLE_EQ(*r.f_underbar, 0.0);
}

TEST(SolveRoot, WeightedHandCaseMatchesBisection) {
  // 2(3 - mu) = mu - 1  =>  mu = 7/3.
  const auto psi = build_psi(make_sample({{3.0, 2.0}}), make_sample({{1.0, 1.0}}));
  const auto r = solve_root(psi);
  EXPECT_NEAR(r.mu_hat, 7.0 / 3.0, 1e-15);
  EXPECT_NEAR(r.mu_hat, bisect_root(psi), 1e-12);
}

TEST(SolveRoot, SegmentInteriorCase) {
  // plus = {(1,1),(2,1)}, minus = {(0,1)}: on (0,1), Psi(mu) = 1.5 - 2mu.
  const auto psi =
      build_psi(make_sample({{1.0, 1.0}, {2.0, 1.0}}), make_sample({{0.0, 1.0}}));
  const auto r = solve_root(psi);
  EXPECT_DOUBLE_EQ(r.mu_hat, 0.75);
  EXPECT_NEAR(r.mu_hat, bisect_root(psi), 1e-12);
  EXPECT_NEAR(r.psi_dot_at_root, -2.0, 1e-15);
}

TEST(SolveRoot, PlateauReportsIntervalAndMidpoint) {
  // f_bar = 0 < 1 = f_underbar: Psi vanishes on [0, 1].
  const auto psi = build_psi(make_sample({{0.0, 1.0}}), make_sample({{1.0, 1.0}}));
  const auto r = solve_root(psi);
  EXPECT_FALSE(r.unique);
  ASSERT_TRUE(r.root_interval.has_value());
  EXPECT_DOUBLE_EQ(r.root_interval->first, 0.0);
  EXPECT_DOUBLE_EQ(r.root_interval->second, 1.0);
  EXPECT_DOUBLE_EQ(r.mu_hat, 0.5);
  for (double mu : {0.0, 0.25, 0.5, 0.9, 1.0}) {
    EXPECT_EQ(psi_eval(psi, mu), 0.0) << mu;
  }
}

TEST(SolveRoot, OracleEquivalenceOnRandomInstances) {
  RandomStream s = derive_stream(24, 0);
  int plateaus = 0;
  for (int rep = 0; rep < 1000; ++rep) {
    const auto inst = random_instance(s);
    const auto psi = build_psi(inst.plus, inst.minus);
    const auto r = solve_root(psi);
    const double b = bisect_root(psi);
    ASSERT_TRUE(psi.f_bar.has_value());
    ASSERT_TRUE(psi.f_underbar.has_value());
    EXPECT_EQ(r.unique, *psi.f_bar > *psi.f_underbar) << "rep " << rep;
    if (r.unique) {
      EXPECT_NEAR(r.mu_hat, b, 1e-10) << "rep " << rep;
    } else {
      ++plateaus;
      ASSERT_TRUE(r.root_interval.has_value());
      EXPECT_GE(b, r.root_interval->first - 1e-10);
      EXPECT_LE(b, r.root_interval->second + 1e-10);
      EXPECT_EQ(psi_eval(psi, r.mu_hat), 0.0);
    }
    // Residual bound scaled by the local segment magnitude.
    EXPECT_LE(std::fabs(r.psi_at_root),
              1e-9 * (1.0 + std::fabs(r.mu_hat * r.psi_dot_at_root)));
  }
  // Overlapping y ranges make plateaus rare but present.
  EXPECT_GT(plateaus, 0);
  EXPECT_LT(plateaus, 100);
}

TEST(PsiFunction, MonotoneNonincreasing) {
  RandomStream s = derive_stream(25, 0);
  for (int rep = 0; rep < 20; ++rep) {
    const auto inst = random_instance(s);
    const auto psi = build_psi(inst.plus, inst.minus);
    double prev_mu = -5.0;
    double prev = psi_eval(psi, prev_mu);
    for (int k = 1; k <= 50; ++k) {
      const double mu = -5.0 + 10.0 * k / 50.0;
      const double v = psi_eval(psi, mu);
      ASSERT_LE(v, prev + 1e-12 * (1.0 + std::fabs(prev)));
      prev = v;
      prev_mu = mu;
    }
  }
}

TEST(PsiFunction, PowerOfTwoWeightScalingIsExact) {
  RandomStream s = derive_stream(26, 0);
  for (int rep = 0; rep < 50; ++rep) {
    auto inst = random_instance(s);
    auto scaled_plus = inst.plus;
    auto scaled_minus = inst.minus;
    for (auto& o : scaled_plus.observations) o.w *= 1024.0;
    for (auto& o : scaled_minus.observations) o.w *= 1024.0;
    const auto psi = build_psi(inst.plus, inst.minus);
    const auto psi2 = build_psi(scaled_plus, scaled_minus);
    for (int k = 0; k < 10; ++k) {
      const double mu = 8.0 * s.uniform01() - 4.0;
      ASSERT_EQ(psi_eval(psi2, mu), 1024.0 * psi_eval(psi, mu));
    }
    const auto r1 = solve_root(psi);
    const auto r2 = solve_root(psi2);
    ASSERT_EQ(r1.mu_hat, r2.mu_hat);
    ASSERT_EQ(r1.unique, r2.unique);
    if (r1.unique) {
      const auto s1 = sandwich_variance(psi, r1.mu_hat);
      const auto s2 = sandwich_variance(psi2, r2.mu_hat);
      ASSERT_EQ(s1.std_error, s2.std_error);  // numerator and slope rescale together
      ASSERT_EQ(s1.theta_star, s2.theta_star);
    }
  }
}

TEST(BuildPsi, NormalizationRatioScalesMinusSide) {
  const auto plus = make_sample({{3.0, 2.0}});
  const auto minus = make_sample({{1.0, 1.0}});
  const auto psi = build_psi(plus, minus, 2.0);
  // Psi(2) = 2*(3-2) - 2*[1*(2-1)] = 0.
  EXPECT_DOUBLE_EQ(psi_eval(psi, 2.0), 0.0);
  EXPECT_DOUBLE_EQ(psi_eval(psi, 2.0), naive_psi(plus, minus, 2.0, 2.0));
  // Exactly-representable proposal rescalings cancel through the ratio: the
  // root of (w+/2, w-/4 with r = 2) matches the unscaled root bit for bit.
  auto plus_scaled = plus;
  auto minus_scaled = minus;
  for (auto& o : plus_scaled.observations) o.w /= 2.0;
  for (auto& o : minus_scaled.observations) o.w /= 4.0;
  const auto base = solve_root(build_psi(plus, minus));
  const auto ratio = solve_root(build_psi(plus_scaled, minus_scaled, 2.0));
  EXPECT_EQ(base.mu_hat, ratio.mu_hat);
}

TEST(Sandwich, HandValueThetaStar) {
  // At mu_hat = 0: plus summands {1, 3} (sd sqrt(2)), minus {1, 7} (sd 3 sqrt(2)).
  const auto psi = build_psi(make_sample({{1.0, 1.0}, {3.0, 1.0}}),
                             make_sample({{-1.0, 1.0}, {-7.0, 1.0}}));
  const auto s = sandwich_variance(psi, 0.0);
  EXPECT_NEAR(s.sigma_plus_hat, std::sqrt(2.0), 1e-14);
  EXPECT_NEAR(s.sigma_minus_hat, 3.0 * std::sqrt(2.0), 1e-14);
  EXPECT_NEAR(s.theta_star, 0.25, 1e-14);
  // var(Psi) = 2/2 + 18/2 = 10; |dPsi(0)| = 2.
  EXPECT_NEAR(s.std_error, std::sqrt(10.0) / 2.0, 1e-14);
  EXPECT_FALSE(s.degenerate);
}

TEST(Sandwich, DegenerateWhenBothSidesConstant) {
  // Single observation per side: sample variances are zero by convention.
  const auto psi = build_psi(make_sample({{2.0, 1.0}}), make_sample({{0.0, 1.0}}));
  const auto r = solve_root(psi);
  const auto s = sandwich_variance(psi, r.mu_hat);
  EXPECT_TRUE(s.degenerate);
  EXPECT_EQ(s.std_error, 0.0);
  EXPECT_EQ(s.theta_star, 0.5);
}

TEST(Recenter, ZeroCenteringIsIdentity) {
  Integrand f;
  f.dimension = 1;
  f.eval = [](const Point& x) { return x[0] * x[0]; };
  Integrand g0;
  g0.dimension = 1;
  g0.eval = [](const Point&) { return 0.0; };
  const auto h = recenter(f, g0);
  for (double x = -2.0; x <= 2.0; x += 0.5) {
    EXPECT_EQ(h.eval(point1(x)), f.eval(point1(x)));
  }
}

TEST(Recenter, FullCenteringMakesRootExact) {
  // g0 = f - mu0 turns the integrand into the constant mu0; the root of Psi
  // is then mu0 exactly for any proposals meeting the existence condition.
  const double mu0 = -1.25;
  const auto plus = make_sample({{mu0, 2.0}, {mu0, 0.5}});
  const auto minus = make_sample({{mu0, 1.0}});
  const auto psi = build_psi(plus, minus);
  const auto r = solve_root(psi);
  EXPECT_EQ(r.mu_hat, mu0);
  EXPECT_FALSE(r.unique);  // f_bar == f_underbar: a degenerate plateau
}

TEST(EeSnisEstimate, MinimalSampleIsWellDefined) {
  // n+ = n- = 1 with positive weights and straddling f values.
  UnnormalizedTarget t;
  t.dimension = 1;
  t.eval = [](const Point&) { return 1.0; };
  Integrand f;
  f.dimension = 1;
  f.eval = [](const Point& x) { return x[0]; };
  Proposal qp;
  qp.dimension = 1;
  qp.id = "point+";
  qp.pdf = [](const Point&) { return 1.0; };
  qp.draw = [](RandomStream&) { return point1(2.0); };
  Proposal qm = qp;
  qm.id = "point-";
  qm.draw = [](RandomStream&) { return point1(0.0); };
  RandomStream sp = derive_stream(1, 0);
  RandomStream sm = derive_stream(1, 1);
  const auto r = ee_snis_estimate(f, t, qp, qm, 1, 1, sp, sm);
  EXPECT_DOUBLE_EQ(r.mu_hat, 1.0);
  EXPECT_TRUE(r.unique);
  EXPECT_TRUE(r.degenerate_variance);
  EXPECT_EQ(r.std_error, 0.0);
}

}  // namespace
