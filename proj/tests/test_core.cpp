#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "eesnis/core.hpp"
#include "eesnis/grid_density.hpp"
#include "eesnis/normal.hpp"
#include "eesnis/quadrature.hpp"

namespace {

using namespace eesnis;

UnnormalizedTarget gauss_target(double mean, double sd) {
  UnnormalizedTarget t;
  t.dimension = 1;
  t.id = "gauss";
  t.eval = [mean, sd](const Point& x) {
    const double z = (x[0] - mean) / sd;
    return std::exp(-0.5 * z * z);
  };
  t.log_eval = [mean, sd](const Point& x) {
    const double z = (x[0] - mean) / sd;
    return -0.5 * z * z;
  };
  return t;
}

Proposal gauss_proposal(double mean, double sd, const std::string& id) {
  Proposal q;
  q.dimension = 1;
  q.id = id;
  q.pdf = [mean, sd](const Point& x) {
    return norm_pdf((x[0] - mean) / sd) / sd;
  };
  q.quantile = [mean, sd](double u) { return point1(mean + sd * norm_quantile(u)); };
  q.draw = [mean, sd](RandomStream& s) {
    return point1(mean + sd * norm_quantile(s.uniform_open01()));
  };
  return q;
}

Integrand identity_f() {
  Integrand f;
  f.dimension = 1;
  f.id = "x";
  f.eval = [](const Point& x) { return x[0]; };
  return f;
}

TEST(DrawWeightedSample, ReproducibleBitForBit) {
  const auto t = gauss_target(0.0, 1.0);
  const auto q = gauss_proposal(0.0, 1.5, "q");
  const auto f = identity_f();
  RandomStream s1 = derive_stream(99, 4);
  RandomStream s2 = derive_stream(99, 4);
  const auto a = draw_weighted_sample(t, f, q, 500, s1);
  const auto b = draw_weighted_sample(t, f, q, 500, s2);
  ASSERT_EQ(a.observations.size(), b.observations.size());
  for (std::size_t i = 0; i < a.observations.size(); ++i) {
    ASSERT_EQ(a.observations[i].y, b.observations[i].y);
    ASSERT_EQ(a.observations[i].w, b.observations[i].w);
  }
  EXPECT_EQ(a.source_seed, b.source_seed);
  EXPECT_EQ(a.proposal_id, "q");
}

TEST(DrawWeightedSample, QEqualsPGivesConstantWeight) {
  // q has the same shape as p_u up to the normalizing constant, so every
  // weight equals c_p up to rounding of the pdf evaluation.
  const auto t = gauss_target(0.5, 2.0);
  const auto q = gauss_proposal(0.5, 2.0, "p");
  const auto f = identity_f();
  RandomStream s = derive_stream(1, 0);
  const auto sample = draw_weighted_sample(t, f, q, 200, s);
  const double cp = 2.0 * std::sqrt(2.0 * M_PI);
  for (const auto& o : sample.observations) {
    ASSERT_NEAR(o.w, cp, 1e-12 * cp);
  }
}

TEST(DrawWeightedSample, HoleGivesZeroWeightNotError) {
  UnnormalizedTarget t = gauss_target(0.0, 1.0);
  auto base = t.eval;
  t.eval = [base](const Point& x) {
    if (x[0] > -0.5 && x[0] < 0.5) return 0.0;  // hole
    return base(x);
  };
  t.log_eval = nullptr;
  const auto q = gauss_proposal(0.0, 1.0, "q");
  RandomStream s = derive_stream(2, 0);
  const auto sample = draw_weighted_sample(t, identity_f(), q, 2000, s);
  int holes = 0;
  for (const auto& o : sample.observations) {
    if (o.w == 0.0) ++holes;
    ASSERT_GE(o.w, 0.0);
  }
  EXPECT_GT(holes, 200);  // ~38% of N(0,1) mass is in (-0.5, 0.5)
}

TEST(DrawWeightedSample, MeanWeightEstimatesNormalizingConstant) {
  const auto t = gauss_target(0.0, 1.0);
  const auto q = gauss_proposal(0.0, 1.5, "q");
  RandomStream s = derive_stream(3, 0);
  const std::size_t n = 100000;
  const auto sample = draw_weighted_sample(t, identity_f(), q, n, s);
  double sum = 0.0, sum2 = 0.0;
  for (const auto& o : sample.observations) {
    sum += o.w;
    sum2 += o.w * o.w;
  }
  const double mean = sum / n;
  const double cp = std::sqrt(2.0 * M_PI);
  const double se = std::sqrt((sum2 / n - mean * mean) / n);
  EXPECT_LT(std::fabs(mean - cp), 5.0 * se);
}

TEST(DrawWeightedSample, DimensionMismatchFailsFast) {
  auto t = gauss_target(0.0, 1.0);
  t.dimension = 2;
  const auto q = gauss_proposal(0.0, 1.0, "q");
  RandomStream s = derive_stream(4, 0);
  EXPECT_THROW(draw_weighted_sample(t, identity_f(), q, 10, s), std::invalid_argument);
}

TEST(DrawWeightedSample, NonFiniteWeightSignalsMismatch) {
  UnnormalizedTarget t;
  t.dimension = 1;
  t.eval = [](const Point&) { return std::numeric_limits<double>::quiet_NaN(); };
  const auto q = gauss_proposal(0.0, 1.0, "q");
  RandomStream s = derive_stream(5, 0);
  EXPECT_THROW(draw_weighted_sample(t, identity_f(), q, 5, s), NonFiniteWeight);
}

TEST(ImportanceWeight, LogFallbackHandlesPeakedTargets) {
  // Direct ratio underflows: p_u ~ exp(-600) against q ~ exp(-650).
  UnnormalizedTarget t;
  t.dimension = 1;
  t.eval = [](const Point&) { return std::exp(-600.0); };
  t.log_eval = [](const Point&) { return -600.0; };
  Proposal q;
  q.dimension = 1;
  q.pdf = [](const Point&) { return std::exp(-650.0); };
  q.log_pdf = [](const Point&) { return -650.0; };
  const double w = importance_weight(t, q, point1(0.0), q.pdf(point1(0.0)));
  EXPECT_NEAR(std::log(w), 50.0, 1e-9);
}

TEST(EffectiveSampleSize, MatchesHandValues) {
  std::vector<WeightedObservation> obs = {{0.0, 1.0}, {0.0, 1.0}, {0.0, 1.0}};
  EXPECT_NEAR(effective_sample_size(obs), 3.0, 1e-12);
  obs = {{0.0, 1.0}, {0.0, 0.0}};
  EXPECT_NEAR(effective_sample_size(obs), 1.0, 1e-12);
  obs = {};
  EXPECT_EQ(effective_sample_size(obs), 0.0);
}

TEST(GridDensity, PdfIntegratesToOne) {
  const auto shape = [](double x) {
    return std::max(x, 0.0) * std::exp(-0.5 * x * x);
  };
  GridDensity1D grid(shape, -9.0, 9.0, 4096, {0.0});
  const double mass = integrate_piecewise(
      [&](double x) { return grid.pdf(x); }, -9.0, 9.0, {0.0}, 1e-9);
  EXPECT_NEAR(mass, 1.0, 1e-6);
  EXPECT_NEAR(grid.total(), 1.0, 1e-12);  // integral of x exp(-x^2/2) on x>0
}

TEST(GridDensity, QuantileMonotoneAndInSupport) {
  const auto shape = [](double x) {
    return std::max(x, 0.0) * std::exp(-0.5 * x * x);
  };
  GridDensity1D grid(shape, -9.0, 9.0, 1024, {0.0});
  double prev = -1.0;
  for (int i = 1; i < 200; ++i) {
    const double u = i / 200.0;
    const double x = grid.quantile(u);
    ASSERT_GE(x, prev);
    ASSERT_GT(grid.pdf(x), 0.0) << "u=" << u;
    prev = x;
  }
  // Median of the Rayleigh(1) distribution is sqrt(2 ln 2).
  EXPECT_NEAR(grid.quantile(0.5), std::sqrt(2.0 * std::log(2.0)), 2e-2);
}

TEST(FindSignChanges, LocatesKinks) {
  const auto g = [](double x) { return x * x * x - 2.0 * x; };  // roots 0, +-sqrt(2)
  const auto roots = find_sign_changes(g, -3.0, 3.0);
  ASSERT_EQ(roots.size(), 3u);
  EXPECT_NEAR(roots[0], -std::sqrt(2.0), 1e-12);
  EXPECT_NEAR(roots[1], 0.0, 1e-12);
  EXPECT_NEAR(roots[2], std::sqrt(2.0), 1e-12);
}

}  // namespace
