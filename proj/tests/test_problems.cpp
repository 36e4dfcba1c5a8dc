#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <vector>

#include "eesnis/ee_snis.hpp"
#include "eesnis/normal.hpp"
#include "eesnis/problems.hpp"
#include "eesnis/quadrature.hpp"

namespace {

using namespace eesnis;
using namespace eesnis::problems;

Integrand integrand_x() {
  Integrand f;
  f.dimension = 1;
  f.id = "x";
  f.eval = [](const Point& x) { return x[0]; };
  return f;
}

TEST(DiscreteProblem, TwoAtomSymmetricOracle) {
  const auto& pr = by_label("discrete2");
  EXPECT_DOUBLE_EQ(pr.mu0, 0.0);
  EXPECT_DOUBLE_EQ(pr.c_p, 2.0);
  const auto ov = oracle_values(pr);
  EXPECT_DOUBLE_EQ(ov.mu_plus, 1.0);
  EXPECT_DOUBLE_EQ(ov.mu_minus, 1.0);
}

TEST(DiscreteProblem, WeightedMeanOracle) {
  const auto& pr = by_label("discrete3");
  EXPECT_DOUBLE_EQ(pr.mu0, 2.0);
  EXPECT_DOUBLE_EQ(pr.c_p, 3.0);
}

TEST(DiscreteProblem, TwentyAtomFixtureMatchesIndependentSummation) {
  const auto& pr = by_label("discrete20");
  // Independent summation over the exposed atom table.
  double cp = 0.0, sum = 0.0;
  for (const auto& a : pr.atoms->atoms()) {
    cp += a.mass;
    sum += a.mass * a.f;
  }
  EXPECT_NEAR(pr.c_p, cp, 1e-12 * cp);
  EXPECT_NEAR(pr.mu0, sum / cp, 1e-12 * (1.0 + std::fabs(sum / cp)));
  bool has_pos = false, has_neg = false;
  for (const auto& a : pr.atoms->atoms()) {
    has_pos |= a.f > pr.mu0 && a.mass > 0.0;
    has_neg |= a.f < pr.mu0 && a.mass > 0.0;
  }
  EXPECT_TRUE(has_pos);
  EXPECT_TRUE(has_neg);
}

TEST(DiscreteProblem, DegenerateIntegrandRejected) {
  std::vector<DiscreteAtom> atoms = {{point1(0.0), 1.0, 2.0}, {point1(1.0), 3.0, 2.0}};
  EXPECT_THROW(discrete_problem(atoms, "const"), DegenerateProblem);
  EXPECT_NO_THROW(discrete_problem(atoms, "const", /*allow_degenerate=*/true));
}

TEST(DiscreteProblem, TwoDimensionalAtomsWork) {
  std::vector<DiscreteAtom> atoms = {
      {{0.0, 0.0}, 1.0, 1.0}, {{1.0, -1.0}, 2.0, -2.0}, {{0.5, 2.0}, 1.0, 3.0}};
  const auto pr = discrete_problem(atoms, "d2");
  EXPECT_EQ(pr.target.dimension, 2);
  const auto q = uniform_atoms_proposal(pr);
  RandomStream s = derive_stream(31, 0);
  const auto sample = draw_weighted_sample(pr.target, pr.f, q, 300, s);
  for (const auto& o : sample.observations) {
    ASSERT_GT(o.w, 0.0);
  }
}

TEST(GaussianProblem, AnalyticOracles) {
  EXPECT_DOUBLE_EQ(by_label("gauss-x").mu0, 0.0);
  EXPECT_DOUBLE_EQ(by_label("gauss-x2").mu0, 1.0);
  EXPECT_DOUBLE_EQ(by_label("gauss-cubic").mu0, 0.0);
  EXPECT_DOUBLE_EQ(by_label("gauss-x").c_p, std::sqrt(2.0 * M_PI));
}

TEST(GaussianProblem, QuadratureOracleMatchesKnownMean) {
  const auto pr = gaussian_problem(0.3, 1.2, integrand_x(), "shifted");
  EXPECT_NEAR(pr.mu0, 0.3, 1e-9);
  EXPECT_NEAR(pr.var_f, 1.44, 1e-8);
}

TEST(OracleValues, MuPlusEqualsMuMinus) {
  for (const char* label : {"discrete20", "discrete-asym", "gauss-x", "gauss-x2",
                            "gauss-cubic", "dyadic16"}) {
    const auto ov = oracle_values(by_label(label));
    const double scale = std::max(1.0, std::fabs(ov.mu_plus));
    EXPECT_NEAR(ov.mu_plus, ov.mu_minus, 1e-9 * scale) << label;
  }
}

TEST(OracleValues, OptimalProposalsGiveZeroSigma) {
  const auto& pr = by_label("gauss-x");
  const auto def = defensive_proposal(pr);
  const auto qp = optimal_proposal(pr, SignSide::plus, pr.mu0, 0.0, def);
  const auto qm = optimal_proposal(pr, SignSide::minus, pr.mu0, 0.0, def);
  const auto ov = oracle_values(pr, &qp.mixed, &qm.mixed);
  ASSERT_TRUE(ov.sigma2_plus.has_value());
  ASSERT_TRUE(ov.sigma2_minus.has_value());
  EXPECT_LE(*ov.sigma2_plus, 1e-12);
  EXPECT_LE(*ov.sigma2_minus, 1e-12);
}

TEST(OracleValues, TwoAtomTauSquaredConventions) {
  const auto& pr = by_label("discrete2");
  const auto q = uniform_atoms_proposal(pr);
  const auto ov = oracle_values(pr, nullptr, nullptr, &q);
  ASSERT_TRUE(ov.tau2_q.has_value());
  // Normalized-p convention (matches the SNIS delta-method limit).
  EXPECT_DOUBLE_EQ(*ov.tau2_q, 1.0);
  // The p_u convention is c_p^2 times larger: 4 for this fixture.
  EXPECT_DOUBLE_EQ(pr.c_p * pr.c_p * *ov.tau2_q, 4.0);
}

TEST(OracleValues, AsymmetricFixtureHasSigmaRatioThree) {
  const auto& pr = by_label("discrete-asym");
  // Two-atom uniform proposals per side.
  Proposal qp = categorical_proposal(pr.atoms, {0.5, 0.5, 0.0, 0.0}, "qa+");
  Proposal qm = categorical_proposal(pr.atoms, {0.0, 0.0, 0.5, 0.5}, "qa-");
  const auto ov = oracle_values(pr, &qp, &qm);
  ASSERT_TRUE(ov.sigma2_plus.has_value());
  ASSERT_TRUE(ov.sigma2_minus.has_value());
  EXPECT_NEAR(*ov.sigma2_plus, 2.25, 1e-12);
  EXPECT_NEAR(*ov.sigma2_minus, 0.25, 1e-12);
  EXPECT_NEAR(std::sqrt(*ov.sigma2_plus / *ov.sigma2_minus), 3.0, 1e-9);
}

TEST(PopulationPsi, LinearInMuWithSlopeCp) {
  for (const char* label : {"discrete2", "discrete20", "dyadic16"}) {
    const auto& pr = by_label(label);
    for (double delta : {0.1, 1.0}) {
      EXPECT_NEAR(population_psi(pr, pr.mu0 + delta), -pr.c_p * delta,
                  1e-12 * pr.c_p * (1.0 + delta))
          << label;
      EXPECT_NEAR(population_psi(pr, pr.mu0 - delta), pr.c_p * delta,
                  1e-12 * pr.c_p * (1.0 + delta))
          << label;
    }
  }
  const auto& g = by_label("gauss-x");
  EXPECT_NEAR(population_psi(g, 0.5), -g.c_p * 0.5, 1e-8 * g.c_p);
}

TEST(OptimalProposal, DiscreteTwoAtomPlusSideIsPointMass) {
  const auto& pr = by_label("discrete2");
  const auto def = defensive_proposal(pr);
  const auto mix = optimal_proposal(pr, SignSide::plus, 0.0, 0.0, def);
  // Only the f = +1 atom has (f - 0)_+ > 0.
  EXPECT_DOUBLE_EQ(mix.mixed.pdf(point1(0.0)), 1.0);
  EXPECT_DOUBLE_EQ(mix.mixed.pdf(point1(1.0)), 0.0);
}

TEST(OptimalProposal, EpsilonOneIsDefensive) {
  const auto& pr = by_label("gauss-x");
  const auto def = defensive_proposal(pr);
  const auto mix = optimal_proposal(pr, SignSide::plus, 0.0, 1.0, def);
  RandomStream s1 = derive_stream(5, 1);
  RandomStream s2 = derive_stream(5, 1);
  for (int i = 0; i < 50; ++i) {
    const Point a = mix.mixed.draw(s1);
    const Point b = def.draw(s2);
    ASSERT_EQ(a[0], b[0]);
    ASSERT_EQ(mix.mixed.pdf(a), def.pdf(a));
  }
}

TEST(OptimalProposal, EmptySideThrows) {
  const auto& pr = by_label("discrete2");
  const auto def = defensive_proposal(pr);
  // center above every f value leaves no plus-side mass.
  EXPECT_THROW(optimal_proposal(pr, SignSide::plus, 10.0, 0.0, def), EmptySide);
}

TEST(OptimalProposal, MixturePdfIntegratesToOne) {
  const auto& pr = by_label("gauss-x");
  const auto def = defensive_proposal(pr);
  for (double eps : {0.05, 0.5}) {
    const auto mix = optimal_proposal(pr, SignSide::plus, pr.mu0, eps, def);
    // Window wide enough for the defensive N(0,3) tails.
    const double mass = integrate_piecewise(
        [&](double x) { return mix.mixed.pdf(point1(x)); }, -30.0, 30.0,
        {0.0, pr.support_lo, pr.support_hi}, 1e-9);
    EXPECT_NEAR(mass, 1.0, 1e-6) << "eps=" << eps;
  }
}

TEST(OptimalProposal, SupportConditionHoldsWithEpsilon) {
  const auto& pr = by_label("gauss-x");
  const auto def = defensive_proposal(pr);
  const auto mix = optimal_proposal(pr, SignSide::plus, pr.mu0, 0.05, def);
  // Defensive cover: pdf positive across a wide mu-interval around mu0.
  for (double x = -6.0; x <= 6.0; x += 0.37) {
    ASSERT_GT(mix.mixed.pdf(point1(x)), 0.0) << x;
  }
}

TEST(SnisOptimalProposal, TwoAtomSymmetricIsUniform) {
  const auto& pr = by_label("discrete2");
  const auto q = snis_optimal_proposal(pr);
  EXPECT_DOUBLE_EQ(q.pdf(point1(0.0)), 0.5);
  EXPECT_DOUBLE_EQ(q.pdf(point1(1.0)), 0.5);
}

TEST(SnisOptimalProposal, GaussXIsBimodal) {
  const auto& pr = by_label("gauss-x");
  const auto q = snis_optimal_proposal(pr);
  EXPECT_EQ(q.pdf(point1(0.0)), 0.0);
  EXPECT_GT(q.pdf(point1(1.0)), 0.1);
  EXPECT_GT(q.pdf(point1(-1.0)), 0.1);
  // Density is |x| e^{-x^2/2} / 2.
  EXPECT_NEAR(q.pdf(point1(1.0)), std::exp(-0.5) / 2.0, 1e-9);
}

// Chi-square goodness-of-fit of 1e5 inverse-CDF draws against the grid cell
// masses, significance 0.001 (Wilson-Hilferty critical value).
TEST(GridSampler, ChiSquareFidelity) {
  const auto& pr = by_label("gauss-x");
  auto fe = pr.f.eval;
  auto te = pr.target.eval;
  const auto shape = [fe, te](double x) {
    return std::max(fe(point1(x)), 0.0) * te(point1(x));
  };
  GridDensity1D grid(shape, pr.support_lo, pr.support_hi, 512, {0.0});
  const std::size_t n = 100000;
  RandomStream s = derive_stream(77, 0);
  std::vector<double> draws(n);
  for (auto& d : draws) d = grid.quantile(s.uniform_open01());
  std::sort(draws.begin(), draws.end());

  // Merge cells until each bin expects at least 5 draws.
  std::vector<double> edges;
  std::vector<double> expected;
  double acc = 0.0;
  edges.push_back(grid.nodes().front());
  for (std::size_t k = 0; k < grid.cell_count(); ++k) {
    acc += grid.cell_mass(k) / grid.total() * static_cast<double>(n);
    if (acc >= 5.0) {
      edges.push_back(grid.nodes()[k + 1]);
      expected.push_back(acc);
      acc = 0.0;
    }
  }
  expected.back() += acc;
  edges.back() = grid.nodes().back();

  double chi2 = 0.0;
  std::size_t i = 0;
  for (std::size_t b = 0; b + 1 < edges.size(); ++b) {
    std::size_t count = 0;
    while (i < draws.size() && (b + 2 == edges.size() || draws[i] <= edges[b + 1])) {
      ++count;
      ++i;
    }
    const double d = static_cast<double>(count) - expected[b];
    chi2 += d * d / expected[b];
  }
  const double df = static_cast<double>(expected.size() - 1);
  const double z = norm_quantile(0.999);
  const double crit =
      df * std::pow(1.0 - 2.0 / (9.0 * df) + z * std::sqrt(2.0 / (9.0 * df)), 3.0);
  EXPECT_LT(chi2, crit) << "df=" << df;
}

TEST(Holes, UniformProposalOverHolesStaysUnbiased) {
  const auto& pr = by_label("discrete-holes");
  const auto q = uniform_atoms_proposal(pr);
  RandomStream s = derive_stream(78, 0);
  const std::size_t n = 50000;
  const auto sample = draw_weighted_sample(pr.target, pr.f, q, n, s);
  std::size_t zero_w = 0;
  WeightedMean wm;
  for (const auto& o : sample.observations) {
    if (o.w == 0.0) ++zero_w;
    wm.add(o.y, o.w);
  }
  EXPECT_GT(zero_w, n / 3);  // 2 of 5 atoms are holes
  double s2 = 0.0;
  for (const auto& o : sample.observations) {
    const double d = o.y - wm.mean;
    s2 += o.w * o.w * d * d;
  }
  const double se = std::sqrt(s2) / wm.weight_sum;
  EXPECT_LT(std::fabs(wm.mean - pr.mu0), 5.0 * se);
}

TEST(DiscreteProblem, MeanWeightEstimatesNormalizingConstant) {
  const auto& pr = by_label("discrete20");
  const auto q = uniform_atoms_proposal(pr);
  RandomStream s = derive_stream(79, 0);
  const std::size_t n = 1000;
  const auto sample = draw_weighted_sample(pr.target, pr.f, q, n, s);
  double sum = 0.0, sum2 = 0.0;
  for (const auto& o : sample.observations) {
    sum += o.w;
    sum2 += o.w * o.w;
  }
  const double mean = sum / n;
  const double se = std::sqrt((sum2 / n - mean * mean) / n);
  EXPECT_LT(std::fabs(mean - pr.c_p), 5.0 * se);
}

TEST(Registry, UnknownLabelNamesAlternatives) {
  try {
    by_label("nope");
    FAIL() << "expected invalid_argument";
  } catch (const std::invalid_argument& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("gauss-x"), std::string::npos);
    EXPECT_NE(msg.find("discrete20"), std::string::npos);
  }
}

}  // namespace
