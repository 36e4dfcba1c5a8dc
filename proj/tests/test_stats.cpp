#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "eesnis/estimators.hpp"
#include "eesnis/problems.hpp"
#include "eesnis/stats.hpp"

namespace {

using namespace eesnis;
using namespace eesnis::stats;

TEST(KsNormality, TrueNormalDrawsPassAtFivePercent) {
  RandomStream s = derive_stream(100, 0);
  std::vector<double> draws(2000);
  for (auto& d : draws) d = norm_quantile(s.uniform_open01());
  EXPECT_LE(ks_normality(std::move(draws)), 0.05);
}

TEST(KsNormality, AllZerosGivesOneHalf) {
  EXPECT_DOUBLE_EQ(ks_normality(std::vector<double>(50, 0.0)), 0.5);
}

TEST(KsNormality, RejectsNonFinite) {
  EXPECT_THROW(ks_normality({0.0, std::nan("")}), std::invalid_argument);
}

TEST(RunReplications, DegenerateFixtureCoversTrivially) {
  // Constant estimates with zero standard error: the zero-width CI centered
  // on mu0 counts as covering.
  const auto runner = [](std::uint64_t) {
    RepOutcome o;
    o.estimate = 2.0;
    o.std_error = 0.0;
    return o;
  };
  const auto summary = run_replications_fn(runner, 100, 2.0);
  EXPECT_EQ(summary.failures, 0u);
  EXPECT_DOUBLE_EQ(summary.empirical_sd, 0.0);
  EXPECT_DOUBLE_EQ(summary.coverage_95, 1.0);
}

TEST(RunReplications, FailureAccountingAlwaysBalances) {
  const auto runner = [](std::uint64_t i) -> RepOutcome {
    if (i % 3 == 0) throw ZeroWeightSum("synthetic");
    RepOutcome o;
    o.estimate = 1.0;
    o.std_error = 0.5;
    return o;
  };
  const auto summary = run_replications_fn(runner, 99, 1.0);
  EXPECT_EQ(summary.failures, 33u);
  std::size_t ok = 0;
  for (const auto& o : summary.outcomes) ok += o.ok() ? 1 : 0;
  EXPECT_EQ(ok + summary.failures, summary.replications);
  EXPECT_EQ(summary.outcomes[0].failure, FailureCode::zero_weight_sum);
}

TEST(RunReplications, AllFailedThrows) {
  const auto runner = [](std::uint64_t) -> RepOutcome {
    throw NonExistence("synthetic");
  };
  EXPECT_THROW(run_replications_fn(runner, 10, 0.0), AllReplicationsFailed);
}

TEST(RunReplications, WorkerCountDoesNotChangeResults) {
  const auto& pr = problems::by_label("discrete20");
  const auto q = problems::uniform_atoms_proposal(pr);
  const auto runner = [&](std::uint64_t rep) {
    RandomStream s = derive_stream(4242, rep * 16);
    const auto r = snis_estimate(pr.f, pr.target, q, 200, s);
    RepOutcome o;
    o.estimate = r.estimate;
    o.std_error = r.std_error;
    return o;
  };
  const auto a = run_replications_fn(runner, 64, pr.mu0, /*workers=*/1);
  const auto b = run_replications_fn(runner, 64, pr.mu0, /*workers=*/3);
  ASSERT_EQ(a.outcomes.size(), b.outcomes.size());
  for (std::size_t i = 0; i < a.outcomes.size(); ++i) {
    ASSERT_EQ(a.outcomes[i].estimate, b.outcomes[i].estimate);
  }
  EXPECT_EQ(a.mean_estimate, b.mean_estimate);
}

TEST(RunReplications, WellCalibratedIntervalsCoverNominally) {
  // Estimates drawn exactly from N(mu0, 1) with reported se = 1.
  const auto runner = [](std::uint64_t rep) {
    RandomStream s = derive_stream(555, rep);
    RepOutcome o;
    o.estimate = 3.0 + norm_quantile(s.uniform_open01());
    o.std_error = 1.0;
    return o;
  };
  const auto summary = run_replications_fn(runner, 2000, 3.0);
  EXPECT_GE(summary.coverage_95, 0.93);
  EXPECT_LE(summary.coverage_95, 0.97);
  EXPECT_LE(summary.ks_statistic, 0.05);
  EXPECT_NEAR(summary.mean_reported_se, 1.0, 1e-12);
  EXPECT_NEAR(summary.empirical_sd, 1.0, 0.08);
}

TEST(RmseSlope, PlainMcHasRootNRate) {
  const auto& pr = problems::by_label("discrete20");
  const auto runner_for_n = [&](std::size_t n) {
    return stats::RepRunner([&, n](std::uint64_t rep) {
      RandomStream s = derive_stream(777, rep * 16);
      const auto r = mc_estimate(pr.f, *pr.p_sampler, n, s);
      RepOutcome o;
      o.estimate = r.estimate;
      o.std_error = r.std_error;
      return o;
    });
  };
  const auto slope = rmse_slope_fn(runner_for_n, {100, 1000, 10000}, 200, pr.mu0);
  ASSERT_TRUE(slope.applicable);
  EXPECT_GE(slope.slope, -0.6);
  EXPECT_LE(slope.slope, -0.4);
}

TEST(RmseSlope, ZeroVarianceConfigurationFlagsNotApplicable) {
  const auto runner_for_n = [](std::size_t) {
    return stats::RepRunner([](std::uint64_t) {
      RepOutcome o;
      o.estimate = 1.0;  // exact recovery every time
      o.std_error = 0.0;
      return o;
    });
  };
  const auto slope = rmse_slope_fn(runner_for_n, {10, 100, 1000}, 50, 1.0);
  EXPECT_FALSE(slope.applicable);
  EXPECT_TRUE(std::isnan(slope.slope));
  for (double r : slope.rmse) EXPECT_LE(r, 1e-10 * 2.0);
}

}  // namespace
