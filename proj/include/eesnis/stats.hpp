// Replication-level statistics: the parallel replication driver, coverage and
// normality diagnostics, and RMSE-vs-n slope fits. Replications are
// embarrassingly parallel (each uses only its own derived streams), so the
// result is identical for any worker count; EE_SNIS_WORKERS caps the pool.

#ifndef EESNIS_STATS_HPP
#define EESNIS_STATS_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "eesnis/core.hpp"
#include "eesnis/normal.hpp"
#include "eesnis/running_moments.hpp"

namespace eesnis::stats {

struct AllReplicationsFailed : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// One replication's result. EE-specific fields stay NaN for estimators that
/// do not produce them; `unique` is -1 when not applicable.
struct RepOutcome {
  double estimate = std::numeric_limits<double>::quiet_NaN();
  std::optional<double> std_error;
  double sigma_plus = std::numeric_limits<double>::quiet_NaN();
  double sigma_minus = std::numeric_limits<double>::quiet_NaN();
  double theta_star = std::numeric_limits<double>::quiet_NaN();
  double theta_used = std::numeric_limits<double>::quiet_NaN();
  double f_bar = std::numeric_limits<double>::quiet_NaN();
  double f_underbar = std::numeric_limits<double>::quiet_NaN();
  int unique = -1;
  FailureCode failure = FailureCode::none;
  std::uint64_t seed = 0;

  bool ok() const { return failure == FailureCode::none; }
};

using RepRunner = std::function<RepOutcome(std::uint64_t rep_index)>;

struct ReplicationSummary {
  std::string estimator_label;
  std::string n_config;
  std::size_t replications = 0;
  std::size_t failures = 0;
  double mean_estimate = std::numeric_limits<double>::quiet_NaN();
  double empirical_sd = 0.0;
  double mean_reported_se = 0.0;
  double coverage_95 = 0.0;
  double ks_statistic = 0.0;
  std::vector<RepOutcome> outcomes;  // one per replication, in index order
};

inline constexpr double kZ95 = 1.959963984540054;

/// Zero-width CI convention: an exactly-recovered value counts as covered.
inline bool ci_covers(double estimate, double se, double mu0) {
  if (se > 0.0) {
    return std::fabs(estimate - mu0) <= kZ95 * se;
  }
  return std::fabs(estimate - mu0) <= 1e-10 * (1.0 + std::fabs(mu0));
}

/// Sup-distance between the empirical CDF of `values` and the standard
/// normal CDF.
inline double ks_normality(std::vector<double> values) {
  if (values.empty()) {
    throw std::invalid_argument("ks_normality: need at least one value");
  }
  for (double v : values) {
    if (!std::isfinite(v)) {
      throw std::invalid_argument("ks_normality: non-finite value");
    }
  }
  std::sort(values.begin(), values.end());
  const double n = static_cast<double>(values.size());
  double d = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double cdf = norm_cdf(values[i]);
    d = std::max(d, std::fabs(cdf - static_cast<double>(i) / n));
    d = std::max(d, std::fabs(static_cast<double>(i + 1) / n - cdf));
  }
  return d;
}

/// Worker pool size: EE_SNIS_WORKERS when set and positive, otherwise the
/// available hardware parallelism.
inline std::size_t default_workers() {
  if (const char* env = std::getenv("EE_SNIS_WORKERS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v >= 1) return static_cast<std::size_t>(v);
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw >= 1 ? hw : 1;
}

/// Runs `reps` replications of `runner` (index-addressed, so results do not
/// depend on the worker count) and aggregates against the oracle mu0.
inline ReplicationSummary run_replications_fn(const RepRunner& runner,
                                              std::size_t reps, double mu0,
                                              std::size_t workers = 0) {
  if (reps < 2) throw std::invalid_argument("run_replications: need >= 2 replications");
  if (workers == 0) workers = default_workers();
  workers = std::min(workers, reps);

  std::vector<RepOutcome> outcomes(reps);
  const auto run_range = [&](std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i) {
      try {
        outcomes[i] = runner(static_cast<std::uint64_t>(i));
      } catch (const EstimatorError& e) {
        outcomes[i] = RepOutcome{};
        outcomes[i].failure = e.code();
      }
    }
  };

  if (workers <= 1) {
    run_range(0, reps);
  } else {
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(workers);
    for (std::size_t w = 0; w < workers; ++w) {
      const std::size_t lo = reps * w / workers;
      const std::size_t hi = reps * (w + 1) / workers;
      pool.emplace_back([&, lo, hi, w] {
        try {
          run_range(lo, hi);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
    for (auto& t : pool) t.join();
    for (const auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }

  ReplicationSummary summary;
  summary.replications = reps;
  RunningMoments est_acc, se_acc;
  std::size_t covered = 0, cover_denom = 0;
  std::vector<double> standardized;
  for (const auto& o : outcomes) {
    if (!o.ok()) {
      ++summary.failures;
      continue;
    }
    est_acc.add(o.estimate);
    ++cover_denom;
    const double se = o.std_error.value_or(0.0);
    if (o.std_error) se_acc.add(*o.std_error);
    if (ci_covers(o.estimate, se, mu0)) ++covered;
    if (se > 0.0) standardized.push_back((o.estimate - mu0) / se);
  }
  if (est_acc.count == 0) {
    throw AllReplicationsFailed("run_replications: every replication failed");
  }
  summary.mean_estimate = est_acc.mean;
  summary.empirical_sd = est_acc.sd();
  summary.mean_reported_se = se_acc.count > 0 ? se_acc.mean : 0.0;
  summary.coverage_95 =
      cover_denom > 0 ? static_cast<double>(covered) / cover_denom : 0.0;
  summary.ks_statistic =
      standardized.size() >= 2 ? ks_normality(std::move(standardized)) : 0.0;
  summary.outcomes = std::move(outcomes);
  return summary;
}

struct SlopeResult {
  double slope = std::numeric_limits<double>::quiet_NaN();
  bool applicable = false;  // false in the zero-variance regime
  std::vector<std::size_t> n_grid;
  std::vector<double> rmse;
};

/// Least-squares slope of log RMSE against log n over the given grid.
inline SlopeResult rmse_slope_fn(
    const std::function<RepRunner(std::size_t n)>& runner_for_n,
    const std::vector<std::size_t>& n_grid, std::size_t reps, double mu0,
    std::size_t workers = 0) {
  if (n_grid.size() < 3) {
    throw std::invalid_argument("rmse_slope: need at least 3 grid sizes");
  }
  SlopeResult out;
  out.n_grid = n_grid;
  for (std::size_t n : n_grid) {
    const auto summary = run_replications_fn(runner_for_n(n), reps, mu0, workers);
    double mse = 0.0;
    std::size_t cnt = 0;
    for (const auto& o : summary.outcomes) {
      if (!o.ok()) continue;
      mse += (o.estimate - mu0) * (o.estimate - mu0);
      ++cnt;
    }
    out.rmse.push_back(std::sqrt(mse / static_cast<double>(cnt)));
  }
  const double floor = 1e-10 * (1.0 + std::fabs(mu0));
  out.applicable = std::all_of(out.rmse.begin(), out.rmse.end(),
                               [floor](double r) { return r > floor; });
  if (!out.applicable) return out;
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  const double m = static_cast<double>(n_grid.size());
  for (std::size_t i = 0; i < n_grid.size(); ++i) {
    const double x = std::log(static_cast<double>(n_grid[i]));
    const double y = std::log(out.rmse[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  out.slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
  return out;
}

}  // namespace eesnis::stats

#endif  // EESNIS_STATS_HPP
