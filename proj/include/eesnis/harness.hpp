// Command-line front end: experiment configuration, the estimator/problem
// registry, CSV emission and the self-test suite. This is the only module
// that performs I/O.
//
// Config files are flat `key = value` text, one pair per line, `#` comments.
// Replication CSV schema (one row per replication, 16 columns):
//   replication_index, estimator, n_plus, n_minus, epsilon, theta, estimate,
//   std_error, sigma_plus_hat, sigma_minus_hat, theta_star, f_bar,
//   f_underbar, unique, failure_code, seed
// Numbers carry 17 significant digits; every field is numeric or a bare
// token, so no quoting is ever needed. The fully-resolved config is echoed
// into `#`-prefixed header lines, making each output self-describing.

#ifndef EESNIS_HARNESS_HPP
#define EESNIS_HARNESS_HPP

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "eesnis/ee_snis.hpp"
#include "eesnis/estimators.hpp"
#include "eesnis/problems.hpp"
#include "eesnis/stats.hpp"

namespace eesnis::harness {

enum class EstimatorKind {
  mc,
  ois,
  snis,
  pois,
  gpois,
  dpis,
  tabi,
  tabi4,
  gtabi,
  ee_snis,
  coupled_ee_snis,
  coupled_snis,
};

inline const std::vector<std::pair<EstimatorKind, const char*>>& estimator_table() {
  static const std::vector<std::pair<EstimatorKind, const char*>> table = {
      {EstimatorKind::mc, "mc"},
      {EstimatorKind::ois, "ois"},
      {EstimatorKind::snis, "snis"},
      {EstimatorKind::pois, "pois"},
      {EstimatorKind::gpois, "gpois"},
      {EstimatorKind::dpis, "dpis"},
      {EstimatorKind::tabi, "tabi"},
      {EstimatorKind::tabi4, "tabi4"},
      {EstimatorKind::gtabi, "gtabi"},
      {EstimatorKind::ee_snis, "ee_snis"},
      {EstimatorKind::coupled_ee_snis, "coupled_ee_snis"},
      {EstimatorKind::coupled_snis, "coupled_snis"},
  };
  return table;
}

inline const char* estimator_name(EstimatorKind k) {
  for (const auto& [kind, name] : estimator_table()) {
    if (kind == k) return name;
  }
  return "?";
}

inline std::optional<EstimatorKind> parse_estimator_name(const std::string& s) {
  for (const auto& [kind, name] : estimator_table()) {
    if (s == name) return kind;
  }
  return std::nullopt;
}

inline std::string valid_estimator_names() {
  std::string out;
  for (const auto& [kind, name] : estimator_table()) {
    if (!out.empty()) out += ", ";
    out += name;
  }
  return out;
}

/// Documentation matrix: the distributions each proposal must approximate to
/// approach zero variance, plus side requirements ('|'-separated bare token,
/// safe inside CSV fields).
inline const char* estimator_targets(EstimatorKind k) {
  switch (k) {
    case EstimatorKind::mc: return "p";
    case EstimatorKind::ois: return "|f|p+needs:known-cp+one-signed-f";
    case EstimatorKind::snis: return "|f-mu0|p";
    case EstimatorKind::pois: return "f+p|f-p+needs:known-cp";
    case EstimatorKind::gpois: return "(f-g)+p|(f-g)-p+needs:known-cp+known-Eg";
    case EstimatorKind::dpis: return "fp|p";
    case EstimatorKind::tabi: return "f+p|f-p|p";
    case EstimatorKind::tabi4: return "f+p|f-p|p|p";
    case EstimatorKind::gtabi: return "(f-g)+p|(f-g)-p|p+needs:known-Eg";
    case EstimatorKind::ee_snis: return "(f-mu0)+p|(f-mu0)-p";
    case EstimatorKind::coupled_ee_snis: return "(f-mu0)+p|(f-mu0)-p+coupled";
    case EstimatorKind::coupled_snis: return "fp|p+coupled";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// Configuration.

class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string key, int line, const std::string& what)
      : std::runtime_error(line > 0
                               ? "config key '" + key + "' (line " +
                                     std::to_string(line) + "): " + what
                               : "config key '" + key + "': " + what),
        key_(std::move(key)),
        line_(line) {}
  const std::string& key() const { return key_; }
  int line() const { return line_; }

 private:
  std::string key_;
  int line_;
};

struct ExperimentConfig {
  std::string problem_label;
  EstimatorKind estimator = EstimatorKind::snis;
  std::vector<EstimatorKind> compare_estimators;  // `compare` only
  std::map<std::string, std::uint64_t> sizes;     // n, n_plus, n_minus, n1..n4
  double epsilon = 0.05;
  std::uint64_t replications = 0;
  std::uint64_t master_seed = 0;
  std::optional<double> theta;  // nullopt = "auto" (pilot)
  std::string coupling = "independent";
  std::string output_path = "eesnis_out.csv";
  std::string axis;          // `sweep` only: n | epsilon | theta
  std::vector<double> grid;  // `sweep` only
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

inline const std::vector<std::string>& known_keys() {
  static const std::vector<std::string> keys = {
      "problem", "estimator", "estimators", "n", "n_plus", "n_minus",
      "n1", "n2", "n3", "n4", "epsilon", "replications", "seed",
      "theta", "coupling", "output", "axis", "grid"};
  return keys;
}

inline bool is_size_key(const std::string& k) {
  return k == "n" || k == "n_plus" || k == "n_minus" || k == "n1" ||
         k == "n2" || k == "n3" || k == "n4";
}

inline std::uint64_t parse_u64(const std::string& key, int line, const std::string& v) {
  std::size_t pos = 0;
  unsigned long long out = 0;
  try {
    out = std::stoull(v, &pos);
  } catch (...) {
    throw ConfigError(key, line, "expected an unsigned integer, got '" + v + "'");
  }
  if (pos != v.size()) {
    throw ConfigError(key, line, "trailing characters after integer in '" + v + "'");
  }
  return static_cast<std::uint64_t>(out);
}

inline double parse_double(const std::string& key, int line, const std::string& v) {
  std::size_t pos = 0;
  double out = 0.0;
  try {
    out = std::stod(v, &pos);
  } catch (...) {
    throw ConfigError(key, line, "expected a number, got '" + v + "'");
  }
  if (pos != v.size()) {
    throw ConfigError(key, line, "trailing characters after number in '" + v + "'");
  }
  return out;
}

inline std::vector<std::string> split_csv_list(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

}  // namespace detail

using RawConfig = std::vector<std::pair<std::string, std::pair<std::string, int>>>;

/// Raw `key = value` pairs with line numbers; duplicates and unknown keys are
/// rejected with the offending key named.
inline RawConfig parse_raw_config(const std::string& text) {
  RawConfig raw;
  std::map<std::string, int> seen;
  std::stringstream ss(text);
  std::string line;
  int lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(line, lineno, "expected 'key = value'");
    }
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError("", lineno, "empty key");
    if (const auto it = seen.find(key); it != seen.end()) {
      throw ConfigError(key, lineno,
                        "duplicate key (first set on line " +
                            std::to_string(it->second) + ")");
    }
    seen[key] = lineno;
    if (std::find(detail::known_keys().begin(), detail::known_keys().end(), key) ==
        detail::known_keys().end()) {
      throw ConfigError(key, lineno, "unknown key");
    }
    raw.emplace_back(key, std::make_pair(value, lineno));
  }
  return raw;
}

/// Size fields each estimator accepts; anything else is rejected by name.
/// pois/gpois/ee_snis take either a total n (split by theta, or half/half)
/// or an explicit n_plus/n_minus pair.
inline void validate_sizes(EstimatorKind kind,
                           const std::map<std::string, std::uint64_t>& sizes) {
  const auto has = [&](const char* k) { return sizes.count(k) > 0; };
  const auto reject_outside = [&](std::initializer_list<const char*> allowed) {
    for (const auto& [k, v] : sizes) {
      if (std::find_if(allowed.begin(), allowed.end(),
                       [&](const char* a) { return k == a; }) == allowed.end()) {
        throw ConfigError(k, 0,
                          std::string("size field not accepted by estimator '") +
                              estimator_name(kind) + "'");
      }
    }
  };
  const auto require = [&](const char* k) {
    if (!has(k)) {
      throw ConfigError(k, 0, std::string("estimator '") + estimator_name(kind) +
                                  "' requires this size field");
    }
  };
  switch (kind) {
    case EstimatorKind::mc:
    case EstimatorKind::ois:
    case EstimatorKind::snis:
    case EstimatorKind::coupled_snis:
    case EstimatorKind::coupled_ee_snis:
      reject_outside({"n"});
      require("n");
      break;
    case EstimatorKind::pois:
    case EstimatorKind::gpois:
    case EstimatorKind::ee_snis:
      reject_outside({"n", "n_plus", "n_minus"});
      if (has("n") && (has("n_plus") || has("n_minus"))) {
        throw ConfigError("n", 0, "give either n or the n_plus/n_minus pair, not both");
      }
      if (!has("n")) {
        require("n_plus");
        require("n_minus");
      }
      break;
    case EstimatorKind::dpis:
      reject_outside({"n1", "n2"});
      require("n1");
      require("n2");
      break;
    case EstimatorKind::tabi:
    case EstimatorKind::gtabi:
      reject_outside({"n1", "n2", "n3"});
      require("n1");
      require("n2");
      require("n3");
      break;
    case EstimatorKind::tabi4:
      reject_outside({"n1", "n2", "n3", "n4"});
      require("n1");
      require("n2");
      require("n3");
      require("n4");
      break;
  }
}

/// Typed config from raw pairs, defaults resolved (epsilon = 0.05,
/// theta = auto), every value validated.
inline ExperimentConfig resolve_config(const RawConfig& raw, bool is_compare = false,
                                       bool is_sweep = false) {
  ExperimentConfig cfg;
  bool saw_problem = false, saw_estimator = false, saw_reps = false, saw_seed = false;
  for (const auto& [key, vl] : raw) {
    const auto& [value, line] = vl;
    if (key == "problem") {
      cfg.problem_label = value;
      saw_problem = true;
    } else if (key == "estimator") {
      const auto kind = parse_estimator_name(value);
      if (!kind) {
        throw ConfigError(key, line, "unknown estimator '" + value +
                                         "'; valid names: " + valid_estimator_names());
      }
      cfg.estimator = *kind;
      saw_estimator = true;
    } else if (key == "estimators") {
      for (const auto& name : detail::split_csv_list(value)) {
        const auto kind = parse_estimator_name(name);
        if (!kind) {
          throw ConfigError(key, line, "unknown estimator '" + name +
                                           "'; valid names: " + valid_estimator_names());
        }
        cfg.compare_estimators.push_back(*kind);
      }
      if (cfg.compare_estimators.empty()) {
        throw ConfigError(key, line, "empty estimator list");
      }
    } else if (detail::is_size_key(key)) {
      const auto v = detail::parse_u64(key, line, value);
      if (v == 0) throw ConfigError(key, line, "sizes must be >= 1");
      cfg.sizes[key] = v;
    } else if (key == "epsilon") {
      cfg.epsilon = detail::parse_double(key, line, value);
      if (!(cfg.epsilon >= 0.0 && cfg.epsilon <= 1.0)) {
        throw ConfigError(key, line, "epsilon must lie in [0, 1]");
      }
    } else if (key == "replications") {
      cfg.replications = detail::parse_u64(key, line, value);
      if (cfg.replications < 2) {
        throw ConfigError(key, line, "need at least 2 replications");
      }
      saw_reps = true;
    } else if (key == "seed") {
      cfg.master_seed = detail::parse_u64(key, line, value);
      saw_seed = true;
    } else if (key == "theta") {
      if (value == "auto") {
        cfg.theta = std::nullopt;
      } else {
        const double t = detail::parse_double(key, line, value);
        if (!(t > 0.0 && t < 1.0)) {
          throw ConfigError(key, line, "theta must satisfy 0 < theta < 1 (or 'auto')");
        }
        cfg.theta = t;
      }
    } else if (key == "coupling") {
      if (value != "identity" && value != "independent" && value != "comonotone" &&
          value != "antithetic") {
        throw ConfigError(key, line,
                          "coupling must be identity, independent, comonotone or "
                          "antithetic");
      }
      cfg.coupling = value;
    } else if (key == "output") {
      cfg.output_path = value;
    } else if (key == "axis") {
      if (value != "n" && value != "epsilon" && value != "theta") {
        throw ConfigError(key, line, "axis must be n, epsilon or theta");
      }
      cfg.axis = value;
    } else if (key == "grid") {
      for (const auto& item : detail::split_csv_list(value)) {
        cfg.grid.push_back(detail::parse_double(key, line, item));
      }
      if (cfg.grid.empty()) throw ConfigError(key, line, "empty grid");
    }
  }
  if (!saw_problem) throw ConfigError("problem", 0, "required key missing");
  if (!saw_reps) throw ConfigError("replications", 0, "required key missing");
  if (!saw_seed) throw ConfigError("seed", 0, "required key missing");
  if (is_compare) {
    if (cfg.compare_estimators.empty()) {
      throw ConfigError("estimators", 0, "compare requires an estimator list");
    }
    if (!cfg.sizes.count("n") || cfg.sizes.size() != 1) {
      throw ConfigError("n", 0, "compare takes exactly one total budget n");
    }
  } else {
    if (!saw_estimator) throw ConfigError("estimator", 0, "required key missing");
    validate_sizes(cfg.estimator, cfg.sizes);
  }
  if (is_sweep) {
    if (cfg.axis.empty()) throw ConfigError("axis", 0, "sweep requires an axis");
    if (cfg.grid.empty()) throw ConfigError("grid", 0, "sweep requires a grid");
  }
  return cfg;
}

/// Typed config straight from config-file text.
inline ExperimentConfig parse_config(const std::string& text) {
  return resolve_config(parse_raw_config(text));
}

// ---------------------------------------------------------------------------
// Estimator runners. Stream ids are rep*16 + role, roles:
//   0 plus / q1 / primary, 1 minus / q2, 2 q3, 3 q4, 4/5 theta pilot.

struct RunnerBundle {
  stats::RepRunner runner;
  std::uint64_t n_plus_col = 0;   // first sample size, for the CSV column
  std::uint64_t n_minus_col = 0;  // second sample size (0 when absent)
  std::uint64_t total_budget = 0;
  std::string n_desc;
};

namespace detail {

inline RandomStream role_stream(std::uint64_t master, std::uint64_t rep, int role) {
  return derive_stream(master, rep * 16 + static_cast<std::uint64_t>(role));
}

inline stats::RepOutcome outcome_of(const EstimatorReport& r) {
  stats::RepOutcome o;
  o.estimate = r.estimate;
  o.std_error = r.std_error;
  return o;
}

inline stats::RepOutcome outcome_of(const EeSnisReport& r) {
  stats::RepOutcome o;
  o.estimate = r.mu_hat;
  if (r.unique) o.std_error = r.std_error;
  o.sigma_plus = r.sigma_plus_hat;
  o.sigma_minus = r.sigma_minus_hat;
  o.theta_star = r.theta_star;
  if (r.f_bar) o.f_bar = *r.f_bar;
  if (r.f_underbar) o.f_underbar = *r.f_underbar;
  o.unique = r.unique ? 1 : 0;
  return o;
}

/// Default centering for gpois/gtabi: g = f/2 with theta = mu0/2 known from
/// the oracle. (f - g)_{+,-} is then proportional to f_{+,-}.
inline CenteringFunction default_centering(const problems::ProblemSpec& pr) {
  Integrand half;
  half.dimension = pr.f.dimension;
  half.id = pr.f.id + "/2";
  auto fe = pr.f.eval;
  half.eval = [fe](const Point& x) { return 0.5 * fe(x); };
  return CenteringFunction{half, 0.5 * pr.mu0};
}

// Side proposal with an EmptySide fallback to the defensive component (a
// one-signed integrand leaves that side inert anyway).
inline Proposal side_proposal_or_defensive(const problems::ProblemSpec& pr,
                                           problems::SignSide side, double center,
                                           double epsilon, const Proposal& def) {
  try {
    return problems::optimal_proposal(pr, side, center, epsilon, def).mixed;
  } catch (const EmptySide&) {
    return def;
  }
}

inline CoupledProposal make_coupling(const std::string& kind, const Proposal& q1,
                                     const Proposal& q2) {
  if (kind == "identity") return identity_coupling(q1);
  if (kind == "comonotone") return comonotone_coupling(q1, q2);
  if (kind == "antithetic") return antithetic_coupling(q1, q2);
  return independent_coupling(q1, q2);
}

inline std::pair<std::uint64_t, std::uint64_t> split_half(std::uint64_t n) {
  return {n / 2, n - n / 2};
}

inline std::uint64_t theta_split(double theta, std::uint64_t n) {
  const auto np = static_cast<std::uint64_t>(std::llround(
      theta * static_cast<double>(n)));
  return std::clamp<std::uint64_t>(np, 1, n - 1);
}

}  // namespace detail

/// Builds the per-replication runner for one estimator on one problem.
/// Proposals are constructed once here and shared (immutably) across
/// replications and workers.
inline RunnerBundle make_runner(const problems::ProblemSpec& pr,
                                const ExperimentConfig& cfg, EstimatorKind kind) {
  using problems::SignSide;
  RunnerBundle out;
  const auto& sizes = cfg.sizes;
  const auto size_or = [&](const char* k, std::uint64_t fallback) {
    const auto it = sizes.find(k);
    return it != sizes.end() ? it->second : fallback;
  };
  const std::uint64_t n_total = size_or("n", 0);
  const double eps = cfg.epsilon;
  const std::uint64_t master = cfg.master_seed;
  const Proposal def = problems::defensive_proposal(pr);

  switch (kind) {
    case EstimatorKind::mc: {
      if (!pr.p_sampler) {
        throw std::invalid_argument("mc requires a sampleable normalized target");
      }
      const Proposal p = *pr.p_sampler;
      const Integrand f = pr.f;
      out.n_plus_col = n_total;
      out.total_budget = n_total;
      out.runner = [=](std::uint64_t rep) {
        RandomStream s = detail::role_stream(master, rep, 0);
        auto o = detail::outcome_of(mc_estimate(f, p, n_total, s));
        o.seed = s.key();
        return o;
      };
      break;
    }
    case EstimatorKind::ois: {
      const Proposal p = *pr.p_sampler;
      const Proposal q = problems::abs_optimal_proposal(pr, 0.0, eps, def).mixed;
      const Integrand f = pr.f;
      out.n_plus_col = n_total;
      out.total_budget = n_total;
      out.runner = [=](std::uint64_t rep) {
        RandomStream s = detail::role_stream(master, rep, 0);
        auto o = detail::outcome_of(ois_estimate(f, p, q, n_total, s));
        o.seed = s.key();
        return o;
      };
      break;
    }
    case EstimatorKind::snis: {
      const Proposal q = problems::abs_optimal_proposal(pr, pr.mu0, eps, def).mixed;
      const Integrand f = pr.f;
      const UnnormalizedTarget t = pr.target;
      out.n_plus_col = n_total;
      out.total_budget = n_total;
      out.runner = [=](std::uint64_t rep) {
        RandomStream s = detail::role_stream(master, rep, 0);
        auto o = detail::outcome_of(snis_estimate(f, t, q, n_total, s));
        o.seed = s.key();
        return o;
      };
      break;
    }
    case EstimatorKind::pois:
    case EstimatorKind::gpois: {
      const Proposal qp = detail::side_proposal_or_defensive(pr, SignSide::plus, 0.0, eps, def);
      const Proposal qm = detail::side_proposal_or_defensive(pr, SignSide::minus, 0.0, eps, def);
      std::uint64_t np, nm;
      if (sizes.count("n_plus")) {
        np = sizes.at("n_plus");
        nm = sizes.at("n_minus");
      } else {
        std::tie(np, nm) = detail::split_half(n_total);
      }
      const Proposal p = *pr.p_sampler;
      const Integrand f = pr.f;
      const bool generalized = (kind == EstimatorKind::gpois);
      const CenteringFunction g = detail::default_centering(pr);
      out.n_plus_col = np;
      out.n_minus_col = nm;
      out.total_budget = np + nm;
      out.runner = [=](std::uint64_t rep) {
        RandomStream sp = detail::role_stream(master, rep, 0);
        RandomStream sm = detail::role_stream(master, rep, 1);
        const auto r = generalized
                           ? gpois_estimate(f, p, g, qp, qm, np, nm, sp, sm)
                           : pois_estimate(f, p, qp, qm, np, nm, sp, sm);
        auto o = detail::outcome_of(r);
        o.seed = sp.key();
        return o;
      };
      break;
    }
    case EstimatorKind::dpis: {
      const std::uint64_t n1 = size_or("n1", detail::split_half(n_total).first);
      const std::uint64_t n2 = size_or("n2", n_total - n1);
      const Proposal q1 = problems::abs_optimal_proposal(pr, 0.0, eps, def).mixed;
      const Proposal q2 = problems::p_mixture_proposal(pr, eps, def).mixed;
      const Integrand f = pr.f;
      const UnnormalizedTarget t = pr.target;
      out.n_plus_col = n1;
      out.n_minus_col = n2;
      out.total_budget = n1 + n2;
      out.runner = [=](std::uint64_t rep) {
        RandomStream s1 = detail::role_stream(master, rep, 0);
        RandomStream s2 = detail::role_stream(master, rep, 1);
        auto o = detail::outcome_of(dpis_estimate(f, t, q1, q2, n1, n2, s1, s2));
        o.seed = s1.key();
        return o;
      };
      break;
    }
    case EstimatorKind::tabi:
    case EstimatorKind::gtabi: {
      const std::uint64_t third = std::max<std::uint64_t>(1, n_total / 3);
      const std::uint64_t n1 = size_or("n1", third);
      const std::uint64_t n2 = size_or("n2", third);
      const std::uint64_t n3 = size_or("n3", n_total > 2 * third ? n_total - 2 * third : third);
      const Proposal q1 = detail::side_proposal_or_defensive(pr, SignSide::plus, 0.0, eps, def);
      const Proposal q2 = detail::side_proposal_or_defensive(pr, SignSide::minus, 0.0, eps, def);
      const Proposal q3 = problems::p_mixture_proposal(pr, eps, def).mixed;
      const Integrand f = pr.f;
      const UnnormalizedTarget t = pr.target;
      const bool generalized = (kind == EstimatorKind::gtabi);
      const CenteringFunction g = detail::default_centering(pr);
      out.n_plus_col = n1;
      out.n_minus_col = n2;
      out.total_budget = n1 + n2 + n3;
      out.runner = [=](std::uint64_t rep) {
        RandomStream s1 = detail::role_stream(master, rep, 0);
        RandomStream s2 = detail::role_stream(master, rep, 1);
        RandomStream s3 = detail::role_stream(master, rep, 2);
        const auto r = generalized
                           ? gtabi_estimate(f, t, g, q1, q2, q3, n1, n2, n3, s1, s2, s3)
                           : tabi_estimate(f, t, q1, q2, q3, n1, n2, n3, s1, s2, s3);
        auto o = detail::outcome_of(r);
        o.seed = s1.key();
        return o;
      };
      break;
    }
    case EstimatorKind::tabi4: {
      const std::uint64_t quarter = std::max<std::uint64_t>(1, n_total / 4);
      const std::uint64_t n1 = size_or("n1", quarter);
      const std::uint64_t n2 = size_or("n2", quarter);
      const std::uint64_t n3 = size_or("n3", quarter);
      const std::uint64_t n4 =
          size_or("n4", n_total > 3 * quarter ? n_total - 3 * quarter : quarter);
      const Proposal q1 = detail::side_proposal_or_defensive(pr, SignSide::plus, 0.0, eps, def);
      const Proposal q2 = detail::side_proposal_or_defensive(pr, SignSide::minus, 0.0, eps, def);
      const Proposal q34 = problems::p_mixture_proposal(pr, eps, def).mixed;
      const Integrand f = pr.f;
      const UnnormalizedTarget t = pr.target;
      out.n_plus_col = n1;
      out.n_minus_col = n2;
      out.total_budget = n1 + n2 + n3 + n4;
      out.runner = [=](std::uint64_t rep) {
        RandomStream s1 = detail::role_stream(master, rep, 0);
        RandomStream s2 = detail::role_stream(master, rep, 1);
        RandomStream s3 = detail::role_stream(master, rep, 2);
        RandomStream s4 = detail::role_stream(master, rep, 3);
        auto o = detail::outcome_of(
            tabi4_estimate(f, t, q1, q2, q34, q34, n1, n2, n3, n4, s1, s2, s3, s4));
        o.seed = s1.key();
        return o;
      };
      break;
    }
    case EstimatorKind::ee_snis: {
      const Proposal qp =
          problems::optimal_proposal(pr, SignSide::plus, pr.mu0, eps, def).mixed;
      const Proposal qm =
          problems::optimal_proposal(pr, SignSide::minus, pr.mu0, eps, def).mixed;
      const Integrand f = pr.f;
      const UnnormalizedTarget t = pr.target;
      const std::optional<double> theta = cfg.theta;
      std::uint64_t np = 0, nm = 0;
      const bool explicit_sides = sizes.count("n_plus") > 0;
      if (explicit_sides) {
        np = sizes.at("n_plus");
        nm = sizes.at("n_minus");
      } else if (theta) {
        np = detail::theta_split(*theta, n_total);
        nm = n_total - np;
      }
      out.n_plus_col = explicit_sides || theta ? np : n_total / 2;
      out.n_minus_col = explicit_sides || theta ? nm : n_total - n_total / 2;
      out.total_budget = explicit_sides ? np + nm : n_total;
      out.runner = [=](std::uint64_t rep) {
        RandomStream sp = detail::role_stream(master, rep, 0);
        RandomStream sm = detail::role_stream(master, rep, 1);
        if (explicit_sides || theta) {
          auto o = detail::outcome_of(ee_snis_estimate(f, t, qp, qm, np, nm, sp, sm));
          o.theta_used = static_cast<double>(np) / static_cast<double>(np + nm);
          o.seed = sp.key();
          return o;
        }
        // theta = auto: a pilot with 10% of the budget at an even split
        // estimates theta*, clipped to [0.05, 0.95]; the remainder runs at
        // the estimated allocation.
        const std::uint64_t n_pilot = std::max<std::uint64_t>(4, n_total / 10);
        RandomStream pp = detail::role_stream(master, rep, 4);
        RandomStream pm = detail::role_stream(master, rep, 5);
        const auto pilot =
            ee_snis_estimate(f, t, qp, qm, n_pilot / 2, n_pilot - n_pilot / 2, pp, pm);
        const double theta_hat =
            std::clamp(pilot.unique && !pilot.degenerate_variance ? pilot.theta_star : 0.5,
                       0.05, 0.95);
        const std::uint64_t n_main = n_total - n_pilot;
        const std::uint64_t mp = detail::theta_split(theta_hat, n_main);
        auto o = detail::outcome_of(ee_snis_estimate(f, t, qp, qm, mp, n_main - mp, sp, sm));
        o.theta_used = theta_hat;
        o.seed = sp.key();
        return o;
      };
      break;
    }
    case EstimatorKind::coupled_ee_snis: {
      const CoupledProposal joint = detail::make_coupling(cfg.coupling, def, def);
      const Integrand f = pr.f;
      const UnnormalizedTarget t = pr.target;
      const std::uint64_t n_pairs = std::max<std::uint64_t>(1, n_total / 2);
      out.n_plus_col = n_pairs;
      out.n_minus_col = n_pairs;
      out.total_budget = 2 * n_pairs;
      out.runner = [=](std::uint64_t rep) {
        RandomStream s = detail::role_stream(master, rep, 0);
        auto o = detail::outcome_of(coupled_ee_snis_estimate(f, t, joint, n_pairs, s));
        o.seed = s.key();
        return o;
      };
      break;
    }
    case EstimatorKind::coupled_snis: {
      const CoupledProposal joint = detail::make_coupling(cfg.coupling, def, def);
      const Integrand f = pr.f;
      const UnnormalizedTarget t = pr.target;
      const std::uint64_t n_pairs = std::max<std::uint64_t>(1, n_total / 2);
      out.n_plus_col = n_pairs;
      out.n_minus_col = n_pairs;
      out.total_budget = 2 * n_pairs;
      out.runner = [=](std::uint64_t rep) {
        RandomStream s = detail::role_stream(master, rep, 0);
        auto o = detail::outcome_of(coupled_snis_estimate(f, t, joint, n_pairs, s));
        o.seed = s.key();
        return o;
      };
      break;
    }
  }
  out.n_desc = "n_plus=" + std::to_string(out.n_plus_col) +
               " n_minus=" + std::to_string(out.n_minus_col);
  return out;
}

// ---------------------------------------------------------------------------
// CSV emission.

inline std::string format_number(double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline const char* replication_csv_header() {
  return "replication_index,estimator,n_plus,n_minus,epsilon,theta,estimate,"
         "std_error,sigma_plus_hat,sigma_minus_hat,theta_star,f_bar,f_underbar,"
         "unique,failure_code,seed";
}

inline std::vector<std::string> config_echo(const ExperimentConfig& cfg) {
  std::vector<std::string> lines;
  lines.push_back("# eesnis replication output");
  lines.push_back("# problem = " + cfg.problem_label);
  if (!cfg.compare_estimators.empty()) {
    std::string names;
    for (const auto k : cfg.compare_estimators) {
      if (!names.empty()) names += ",";
      names += estimator_name(k);
    }
    lines.push_back("# estimators = " + names);
  } else {
    lines.push_back("# estimator = " + std::string(estimator_name(cfg.estimator)));
  }
  for (const auto& [k, v] : cfg.sizes) {
    lines.push_back("# " + k + " = " + std::to_string(v));
  }
  lines.push_back("# epsilon = " + format_number(cfg.epsilon));
  lines.push_back("# replications = " + std::to_string(cfg.replications));
  lines.push_back("# seed = " + std::to_string(cfg.master_seed));
  lines.push_back("# theta = " + (cfg.theta ? format_number(*cfg.theta)
                                            : std::string("auto")));
  lines.push_back("# coupling = " + cfg.coupling);
  if (!cfg.axis.empty()) {
    std::string grid;
    for (double g : cfg.grid) {
      if (!grid.empty()) grid += ",";
      grid += format_number(g);
    }
    lines.push_back("# axis = " + cfg.axis);
    lines.push_back("# grid = " + grid);
  }
  return lines;
}

inline std::string replication_row(std::uint64_t index, EstimatorKind kind,
                                   const RunnerBundle& bundle, double epsilon,
                                   const stats::RepOutcome& o,
                                   const char* extra_column = nullptr) {
  std::ostringstream row;
  row << index << ',' << estimator_name(kind) << ',' << bundle.n_plus_col << ','
      << bundle.n_minus_col << ',' << format_number(epsilon) << ','
      << format_number(o.theta_used) << ',' << format_number(o.estimate) << ','
      << (o.std_error ? format_number(*o.std_error) : "nan") << ','
      << format_number(o.sigma_plus) << ',' << format_number(o.sigma_minus) << ','
      << format_number(o.theta_star) << ',' << format_number(o.f_bar) << ','
      << format_number(o.f_underbar) << ','
      << (o.unique < 0 ? "nan" : (o.unique ? "1" : "0")) << ','
      << failure_code_name(o.failure) << ',' << o.seed;
  if (extra_column) row << ',' << extra_column;
  return row.str();
}

inline void write_csv(const std::string& path, const std::vector<std::string>& lines) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw std::runtime_error("cannot open output file '" + path + "' for writing");
  }
  for (const auto& line : lines) {
    out << line << '\n';
  }
  if (!out) {
    throw std::runtime_error("write failed for output file '" + path + "'");
  }
}

// ---------------------------------------------------------------------------
// Experiment drivers.

/// `run`: one estimator, one problem; per-replication rows.
inline stats::ReplicationSummary run_experiment(const ExperimentConfig& cfg,
                                                std::ostream& log = std::cout) {
  const auto& pr = problems::by_label(cfg.problem_label);
  const auto bundle = make_runner(pr, cfg, cfg.estimator);
  auto summary =
      stats::run_replications_fn(bundle.runner, cfg.replications, pr.mu0);
  summary.estimator_label = estimator_name(cfg.estimator);
  summary.n_config = bundle.n_desc;

  std::vector<std::string> lines = config_echo(cfg);
  lines.push_back(replication_csv_header());
  for (std::size_t i = 0; i < summary.outcomes.size(); ++i) {
    lines.push_back(replication_row(i, cfg.estimator, bundle, cfg.epsilon,
                                    summary.outcomes[i]));
  }
  write_csv(cfg.output_path, lines);
  log << "run " << estimator_name(cfg.estimator) << " on " << cfg.problem_label
      << ": reps=" << summary.replications << " failures=" << summary.failures
      << " mean=" << format_number(summary.mean_estimate)
      << " sd=" << format_number(summary.empirical_sd) << " -> " << cfg.output_path
      << "\n";
  return summary;
}

/// `compare`: several estimators on one problem, long-format rows with the
/// documentation column mapping each estimator to its proposal targets.
inline void compare_experiment(const ExperimentConfig& cfg,
                               std::ostream& log = std::cout) {
  const auto& pr = problems::by_label(cfg.problem_label);
  std::vector<std::string> lines = config_echo(cfg);
  lines.push_back(std::string(replication_csv_header()) + ",table1_targets");
  for (const auto kind : cfg.compare_estimators) {
    const auto bundle = make_runner(pr, cfg, kind);
    const auto summary =
        stats::run_replications_fn(bundle.runner, cfg.replications, pr.mu0);
    for (std::size_t i = 0; i < summary.outcomes.size(); ++i) {
      lines.push_back(replication_row(i, kind, bundle, cfg.epsilon,
                                      summary.outcomes[i], estimator_targets(kind)));
    }
    log << "compare " << estimator_name(kind) << ": mean="
        << format_number(summary.mean_estimate)
        << " sd=" << format_number(summary.empirical_sd)
        << " failures=" << summary.failures << "\n";
  }
  write_csv(cfg.output_path, lines);
  log << "compare on " << cfg.problem_label << " -> " << cfg.output_path << "\n";
}

inline const char* sweep_csv_header() {
  return "axis,value,n_total,replications,failures,mean_estimate,empirical_sd,"
         "n_variance,mean_reported_se,coverage_95,ks_statistic";
}

struct SweepPoint {
  double value = 0.0;
  std::uint64_t n_total = 0;
  stats::ReplicationSummary summary;
  double n_variance = 0.0;  // total budget times the empirical variance
};

/// `sweep`: one estimator, one problem, one varied axis (n, epsilon, theta);
/// aggregated rows per grid point.
inline std::vector<SweepPoint> sweep_experiment(const ExperimentConfig& cfg,
                                                std::ostream& log = std::cout) {
  const auto& pr = problems::by_label(cfg.problem_label);
  std::vector<std::string> lines = config_echo(cfg);
  lines.push_back(sweep_csv_header());
  std::vector<SweepPoint> points;
  for (const double value : cfg.grid) {
    ExperimentConfig point_cfg = cfg;
    if (cfg.axis == "epsilon") {
      if (!(value >= 0.0 && value <= 1.0)) {
        throw ConfigError("grid", 0, "epsilon grid value outside [0, 1]");
      }
      point_cfg.epsilon = value;
    } else if (cfg.axis == "theta") {
      if (!(value > 0.0 && value < 1.0)) {
        throw ConfigError("grid", 0, "theta grid value outside (0, 1)");
      }
      point_cfg.theta = value;
    } else {
      if (!(value >= 1.0)) throw ConfigError("grid", 0, "n grid value must be >= 1");
      point_cfg.sizes.clear();
      point_cfg.sizes["n"] = static_cast<std::uint64_t>(value);
    }
    const auto bundle = make_runner(pr, point_cfg, point_cfg.estimator);
    auto summary =
        stats::run_replications_fn(bundle.runner, point_cfg.replications, pr.mu0);
    SweepPoint point;
    point.value = value;
    point.n_total = bundle.total_budget;
    point.n_variance = static_cast<double>(bundle.total_budget) *
                       summary.empirical_sd * summary.empirical_sd;
    std::ostringstream row;
    row << cfg.axis << ',' << format_number(value) << ',' << bundle.total_budget
        << ',' << summary.replications << ',' << summary.failures << ','
        << format_number(summary.mean_estimate) << ','
        << format_number(summary.empirical_sd) << ','
        << format_number(point.n_variance) << ','
        << format_number(summary.mean_reported_se) << ','
        << format_number(summary.coverage_95) << ','
        << format_number(summary.ks_statistic);
    lines.push_back(row.str());
    log << "sweep " << cfg.axis << "=" << format_number(value)
        << ": n_var=" << format_number(point.n_variance)
        << " failures=" << summary.failures << "\n";
    point.summary = std::move(summary);
    points.push_back(std::move(point));
  }
  write_csv(cfg.output_path, lines);
  log << "sweep on " << cfg.problem_label << " -> " << cfg.output_path << "\n";
  return points;
}

// ---------------------------------------------------------------------------
// Self-test: the oracle-equivalence and zero-variance suites.

namespace detail {

inline double selftest_bisect(const PsiFunction& psi) {
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
  double a = ymin - 1.0 - wsum, b = ymax + 1.0 + wsum;
  for (int it = 0; it < 200; ++it) {
    const double m = 0.5 * (a + b);
    (psi_eval(psi, m) > 0.0 ? a : b) = m;
  }
  return 0.5 * (a + b);
}

}  // namespace detail

/// Runs the root-oracle-equivalence and zero-variance suites; prints one line
/// with pass counts per suite; returns the number of failed checks.
inline int run_selftest(std::ostream& out = std::cout) {
  int failures = 0;

  {  // Suite 1: exact root versus 200-iteration bisection on random instances.
    RandomStream gen = derive_stream(0x5e1f, 0);
    int pass = 0;
    const int total = 1000;
    for (int rep = 0; rep < total; ++rep) {
      const auto gen_side = [&gen](std::size_t n) {
        WeightedSample s;
        s.observations.resize(n);
        for (auto& o : s.observations) {
          o.y = 6.0 * gen.uniform01() - 3.0;
          o.w = gen.uniform01() < 0.2 ? 0.0 : 2.0 * gen.uniform01();
        }
        s.observations[static_cast<std::size_t>(gen.uniform01() * n) % n].w =
            0.5 + gen.uniform01();
        return s;
      };
      const auto plus = gen_side(1 + static_cast<std::size_t>(gen.uniform01() * 100));
      const auto minus = gen_side(1 + static_cast<std::size_t>(gen.uniform01() * 100));
      const auto psi = build_psi(plus, minus);
      const auto r = solve_root(psi);
      const double b = detail::selftest_bisect(psi);
      bool ok = r.unique == (*psi.f_bar > *psi.f_underbar);
      if (r.unique) {
        ok = ok && std::fabs(r.mu_hat - b) <= 1e-10;
      } else {
        ok = ok && r.root_interval && b >= r.root_interval->first - 1e-10 &&
             b <= r.root_interval->second + 1e-10;
      }
      pass += ok ? 1 : 0;
    }
    out << "suite root-oracle-equivalence: " << pass << "/" << total << " pass\n";
    failures += total - pass;
  }

  {  // Suite 2: zero-variance fixed points of EE-SNIS with exactly optimal
     // proposals on the discrete and Gaussian fixtures.
    int pass = 0, total = 0;
    for (const char* label : {"discrete20", "gauss-x"}) {
      const auto& pr = problems::by_label(label);
      const auto def = problems::defensive_proposal(pr);
      const auto qp =
          problems::optimal_proposal(pr, problems::SignSide::plus, pr.mu0, 0.0, def);
      const auto qm =
          problems::optimal_proposal(pr, problems::SignSide::minus, pr.mu0, 0.0, def);
      for (std::uint64_t rep = 0; rep < 100; ++rep) {
        ++total;
        RandomStream sp = derive_stream(0xfeed, rep * 16);
        RandomStream sm = derive_stream(0xfeed, rep * 16 + 1);
        const auto r =
            ee_snis_estimate(pr.f, pr.target, qp.mixed, qm.mixed, 100, 100, sp, sm);
        if (std::fabs(r.mu_hat - pr.mu0) <= 1e-10 * (1.0 + std::fabs(pr.mu0))) ++pass;
      }
    }
    out << "suite zero-variance: " << pass << "/" << total << " pass\n";
    failures += total - pass;
  }

  {  // Suite 3: analytically forced degeneracies across the estimator zoo.
    int pass = 0, total = 0;
    const auto& d3 = problems::by_label("discrete3");  // f >= 0
    const auto& d20 = problems::by_label("discrete20");
    const auto def20 = problems::defensive_proposal(d20);
    const Proposal ois_q = problems::categorical_proposal(d3.atoms, {1.0, 0.0}, "q*");
    const auto qp = problems::optimal_proposal(d20, problems::SignSide::plus, 0.0, 0.0, def20);
    const auto qm = problems::optimal_proposal(d20, problems::SignSide::minus, 0.0, 0.0, def20);
    for (std::uint64_t rep = 0; rep < 100; ++rep) {
      RandomStream s0 = derive_stream(0xab, rep * 16);
      RandomStream s1 = derive_stream(0xab, rep * 16 + 1);
      RandomStream s2 = derive_stream(0xab, rep * 16 + 2);
      ++total;
      const auto ois = ois_estimate(d3.f, *d3.p_sampler, ois_q, 100, s0);
      if (std::fabs(ois.estimate - d3.mu0) <= 1e-10 * d3.mu0) ++pass;
      ++total;
      RandomStream t0 = derive_stream(0xac, rep * 16);
      RandomStream t1 = derive_stream(0xac, rep * 16 + 1);
      const auto pois = pois_estimate(d20.f, *d20.p_sampler, qp.mixed, qm.mixed, 100,
                                      100, t0, t1);
      if (std::fabs(pois.estimate - d20.mu0) <= 1e-10 * (1.0 + std::fabs(d20.mu0)))
        ++pass;
      ++total;
      const auto tabi = tabi_estimate(d20.f, d20.target, qp.mixed, qm.mixed,
                                      *d20.p_sampler, 100, 100, 100, s0, s1, s2);
      if (std::fabs(tabi.estimate - d20.mu0) <= 1e-10 * (1.0 + std::fabs(d20.mu0)))
        ++pass;
      ++total;
      RandomStream u0 = derive_stream(0xad, rep * 16);
      RandomStream u1 = derive_stream(0xad, rep * 16 + 1);
      const auto dpis = dpis_estimate(d20.f, d20.target, def20, *d20.p_sampler, 100,
                                      100, u0, u1);
      RandomStream v0 = derive_stream(0xad, rep * 16);
      RandomStream v1 = derive_stream(0xad, rep * 16 + 99);
      const auto dpis2 = dpis_estimate(d20.f, d20.target, def20, *d20.p_sampler, 100,
                                       100, v0, v1);
      // q2 = p: the denominator is c_p regardless of the draws.
      if (std::fabs(dpis.estimate - dpis2.estimate) <=
          1e-12 * (1.0 + std::fabs(dpis.estimate)))
        ++pass;
    }
    out << "suite estimator-zoo-degeneracies: " << pass << "/" << total << " pass\n";
    failures += total - pass;
  }

  return failures;
}

}  // namespace eesnis::harness

#endif  // EESNIS_HARNESS_HPP
