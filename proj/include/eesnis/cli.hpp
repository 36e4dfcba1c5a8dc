// CLI front end. Subcommands: run, compare, sweep, selftest. Every option can
// come from a `--config` file or be given inline; inline flags override file
// keys. Exit codes: 0 success, 1 config error (the message names the
// offending key), 2 experiment failure, 3 selftest failure.

#ifndef EESNIS_CLI_HPP
#define EESNIS_CLI_HPP

#include <CLI11.hpp>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>

#include "eesnis/harness.hpp"

namespace eesnis::harness {

namespace detail {

struct CliOptions {
  std::string config_path;
  std::map<std::string, std::string> flags;  // raw values, resolved later
};

inline void add_experiment_options(CLI::App* cmd, CliOptions& opts) {
  cmd->add_option("--config", opts.config_path, "config file (key = value lines)");
  static const std::vector<std::pair<const char*, const char*>> kFlagKeys = {
      {"--problem", "problem"},       {"--estimator", "estimator"},
      {"--estimators", "estimators"}, {"--n", "n"},
      {"--n-plus", "n_plus"},         {"--n-minus", "n_minus"},
      {"--n1", "n1"},                 {"--n2", "n2"},
      {"--n3", "n3"},                 {"--n4", "n4"},
      {"--epsilon", "epsilon"},       {"--replications", "replications"},
      {"--seed", "seed"},             {"--theta", "theta"},
      {"--coupling", "coupling"},     {"--output", "output"},
      {"--axis", "axis"},             {"--grid", "grid"},
  };
  for (const auto& [flag, key] : kFlagKeys) {
    cmd->add_option(flag, opts.flags[key]);
  }
}

inline RawConfig load_raw(const CliOptions& opts, const CLI::App* cmd) {
  RawConfig raw;
  if (!opts.config_path.empty()) {
    std::ifstream in(opts.config_path);
    if (!in) {
      throw ConfigError("config", 0, "cannot read config file '" + opts.config_path + "'");
    }
    std::stringstream buffer;
    buffer << in.rdbuf();
    raw = parse_raw_config(buffer.str());
  }
  for (const auto& [key, value] : opts.flags) {
    const std::string flag = key == "n_plus"    ? "--n-plus"
                             : key == "n_minus" ? "--n-minus"
                                                : "--" + key;
    if (cmd->count(flag) == 0) continue;
    raw.erase(std::remove_if(raw.begin(), raw.end(),
                             [&](const auto& kv) { return kv.first == key; }),
              raw.end());
    raw.emplace_back(key, std::make_pair(value, 0));
  }
  return raw;
}

}  // namespace detail

/// Entry point shared by the binary and the in-process tests.
inline int cli_run(int argc, const char* const* argv) {
  CLI::App app{"estimating-equation self-normalized importance sampling toolkit"};
  app.require_subcommand(1);

  detail::CliOptions run_opts, compare_opts, sweep_opts;
  CLI::App* run_cmd = app.add_subcommand("run", "run one estimator configuration");
  detail::add_experiment_options(run_cmd, run_opts);
  CLI::App* compare_cmd =
      app.add_subcommand("compare", "run several estimators on one problem");
  detail::add_experiment_options(compare_cmd, compare_opts);
  CLI::App* sweep_cmd =
      app.add_subcommand("sweep", "vary one axis (n, epsilon or theta) over a grid");
  detail::add_experiment_options(sweep_cmd, sweep_opts);
  CLI::App* selftest_cmd =
      app.add_subcommand("selftest", "oracle-equivalence and zero-variance suites");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (selftest_cmd->parsed()) {
      const int failures = run_selftest(std::cout);
      if (failures > 0) {
        std::cerr << "selftest: " << failures << " checks failed\n";
        return 3;
      }
      std::cout << "selftest: all suites pass\n";
      return 0;
    }
    if (run_cmd->parsed()) {
      const auto cfg = resolve_config(detail::load_raw(run_opts, run_cmd));
      run_experiment(cfg);
      return 0;
    }
    if (compare_cmd->parsed()) {
      const auto cfg = resolve_config(detail::load_raw(compare_opts, compare_cmd),
                                      /*is_compare=*/true);
      compare_experiment(cfg);
      return 0;
    }
    if (sweep_cmd->parsed()) {
      const auto cfg = resolve_config(detail::load_raw(sweep_opts, sweep_cmd),
                                      /*is_compare=*/false, /*is_sweep=*/true);
      sweep_experiment(cfg);
      return 0;
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const stats::AllReplicationsFailed& e) {
    std::cerr << "experiment failed: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "experiment failed: " << e.what() << "\n";
    return 2;
  }
  return 0;
}

}  // namespace eesnis::harness

#endif  // EESNIS_CLI_HPP
