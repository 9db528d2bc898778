#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "drddp/baselines.hpp"
#include "drddp/benchmarks.hpp"
#include "drddp/evaluation.hpp"
#include "drddp/solver.hpp"
#include "drddp/transport.hpp"

namespace drddp {

/**
 * Everything a CLI command needs, parsed from an INI file:
 *
 *   [run]        benchmark, controller, seed, out
 *   [benchmark]  model parameters (keys depend on the benchmark)
 *   [solver]     lambda, theta, iteration limits, regularization, line search
 *   [eval]       runs, samples_per_run, threads, controllers, minimax gamma
 *   [tune]       lambda_grid, runs
 *   [bench]      sizes
 *
 * Unknown sections or keys are rejected.
 */
struct RunConfig {
  std::string source;  // file name, for diagnostics
  std::uint64_t seed = 0;
  std::filesystem::path out_dir = "out";

  BenchmarkSettings benchmark;
  ControllerKind controller = ControllerKind::kDrDdp;

  SolverConfig solver;
  bool lambda_set = false;  // otherwise the benchmark default is used
  AmbiguityParams ambiguity;

  EvalConfig eval;
  std::vector<ControllerKind> eval_controllers;
  double minimax_gamma = 0.0;  // <= 0: select on gamma_grid
  std::vector<double> gamma_grid;

  std::vector<double> lambda_grid;
  int tune_runs = 200;

  std::vector<int> sizes;

  // Re-emits the effective configuration as INI text. Parsing the result
  // gives back the same configuration.
  std::string canonical() const;
};

RunConfig parse_run_config(const std::string& text, const std::string& source = "<config>");
RunConfig load_run_config(const std::filesystem::path& path);

std::vector<double> parse_double_list(const std::string& text, const std::string& field);
std::vector<int> parse_int_list(const std::string& text, const std::string& field);

}  // namespace drddp
