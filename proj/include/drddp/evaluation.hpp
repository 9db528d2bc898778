#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "drddp/baselines.hpp"
#include "drddp/benchmarks.hpp"
#include "drddp/disturbance.hpp"
#include "drddp/solver.hpp"

namespace drddp {

struct EvalConfig {
  int runs = 200;
  // Independent disturbance paths averaged into one run's cost.
  int samples_per_run = 10000;
  std::uint64_t seed = 0;
  double collision_threshold = 0.2;  // car only
  int threads = 1;

  void validate() const;
};

struct EvalReport {
  std::string controller;
  std::vector<double> costs;     // per run
  std::vector<double> collided;  // per run, fraction of colliding paths
  double mean_cost = 0.0;
  double std_cost = 0.0;
  double min_cost = 0.0;
  double max_cost = 0.0;
  double collision_rate = 0.0;
  bool has_collisions = false;  // true for models with an obstacle
  int diverged = 0;             // paths excluded from the cost statistics
  double iter_time_mean = 0.0;
  double iter_time_std = 0.0;
  double total_time = 0.0;
  int iterations = 0;
  bool converged = false;
};

// Plays u_t = clamp(u_bar_t + K_t dx_t) under fresh draws from `truth`. Run r
// draws from the evaluation substream with index r, so results do not depend
// on the thread count.
EvalReport out_of_sample(const OcpModel& model, const Solution& solution,
                         const TrueDistribution& truth, const EvalConfig& cfg,
                         const std::string& label = "");

// Dispatches to solve / solve_box_ddp / solve_minimax_ddp.
Solution solve_controller(ControllerKind kind, const OcpModel& model, const Vector& x0,
                          const DisturbanceDataset& ds, const SolverConfig& config,
                          double minimax_gamma);

struct ControllerResult {
  ControllerKind kind = ControllerKind::kDrDdp;
  std::string label;
  EvalReport report;
  double lambda = 0.0;  // lambda for DR-DDP, gamma_w for minimax-DDP
  bool failed = false;
  std::string error;
};

struct CompareOptions {
  SolverConfig solver;  // lambda used for DR-DDP
  EvalConfig eval;
  double minimax_gamma = 0.0;  // <= 0: select on `gamma_grid`
  std::vector<double> gamma_grid;
};

// Solves every controller on the same dataset and evaluates each with the same
// evaluation seed. Failures are recorded per row.
std::vector<ControllerResult> compare_controllers(const BenchmarkInstance& bench,
                                                  const DisturbanceDataset& ds,
                                                  const std::vector<ControllerKind>& controllers,
                                                  const CompareOptions& options);

struct TimingRow {
  int size = 0;
  double iter_time_mean = 0.0;
  double iter_time_std = 0.0;
  int iterations = 0;
  bool failed = false;
};

// For each size (Kuramoto oscillator count or LQ state dimension) builds the
// benchmark, solves with `controller` and records per-iteration wall times.
std::vector<TimingRow> timing_sweep(const BenchmarkSettings& family, const std::vector<int>& sizes,
                                    ControllerKind controller, const SolverConfig& config,
                                    std::uint64_t seed, double minimax_gamma = 0.0);

// Least-squares slope of log(time) against log(size) over non-failed rows.
double loglog_slope(const std::vector<TimingRow>& rows);

// Shorthand used by the CLI and tests: dataset for a benchmark from the root seed.
DisturbanceDataset benchmark_dataset(const BenchmarkInstance& bench, std::uint64_t seed);

}  // namespace drddp
