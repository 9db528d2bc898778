#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "drddp/backward.hpp"
#include "drddp/disturbance.hpp"
#include "drddp/forward.hpp"
#include "drddp/problem.hpp"
#include "drddp/trajectory.hpp"

namespace drddp {

struct SolverConfig {
  double lambda = 1.0;
  double theta = 0.1;  // only used for bound reporting
  int max_iters = 200;
  double cost_tolerance = 1e-6;
  double gradient_tolerance = 1e-6;
  Regularization regularization;
  LineSearchConfig line_search;
  std::uint64_t seed = 0;
  bool gauss_newton = false;

  // Baseline switches. `adversarial = false` removes the disturbance player;
  // `regularize_adversary = false` turns a non-concave adversary step into a
  // CurvatureError instead of shifting Q_ww.
  bool adversarial = true;
  bool regularize_adversary = true;

  // Initial controls; empty means all zeros (clamped to the bounds).
  VectorList initial_controls;

  void validate() const;
};

struct IterationRecord {
  int iteration = 0;
  double cost_penalized = 0.0;
  double cost_nominal = 0.0;
  double alpha = 0.0;
  double mu = 0.0;
  double max_feedforward = 0.0;
  bool accepted = false;
  double wall_time = 0.0;  // seconds, backward + forward
};

struct Solution {
  std::vector<PolicyStep> policies;  // from a backward pass at `nominal`
  NominalTrajectories nominal;
  std::vector<IterationRecord> history;
  std::vector<int> atoms;  // common atom sequence used by every line search
  int iterations = 0;
  bool converged = false;
  double lambda = 0.0;
  bool adversarial = true;
  double value0 = 0.0;  // quadratic-model saddle value at t = 0
  double total_time = 0.0;

  double final_cost_penalized() const;
  double final_cost_nominal() const;
  double mean_iteration_time() const;
};

// Rolls `controls` (clamped) and `disturbances` through the dynamics from x0.
NominalTrajectories simulate(const OcpModel& model, const Vector& x0, const VectorList& controls,
                             const VectorList& disturbances);

// Alternates backward passes and line searches from the nominal generated by
// the initial controls with w_t set to the empirical mean. Throws
// NumericalFailure when regularization saturates during a backward pass and
// CurvatureError (strict adversary only) unchanged.
Solution solve(const OcpModel& model, const Vector& x0, const DisturbanceDataset& ds,
               const SolverConfig& config);

struct SupEstimate {
  double mean_cost = 0.0;      // mean of l_f + sum l over runs
  double std_error = 0.0;      // of mean_cost
  double transport = 0.0;      // lambda * sum_t W2^2(empirical w_t, Q_t)
  double j_lambda = 0.0;       // mean_cost - transport
  int runs = 0;
};

// Monte Carlo estimate of J_lambda under the solved worst-case policy: each run
// draws atoms i_t uniformly and plays w_t = w_bar_t + h^(i_t) + H_t dx. The
// transport term uses the exact W2 between the per-step empirical law of the
// played disturbances and the dataset.
SupEstimate estimate_sup_j_lambda(const OcpModel& model, const Solution& solution,
                                  const DisturbanceDataset& ds, double lambda, int runs,
                                  std::uint64_t seed);

struct ProjectedEstimate {
  double mean_cost = 0.0;
  double std_error = 0.0;
  double max_w2 = 0.0;  // largest per-step W2 of the projected law
  int runs = 0;
};

// Cost of the control policy against the worst-case atoms shrunk toward their
// dataset partners so that every step's law lies in the W2 ball of radius
// theta. The played disturbance is open loop: w_t = w_hat^(i) + s_t d_t^(i).
ProjectedEstimate estimate_projected_worst_case(const OcpModel& model, const Solution& solution,
                                                const DisturbanceDataset& ds, double theta,
                                                int runs, std::uint64_t seed);

struct TuneRow {
  double lambda = 0.0;
  double penalty_term = 0.0;  // lambda T theta^2
  double sup_j_lambda = 0.0;
  double bound = 0.0;
  bool converged = false;
  bool failed = false;
};

struct TuneResult {
  double lambda_star = 0.0;
  std::vector<TuneRow> rows;
  int best_index = -1;
};

// Grid search over lambda for the smallest guaranteed-cost bound. Candidates
// that throw or do not converge are marked and skipped; ties go to the smaller
// lambda. Throws NumericalFailure when no candidate is usable.
TuneResult tune_lambda(const OcpModel& model, const Vector& x0, const DisturbanceDataset& ds,
                       double theta, const std::vector<double>& grid, int eval_runs,
                       const SolverConfig& base, int threads = 1);

}  // namespace drddp
