#pragma once

#include <functional>
#include <vector>

#include "drddp/backward.hpp"
#include "drddp/disturbance.hpp"
#include "drddp/problem.hpp"
#include "drddp/random.hpp"
#include "drddp/trajectory.hpp"

namespace drddp {

struct RolloutResult {
  NominalTrajectories trajectories;
  double cost_penalized = 0.0;  // l_f + sum l - lambda sum ||w - w_hat^(i_t)||^2
  double cost_nominal = 0.0;    // l_f + sum l
  double alpha = 0.0;
  bool accepted = false;
  bool diverged = false;
};

// How the disturbance player enters a rollout.
struct AdversarySpec {
  const DisturbanceDataset* dataset = nullptr;  // required when adversarial
  double lambda = 1.0;
  bool adversarial = true;
};

// Atom index i_t per step, uniform on {0..N-1}.
std::vector<int> draw_atom_sequence(int horizon, int count, Rng& rng);

// Applies
//   u_t = clamp(u_bar + alpha k + K dx),   w_t = w_bar + alpha h^(i_t) + H dx
// along the supplied atom sequence. Any state entry above 1e8 in magnitude
// (or a non-finite one) marks the result diverged.
RolloutResult rollout(const OcpModel& model, const NominalTrajectories& nominal,
                      const std::vector<PolicyStep>& policies, double alpha,
                      const AdversarySpec& adversary, const std::vector<int>& atoms);

// Separate step sizes for the feedforward terms k (alpha_u) and h (alpha_w).
RolloutResult rollout(const OcpModel& model, const NominalTrajectories& nominal,
                      const std::vector<PolicyStep>& policies, double alpha_u, double alpha_w,
                      const AdversarySpec& adversary, const std::vector<int>& atoms);

// Same, with atoms drawn from `rng`.
RolloutResult rollout(const OcpModel& model, const NominalTrajectories& nominal,
                      const std::vector<PolicyStep>& policies, double alpha,
                      const AdversarySpec& adversary, Rng& rng);

// Penalized and nominal cost of fixed trajectories under an atom sequence.
RolloutResult evaluate_trajectories(const OcpModel& model, NominalTrajectories traj,
                                    const AdversarySpec& adversary,
                                    const std::vector<int>& atoms);

// Disturbance source for closed-loop rollouts: w_t given (t, x_t, x_t - x_bar_t).
using DisturbanceFn = std::function<Vector(int t, const Vector& x, const Vector& dx)>;

// Plays u_t = clamp(u_bar_t + K_t (x_t - x_bar_t)) against `disturbance`.
// Only cost_nominal is meaningful; cost_penalized is set equal to it.
RolloutResult policy_rollout(const OcpModel& model, const NominalTrajectories& nominal,
                             const std::vector<PolicyStep>& policies,
                             const DisturbanceFn& disturbance);

struct LineSearchConfig {
  double alpha0 = 1.0;
  double backtrack = 0.5;
  int max_trials = 12;
  double armijo = 1e-4;
};

// Tries alpha0, backtrack*alpha0, ... For each alpha the disturbance player's
// share of the change is measured by a second rollout that scales h only, and
// the controller's share is the remainder. The first alpha with
//   control share      <= armijo * control_change(alpha)
//   disturbance share  >= -2 (|adversary_change(alpha)| + |control_change(alpha)|)
// is accepted. The second test rejects disturbance overshoots that collapse
// J_lambda. Without an adversary this is the usual Armijo test.
// `model_change` should be the model along the same atom sequence, see
// BackwardResult::along.
// All trials share `atoms`. On exhaustion the best non-diverged trial is
// returned with accepted = false.
RolloutResult line_search(const OcpModel& model, const NominalTrajectories& nominal,
                          double incumbent_cost, const std::vector<PolicyStep>& policies,
                          const ImprovementModel& model_change, const AdversarySpec& adversary,
                          const std::vector<int>& atoms, const LineSearchConfig& config);

}  // namespace drddp
