#pragma once

#include <vector>

#include <Eigen/Cholesky>

#include "drddp/disturbance.hpp"
#include "drddp/problem.hpp"
#include "drddp/trajectory.hpp"
#include "drddp/types.hpp"

namespace drddp {

// Quadratic model  V + V_x' dx + 1/2 dx' V_xx dx  of the value function.
struct ValueExpansion {
  double v0 = 0.0;
  Vector v_x;
  Matrix v_xx;
};

/**
 * Second-order model of the per-sample Q-functions at one step.
 *
 * All samples share the curvature blocks; only the disturbance gradient
 * differs per sample:
 *
 *   Q_w^(i) = f_w' V_x - 2 lambda (w_bar - w_hat^(i))
 *
 * `qbar` is the sample-averaged constant after the inner maximization has been
 * folded in, i.e. it carries the -lambda Tr[Sigma] and
 * -2 lambda^2 Tr[Q_ww^{-1} Sigma] corrections. It is kept (rather than dropped
 * as in plain DDP) because the guaranteed-cost bound needs absolute values.
 *
 * When `adversarial` is false the disturbance blocks are zero and the
 * expansion is the ordinary DDP one (used by the box-DDP baseline).
 */
struct QExpansion {
  bool adversarial = true;
  double qbar = 0.0;
  Vector q_x;
  Vector q_u;
  Vector qbar_w;
  Matrix q_w_i;  // N x nw
  Matrix q_xx;
  Matrix q_uu;
  Matrix q_ww;
  Matrix q_xu;
  Matrix q_xw;
  Matrix q_uw;
};

// Control law  du = K dx + k  and adversary law  dw^(i) = H dx + h^(i).
struct PolicyStep {
  Matrix K;
  Vector k;
  Matrix H;
  Matrix h_i;  // N x nw
  Vector h_bar;
};

struct Regularization {
  double mu = 0.0;
  double increase_factor = 10.0;
  double decrease_factor = 2.0;
  double mu_floor = 1e-8;
  double mu_cap = 1e10;

  void increase() { mu = std::min(mu_cap, std::max(mu * increase_factor, mu_floor)); }
  void decrease() {
    mu /= decrease_factor;
    if (mu < mu_floor) mu = 0.0;
  }
  bool saturated() const { return mu >= mu_cap; }
};

struct ExpansionOptions {
  double lambda = 1.0;
  // Subtracted from Q_ww before qbar and the gains are formed.
  double adversary_shift = 0.0;
  // Drop the contracted second-order dynamics tensors (iLQR-style).
  bool gauss_newton = false;
  // False: ordinary DDP expansion with no disturbance player.
  bool adversarial = true;
  // False: a non-negative-definite Q_ww raises CurvatureError.
  bool regularize_adversary = true;
};

QExpansion q_expand(const OcpModel& model, const ValueExpansion& next, const Vector& x,
                    const Vector& u, const Vector& w, const DisturbanceDataset& ds, int t,
                    const ExpansionOptions& opts);

inline QExpansion q_expand(const OcpModel& model, const ValueExpansion& next, const Vector& x,
                           const Vector& u, const Vector& w, const DisturbanceDataset& ds, int t,
                           double lambda) {
  ExpansionOptions opts;
  opts.lambda = lambda;
  return q_expand(model, next, x, u, w, ds, t, opts);
}

// Closed-form saddle-point gains. `reg.mu` is added to the Schur complement
// Q_uu - Q_uw Q_ww^{-1} Q_uw'; the adversary side is shifted at expansion time.
PolicyStep compute_gains(const QExpansion& q, const Regularization& reg, int t = -1);

struct BoxQpResult {
  enum Status {
    kIndefinite = -1,
    kMaxIterations = 1,
    kSmallStep = 2,
    kSmallImprovement = 4,
    kSmallGradient = 5,
    kAllClamped = 6,
    kNoDescent = 7,
  };
  Vector x;
  std::vector<bool> clamped;
  Status status = kMaxIterations;
  int iterations = 0;
};

// min 1/2 x'Hx + g'x  s.t.  lower <= x <= upper, by projected Newton with an
// Armijo search along the projected path.
BoxQpResult box_qp(const Matrix& H, const Vector& g, const Vector& lower, const Vector& upper,
                   const Vector& x0, int max_iterations = 100);

// Gains under lower <= u_bar + du <= upper. The disturbance is eliminated
// first; the resulting control QP is solved by box_qp and the rows of K for
// clamped inputs are zero.
PolicyStep compute_gains_boxed(const QExpansion& q, const Regularization& reg,
                               const Vector& lower, const Vector& upper, const Vector& u_bar,
                               int t = -1);

ValueExpansion value_update(const QExpansion& q, const PolicyStep& p);

// Predicted change of J_lambda for a step scaled by alpha, split into the
// controller's share (k terms and the k-h cross term) and the disturbance
// player's share (h terms alone). Each share is alpha * linear +
// alpha^2 * quadratic.
struct ImprovementModel {
  double control_linear = 0.0;
  double control_quadratic = 0.0;
  double adversary_linear = 0.0;
  double adversary_quadratic = 0.0;

  double control_change(double alpha) const {
    return alpha * control_linear + alpha * alpha * control_quadratic;
  }
  double adversary_change(double alpha) const {
    return alpha * adversary_linear + alpha * alpha * adversary_quadratic;
  }
  double predicted_change(double alpha) const {
    return control_change(alpha) + adversary_change(alpha);
  }
  double expected_improvement(double alpha) const { return -predicted_change(alpha); }
};

struct BackwardResult {
  std::vector<PolicyStep> policies;
  ValueExpansion value0;
  // Model for the sample-averaged objective (uses k, h_bar).
  ImprovementModel improvement;
  // Per step (T): Q_u'k and 1/2 k'Q_uu k. Per step and atom (T x N):
  // k'Q_uw h^(i), Q_w^(i)'h^(i) and 1/2 h^(i)'Q_ww h^(i).
  Vector control_linear;
  Vector control_quadratic;
  Matrix cross_quadratic;
  Matrix adversary_linear;
  Matrix adversary_quadratic;

  // Predicted change along one realized atom sequence, the quantity a rollout
  // with those atoms measures.
  ImprovementModel along(const std::vector<int>& atoms) const;
};

// Terminal condition from l_f at x_T, then t = T-1 .. 0. Box-constrained
// gains are used whenever the model has finite control bounds. Failures are
// reported as BackwardPassError carrying the step index.
BackwardResult backward_pass(const OcpModel& model, const NominalTrajectories& nominal,
                             const DisturbanceDataset& ds, const ExpansionOptions& opts,
                             const Regularization& reg);

}  // namespace drddp
