#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "drddp/types.hpp"

namespace drddp {

struct Dims {
  int nx = 0;
  int nu = 0;
  int nw = 0;
  int horizon = 0;

  // Throws InputError unless every dimension is strictly positive.
  void validate() const;
};

struct DynamicsDerivs {
  Matrix f_x;
  Matrix f_u;
  Matrix f_w;
  // Second-order tensors of f contracted with the value gradient V_x.
  Matrix vfxx;
  Matrix vfuu;
  Matrix vfww;
};

struct CostDerivs {
  Vector l_x;
  Vector l_u;
  Matrix l_xx;
  Matrix l_uu;
  Matrix l_xu;
};

struct TerminalCostDerivs {
  Vector l_x;
  Matrix l_xx;
};

/**
 * Discrete-time stochastic optimal control problem
 *
 *   x_{t+1} = f(x_t, u_t, w_t),   J = l_f(x_T) + sum_t l(x_t, u_t, t)
 *
 * with box bounds on u. Implementations must be pure: every method is called
 * concurrently from evaluation workers.
 *
 * The derivative methods default to central finite differences; models with
 * cheap closed forms override them and report has_analytic_derivatives().
 */
class OcpModel {
 public:
  virtual ~OcpModel() = default;

  virtual Dims dims() const = 0;
  virtual std::string name() const = 0;

  // `t` lets models carry a time-indexed drift term; most ignore it.
  virtual Vector dynamics(const Vector& x, const Vector& u, const Vector& w, int t) const = 0;
  virtual double running_cost(const Vector& x, const Vector& u, int t) const = 0;
  virtual double terminal_cost(const Vector& x) const = 0;

  // Defaults are unbounded (+-infinity).
  virtual Vector control_lower() const;
  virtual Vector control_upper() const;

  virtual DynamicsDerivs dynamics_derivs(const Vector& x, const Vector& u, const Vector& w, int t,
                                         const Vector& v_x) const;
  virtual CostDerivs running_cost_derivs(const Vector& x, const Vector& u, int t) const;
  virtual TerminalCostDerivs terminal_cost_derivs(const Vector& x) const;

  virtual bool has_analytic_derivatives() const { return false; }

  bool has_control_bounds() const;
};

using ModelPtr = std::shared_ptr<const OcpModel>;

// Finite-difference derivatives. First derivatives use central differences
// with step max(1e-6, 1e-6 |z_i|); second derivatives use the four-point
// stencil with step max(1e-4, 1e-4 |z_i|).
DynamicsDerivs fd_dynamics_derivs(const OcpModel& model, const Vector& x, const Vector& u,
                                  const Vector& w, int t, const Vector& v_x);
CostDerivs fd_running_cost_derivs(const OcpModel& model, const Vector& x, const Vector& u, int t);
TerminalCostDerivs fd_terminal_cost_derivs(const OcpModel& model, const Vector& x);

// Validated entry points used by the solver: check shapes, symmetrize the
// Hessian-type blocks and throw DerivativeError naming the first non-finite
// entry.
DynamicsDerivs eval_dynamics_derivs(const OcpModel& model, const Vector& x, const Vector& u,
                                    const Vector& w, int t, const Vector& v_x);
CostDerivs eval_cost_derivs(const OcpModel& model, const Vector& x, const Vector& u, int t);
TerminalCostDerivs eval_terminal_cost_derivs(const OcpModel& model, const Vector& x);

// Forwards values to a wrapped model and supplies finite-difference derivatives.
class FiniteDifferenceModel final : public OcpModel {
 public:
  explicit FiniteDifferenceModel(ModelPtr inner);

  Dims dims() const override { return inner_->dims(); }
  std::string name() const override { return inner_->name() + "+fd"; }
  Vector dynamics(const Vector& x, const Vector& u, const Vector& w, int t) const override {
    return inner_->dynamics(x, u, w, t);
  }
  double running_cost(const Vector& x, const Vector& u, int t) const override {
    return inner_->running_cost(x, u, t);
  }
  double terminal_cost(const Vector& x) const override { return inner_->terminal_cost(x); }
  Vector control_lower() const override { return inner_->control_lower(); }
  Vector control_upper() const override { return inner_->control_upper(); }

 private:
  ModelPtr inner_;
};

struct TrialPoint {
  Vector x;
  Vector u;
  Vector w;
  int t = 0;
};

struct DerivativeReport {
  struct Flag {
    std::string block;  // e.g. "f_x", "l_u", "lf_x"
    int row = 0;
    int col = 0;
    double analytic = 0.0;
    double numeric = 0.0;
    double rel_error = 0.0;
  };
  double max_rel_error = 0.0;               // first derivatives
  double max_rel_error_second_order = 0.0;  // informational
  std::vector<Flag> flagged;
  bool passed() const { return flagged.empty(); }
};

// Compares the model's first derivatives against central differences at each
// trial point. Relative error is |a - b| / max(1, |a|, |b|).
DerivativeReport check_derivatives(const OcpModel& model, const std::vector<TrialPoint>& points,
                                   double tolerance = 1e-4);

// f = A x + B u + D w,  l = x'Qx + u'Ru,  l_f = x'Qf x.
class LinearQuadraticModel final : public OcpModel {
 public:
  struct Params {
    Matrix A, B, D;
    Matrix Q, R, Qf;
    Vector u_lower;  // optional, empty = unbounded
    Vector u_upper;
    int horizon = 1;
  };

  explicit LinearQuadraticModel(Params p);

  Dims dims() const override;
  std::string name() const override { return "lq"; }
  Vector dynamics(const Vector& x, const Vector& u, const Vector& w, int t) const override;
  double running_cost(const Vector& x, const Vector& u, int t) const override;
  double terminal_cost(const Vector& x) const override;
  Vector control_lower() const override;
  Vector control_upper() const override;
  DynamicsDerivs dynamics_derivs(const Vector& x, const Vector& u, const Vector& w, int t,
                                 const Vector& v_x) const override;
  CostDerivs running_cost_derivs(const Vector& x, const Vector& u, int t) const override;
  TerminalCostDerivs terminal_cost_derivs(const Vector& x) const override;
  bool has_analytic_derivatives() const override { return true; }

  const Params& params() const { return p_; }

 private:
  Params p_;
};

// Random stable-ish LQ instance: A near identity, PD weights. Deterministic in seed.
LinearQuadraticModel::Params random_lq_params(const Dims& dims, std::uint64_t seed);

}  // namespace drddp
