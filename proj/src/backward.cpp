#include "drddp/backward.hpp"

#include <algorithm>
#include <cmath>
#include <optional>

#include <fmt/format.h>

#include "drddp/errors.hpp"

namespace drddp {

void NominalTrajectories::validate(int horizon, int nx, int nu, int nw) const {
  if (static_cast<int>(x.size()) != horizon + 1 || static_cast<int>(u.size()) != horizon ||
      static_cast<int>(w.size()) != horizon) {
    throw InputError(fmt::format("nominal lengths {}/{}/{} inconsistent with T={}", x.size(),
                                 u.size(), w.size(), horizon));
  }
  for (const Vector& v : x)
    if (v.size() != nx) throw InputError("nominal state has wrong dimension");
  for (const Vector& v : u)
    if (v.size() != nu) throw InputError("nominal control has wrong dimension");
  for (const Vector& v : w)
    if (v.size() != nw) throw InputError("nominal disturbance has wrong dimension");
}

namespace {

// Cholesky of -Q_ww; failure means the adversary problem is not strictly concave.
Eigen::LLT<Matrix> factor_adversary(const QExpansion& q, int t) {
  Eigen::LLT<Matrix> llt(-q.q_ww);
  if (llt.info() != Eigen::Success) {
    throw BackwardPassError(fmt::format("Q_ww is not negative definite at t={}", t), t);
  }
  return llt;
}

struct Eliminated {
  Matrix schur;     // Q_uu - Q_uw Q_ww^{-1} Q_uw' + mu I
  Matrix k_rhs;     // Q_xu' - Q_uw Q_ww^{-1} Q_xw'
  Vector ff_rhs;    // Q_u - Q_uw Q_ww^{-1} Qbar_w
};

Eliminated eliminate_disturbance(const QExpansion& q, const Eigen::LLT<Matrix>* adv,
                                 double mu) {
  const Eigen::Index nu = q.q_u.size();
  Eliminated e;
  e.schur = q.q_uu + mu * Matrix::Identity(nu, nu);
  e.k_rhs = q.q_xu.transpose();
  e.ff_rhs = q.q_u;
  if (adv != nullptr) {
    // Q_ww^{-1} = -(-Q_ww)^{-1}, so each "- Q_uw Q_ww^{-1} X" becomes "+ Q_uw W^{-1} X".
    const Matrix winv_uw = adv->solve(q.q_uw.transpose());  // nw x nu
    e.schur.noalias() += q.q_uw * winv_uw;
    e.k_rhs.noalias() += winv_uw.transpose() * q.q_xw.transpose();
    e.ff_rhs.noalias() += winv_uw.transpose() * q.qbar_w;
  }
  symmetrize(e.schur);
  return e;
}

void adversary_gains(const QExpansion& q, const Eigen::LLT<Matrix>* adv, PolicyStep& p) {
  const Eigen::Index nx = q.q_x.size();
  const Eigen::Index nw = q.qbar_w.size();
  const Eigen::Index n = q.q_w_i.rows();
  if (adv == nullptr) {
    p.H = Matrix::Zero(nw, nx);
    p.h_i = Matrix::Zero(n, nw);
    p.h_bar = Vector::Zero(nw);
    return;
  }
  // H = -Q_ww^{-1}(Q_uw' K + Q_xw'),  h^(i) = -Q_ww^{-1}(Q_uw' k + Q_w^(i))
  p.H = adv->solve(q.q_uw.transpose() * p.K + q.q_xw.transpose());
  const Vector shared = q.q_uw.transpose() * p.k;
  Matrix rhs = q.q_w_i.transpose();  // nw x N
  rhs.colwise() += shared;
  p.h_i = adv->solve(rhs).transpose();
  p.h_bar = p.h_i.colwise().mean().transpose();
}

}  // namespace

QExpansion q_expand(const OcpModel& model, const ValueExpansion& next, const Vector& x,
                    const Vector& u, const Vector& w, const DisturbanceDataset& ds, int t,
                    const ExpansionOptions& opts) {
  const Dims d = model.dims();
  if (opts.adversarial && !(opts.lambda > 0.0)) {
    throw InputError(fmt::format("lambda must be positive, got {}", opts.lambda));
  }
  if (!next.v_x.allFinite() || !next.v_xx.allFinite() || !std::isfinite(next.v0)) {
    throw BackwardPassError(fmt::format("non-finite value expansion entering t={}", t), t);
  }
  if (opts.adversarial && ds.dim() != d.nw) {
    throw InputError(fmt::format("dataset dimension {} != n_w {}", ds.dim(), d.nw));
  }

  const DynamicsDerivs f = eval_dynamics_derivs(model, x, u, w, t, next.v_x);
  const CostDerivs l = eval_cost_derivs(model, x, u, t);
  const Matrix& vxx = next.v_xx;

  QExpansion q;
  q.adversarial = opts.adversarial;
  const Matrix vxx_fx = vxx * f.f_x;
  const Matrix vxx_fu = vxx * f.f_u;
  q.q_x = l.l_x + f.f_x.transpose() * next.v_x;
  q.q_u = l.l_u + f.f_u.transpose() * next.v_x;
  q.q_xx = l.l_xx + f.f_x.transpose() * vxx_fx;
  q.q_uu = l.l_uu + f.f_u.transpose() * vxx_fu;
  q.q_xu = l.l_xu + f.f_x.transpose() * vxx_fu;
  if (!opts.gauss_newton) {
    q.q_xx += f.vfxx;
    q.q_uu += f.vfuu;
  }
  symmetrize(q.q_xx);
  symmetrize(q.q_uu);

  const double running = model.running_cost(x, u, t);
  if (!opts.adversarial) {
    const int n = opts.adversarial ? ds.count() : 1;
    q.qbar = running + next.v0;
    q.qbar_w = Vector::Zero(d.nw);
    q.q_w_i = Matrix::Zero(n, d.nw);
    q.q_ww = Matrix::Zero(d.nw, d.nw);
    q.q_xw = Matrix::Zero(d.nx, d.nw);
    q.q_uw = Matrix::Zero(d.nu, d.nw);
    return q;
  }

  const double lambda = opts.lambda;
  const Matrix vxx_fw = vxx * f.f_w;
  q.q_ww = f.f_w.transpose() * vxx_fw - 2.0 * lambda * Matrix::Identity(d.nw, d.nw);
  if (!opts.gauss_newton) q.q_ww += f.vfww;
  q.q_ww -= opts.adversary_shift * Matrix::Identity(d.nw, d.nw);
  symmetrize(q.q_ww);
  q.q_xw = f.f_x.transpose() * vxx_fw;
  q.q_uw = f.f_u.transpose() * vxx_fw;

  const Vector fw_vx = f.f_w.transpose() * next.v_x;
  const Vector& w_hat_mean = ds.mean(t);
  const Matrix& samples = ds.samples(t);
  q.qbar_w = fw_vx - 2.0 * lambda * (w - w_hat_mean);
  // Q_w^(i) = f_w' V_x - 2 lambda (w_bar - w_hat^(i))
  q.q_w_i = (samples.rowwise() - w.transpose()) * (2.0 * lambda);
  q.q_w_i.rowwise() += fw_vx.transpose();

  Eigen::LLT<Matrix> adv(-q.q_ww);
  if (adv.info() != Eigen::Success) {
    const std::string msg = fmt::format("Q_ww is not negative definite at t={}", t);
    if (!opts.regularize_adversary) throw CurvatureError(msg, t);
    throw BackwardPassError(msg, t);
  }
  const Matrix& sigma = ds.covariance(t);
  // Tr[Q_ww^{-1} Sigma] = -Tr[(-Q_ww)^{-1} Sigma]
  const double trace_term = -adv.solve(sigma).trace();
  q.qbar = running + next.v0 - lambda * (w - w_hat_mean).squaredNorm() - lambda * sigma.trace() -
           2.0 * lambda * lambda * trace_term;
  return q;
}

PolicyStep compute_gains(const QExpansion& q, const Regularization& reg, int t) {
  std::optional<Eigen::LLT<Matrix>> adv;
  if (q.adversarial) adv = factor_adversary(q, t);
  const Eliminated e = eliminate_disturbance(q, adv ? &*adv : nullptr, reg.mu);

  Eigen::LLT<Matrix> schur(e.schur);
  if (schur.info() != Eigen::Success) {
    throw BackwardPassError(
        fmt::format("control Schur complement is not positive definite at t={}", t), t);
  }
  PolicyStep p;
  p.K = -schur.solve(e.k_rhs);
  p.k = -schur.solve(e.ff_rhs);
  adversary_gains(q, adv ? &*adv : nullptr, p);
  return p;
}

BoxQpResult box_qp(const Matrix& H, const Vector& g, const Vector& lower, const Vector& upper,
                   const Vector& x0, int max_iterations) {
  constexpr double kMinGrad = 1e-8;
  constexpr double kMinRelImprove = 1e-8;
  constexpr double kStepDec = 0.6;
  constexpr double kMinStep = 1e-22;
  constexpr double kArmijo = 0.1;

  const Eigen::Index n = g.size();
  auto clamp = [&](const Vector& v) { return Vector(v.cwiseMax(lower).cwiseMin(upper)); };
  auto objective = [&](const Vector& v) { return v.dot(g) + 0.5 * v.dot(H * v); };

  BoxQpResult r;
  r.x = clamp(x0.size() == n ? x0 : Vector::Zero(n));
  r.clamped.assign(n, false);
  double value = objective(r.x);
  double old_value = 0.0;
  Eigen::LLT<Matrix> free_factor;
  std::vector<Eigen::Index> free_idx;
  bool done = false;

  for (r.iterations = 1; r.iterations <= max_iterations && !done; ++r.iterations) {
    if (r.iterations > 1 && (old_value - value) < kMinRelImprove * std::abs(old_value)) {
      r.status = BoxQpResult::kSmallImprovement;
      break;
    }
    old_value = value;
    const Vector grad = g + H * r.x;

    const std::vector<bool> old_clamped = r.clamped;
    bool all_clamped = true;
    for (Eigen::Index i = 0; i < n; ++i) {
      r.clamped[i] = (r.x(i) == lower(i) && grad(i) > 0) || (r.x(i) == upper(i) && grad(i) < 0);
      all_clamped = all_clamped && r.clamped[i];
    }
    if (all_clamped) {
      r.status = BoxQpResult::kAllClamped;
      break;
    }
    if (r.iterations == 1 || old_clamped != r.clamped) {
      free_idx.clear();
      for (Eigen::Index i = 0; i < n; ++i)
        if (!r.clamped[i]) free_idx.push_back(i);
      free_factor.compute(H(free_idx, free_idx));
      if (free_factor.info() != Eigen::Success) {
        r.status = BoxQpResult::kIndefinite;
        break;
      }
    }
    if (grad(free_idx).norm() < kMinGrad) {
      r.status = BoxQpResult::kSmallGradient;
      break;
    }

    // Newton step on the free subspace with clamped coordinates held fixed.
    Vector x_clamped = r.x;
    for (Eigen::Index i : free_idx) x_clamped(i) = 0.0;
    const Vector grad_clamped = g + H * x_clamped;
    Vector search = Vector::Zero(n);
    search(free_idx) = -free_factor.solve(grad_clamped(free_idx)) - r.x(free_idx);

    const double sdotg = search.dot(grad);
    if (sdotg >= 0) {
      r.status = BoxQpResult::kNoDescent;
      break;
    }

    double step = 1.0;
    Vector xc = clamp(r.x + step * search);
    double vc = objective(xc);
    while ((vc - old_value) / (step * sdotg) < kArmijo) {
      step *= kStepDec;
      xc = clamp(r.x + step * search);
      vc = objective(xc);
      if (step < kMinStep) {
        r.status = BoxQpResult::kSmallStep;
        done = true;
        break;
      }
    }
    if (!done || vc < value) {
      r.x = xc;
      value = vc;
    }
  }
  if (r.iterations > max_iterations && !done) r.status = BoxQpResult::kMaxIterations;
  return r;
}

PolicyStep compute_gains_boxed(const QExpansion& q, const Regularization& reg,
                               const Vector& lower, const Vector& upper, const Vector& u_bar,
                               int t) {
  std::optional<Eigen::LLT<Matrix>> adv;
  if (q.adversarial) adv = factor_adversary(q, t);
  const Eliminated e = eliminate_disturbance(q, adv ? &*adv : nullptr, reg.mu);
  const Eigen::Index nu = q.q_u.size();
  const Eigen::Index nx = q.q_x.size();

  const BoxQpResult qp = box_qp(e.schur, e.ff_rhs, lower - u_bar, upper - u_bar,
                                Vector::Zero(nu));
  if (qp.status == BoxQpResult::kIndefinite || qp.status == BoxQpResult::kMaxIterations) {
    throw BackwardPassError(fmt::format("box QP failed (status {}) at t={}",
                                        static_cast<int>(qp.status), t),
                            t);
  }

  PolicyStep p;
  p.k = qp.x;
  p.K = Matrix::Zero(nu, nx);
  // Active set at the solution: a bound is active when the gradient pushes into it.
  const Vector grad = e.ff_rhs + e.schur * qp.x;
  std::vector<Eigen::Index> free_idx;
  for (Eigen::Index i = 0; i < nu; ++i) {
    const bool at_lower = qp.x(i) <= lower(i) - u_bar(i) && grad(i) > 0;
    const bool at_upper = qp.x(i) >= upper(i) - u_bar(i) && grad(i) < 0;
    if (!at_lower && !at_upper) free_idx.push_back(i);
  }
  if (!free_idx.empty()) {
    Eigen::LLT<Matrix> free_factor(e.schur(free_idx, free_idx));
    if (free_factor.info() != Eigen::Success) {
      throw BackwardPassError(
          fmt::format("free block of the control Schur complement is indefinite at t={}", t), t);
    }
    const Matrix rows = e.k_rhs(free_idx, Eigen::all);
    p.K(free_idx, Eigen::all) = -free_factor.solve(rows);
  }
  adversary_gains(q, adv ? &*adv : nullptr, p);
  return p;
}

ValueExpansion value_update(const QExpansion& q, const PolicyStep& p) {
  const Vector& k = p.k;
  const Vector& h = p.h_bar;
  const Matrix& K = p.K;
  const Matrix& H = p.H;

  ValueExpansion v;
  v.v0 = q.qbar + q.q_u.dot(k) + q.qbar_w.dot(h) + 0.5 * k.dot(q.q_uu * k) +
         0.5 * h.dot(q.q_ww * h) + k.dot(q.q_uw * h);
  v.v_x = q.q_x + q.q_xu * k + K.transpose() * (q.q_u + q.q_uu * k + q.q_uw * h) + q.q_xw * h +
          H.transpose() * (q.qbar_w + q.q_ww * h + q.q_uw.transpose() * k);
  v.v_xx = q.q_xx + K.transpose() * q.q_uu * K + H.transpose() * q.q_ww * H +
           2.0 * q.q_xu * K + 2.0 * K.transpose() * q.q_uw * H + 2.0 * q.q_xw * H;
  symmetrize(v.v_xx);
  return v;
}

ImprovementModel BackwardResult::along(const std::vector<int>& atoms) const {
  const Eigen::Index T = adversary_linear.rows();
  if (static_cast<Eigen::Index>(atoms.size()) < T) {
    throw InputError("atom sequence shorter than the horizon");
  }
  ImprovementModel m;
  m.control_linear = control_linear.sum();
  m.control_quadratic = control_quadratic.sum();
  for (Eigen::Index t = 0; t < T; ++t) {
    const int i = adversary_linear.cols() == 1 ? 0 : atoms[t];
    m.control_quadratic += cross_quadratic(t, i);
    m.adversary_linear += adversary_linear(t, i);
    m.adversary_quadratic += adversary_quadratic(t, i);
  }
  return m;
}

BackwardResult backward_pass(const OcpModel& model, const NominalTrajectories& nominal,
                             const DisturbanceDataset& ds, const ExpansionOptions& opts,
                             const Regularization& reg) {
  const Dims d = model.dims();
  nominal.validate(d.horizon, d.nx, d.nu, d.nw);
  if (opts.adversarial && ds.horizon() < d.horizon) {
    throw InputError(fmt::format("dataset covers {} steps, horizon is {}", ds.horizon(),
                                 d.horizon));
  }
  const bool boxed = model.has_control_bounds();
  const Vector lower = model.control_lower();
  const Vector upper = model.control_upper();

  BackwardResult out;
  out.policies.resize(d.horizon);
  const int n_atoms = opts.adversarial ? ds.count() : 1;
  out.control_linear = Vector::Zero(d.horizon);
  out.control_quadratic = Vector::Zero(d.horizon);
  out.cross_quadratic = Matrix::Zero(d.horizon, n_atoms);
  out.adversary_linear = Matrix::Zero(d.horizon, n_atoms);
  out.adversary_quadratic = Matrix::Zero(d.horizon, n_atoms);

  const Vector& x_final = nominal.x[d.horizon];
  const TerminalCostDerivs lf = eval_terminal_cost_derivs(model, x_final);
  ValueExpansion value{model.terminal_cost(x_final), lf.l_x, lf.l_xx};

  for (int t = d.horizon - 1; t >= 0; --t) {
    QExpansion q;
    try {
      q = q_expand(model, value, nominal.x[t], nominal.u[t], nominal.w[t], ds, t, opts);
    } catch (const DerivativeError& err) {
      throw BackwardPassError(fmt::format("{} at t={}", err.what(), t), t);
    }
    PolicyStep p = boxed ? compute_gains_boxed(q, reg, lower, upper, nominal.u[t], t)
                         : compute_gains(q, reg, t);
    out.control_linear(t) = q.q_u.dot(p.k);
    out.control_quadratic(t) = 0.5 * p.k.dot(q.q_uu * p.k);
    // The model uses the unshifted curvature, which is what a rollout sees.
    const Matrix q_ww = q.q_ww + opts.adversary_shift * Matrix::Identity(d.nw, d.nw);
    const Vector uw_k = q.q_uw.transpose() * p.k;
    for (int i = 0; i < n_atoms; ++i) {
      const Vector h = p.h_i.row(i).transpose();
      out.cross_quadratic(t, i) = uw_k.dot(h);
      out.adversary_linear(t, i) = q.q_w_i.row(i).dot(h);
      out.adversary_quadratic(t, i) = 0.5 * h.dot(q_ww * h);
    }
    out.improvement.control_linear += out.control_linear(t);
    out.improvement.control_quadratic += out.control_quadratic(t) + uw_k.dot(p.h_bar);
    out.improvement.adversary_linear += q.qbar_w.dot(p.h_bar);
    out.improvement.adversary_quadratic += 0.5 * p.h_bar.dot(q_ww * p.h_bar);
    value = value_update(q, p);
    if (!value.v_xx.allFinite() || !value.v_x.allFinite() || !std::isfinite(value.v0)) {
      throw BackwardPassError(fmt::format("non-finite value expansion at t={}", t), t);
    }
    out.policies[t] = std::move(p);
  }
  out.value0 = std::move(value);
  return out;
}

}  // namespace drddp
