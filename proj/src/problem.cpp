#include "drddp/problem.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <random>

#include <fmt/format.h>

#include "drddp/errors.hpp"
#include "drddp/random.hpp"

namespace drddp {

namespace {

using ScalarFn = std::function<double(const Vector&)>;
using VectorFn = std::function<Vector(const Vector&)>;

double first_step(double z) { return std::max(1e-6, 1e-6 * std::abs(z)); }
double second_step(double z) { return std::max(1e-4, 1e-4 * std::abs(z)); }

Matrix fd_jacobian(const VectorFn& fn, const Vector& z, int rows) {
  Matrix jac(rows, z.size());
  Vector zp = z;
  for (Eigen::Index j = 0; j < z.size(); ++j) {
    const double h = first_step(z(j));
    zp(j) = z(j) + h;
    const Vector fp = fn(zp);
    zp(j) = z(j) - h;
    const Vector fm = fn(zp);
    zp(j) = z(j);
    jac.col(j) = (fp - fm) / (2.0 * h);
  }
  return jac;
}

Vector fd_gradient(const ScalarFn& fn, const Vector& z) {
  Vector g(z.size());
  Vector zp = z;
  for (Eigen::Index j = 0; j < z.size(); ++j) {
    const double h = first_step(z(j));
    zp(j) = z(j) + h;
    const double fp = fn(zp);
    zp(j) = z(j) - h;
    const double fm = fn(zp);
    zp(j) = z(j);
    g(j) = (fp - fm) / (2.0 * h);
  }
  return g;
}

Matrix fd_hessian(const ScalarFn& fn, const Vector& z) {
  const Eigen::Index n = z.size();
  Matrix hess(n, n);
  Vector zp = z;
  const double f0 = fn(z);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double hi = second_step(z(i));
    zp(i) = z(i) + hi;
    const double fp = fn(zp);
    zp(i) = z(i) - hi;
    const double fm = fn(zp);
    zp(i) = z(i);
    hess(i, i) = (fp - 2.0 * f0 + fm) / (hi * hi);
    for (Eigen::Index j = 0; j < i; ++j) {
      const double hj = second_step(z(j));
      auto eval = [&](double si, double sj) {
        zp(i) = z(i) + si * hi;
        zp(j) = z(j) + sj * hj;
        const double v = fn(zp);
        zp(i) = z(i);
        zp(j) = z(j);
        return v;
      };
      const double v = (eval(1, 1) - eval(1, -1) - eval(-1, 1) + eval(-1, -1)) / (4.0 * hi * hj);
      hess(i, j) = v;
      hess(j, i) = v;
    }
  }
  return hess;
}

void require_size(const Vector& v, int n, const char* what) {
  if (v.size() != n) {
    throw InputError(fmt::format("{} has length {}, expected {}", what, v.size(), n));
  }
}

void require_shape(const Matrix& m, int r, int c, const char* what) {
  if (m.rows() != r || m.cols() != c) {
    throw InputError(
        fmt::format("{} is {}x{}, expected {}x{}", what, m.rows(), m.cols(), r, c));
  }
}

void require_finite(const Matrix& m, const char* block) {
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      if (!std::isfinite(m(i, j))) {
        throw DerivativeError(fmt::format("non-finite derivative {}({}, {}) = {}", block, i, j,
                                          m(i, j)));
      }
    }
  }
}

double rel_error(double a, double b) {
  return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)});
}

}  // namespace

void Dims::validate() const {
  if (nx <= 0 || nu <= 0 || nw <= 0 || horizon <= 0) {
    throw InputError(fmt::format("dimensions must be positive (nx={}, nu={}, nw={}, T={})", nx,
                                 nu, nw, horizon));
  }
}

Vector OcpModel::control_lower() const {
  return Vector::Constant(dims().nu, -std::numeric_limits<double>::infinity());
}

Vector OcpModel::control_upper() const {
  return Vector::Constant(dims().nu, std::numeric_limits<double>::infinity());
}

bool OcpModel::has_control_bounds() const {
  return control_lower().array().isFinite().any() || control_upper().array().isFinite().any();
}

DynamicsDerivs OcpModel::dynamics_derivs(const Vector& x, const Vector& u, const Vector& w,
                                         int t, const Vector& v_x) const {
  return fd_dynamics_derivs(*this, x, u, w, t, v_x);
}

CostDerivs OcpModel::running_cost_derivs(const Vector& x, const Vector& u, int t) const {
  return fd_running_cost_derivs(*this, x, u, t);
}

TerminalCostDerivs OcpModel::terminal_cost_derivs(const Vector& x) const {
  return fd_terminal_cost_derivs(*this, x);
}

DynamicsDerivs fd_dynamics_derivs(const OcpModel& model, const Vector& x, const Vector& u,
                                  const Vector& w, int t, const Vector& v_x) {
  const Dims d = model.dims();
  DynamicsDerivs out;
  out.f_x = fd_jacobian([&](const Vector& z) { return model.dynamics(z, u, w, t); }, x, d.nx);
  out.f_u = fd_jacobian([&](const Vector& z) { return model.dynamics(x, z, w, t); }, u, d.nx);
  out.f_w = fd_jacobian([&](const Vector& z) { return model.dynamics(x, u, z, t); }, w, d.nx);
  out.vfxx = fd_hessian([&](const Vector& z) { return v_x.dot(model.dynamics(z, u, w, t)); }, x);
  out.vfuu = fd_hessian([&](const Vector& z) { return v_x.dot(model.dynamics(x, z, w, t)); }, u);
  out.vfww = fd_hessian([&](const Vector& z) { return v_x.dot(model.dynamics(x, u, z, t)); }, w);
  return out;
}

CostDerivs fd_running_cost_derivs(const OcpModel& model, const Vector& x, const Vector& u,
                                  int t) {
  const Eigen::Index nx = x.size();
  const Eigen::Index nu = u.size();
  Vector z(nx + nu);
  z << x, u;
  auto fn = [&](const Vector& v) { return model.running_cost(v.head(nx), v.tail(nu), t); };
  const Vector g = fd_gradient(fn, z);
  const Matrix h = fd_hessian(fn, z);
  CostDerivs out;
  out.l_x = g.head(nx);
  out.l_u = g.tail(nu);
  out.l_xx = h.topLeftCorner(nx, nx);
  out.l_uu = h.bottomRightCorner(nu, nu);
  out.l_xu = h.topRightCorner(nx, nu);
  return out;
}

TerminalCostDerivs fd_terminal_cost_derivs(const OcpModel& model, const Vector& x) {
  auto fn = [&](const Vector& v) { return model.terminal_cost(v); };
  return {fd_gradient(fn, x), fd_hessian(fn, x)};
}

DynamicsDerivs eval_dynamics_derivs(const OcpModel& model, const Vector& x, const Vector& u,
                                    const Vector& w, int t, const Vector& v_x) {
  const Dims d = model.dims();
  require_size(x, d.nx, "x");
  require_size(u, d.nu, "u");
  require_size(w, d.nw, "w");
  require_size(v_x, d.nx, "v_x");
  DynamicsDerivs out = model.dynamics_derivs(x, u, w, t, v_x);
  require_shape(out.f_x, d.nx, d.nx, "f_x");
  require_shape(out.f_u, d.nx, d.nu, "f_u");
  require_shape(out.f_w, d.nx, d.nw, "f_w");
  require_shape(out.vfxx, d.nx, d.nx, "vfxx");
  require_shape(out.vfuu, d.nu, d.nu, "vfuu");
  require_shape(out.vfww, d.nw, d.nw, "vfww");
  symmetrize(out.vfxx);
  symmetrize(out.vfuu);
  symmetrize(out.vfww);
  require_finite(out.f_x, "f_x");
  require_finite(out.f_u, "f_u");
  require_finite(out.f_w, "f_w");
  require_finite(out.vfxx, "vfxx");
  require_finite(out.vfuu, "vfuu");
  require_finite(out.vfww, "vfww");
  return out;
}

CostDerivs eval_cost_derivs(const OcpModel& model, const Vector& x, const Vector& u, int t) {
  const Dims d = model.dims();
  require_size(x, d.nx, "x");
  require_size(u, d.nu, "u");
  if (t < 0 || t >= d.horizon) {
    throw InputError(fmt::format("running cost step {} outside [0, {})", t, d.horizon));
  }
  CostDerivs out = model.running_cost_derivs(x, u, t);
  require_size(out.l_x, d.nx, "l_x");
  require_size(out.l_u, d.nu, "l_u");
  require_shape(out.l_xx, d.nx, d.nx, "l_xx");
  require_shape(out.l_uu, d.nu, d.nu, "l_uu");
  require_shape(out.l_xu, d.nx, d.nu, "l_xu");
  symmetrize(out.l_xx);
  symmetrize(out.l_uu);
  require_finite(out.l_x, "l_x");
  require_finite(out.l_u, "l_u");
  require_finite(out.l_xx, "l_xx");
  require_finite(out.l_uu, "l_uu");
  require_finite(out.l_xu, "l_xu");
  return out;
}

TerminalCostDerivs eval_terminal_cost_derivs(const OcpModel& model, const Vector& x) {
  const Dims d = model.dims();
  require_size(x, d.nx, "x");
  TerminalCostDerivs out = model.terminal_cost_derivs(x);
  require_size(out.l_x, d.nx, "lf_x");
  require_shape(out.l_xx, d.nx, d.nx, "lf_xx");
  symmetrize(out.l_xx);
  require_finite(out.l_x, "lf_x");
  require_finite(out.l_xx, "lf_xx");
  return out;
}

FiniteDifferenceModel::FiniteDifferenceModel(ModelPtr inner) : inner_(std::move(inner)) {
  if (!inner_) throw InputError("FiniteDifferenceModel needs a model");
}

DerivativeReport check_derivatives(const OcpModel& model, const std::vector<TrialPoint>& points,
                                   double tolerance) {
  DerivativeReport report;
  auto compare = [&](const Matrix& analytic, const Matrix& numeric, const char* block,
                     bool first_order) {
    for (Eigen::Index j = 0; j < analytic.cols(); ++j) {
      for (Eigen::Index i = 0; i < analytic.rows(); ++i) {
        const double e = rel_error(analytic(i, j), numeric(i, j));
        if (!first_order) {
          report.max_rel_error_second_order = std::max(report.max_rel_error_second_order, e);
          continue;
        }
        report.max_rel_error = std::max(report.max_rel_error, e);
        if (e > tolerance || !std::isfinite(e)) {
          report.flagged.push_back({block, static_cast<int>(i), static_cast<int>(j),
                                    analytic(i, j), numeric(i, j), e});
        }
      }
    }
  };

  const Dims d = model.dims();
  for (const TrialPoint& p : points) {
    // Contract with a fixed non-trivial gradient so second-order tensors are exercised.
    const Vector v_x = Vector::LinSpaced(d.nx, 1.0, 2.0);
    const DynamicsDerivs a = model.dynamics_derivs(p.x, p.u, p.w, p.t, v_x);
    const DynamicsDerivs n = fd_dynamics_derivs(model, p.x, p.u, p.w, p.t, v_x);
    compare(a.f_x, n.f_x, "f_x", true);
    compare(a.f_u, n.f_u, "f_u", true);
    compare(a.f_w, n.f_w, "f_w", true);
    compare(a.vfxx, n.vfxx, "vfxx", false);
    compare(a.vfuu, n.vfuu, "vfuu", false);
    compare(a.vfww, n.vfww, "vfww", false);

    const int t = std::clamp(p.t, 0, d.horizon - 1);
    const CostDerivs ca = model.running_cost_derivs(p.x, p.u, t);
    const CostDerivs cn = fd_running_cost_derivs(model, p.x, p.u, t);
    compare(ca.l_x, cn.l_x, "l_x", true);
    compare(ca.l_u, cn.l_u, "l_u", true);
    compare(ca.l_xx, cn.l_xx, "l_xx", false);
    compare(ca.l_uu, cn.l_uu, "l_uu", false);
    compare(ca.l_xu, cn.l_xu, "l_xu", false);

    const TerminalCostDerivs ta = model.terminal_cost_derivs(p.x);
    const TerminalCostDerivs tn = fd_terminal_cost_derivs(model, p.x);
    compare(ta.l_x, tn.l_x, "lf_x", true);
    compare(ta.l_xx, tn.l_xx, "lf_xx", false);
  }
  return report;
}

LinearQuadraticModel::LinearQuadraticModel(Params p) : p_(std::move(p)) {
  const int nx = static_cast<int>(p_.A.rows());
  const int nu = static_cast<int>(p_.B.cols());
  const int nw = static_cast<int>(p_.D.cols());
  dims().validate();
  require_shape(p_.A, nx, nx, "A");
  require_shape(p_.B, nx, nu, "B");
  require_shape(p_.D, nx, nw, "D");
  require_shape(p_.Q, nx, nx, "Q");
  require_shape(p_.R, nu, nu, "R");
  require_shape(p_.Qf, nx, nx, "Qf");
  if (p_.u_lower.size() == 0) p_.u_lower = OcpModel::control_lower();
  if (p_.u_upper.size() == 0) p_.u_upper = OcpModel::control_upper();
  require_size(p_.u_lower, nu, "u_lower");
  require_size(p_.u_upper, nu, "u_upper");
  if ((p_.u_lower.array() > p_.u_upper.array()).any()) {
    throw InputError("control_lower exceeds control_upper");
  }
}

Dims LinearQuadraticModel::dims() const {
  return {static_cast<int>(p_.A.rows()), static_cast<int>(p_.B.cols()),
          static_cast<int>(p_.D.cols()), p_.horizon};
}

Vector LinearQuadraticModel::dynamics(const Vector& x, const Vector& u, const Vector& w,
                                      int) const {
  return p_.A * x + p_.B * u + p_.D * w;
}

double LinearQuadraticModel::running_cost(const Vector& x, const Vector& u, int) const {
  return x.dot(p_.Q * x) + u.dot(p_.R * u);
}

double LinearQuadraticModel::terminal_cost(const Vector& x) const { return x.dot(p_.Qf * x); }

Vector LinearQuadraticModel::control_lower() const { return p_.u_lower; }
Vector LinearQuadraticModel::control_upper() const { return p_.u_upper; }

DynamicsDerivs LinearQuadraticModel::dynamics_derivs(const Vector&, const Vector&, const Vector&,
                                                     int, const Vector&) const {
  const Dims d = dims();
  return {p_.A,
          p_.B,
          p_.D,
          Matrix::Zero(d.nx, d.nx),
          Matrix::Zero(d.nu, d.nu),
          Matrix::Zero(d.nw, d.nw)};
}

CostDerivs LinearQuadraticModel::running_cost_derivs(const Vector& x, const Vector& u,
                                                     int) const {
  const Matrix qs = p_.Q + p_.Q.transpose();
  const Matrix rs = p_.R + p_.R.transpose();
  return {qs * x, rs * u, qs, rs, Matrix::Zero(x.size(), u.size())};
}

TerminalCostDerivs LinearQuadraticModel::terminal_cost_derivs(const Vector& x) const {
  const Matrix qs = p_.Qf + p_.Qf.transpose();
  return {qs * x, qs};
}

LinearQuadraticModel::Params random_lq_params(const Dims& dims, std::uint64_t seed) {
  dims.validate();
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto randn = [&](int r, int c) {
    Matrix m(r, c);
    for (Eigen::Index j = 0; j < c; ++j)
      for (Eigen::Index i = 0; i < r; ++i) m(i, j) = normal(rng);
    return m;
  };
  auto spd = [&](int n, double floor) {
    const Matrix g = randn(n, n);
    return Matrix(g * g.transpose() / n + floor * Matrix::Identity(n, n));
  };
  LinearQuadraticModel::Params p;
  p.A = Matrix::Identity(dims.nx, dims.nx) + 0.1 * randn(dims.nx, dims.nx);
  p.B = 0.5 * randn(dims.nx, dims.nu);
  p.D = 0.3 * randn(dims.nx, dims.nw);
  p.Q = spd(dims.nx, 0.5);
  p.R = spd(dims.nu, 0.5);
  p.Qf = spd(dims.nx, 1.0);
  p.horizon = dims.horizon;
  return p;
}

}  // namespace drddp
