#include "drddp/benchmarks.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "drddp/errors.hpp"
#include "drddp/random.hpp"

namespace drddp {

// ---------------------------------------------------------------------------
// Car

CarModel::CarModel(Params p) : p_(std::move(p)) {
  if (p_.horizon < 1) throw ConfigError("car horizon must be >= 1");
  if (!(p_.dt > 0.0) || !(p_.wheelbase > 0.0)) {
    throw ConfigError("car dt and wheelbase must be positive");
  }
  if (!(p_.r_obs > 0.0) || !(p_.r_safe > 0.0)) throw ConfigError("r_obs and r_safe must be positive");
  if (p_.q < 0.0 || p_.r < 0.0 || p_.q_obs < 0.0) throw ConfigError("car weights must be >= 0");
  if (p_.u_lower.size() != 2 || p_.u_upper.size() != 2 ||
      (p_.u_lower.array() > p_.u_upper.array()).any()) {
    throw ConfigError("car control bounds must be 2-vectors with lower <= upper");
  }
  if (static_cast<int>(p_.reference.size()) != p_.horizon + 1) {
    throw ConfigError(fmt::format("car reference needs {} entries, got {}", p_.horizon + 1,
                                  p_.reference.size()));
  }
  if (static_cast<int>(p_.drift.size()) != p_.horizon) {
    throw ConfigError(fmt::format("obstacle drift needs {} entries, got {}", p_.horizon,
                                  p_.drift.size()));
  }
  for (const Vector& r : p_.reference)
    if (r.size() != 3) throw ConfigError("car reference entries must be [p_x, p_y, phi]");
  for (const Vector& d : p_.drift)
    if (d.size() != 2) throw ConfigError("obstacle drift entries must be [dx, dy]");
}

Vector CarModel::dynamics(const Vector& x, const Vector& u, const Vector& w, int t) const {
  const double v = u(0);
  const double phi = x(2);
  Vector next(5);
  next(0) = x(0) + p_.dt * v * std::cos(phi);
  next(1) = x(1) + p_.dt * v * std::sin(phi);
  next(2) = phi + p_.dt * v * std::tan(u(1)) / p_.wheelbase;
  next.tail<2>() = x.tail<2>() + p_.drift.at(t) + w;
  return next;
}

double CarModel::obstacle_cost(const Vector& x) const {
  const double s = p_.r_obs + p_.r_safe;
  const double d2 = (x.head<2>() - x.tail<2>()).squaredNorm();
  return p_.q_obs * std::exp(-0.5 * d2 / (s * s));
}

double CarModel::state_cost(const Vector& x, const Vector& ref) const {
  return p_.q * (x.head<3>() - ref).squaredNorm() + obstacle_cost(x);
}

double CarModel::running_cost(const Vector& x, const Vector& u, int t) const {
  return state_cost(x, p_.reference.at(t)) + p_.r * u.squaredNorm();
}

double CarModel::terminal_cost(const Vector& x) const {
  return state_cost(x, p_.reference.back());
}

DynamicsDerivs CarModel::dynamics_derivs(const Vector& x, const Vector& u, const Vector&, int,
                                         const Vector& v_x) const {
  const double v = u(0);
  const double delta = u(1);
  const double c = std::cos(x(2));
  const double s = std::sin(x(2));
  const double tn = std::tan(delta);
  const double sec2 = 1.0 + tn * tn;
  const double dt = p_.dt;
  const double lw = p_.wheelbase;

  DynamicsDerivs d;
  d.f_x = Matrix::Identity(5, 5);
  d.f_x(0, 2) = -dt * v * s;
  d.f_x(1, 2) = dt * v * c;
  d.f_u = Matrix::Zero(5, 2);
  d.f_u(0, 0) = dt * c;
  d.f_u(1, 0) = dt * s;
  d.f_u(2, 0) = dt * tn / lw;
  d.f_u(2, 1) = dt * v * sec2 / lw;
  d.f_w = Matrix::Zero(5, 2);
  d.f_w(3, 0) = 1.0;
  d.f_w(4, 1) = 1.0;

  d.vfxx = Matrix::Zero(5, 5);
  d.vfxx(2, 2) = -dt * v * (v_x(0) * c + v_x(1) * s);
  d.vfuu = Matrix::Zero(2, 2);
  d.vfuu(0, 1) = d.vfuu(1, 0) = v_x(2) * dt * sec2 / lw;
  d.vfuu(1, 1) = v_x(2) * dt * v * 2.0 * sec2 * tn / lw;
  d.vfww = Matrix::Zero(2, 2);
  return d;
}

void CarModel::add_state_derivs(const Vector& x, const Vector& ref, Vector& l_x,
                                Matrix& l_xx) const {
  l_x.head<3>() += 2.0 * p_.q * (x.head<3>() - ref);
  l_xx.topLeftCorner<3, 3>() += 2.0 * p_.q * Matrix::Identity(3, 3);

  const double s2 = (p_.r_obs + p_.r_safe) * (p_.r_obs + p_.r_safe);
  const Eigen::Vector2d d = x.head<2>() - x.tail<2>();
  const double g = obstacle_cost(x);
  const Eigen::Vector2d grad = -g * d / s2;
  const Eigen::Matrix2d hess = g * (d * d.transpose() / (s2 * s2) - Eigen::Matrix2d::Identity() / s2);
  l_x.head<2>() += grad;
  l_x.tail<2>() -= grad;
  l_xx.topLeftCorner<2, 2>() += hess;
  l_xx.bottomRightCorner<2, 2>() += hess;
  l_xx.block<2, 2>(0, 3) -= hess;
  l_xx.block<2, 2>(3, 0) -= hess;
}

CostDerivs CarModel::running_cost_derivs(const Vector& x, const Vector& u, int t) const {
  CostDerivs c;
  c.l_x = Vector::Zero(5);
  c.l_xx = Matrix::Zero(5, 5);
  add_state_derivs(x, p_.reference.at(t), c.l_x, c.l_xx);
  c.l_u = 2.0 * p_.r * u;
  c.l_uu = 2.0 * p_.r * Matrix::Identity(2, 2);
  c.l_xu = Matrix::Zero(5, 2);
  return c;
}

TerminalCostDerivs CarModel::terminal_cost_derivs(const Vector& x) const {
  TerminalCostDerivs c;
  c.l_x = Vector::Zero(5);
  c.l_xx = Matrix::Zero(5, 5);
  add_state_derivs(x, p_.reference.back(), c.l_x, c.l_xx);
  return c;
}

// ---------------------------------------------------------------------------
// Kuramoto

KuramotoModel::KuramotoModel(Params p) : p_(std::move(p)) {
  if (p_.omega.size() < 2) throw ConfigError("Kuramoto model needs L >= 2 oscillators");
  if (p_.horizon < 1) throw ConfigError("Kuramoto horizon must be >= 1");
  if (!(p_.dt > 0.0)) throw ConfigError("Kuramoto dt must be positive");
  if (p_.control_weight < 0.0) throw ConfigError("control weight must be >= 0");
}

Dims KuramotoModel::dims() const { return {oscillators(), 1, oscillators(), p_.horizon}; }

Vector KuramotoModel::dynamics(const Vector& x, const Vector& u, const Vector& w, int) const {
  const int n = oscillators();
  Vector next(n);
  for (int i = 0; i < n; ++i) {
    double s = 0.0;
    for (int j = 0; j < n; ++j) s += std::sin(x(j) - x(i));
    next(i) = x(i) + p_.dt * (p_.omega(i) + p_.coupling * u(0) * s) + w(i);
  }
  return next;
}

double KuramotoModel::sync_cost(const Vector& theta) {
  double c = 0.0;
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    for (Eigen::Index j = 0; j < theta.size(); ++j) {
      const double s = std::sin(theta(j) - theta(i));
      c += s * s;
    }
  }
  return c;
}

double KuramotoModel::running_cost(const Vector& x, const Vector& u, int) const {
  return sync_cost(x) + p_.control_weight * u(0) * u(0);
}

double KuramotoModel::terminal_cost(const Vector& x) const { return sync_cost(x); }

DynamicsDerivs KuramotoModel::dynamics_derivs(const Vector& x, const Vector& u, const Vector&, int,
                                              const Vector& v_x) const {
  const int n = oscillators();
  const double gain = p_.dt * p_.coupling * u(0);
  Matrix sn(n, n), cs(n, n);  // sn(i,k) = sin(x_k - x_i)
  for (int k = 0; k < n; ++k) {
    for (int i = 0; i < n; ++i) {
      sn(i, k) = std::sin(x(k) - x(i));
      cs(i, k) = std::cos(x(k) - x(i));
    }
  }
  DynamicsDerivs d;
  // dS_i/dx_k = cos(x_k - x_i) for k != i; dS_i/dx_i = -sum_{j != i} cos(x_j - x_i)
  Matrix ds = cs;
  for (int i = 0; i < n; ++i) ds(i, i) = -(cs.row(i).sum() - 1.0);
  d.f_x = Matrix::Identity(n, n) + gain * ds;
  d.f_u = p_.dt * p_.coupling * sn.rowwise().sum();
  d.f_w = Matrix::Identity(n, n);

  d.vfxx = Matrix::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    const double vi = v_x(i);
    if (vi == 0.0) continue;
    double diag = 0.0;
    for (int k = 0; k < n; ++k) {
      if (k == i) continue;
      d.vfxx(k, k) -= vi * sn(i, k);
      d.vfxx(k, i) += vi * sn(i, k);
      d.vfxx(i, k) += vi * sn(i, k);
      diag += sn(i, k);
    }
    d.vfxx(i, i) -= vi * diag;
  }
  d.vfxx *= gain;
  d.vfuu = Matrix::Zero(1, 1);
  d.vfww = Matrix::Zero(n, n);
  return d;
}

namespace {

void sync_cost_derivs(const Vector& x, Vector& g, Matrix& h) {
  const Eigen::Index n = x.size();
  g = Vector::Zero(n);
  h = Matrix::Zero(n, n);
  for (Eigen::Index k = 0; k < n; ++k) {
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j == k) continue;
      const double a = 2.0 * (x(k) - x(j));
      g(k) += 2.0 * std::sin(a);
      const double c = 4.0 * std::cos(a);
      h(k, j) -= c;
      h(k, k) += c;
    }
  }
}

}  // namespace

CostDerivs KuramotoModel::running_cost_derivs(const Vector& x, const Vector& u, int) const {
  CostDerivs c;
  sync_cost_derivs(x, c.l_x, c.l_xx);
  c.l_u = Vector::Constant(1, 2.0 * p_.control_weight * u(0));
  c.l_uu = Matrix::Constant(1, 1, 2.0 * p_.control_weight);
  c.l_xu = Matrix::Zero(oscillators(), 1);
  return c;
}

TerminalCostDerivs KuramotoModel::terminal_cost_derivs(const Vector& x) const {
  TerminalCostDerivs c;
  sync_cost_derivs(x, c.l_x, c.l_xx);
  return c;
}

// ---------------------------------------------------------------------------
// Registry

std::vector<std::string> benchmark_names() { return {"car", "kuramoto", "lq"}; }

VectorList read_series_csv(const std::filesystem::path& path, int columns, int expected_rows) {
  std::ifstream in(path);
  if (!in) throw ConfigError(fmt::format("cannot read {}", path.string()));
  std::string line;
  std::getline(in, line);  // header
  VectorList rows(expected_rows);
  std::vector<bool> seen(expected_rows, false);
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> vals;
    try {
      while (std::getline(ss, cell, ',')) vals.push_back(std::stod(cell));
    } catch (const std::exception&) {
      throw ConfigError(fmt::format("{}:{}: malformed number", path.string(), lineno));
    }
    if (static_cast<int>(vals.size()) != columns + 1) {
      throw ConfigError(fmt::format("{}:{}: expected {} columns", path.string(), lineno,
                                    columns + 1));
    }
    const int t = static_cast<int>(vals[0]);
    if (t < 0 || t >= expected_rows || seen[t]) {
      throw ConfigError(fmt::format("{}:{}: bad or repeated index {}", path.string(), lineno, t));
    }
    seen[t] = true;
    rows[t] = Eigen::Map<const Vector>(vals.data() + 1, columns);
  }
  for (int t = 0; t < expected_rows; ++t) {
    if (!seen[t]) throw ConfigError(fmt::format("{}: missing row t={}", path.string(), t));
  }
  return rows;
}

CarModel::Params default_car_params(const CarSettings& s) {
  if (s.horizon < 1 || !(s.dt > 0.0)) throw ConfigError("car horizon and dt must be positive");
  CarModel::Params p;
  p.horizon = s.horizon;
  p.dt = s.dt;
  p.wheelbase = s.wheelbase;
  if (!s.reference_file.empty()) {
    p.reference = read_series_csv(s.reference_file, 3, s.horizon + 1);
  } else {
    for (int t = 0; t <= s.horizon; ++t) {
      p.reference.push_back((Vector(3) << s.ref_speed * s.dt * t, 0.0, 0.0).finished());
    }
  }
  if (!s.drift_file.empty()) {
    p.drift = read_series_csv(s.drift_file, 2, s.horizon);
  } else {
    p.drift.assign(s.horizon, (Vector(2) << 0.0, s.obstacle_speed * s.dt).finished());
  }
  return p;
}

Vector default_car_start(const CarModel::Params& p, const CarSettings& s) {
  // The obstacle reaches the reference line when the reference reaches it.
  const double half = 0.5 * p.horizon * p.dt;
  Vector x0(5);
  x0 << p.reference.front()(0), p.reference.front()(1), p.reference.front()(2),
      s.ref_speed * half, -s.obstacle_speed * half;
  return x0;
}

BenchmarkInstance make_benchmark(const BenchmarkSettings& settings, std::uint64_t seed) {
  BenchmarkInstance b;
  b.name = settings.name;
  Rng rng = make_rng(seed, stream::kBenchmark);
  if (settings.name == "car") {
    const CarSettings& s = settings.car;
    if (!(s.noise >= 0.0) || s.samples < 1) throw ConfigError("car noise/samples invalid");
    CarModel::Params p = default_car_params(s);
    b.x0 = default_car_start(p, s);
    b.model = std::make_shared<CarModel>(std::move(p));
    b.true_dist = TrueDistribution::uniform_box(Vector::Constant(2, -s.noise),
                                                Vector::Constant(2, s.noise));
    b.samples = s.samples;
    b.lambda = s.lambda;
  } else if (settings.name == "kuramoto") {
    const KuramotoSettings& s = settings.kuramoto;
    if (s.oscillators < 2) throw ConfigError("kuramoto.oscillators must be >= 2");
    if (s.samples < 1 || !(s.omega_variance >= 0.0) || !(s.noise_variance >= 0.0)) {
      throw ConfigError("kuramoto samples/variances invalid");
    }
    const int n = s.oscillators;
    KuramotoModel::Params p;
    p.horizon = s.horizon;
    p.dt = s.dt;
    p.coupling = s.coupling;
    p.control_weight = s.control_weight;
    p.omega.resize(n);
    std::normal_distribution<double> omega(0.0, std::sqrt(s.omega_variance));
    for (int i = 0; i < n; ++i) p.omega(i) = omega(rng);
    std::uniform_real_distribution<double> phase(-s.initial_spread, s.initial_spread);
    b.x0.resize(n);
    for (int i = 0; i < n; ++i) b.x0(i) = phase(rng);
    b.model = std::make_shared<KuramotoModel>(std::move(p));
    b.true_dist = TrueDistribution::gaussian(Vector::Constant(n, s.noise_mean),
                                             s.noise_variance * Matrix::Identity(n, n));
    b.samples = s.samples;
    b.lambda = s.lambda;
  } else if (settings.name == "lq") {
    const LqSettings& s = settings.lq;
    const Dims dims{s.nx, s.nu, s.nw, s.horizon};
    dims.validate();
    if (s.samples < 1 || !(s.noise_std >= 0.0)) throw ConfigError("lq samples/noise invalid");
    b.model = std::make_shared<LinearQuadraticModel>(random_lq_params(dims, rng()));
    std::normal_distribution<double> normal(0.0, 1.0);
    b.x0.resize(s.nx);
    for (int i = 0; i < s.nx; ++i) b.x0(i) = normal(rng);
    b.true_dist = TrueDistribution::gaussian(
        Vector::Zero(s.nw), s.noise_std * s.noise_std * Matrix::Identity(s.nw, s.nw));
    b.samples = s.samples;
    b.lambda = s.lambda;
  } else {
    throw ConfigError(fmt::format("unknown benchmark '{}' (expected car, kuramoto or lq)",
                                  settings.name));
  }
  return b;
}

}  // namespace drddp
