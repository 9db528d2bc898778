#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "drddp/disturbance.hpp"
#include "drddp/problem.hpp"

namespace drddp {

/**
 * Kinematic car crossing an intersection with a moving obstacle.
 *
 *   state  [p_x, p_y, phi, o_x, o_y],  input [v, delta],  disturbance w in R^2
 *
 *   p+   = p + dt v [cos phi, sin phi]
 *   phi+ = phi + dt v tan(delta) / wheelbase
 *   o+   = o + drift_t + w
 *
 *   l_t = q ||car - ref_t||^2 + r ||u||^2 + q_obs exp(-0.5 ||p - o||^2 / (r_obs + r_safe)^2)
 */
class CarModel final : public OcpModel {
 public:
  struct Params {
    int horizon = 800;
    double dt = 0.05;
    double wheelbase = 1.0;
    double q = 10.0;
    double r = 0.1;
    double q_obs = 20.0;
    double r_obs = 0.2;
    double r_safe = 0.2;
    Vector u_lower = (Vector(2) << 0.0, -0.6).finished();
    Vector u_upper = (Vector(2) << 10.0, 0.6).finished();
    VectorList reference;  // T + 1 entries [p_x, p_y, phi]
    VectorList drift;      // T entries [dx, dy]
  };

  explicit CarModel(Params p);

  Dims dims() const override { return {5, 2, 2, p_.horizon}; }
  std::string name() const override { return "car"; }
  Vector dynamics(const Vector& x, const Vector& u, const Vector& w, int t) const override;
  double running_cost(const Vector& x, const Vector& u, int t) const override;
  double terminal_cost(const Vector& x) const override;
  Vector control_lower() const override { return p_.u_lower; }
  Vector control_upper() const override { return p_.u_upper; }
  DynamicsDerivs dynamics_derivs(const Vector& x, const Vector& u, const Vector& w, int t,
                                 const Vector& v_x) const override;
  CostDerivs running_cost_derivs(const Vector& x, const Vector& u, int t) const override;
  TerminalCostDerivs terminal_cost_derivs(const Vector& x) const override;
  bool has_analytic_derivatives() const override { return true; }

  const Params& params() const { return p_; }
  double obstacle_cost(const Vector& x) const;
  // ||p - o||
  static double clearance(const Vector& x) { return (x.head<2>() - x.tail<2>()).norm(); }

 private:
  double state_cost(const Vector& x, const Vector& ref) const;
  void add_state_derivs(const Vector& x, const Vector& ref, Vector& l_x, Matrix& l_xx) const;

  Params p_;
};

/**
 * L coupled Kuramoto oscillators driven by a scalar coupling gain u:
 *
 *   theta_i+ = theta_i + dt (omega_i + K u sum_j sin(theta_j - theta_i)) + w_i
 *
 *   l = sum_{i,j} sin^2(theta_j - theta_i) + c u^2,   l_f = sum_{i,j} sin^2(...)
 *
 * The double sum runs over ordered pairs.
 */
class KuramotoModel final : public OcpModel {
 public:
  struct Params {
    int horizon = 100;
    double dt = 0.03;
    double coupling = 1.0;
    double control_weight = 1e-4;
    Vector omega;  // natural frequencies, length L
  };

  explicit KuramotoModel(Params p);

  Dims dims() const override;
  std::string name() const override { return "kuramoto"; }
  Vector dynamics(const Vector& x, const Vector& u, const Vector& w, int t) const override;
  double running_cost(const Vector& x, const Vector& u, int t) const override;
  double terminal_cost(const Vector& x) const override;
  DynamicsDerivs dynamics_derivs(const Vector& x, const Vector& u, const Vector& w, int t,
                                 const Vector& v_x) const override;
  CostDerivs running_cost_derivs(const Vector& x, const Vector& u, int t) const override;
  TerminalCostDerivs terminal_cost_derivs(const Vector& x) const override;
  bool has_analytic_derivatives() const override { return true; }

  const Params& params() const { return p_; }
  int oscillators() const { return static_cast<int>(p_.omega.size()); }

  static double sync_cost(const Vector& theta);

 private:
  Params p_;
};

struct CarSettings {
  int horizon = 800;
  double dt = 0.05;
  double wheelbase = 1.0;
  double ref_speed = 1.0;       // m/s along +x
  double obstacle_speed = 0.5;  // m/s along +y, crossing at mid-horizon
  double noise = 0.001;         // w ~ U(-noise, noise) per component
  int samples = 10;
  double lambda = 9000.0;
  std::string reference_file;  // optional CSV t,p_x,p_y,phi
  std::string drift_file;      // optional CSV t,dx,dy
};

struct KuramotoSettings {
  int oscillators = 8;
  int horizon = 100;
  double dt = 0.03;
  double coupling = 1.0;
  double control_weight = 1e-4;
  double omega_variance = 0.004;
  double noise_mean = 0.001;
  double noise_variance = 0.001;
  double initial_spread = 1.0;  // theta_0 ~ U(-spread, spread)
  int samples = 50;
  double lambda = 1e4;
};

struct LqSettings {
  int nx = 4;
  int nu = 2;
  int nw = 2;
  int horizon = 20;
  int samples = 5;
  double noise_std = 0.1;
  double lambda = 100.0;
};

struct BenchmarkSettings {
  std::string name = "car";  // "car", "kuramoto" or "lq"
  CarSettings car;
  KuramotoSettings kuramoto;
  LqSettings lq;
};

struct BenchmarkInstance {
  std::string name;
  ModelPtr model;
  Vector x0;
  TrueDistribution true_dist;
  int samples = 1;  // dataset size N
  double lambda = 1.0;
};

std::vector<std::string> benchmark_names();

// Deterministic in `seed` (natural frequencies, initial phases, LQ matrices).
BenchmarkInstance make_benchmark(const BenchmarkSettings& settings, std::uint64_t seed);

// Straight run along +x at ref_speed; obstacle crosses the path at mid-horizon.
CarModel::Params default_car_params(const CarSettings& s);
Vector default_car_start(const CarModel::Params& p, const CarSettings& s);

// Reads "t,c1,...,cn" rows into a list indexed by t; `columns` is n.
VectorList read_series_csv(const std::filesystem::path& path, int columns, int expected_rows);

}  // namespace drddp
