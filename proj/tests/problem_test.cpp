#include <cmath>
#include <limits>
#include <memory>
#include <random>

#include <gtest/gtest.h>

#include "drddp/benchmarks.hpp"
#include "drddp/errors.hpp"
#include "drddp/problem.hpp"
#include "test_util.hpp"

namespace drddp {
namespace {

using testing::random_matrix;
using testing::random_vector;

std::shared_ptr<CarModel> small_car() {
  CarSettings s;
  s.horizon = 10;
  return std::make_shared<CarModel>(default_car_params(s));
}

std::shared_ptr<KuramotoModel> small_kuramoto(int l = 4) {
  KuramotoModel::Params p;
  p.horizon = 10;
  p.omega = Vector::LinSpaced(l, -0.1, 0.1);
  return std::make_shared<KuramotoModel>(p);
}

std::shared_ptr<LinearQuadraticModel> small_lq() {
  return std::make_shared<LinearQuadraticModel>(random_lq_params({3, 2, 2, 5}, 11));
}

std::vector<TrialPoint> random_points(const OcpModel& m, int count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const Dims d = m.dims();
  std::vector<TrialPoint> pts;
  for (int i = 0; i < count; ++i) {
    TrialPoint p{random_vector(d.nx, rng), random_vector(d.nu, rng, 0.5),
                 random_vector(d.nw, rng, 0.1), i % d.horizon};
    pts.push_back(p);
  }
  return pts;
}

// Central differences written out directly, independent of the library helper.
Matrix numeric_jacobian(const std::function<Vector(const Vector&)>& f, const Vector& z) {
  const Vector f0 = f(z);
  Matrix j(f0.size(), z.size());
  for (int i = 0; i < z.size(); ++i) {
    const double h = 1e-6 * std::max(1.0, std::abs(z(i)));
    Vector zp = z, zm = z;
    zp(i) += h;
    zm(i) -= h;
    j.col(i) = (f(zp) - f(zm)) / (2.0 * h);
  }
  return j;
}

TEST(Dims, RejectsNonPositive) {
  EXPECT_NO_THROW((Dims{1, 1, 1, 1}.validate()));
  EXPECT_THROW((Dims{0, 1, 1, 1}.validate()), InputError);
  EXPECT_THROW((Dims{1, 1, 1, 0}.validate()), InputError);
}

TEST(LinearQuadratic, DynamicsAndCostMatchMatrices) {
  const auto m = small_lq();
  const auto& p = m->params();
  std::mt19937_64 rng(1);
  const Vector x = random_vector(3, rng), u = random_vector(2, rng), w = random_vector(2, rng);
  EXPECT_LT((m->dynamics(x, u, w, 0) - (p.A * x + p.B * u + p.D * w)).norm(), 1e-14);
  EXPECT_NEAR(m->running_cost(x, u, 0), x.dot(p.Q * x) + u.dot(p.R * u), 1e-12);
  EXPECT_NEAR(m->terminal_cost(x), x.dot(p.Qf * x), 1e-12);
}

TEST(LinearQuadratic, RandomParamsAreDeterministic) {
  const auto a = random_lq_params({4, 2, 2, 20}, 5);
  const auto b = random_lq_params({4, 2, 2, 20}, 5);
  EXPECT_EQ(a.A, b.A);
  EXPECT_EQ(a.Q, b.Q);
  const auto c = random_lq_params({4, 2, 2, 20}, 6);
  EXPECT_NE(a.A, c.A);
}

TEST(Derivatives, ShippedModelsPassFiniteDifferenceCheck) {
  const std::vector<std::shared_ptr<const OcpModel>> models = {small_car(), small_kuramoto(),
                                                               small_lq()};
  for (const auto& m : models) {
    const DerivativeReport r = check_derivatives(*m, random_points(*m, 20, 3), 1e-4);
    EXPECT_TRUE(r.passed()) << m->name() << " max rel err " << r.max_rel_error;
    EXPECT_LT(r.max_rel_error, 1e-4) << m->name();
  }
}

TEST(Derivatives, CarJacobiansMatchDirectDifferences) {
  const auto car = small_car();
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 5; ++trial) {
    const Vector x = random_vector(5, rng);
    const Vector u = (Vector(2) << 1.0 + trial * 0.3, 0.2 - 0.1 * trial).finished();
    const Vector w = random_vector(2, rng, 0.01);
    const DynamicsDerivs d = car->dynamics_derivs(x, u, w, 0, Vector::Ones(5));
    const Matrix fx = numeric_jacobian([&](const Vector& z) { return car->dynamics(z, u, w, 0); }, x);
    const Matrix fu = numeric_jacobian([&](const Vector& z) { return car->dynamics(x, z, w, 0); }, u);
    const Matrix fw = numeric_jacobian([&](const Vector& z) { return car->dynamics(x, u, z, 0); }, w);
    EXPECT_LT((d.f_x - fx).cwiseAbs().maxCoeff(), 1e-7);
    EXPECT_LT((d.f_u - fu).cwiseAbs().maxCoeff(), 1e-7);
    EXPECT_LT((d.f_w - fw).cwiseAbs().maxCoeff(), 1e-7);

    const CostDerivs c = car->running_cost_derivs(x, u, 1);
    auto cost_x = [&](const Vector& z) {
      return (Vector(1) << car->running_cost(z, u, 1)).finished();
    };
    const Matrix lx = numeric_jacobian(cost_x, x);
    EXPECT_LT((c.l_x - lx.transpose()).cwiseAbs().maxCoeff(), 1e-5);
  }
}

TEST(Derivatives, SecondOrderContractionMatchesFiniteDifference) {
  const auto k = small_kuramoto(3);
  std::mt19937_64 rng(2);
  const Vector x = random_vector(3, rng), u = random_vector(1, rng), w = random_vector(3, rng);
  const Vector vx = random_vector(3, rng);
  const DynamicsDerivs a = k->dynamics_derivs(x, u, w, 0, vx);
  const DynamicsDerivs n = fd_dynamics_derivs(*k, x, u, w, 0, vx);
  EXPECT_LT((a.vfxx - n.vfxx).cwiseAbs().maxCoeff(), 1e-4);
  EXPECT_LT((a.vfuu - n.vfuu).cwiseAbs().maxCoeff(), 1e-4);
}

TEST(Derivatives, FiniteDifferenceModelAgreesWithAnalytic) {
  const auto car = small_car();
  const FiniteDifferenceModel fd(car);
  EXPECT_FALSE(fd.has_analytic_derivatives());
  const Vector x = (Vector(5) << 0.1, 0.2, 0.3, 1.0, -0.5).finished();
  const Vector u = (Vector(2) << 1.0, 0.1).finished();
  const Vector w = Vector::Zero(2);
  const CostDerivs a = car->running_cost_derivs(x, u, 2);
  const CostDerivs b = fd.running_cost_derivs(x, u, 2);
  EXPECT_LT((a.l_x - b.l_x).cwiseAbs().maxCoeff(), 1e-5);
  EXPECT_LT((a.l_uu - b.l_uu).cwiseAbs().maxCoeff(), 1e-3);
  EXPECT_DOUBLE_EQ(fd.running_cost(x, u, 2), car->running_cost(x, u, 2));
}

class BrokenModel final : public OcpModel {
 public:
  explicit BrokenModel(bool wrong_gradient) : wrong_(wrong_gradient) {}
  Dims dims() const override { return {1, 1, 1, 1}; }
  std::string name() const override { return "broken"; }
  Vector dynamics(const Vector& x, const Vector& u, const Vector& w, int) const override {
    return x + u + w;
  }
  double running_cost(const Vector& x, const Vector& u, int) const override {
    return x.squaredNorm() + u.squaredNorm();
  }
  double terminal_cost(const Vector& x) const override { return x.squaredNorm(); }
  CostDerivs running_cost_derivs(const Vector& x, const Vector& u, int) const override {
    CostDerivs c;
    c.l_x = wrong_ ? Vector(3.0 * x) : Vector::Constant(1, std::nan(""));
    c.l_u = 2.0 * u;
    c.l_xx = 2.0 * Matrix::Identity(1, 1);
    c.l_uu = 2.0 * Matrix::Identity(1, 1);
    c.l_xu = Matrix::Zero(1, 1);
    return c;
  }
  bool has_analytic_derivatives() const override { return true; }

 private:
  bool wrong_;
};

TEST(Derivatives, WrongGradientIsFlagged) {
  const BrokenModel m(true);
  const TrialPoint p{Vector::Constant(1, 1.0), Vector::Constant(1, 0.5), Vector::Zero(1), 0};
  const DerivativeReport r = check_derivatives(m, {p});
  ASSERT_FALSE(r.passed());
  EXPECT_EQ(r.flagged.front().block, "l_x");
}

TEST(Derivatives, NonFiniteOutputRaises) {
  const BrokenModel m(false);
  EXPECT_THROW(eval_cost_derivs(m, Vector::Ones(1), Vector::Ones(1), 0), DerivativeError);
}

TEST(OcpModel, DefaultBoundsAreInfinite) {
  const BrokenModel m(true);
  EXPECT_FALSE(m.has_control_bounds());
  EXPECT_EQ(m.control_lower()(0), -std::numeric_limits<double>::infinity());
  EXPECT_TRUE(small_car()->has_control_bounds());
}

}  // namespace
}  // namespace drddp
