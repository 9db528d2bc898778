#include <cmath>

#include <gtest/gtest.h>

#include "drddp/baselines.hpp"
#include "drddp/benchmarks.hpp"
#include "drddp/errors.hpp"
#include "oracles.hpp"

namespace drddp {
namespace {

double max_abs(const Matrix& m) { return m.cwiseAbs().maxCoeff(); }

LinearQuadraticModel::Params lq_params() { return random_lq_params({4, 2, 2, 15}, 60); }

TEST(BoxDdp, LqGainsMatchRiccati) {
  const auto p = lq_params();
  const LinearQuadraticModel model(p);
  SolverConfig c;
  c.max_iters = 20;
  const Vector x0 = Vector::LinSpaced(4, -1, 1);
  const Solution sol = solve_box_ddp(model, x0, c);
  EXPECT_TRUE(sol.converged);
  EXPECT_FALSE(sol.adversarial);
  const MatrixList k = testing::lq_riccati_gains(p);
  for (int t = 0; t < p.horizon; ++t) {
    EXPECT_LT(max_abs(sol.policies[t].K - k[t]), 1e-8) << "t=" << t;
  }
  // The nominal is the optimal noise-free closed loop x+ = (A + B K) x.
  Vector x = x0;
  for (int t = 0; t < p.horizon; ++t) {
    EXPECT_LT((sol.nominal.u[t] - k[t] * x).norm(), 1e-8);
    x = p.A * x + p.B * (k[t] * x);
  }
}

TEST(BoxDdp, RespectsControlBounds) {
  auto p = lq_params();
  p.u_lower = Vector::Constant(2, -0.05);
  p.u_upper = Vector::Constant(2, 0.05);
  const LinearQuadraticModel model(p);
  SolverConfig c;
  c.max_iters = 100;
  const Solution sol = solve_box_ddp(model, Vector::Constant(4, 3.0), c);
  EXPECT_TRUE(sol.converged);
  bool any_active = false;
  for (const Vector& u : sol.nominal.u) {
    EXPECT_TRUE((u.array() >= -0.05 - 1e-15).all() && (u.array() <= 0.05 + 1e-15).all());
    any_active = any_active || (u.cwiseAbs().array() >= 0.05 - 1e-12).any();
  }
  EXPECT_TRUE(any_active);
}

TEST(Minimax, SmallPenaltyRaisesCurvatureError) {
  const LinearQuadraticModel model(lq_params());
  SolverConfig c;
  c.max_iters = 20;
  EXPECT_THROW(solve_minimax_ddp(model, Vector::Ones(4), c, 1e-6), CurvatureError);
  EXPECT_THROW(solve_minimax_ddp(model, Vector::Ones(4), c, -1.0), ConfigError);
}

TEST(Minimax, LargePenaltyApproachesBoxDdp) {
  const auto p = lq_params();
  const LinearQuadraticModel model(p);
  SolverConfig c;
  c.max_iters = 20;
  const Solution a = solve_minimax_ddp(model, Vector::Ones(4), c, 1e9);
  const Solution b = solve_box_ddp(model, Vector::Ones(4), c);
  for (int t = 0; t < p.horizon; ++t) EXPECT_LT(max_abs(a.policies[t].K - b.policies[t].K), 1e-6);
}

TEST(Minimax, GammaSelectionDoublesSmallestFeasible) {
  const LinearQuadraticModel model(lq_params());
  SolverConfig c;
  c.max_iters = 20;
  const std::vector<double> grid = log_grid(1e-4, 1e4, 1);
  const GammaSelection s = select_minimax_gamma(model, Vector::Ones(4), c, grid);
  EXPECT_EQ(s.gamma, 2.0 * s.smallest_feasible);
  const auto it = std::find(s.grid.begin(), s.grid.end(), s.smallest_feasible);
  ASSERT_NE(it, s.grid.end());
  if (it != s.grid.begin()) {
    EXPECT_THROW(solve_minimax_ddp(model, Vector::Ones(4), c, *(it - 1)), CurvatureError);
  }
}

TEST(Controllers, NamesRoundTrip) {
  for (ControllerKind k :
       {ControllerKind::kDrDdp, ControllerKind::kBoxDdp, ControllerKind::kMinimaxDdp}) {
    EXPECT_EQ(parse_controller(controller_name(k)), k);
  }
  EXPECT_THROW(parse_controller("lqr"), ConfigError);
}

TEST(LogGrid, IsLogSpaced) {
  const auto g = log_grid(1.0, 1000.0, 2);
  ASSERT_EQ(g.size(), 7u);
  EXPECT_DOUBLE_EQ(g.front(), 1.0);
  EXPECT_NEAR(g.back(), 1000.0, 1e-9);
  EXPECT_NEAR(g[1], std::sqrt(10.0), 1e-12);
  EXPECT_THROW(log_grid(0.0, 1.0, 1), ConfigError);
}

}  // namespace
}  // namespace drddp
