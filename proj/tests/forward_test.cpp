#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "drddp/errors.hpp"
#include "drddp/forward.hpp"
#include "drddp/solver.hpp"
#include "oracles.hpp"

namespace drddp {
namespace {

using testing::random_matrix;
using testing::random_vector;

class RolloutFixture : public ::testing::Test {
 protected:
  void SetUp() override {
    params_ = random_lq_params({3, 2, 2, 8}, 50);
    model_ = std::make_shared<LinearQuadraticModel>(params_);
    std::mt19937_64 rng(51);
    std::vector<Matrix> samples;
    for (int t = 0; t < 8; ++t) samples.push_back(random_matrix(4, 2, rng, 0.2));
    ds_ = std::make_unique<DisturbanceDataset>(samples);
    VectorList u, w;
    for (int t = 0; t < 8; ++t) {
      u.push_back(random_vector(2, rng));
      w.push_back(ds_->mean(t));
    }
    nominal_ = simulate(*model_, random_vector(3, rng), u, w);
    adversary_.dataset = ds_.get();
    adversary_.lambda = 20.0;
    Rng r = make_rng(1, stream::kForward);
    atoms_ = draw_atom_sequence(8, 4, r);
  }

  double direct_penalized(const NominalTrajectories& tr) const {
    double c = model_->terminal_cost(tr.x.back());
    for (int t = 0; t < 8; ++t) {
      c += model_->running_cost(tr.x[t], tr.u[t], t);
      c -= adversary_.lambda * (tr.w[t] - ds_->sample(t, atoms_[t])).squaredNorm();
    }
    return c;
  }

  LinearQuadraticModel::Params params_;
  std::shared_ptr<LinearQuadraticModel> model_;
  std::unique_ptr<DisturbanceDataset> ds_;
  NominalTrajectories nominal_;
  AdversarySpec adversary_;
  std::vector<int> atoms_;
};

TEST_F(RolloutFixture, ZeroStepReproducesNominal) {
  std::mt19937_64 rng(52);
  std::vector<PolicyStep> pol(8);
  for (auto& p : pol) {
    p.K = random_matrix(2, 3, rng);
    p.k = random_vector(2, rng);
    p.H = random_matrix(2, 3, rng);
    p.h_i = random_matrix(4, 2, rng);
    p.h_bar = p.h_i.colwise().mean().transpose();
  }
  const RolloutResult r = rollout(*model_, nominal_, pol, 0.0, adversary_, atoms_);
  for (int t = 0; t <= 8; ++t) EXPECT_LT((r.trajectories.x[t] - nominal_.x[t]).norm(), 1e-14);
  EXPECT_NEAR(r.cost_penalized, direct_penalized(nominal_), 1e-10);
  const RolloutResult e = evaluate_trajectories(*model_, nominal_, adversary_, atoms_);
  EXPECT_NEAR(e.cost_penalized, r.cost_penalized, 1e-12);
  EXPECT_NEAR(e.cost_nominal, r.cost_nominal, 1e-12);
}

TEST_F(RolloutFixture, StepAppliesFeedforwardAndFeedback) {
  std::vector<PolicyStep> pol(8);
  for (auto& p : pol) {
    p.K = Matrix::Constant(2, 3, 0.1);
    p.k = Vector::Constant(2, 0.5);
    p.H = Matrix::Constant(2, 3, -0.05);
    p.h_i = Matrix::Constant(4, 2, 0.01);
    p.h_bar = Vector::Constant(2, 0.01);
  }
  const RolloutResult r = rollout(*model_, nominal_, pol, 0.5, adversary_, atoms_);
  Vector x = nominal_.x[0];
  for (int t = 0; t < 8; ++t) {
    const Vector dx = x - nominal_.x[t];
    const Vector u = nominal_.u[t] + 0.25 * Vector::Ones(2) + pol[t].K * dx;
    const Vector w = nominal_.w[t] + 0.005 * Vector::Ones(2) + pol[t].H * dx;
    EXPECT_LT((r.trajectories.u[t] - u).norm(), 1e-12);
    EXPECT_LT((r.trajectories.w[t] - w).norm(), 1e-12);
    x = params_.A * x + params_.B * u + params_.D * w;
  }
  EXPECT_LT((r.trajectories.x.back() - x).norm(), 1e-10);
  EXPECT_NEAR(r.cost_penalized, direct_penalized(r.trajectories), 1e-9);
}

TEST_F(RolloutFixture, DivergenceIsFlagged) {
  std::vector<PolicyStep> pol(8);
  for (auto& p : pol) {
    p.K = Matrix::Zero(2, 3);
    p.k = Vector::Constant(2, 1e12);
    p.H = Matrix::Zero(2, 3);
    p.h_i = Matrix::Zero(4, 2);
    p.h_bar = Vector::Zero(2);
  }
  const RolloutResult r = rollout(*model_, nominal_, pol, 1.0, adversary_, atoms_);
  EXPECT_TRUE(r.diverged);
  EXPECT_TRUE(std::isinf(r.cost_penalized));
}

TEST_F(RolloutFixture, LineSearchAcceptsFullNewtonStepOnLinearModel) {
  ExpansionOptions opts;
  opts.lambda = adversary_.lambda;
  const BackwardResult bw = backward_pass(*model_, nominal_, *ds_, opts, Regularization{});
  const double incumbent = evaluate_trajectories(*model_, nominal_, adversary_, atoms_).cost_penalized;
  const RolloutResult r = line_search(*model_, nominal_, incumbent, bw.policies,
                                      bw.along(atoms_), adversary_, atoms_, LineSearchConfig{});
  ASSERT_TRUE(r.accepted);
  EXPECT_EQ(r.alpha, 1.0);
}

TEST_F(RolloutFixture, ShortAtomSequenceRejected) {
  std::vector<PolicyStep> pol(8);
  EXPECT_THROW(rollout(*model_, nominal_, pol, 1.0, adversary_, std::vector<int>{0, 1}),
               InputError);
  LineSearchConfig bad;
  bad.backtrack = 1.5;
  EXPECT_THROW(line_search(*model_, nominal_, 0.0, pol, {}, adversary_, atoms_, bad), InputError);
}

TEST(Atoms, SequenceIsDeterministicAndInRange) {
  Rng a = make_rng(3, stream::kForward);
  Rng b = make_rng(3, stream::kForward);
  const auto s1 = draw_atom_sequence(500, 7, a);
  const auto s2 = draw_atom_sequence(500, 7, b);
  EXPECT_EQ(s1, s2);
  for (int i : s1) ASSERT_TRUE(i >= 0 && i < 7);
  EXPECT_THROW(draw_atom_sequence(5, 0, a), InputError);
}

TEST_F(RolloutFixture, PolicyRolloutUsesSuppliedDisturbance) {
  std::vector<PolicyStep> pol(8);
  for (auto& p : pol) p.K = Matrix::Zero(2, 3);
  auto same = [&](int t, const Vector&, const Vector&) { return nominal_.w[t]; };
  const RolloutResult r = policy_rollout(*model_, nominal_, pol, same);
  for (int t = 0; t <= 8; ++t) EXPECT_LT((r.trajectories.x[t] - nominal_.x[t]).norm(), 1e-13);
  EXPECT_EQ(r.cost_nominal, r.cost_penalized);
}

}  // namespace
}  // namespace drddp
