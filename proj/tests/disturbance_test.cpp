#include <cmath>
#include <fstream>
#include <random>

#include <gtest/gtest.h>

#include "drddp/disturbance.hpp"
#include "drddp/errors.hpp"
#include "test_util.hpp"

namespace drddp {
namespace {

TEST(TrueDistribution, UniformBoxStaysInBounds) {
  const auto d = TrueDistribution::uniform_box(Vector::Constant(2, -0.5), Vector::Constant(2, 1.5));
  Rng rng = make_rng(1, stream::kDataset);
  Vector sum = Vector::Zero(2);
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    const Vector s = d.sample(rng);
    ASSERT_TRUE((s.array() >= -0.5).all() && (s.array() <= 1.5).all());
    sum += s;
  }
  EXPECT_NEAR(sum(0) / n, 0.5, 0.02);
}

TEST(TrueDistribution, GaussianMomentsMatch) {
  Matrix cov(2, 2);
  cov << 2.0, 0.5, 0.5, 1.0;
  const auto d = TrueDistribution::gaussian((Vector(2) << 1.0, -1.0).finished(), cov);
  Rng rng = make_rng(2, stream::kDataset);
  const int n = 40000;
  Matrix s(n, 2);
  for (int i = 0; i < n; ++i) s.row(i) = d.sample(rng).transpose();
  const Vector mean = s.colwise().mean().transpose();
  const Matrix c = (s.rowwise() - mean.transpose()).transpose() * (s.rowwise() - mean.transpose()) / n;
  EXPECT_NEAR(mean(0), 1.0, 0.03);
  EXPECT_NEAR(c(0, 1), 0.5, 0.05);
  EXPECT_NEAR(c(0, 0), 2.0, 0.08);
}

TEST(TrueDistribution, SingularGaussianAllowed) {
  const auto d = TrueDistribution::gaussian(Vector::Zero(2), Matrix::Zero(2, 2));
  Rng rng(0);
  EXPECT_EQ(d.sample(rng), Vector::Zero(2));
}

TEST(TrueDistribution, RejectsBadParameters) {
  EXPECT_THROW(TrueDistribution::uniform_box(Vector::Ones(2), Vector::Zero(2)), ConfigError);
  Matrix asym(2, 2);
  asym << 1, 2, 0, 1;
  EXPECT_THROW(TrueDistribution::gaussian(Vector::Zero(2), asym), ConfigError);
  EXPECT_THROW(TrueDistribution::discrete(Matrix::Ones(3, 1), Vector::Ones(2)), ConfigError);
}

TEST(TrueDistribution, DiscreteDrawsOnlyAtoms) {
  Matrix atoms(2, 1);
  atoms << -1.0, 3.0;
  const auto d = TrueDistribution::discrete(atoms, (Vector(2) << 0.25, 0.75).finished());
  Rng rng(4);
  int high = 0;
  for (int i = 0; i < 4000; ++i) {
    const double v = d.sample(rng)(0);
    ASSERT_TRUE(v == -1.0 || v == 3.0);
    high += v == 3.0;
  }
  EXPECT_NEAR(high / 4000.0, 0.75, 0.03);
}

TEST(Dataset, MomentsMatchDirectComputation) {
  std::mt19937_64 rng(9);
  std::vector<Matrix> samples;
  for (int t = 0; t < 3; ++t) samples.push_back(testing::random_matrix(6, 2, rng));
  const DisturbanceDataset ds(samples);
  EXPECT_EQ(ds.horizon(), 3);
  EXPECT_EQ(ds.count(), 6);
  EXPECT_EQ(ds.dim(), 2);
  for (int t = 0; t < 3; ++t) {
    Vector mean = Vector::Zero(2);
    for (int i = 0; i < 6; ++i) mean += samples[t].row(i).transpose() / 6.0;
    Matrix cov = Matrix::Zero(2, 2);
    for (int i = 0; i < 6; ++i) {
      const Vector d = samples[t].row(i).transpose() - mean;
      cov += d * d.transpose() / 6.0;
    }
    EXPECT_LT((ds.mean(t) - mean).norm(), 1e-14);
    EXPECT_LT((ds.covariance(t) - cov).norm(), 1e-14);
    const auto [m2, c2] = empirical_moments(ds, t);
    EXPECT_LT((m2 - mean).norm(), 1e-14);
    EXPECT_LT((c2 - cov).norm(), 1e-14);
  }
}

TEST(Dataset, ConstantHasZeroCovariance) {
  const auto ds = DisturbanceDataset::constant(4, (Vector(2) << 0.3, -0.2).finished());
  EXPECT_EQ(ds.count(), 1);
  EXPECT_EQ(ds.covariance(2), Matrix::Zero(2, 2));
  EXPECT_EQ(ds.sample(3, 0)(0), 0.3);
}

TEST(Dataset, DrawIsDeterministicInSeed) {
  const auto d = TrueDistribution::uniform_box(Vector::Constant(2, -1), Vector::Constant(2, 1));
  const auto a = draw_dataset(d, 5, 4, 42);
  const auto b = draw_dataset(d, 5, 4, 42);
  const auto c = draw_dataset(d, 5, 4, 43);
  for (int t = 0; t < 5; ++t) EXPECT_EQ(a.samples(t), b.samples(t));
  EXPECT_NE(a.samples(0), c.samples(0));
}

TEST(Dataset, CsvRoundTripIsExact) {
  const auto d = TrueDistribution::gaussian(Vector::Zero(3), Matrix::Identity(3, 3) * 0.7);
  const auto ds = draw_dataset(d, 6, 5, 3);
  const auto dir = testing::temp_dir("dataset_csv");
  write_dataset_csv(ds, dir / "d.csv");
  const auto back = read_dataset_csv(dir / "d.csv");
  ASSERT_EQ(back.horizon(), 6);
  for (int t = 0; t < 6; ++t) EXPECT_EQ(back.samples(t), ds.samples(t));
  const std::string head = testing::read_file(dir / "d.csv").substr(0, 13);
  EXPECT_EQ(head, "t,i,w_1,w_2,w");
}

TEST(Dataset, MalformedCsvRejected) {
  const auto dir = testing::temp_dir("dataset_bad");
  std::ofstream(dir / "bad.csv") << "t,i,w_1\n0,0,abc\n";
  EXPECT_THROW(read_dataset_csv(dir / "bad.csv"), ConfigError);
  EXPECT_THROW(read_dataset_csv(dir / "missing.csv"), ConfigError);
}

TEST(Random, SubstreamsAreIndependentAndStable) {
  EXPECT_EQ(derive_seed(1, stream::kForward, 0), derive_seed(1, stream::kForward, 0));
  EXPECT_NE(derive_seed(1, stream::kForward, 0), derive_seed(1, stream::kForward, 1));
  EXPECT_NE(derive_seed(1, stream::kForward, 0), derive_seed(1, stream::kDataset, 0));
  EXPECT_NE(derive_seed(1, stream::kForward, 0), derive_seed(2, stream::kForward, 0));
}

}  // namespace
}  // namespace drddp
