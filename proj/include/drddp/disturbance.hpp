#pragma once

#include <cstdint>
#include <filesystem>
#include <utility>
#include <vector>

#include "drddp/random.hpp"
#include "drddp/types.hpp"

namespace drddp {

// Ground-truth disturbance law used to draw datasets and out-of-sample noise.
class TrueDistribution {
 public:
  enum class Kind { kUniformBox, kGaussian, kDiscrete };

  // Empty placeholder; sample() is only valid on factory-built instances.
  TrueDistribution() = default;

  static TrueDistribution uniform_box(Vector lower, Vector upper);
  // `covariance` must be symmetric PSD; a singular covariance is allowed.
  static TrueDistribution gaussian(Vector mean, Matrix covariance);
  // `atoms` holds one atom per row.
  static TrueDistribution discrete(Matrix atoms, Vector weights);

  Kind kind() const { return kind_; }
  int dim() const { return dim_; }
  Vector sample(Rng& rng) const;

  const Vector& lower() const { return lower_; }
  const Vector& upper() const { return upper_; }
  const Vector& mean() const { return mean_; }
  const Matrix& covariance() const { return cov_; }
  const Matrix& atoms() const { return atoms_; }
  const Vector& weights() const { return weights_; }

 private:
  Kind kind_ = Kind::kDiscrete;
  int dim_ = 0;
  Vector lower_, upper_;
  Vector mean_;
  Matrix cov_;
  Matrix factor_;  // cov = factor * factor'
  Matrix atoms_;
  Vector weights_;
};

/**
 * Per-step empirical samples  D_t = {w_t^(1), ..., w_t^(N)}  with cached
 * moments. The covariance uses the population divisor N, matching the
 * expectation under the uniform empirical measure.
 */
class DisturbanceDataset {
 public:
  // samples[t] is an N x n_w matrix, one sample per row.
  explicit DisturbanceDataset(std::vector<Matrix> samples);

  // T steps of a single atom (N = 1).
  static DisturbanceDataset constant(int horizon, const Vector& atom);

  int horizon() const { return static_cast<int>(samples_.size()); }
  int count() const { return static_cast<int>(samples_.front().rows()); }
  int dim() const { return static_cast<int>(samples_.front().cols()); }

  const Matrix& samples(int t) const { return samples_.at(t); }
  Vector sample(int t, int i) const { return samples_.at(t).row(i).transpose(); }
  const Vector& mean(int t) const { return mean_.at(t); }
  const Matrix& covariance(int t) const { return cov_.at(t); }

 private:
  std::vector<Matrix> samples_;
  VectorList mean_;
  MatrixList cov_;
};

DisturbanceDataset draw_dataset(const TrueDistribution& dist, int horizon, int count,
                                std::uint64_t seed);

// Mean and population covariance of the samples at step t.
std::pair<Vector, Matrix> empirical_moments(const DisturbanceDataset& ds, int t);

// CSV with header  t,i,w_1..w_nw ; values written in shortest round-trip form.
void write_dataset_csv(const DisturbanceDataset& ds, const std::filesystem::path& path);
DisturbanceDataset read_dataset_csv(const std::filesystem::path& path);

}  // namespace drddp
