#include "drddp/disturbance.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>

#include <fmt/format.h>

#include "drddp/errors.hpp"

namespace drddp {

TrueDistribution TrueDistribution::uniform_box(Vector lower, Vector upper) {
  if (lower.size() == 0 || lower.size() != upper.size()) {
    throw ConfigError("uniform-box bounds must be non-empty and of equal length");
  }
  if (!lower.allFinite() || !upper.allFinite() || (lower.array() > upper.array()).any()) {
    throw ConfigError("uniform-box requires finite bounds with lower <= upper");
  }
  TrueDistribution d;
  d.kind_ = Kind::kUniformBox;
  d.dim_ = static_cast<int>(lower.size());
  d.lower_ = std::move(lower);
  d.upper_ = std::move(upper);
  return d;
}

TrueDistribution TrueDistribution::gaussian(Vector mean, Matrix covariance) {
  const Eigen::Index n = mean.size();
  if (n == 0 || covariance.rows() != n || covariance.cols() != n) {
    throw ConfigError("gaussian covariance must be n x n with n = mean length > 0");
  }
  if (!mean.allFinite() || !covariance.allFinite()) {
    throw ConfigError("gaussian parameters must be finite");
  }
  if ((covariance - covariance.transpose()).cwiseAbs().maxCoeff() >
      1e-12 * (1.0 + covariance.cwiseAbs().maxCoeff())) {
    throw ConfigError("gaussian covariance must be symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Matrix> eig(covariance);
  const double scale = std::max(1.0, covariance.cwiseAbs().maxCoeff());
  if (eig.eigenvalues().minCoeff() < -1e-12 * scale) {
    throw ConfigError("gaussian covariance must be positive semidefinite");
  }
  TrueDistribution d;
  d.kind_ = Kind::kGaussian;
  d.dim_ = static_cast<int>(n);
  d.mean_ = std::move(mean);
  d.cov_ = std::move(covariance);
  d.factor_ = eig.eigenvectors() * eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
  return d;
}

TrueDistribution TrueDistribution::discrete(Matrix atoms, Vector weights) {
  if (atoms.rows() == 0 || atoms.cols() == 0 || atoms.rows() != weights.size()) {
    throw ConfigError("discrete distribution needs one weight per atom");
  }
  if ((weights.array() < 0.0).any() || !weights.allFinite() || !atoms.allFinite()) {
    throw ConfigError("discrete weights must be finite and nonnegative");
  }
  if (std::abs(weights.sum() - 1.0) > 1e-9) {
    throw ConfigError(fmt::format("discrete weights sum to {}, expected 1", weights.sum()));
  }
  TrueDistribution d;
  d.kind_ = Kind::kDiscrete;
  d.dim_ = static_cast<int>(atoms.cols());
  d.atoms_ = std::move(atoms);
  d.weights_ = std::move(weights);
  return d;
}

Vector TrueDistribution::sample(Rng& rng) const {
  Vector w(dim_);
  switch (kind_) {
    case Kind::kUniformBox: {
      for (int k = 0; k < dim_; ++k) {
        std::uniform_real_distribution<double> uni(lower_(k), upper_(k));
        w(k) = lower_(k) == upper_(k) ? lower_(k) : uni(rng);
      }
      break;
    }
    case Kind::kGaussian: {
      std::normal_distribution<double> normal(0.0, 1.0);
      Vector z(dim_);
      for (int k = 0; k < dim_; ++k) z(k) = normal(rng);
      w = mean_ + factor_ * z;
      break;
    }
    case Kind::kDiscrete: {
      std::discrete_distribution<int> pick(weights_.data(), weights_.data() + weights_.size());
      w = atoms_.row(pick(rng)).transpose();
      break;
    }
  }
  return w;
}

DisturbanceDataset::DisturbanceDataset(std::vector<Matrix> samples) : samples_(std::move(samples)) {
  if (samples_.empty()) throw InputError("dataset must cover at least one step");
  const Eigen::Index n = samples_.front().rows();
  const Eigen::Index nw = samples_.front().cols();
  if (n < 1 || nw < 1) throw InputError("dataset needs N >= 1 samples of positive dimension");
  mean_.reserve(samples_.size());
  cov_.reserve(samples_.size());
  for (std::size_t t = 0; t < samples_.size(); ++t) {
    const Matrix& s = samples_[t];
    if (s.rows() != n || s.cols() != nw) {
      throw InputError(fmt::format("dataset step {} is {}x{}, expected {}x{}", t, s.rows(),
                                   s.cols(), n, nw));
    }
    if (!s.allFinite()) throw InputError(fmt::format("dataset step {} has non-finite samples", t));
    Vector m = s.colwise().mean().transpose();
    const Matrix centered = s.rowwise() - m.transpose();
    Matrix c = centered.transpose() * centered / static_cast<double>(n);
    symmetrize(c);
    mean_.push_back(std::move(m));
    cov_.push_back(std::move(c));
  }
}

DisturbanceDataset DisturbanceDataset::constant(int horizon, const Vector& atom) {
  return DisturbanceDataset(std::vector<Matrix>(horizon, atom.transpose()));
}

DisturbanceDataset draw_dataset(const TrueDistribution& dist, int horizon, int count,
                                std::uint64_t seed) {
  if (count < 1) throw ConfigError("dataset size N must be >= 1");
  if (horizon < 1) throw ConfigError("dataset horizon must be >= 1");
  Rng rng(seed);
  std::vector<Matrix> samples(horizon, Matrix(count, dist.dim()));
  for (int t = 0; t < horizon; ++t) {
    for (int i = 0; i < count; ++i) samples[t].row(i) = dist.sample(rng).transpose();
  }
  return DisturbanceDataset(std::move(samples));
}

std::pair<Vector, Matrix> empirical_moments(const DisturbanceDataset& ds, int t) {
  if (t < 0 || t >= ds.horizon()) {
    throw InputError(fmt::format("step {} outside dataset horizon {}", t, ds.horizon()));
  }
  return {ds.mean(t), ds.covariance(t)};
}

void write_dataset_csv(const DisturbanceDataset& ds, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError(fmt::format("cannot write dataset file {}", path.string()));
  out << "t,i";
  for (int k = 0; k < ds.dim(); ++k) out << ",w_" << k + 1;
  out << '\n';
  for (int t = 0; t < ds.horizon(); ++t) {
    for (int i = 0; i < ds.count(); ++i) {
      out << t << ',' << i;
      for (int k = 0; k < ds.dim(); ++k) out << ',' << fmt::format("{}", ds.samples(t)(i, k));
      out << '\n';
    }
  }
}

DisturbanceDataset read_dataset_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(fmt::format("cannot read dataset file {}", path.string()));
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("dataset file is empty");
  int nw = 0;
  {
    std::stringstream header(line);
    std::string cell;
    int col = 0;
    while (std::getline(header, cell, ',')) ++col;
    nw = col - 2;
  }
  if (nw < 1) throw ConfigError("dataset header must be t,i,w_1..w_n");

  struct Row {
    int t, i;
    Vector w;
  };
  std::vector<Row> rows;
  int max_t = -1, max_i = -1;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (static_cast<int>(cells.size()) != nw + 2) {
      throw ConfigError(fmt::format("{}:{}: expected {} columns, got {}", path.string(), lineno,
                                    nw + 2, cells.size()));
    }
    Row r{0, 0, Vector(nw)};
    try {
      r.t = std::stoi(cells[0]);
      r.i = std::stoi(cells[1]);
      for (int k = 0; k < nw; ++k) r.w(k) = std::stod(cells[2 + k]);
    } catch (const std::exception&) {
      throw ConfigError(fmt::format("{}:{}: malformed number", path.string(), lineno));
    }
    if (r.t < 0 || r.i < 0) throw ConfigError(fmt::format("{}:{}: negative index", path.string(), lineno));
    max_t = std::max(max_t, r.t);
    max_i = std::max(max_i, r.i);
    rows.push_back(std::move(r));
  }
  const int horizon = max_t + 1;
  const int count = max_i + 1;
  if (static_cast<int>(rows.size()) != horizon * count) {
    throw ConfigError(fmt::format("{}: expected {} rows for T={}, N={}, found {}", path.string(),
                                  horizon * count, horizon, count, rows.size()));
  }
  std::vector<Matrix> samples(horizon, Matrix::Constant(count, nw, std::nan("")));
  for (const Row& r : rows) samples[r.t].row(r.i) = r.w.transpose();
  for (int t = 0; t < horizon; ++t) {
    if (!samples[t].allFinite()) {
      throw ConfigError(fmt::format("{}: missing or duplicate rows at t={}", path.string(), t));
    }
  }
  return DisturbanceDataset(std::move(samples));
}

}  // namespace drddp
