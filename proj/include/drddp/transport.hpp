#pragma once

#include <vector>

#include "drddp/types.hpp"

namespace drddp {

struct DiscreteDistribution {
  Matrix atoms;  // M x n, one atom per row
  Vector weights;

  static DiscreteDistribution uniform(Matrix atoms);

  // Weights nonnegative and summing to 1 within 1e-9.
  void validate() const;
  int size() const { return static_cast<int>(atoms.rows()); }
};

struct AmbiguityParams {
  double theta = 0.1;   // Wasserstein radius
  double lambda = 1.0;  // penalty per squared distance
  int horizon = 1;

  void validate() const;
};

struct Assignment {
  std::vector<int> col_of_row;
  double cost = 0.0;
};

// Minimum-cost perfect matching on a square cost matrix (shortest augmenting
// paths with potentials, O(n^3)).
Assignment solve_assignment(const Matrix& cost);

struct TransportPlan {
  Matrix flow;  // supply.size() x demand.size()
  double cost = 0.0;
  int pivots = 0;
};

// Transportation-problem simplex (northwest-corner start, u-v pricing).
// `demand` is rescaled to the supply total before solving.
TransportPlan solve_transport(const Vector& supply, const Vector& demand, const Matrix& cost);

Matrix squared_distances(const Matrix& a, const Matrix& b);

enum class W2Method { kAuto, kAssignment, kLinearProgram };

// Squared order-2 Wasserstein distance. kAuto uses the assignment solver for
// equal-size uniform supports and the transport LP otherwise.
double w2_squared(const DiscreteDistribution& p, const DiscreteDistribution& q,
                  W2Method method = W2Method::kAuto);
double w2_distance(const DiscreteDistribution& p, const DiscreteDistribution& q,
                   W2Method method = W2Method::kAuto);

// lambda * T * theta^2 + estimate of sup J_lambda.
double guaranteed_bound(const AmbiguityParams& params, double j_lambda_sup_est);

}  // namespace drddp
