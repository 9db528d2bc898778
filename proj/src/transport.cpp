#include "drddp/transport.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <fmt/format.h>

#include "drddp/errors.hpp"

namespace drddp {

DiscreteDistribution DiscreteDistribution::uniform(Matrix atoms) {
  const Eigen::Index m = atoms.rows();
  if (m == 0) throw InputError("distribution needs at least one atom");
  return {std::move(atoms), Vector::Constant(m, 1.0 / static_cast<double>(m))};
}

void DiscreteDistribution::validate() const {
  if (atoms.rows() == 0 || atoms.rows() != weights.size()) {
    throw InputError("distribution needs one weight per atom");
  }
  if ((weights.array() < 0.0).any() || !weights.allFinite()) {
    throw InputError("distribution weights must be finite and nonnegative");
  }
  if (std::abs(weights.sum() - 1.0) > 1e-9) {
    throw InputError(fmt::format("distribution weights sum to {}", weights.sum()));
  }
  if (!atoms.allFinite()) throw InputError("distribution atoms must be finite");
}

void AmbiguityParams::validate() const {
  // theta = 0 is accepted so the bound degenerates to the penalized cost.
  if (!(theta >= 0.0) || !(lambda > 0.0) || horizon < 1) {
    throw InputError(fmt::format("invalid ambiguity parameters (theta={}, lambda={}, T={})",
                                 theta, lambda, horizon));
  }
}

Assignment solve_assignment(const Matrix& cost) {
  const int n = static_cast<int>(cost.rows());
  if (cost.cols() != n) throw InputError("assignment cost matrix must be square");
  if (n == 0) return {};
  const double inf = std::numeric_limits<double>::infinity();
  // 1-based arrays; column 0 is the virtual source.
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
  std::vector<int> p(n + 1, 0), way(n + 1, 0);
  std::vector<char> used(n + 1);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  Assignment out;
  out.col_of_row.assign(n, -1);
  for (int j = 1; j <= n; ++j) out.col_of_row[p[j] - 1] = j - 1;
  for (int i = 0; i < n; ++i) out.cost += cost(i, out.col_of_row[i]);
  return out;
}

namespace {

struct Cell {
  int row;
  int col;
};

}  // namespace

TransportPlan solve_transport(const Vector& supply, const Vector& demand, const Matrix& cost) {
  const int m = static_cast<int>(supply.size());
  const int n = static_cast<int>(demand.size());
  if (m == 0 || n == 0 || cost.rows() != m || cost.cols() != n) {
    throw InputError("transport problem shapes do not match");
  }
  Vector a = supply;
  Vector b = demand * (supply.sum() / demand.sum());

  TransportPlan plan;
  plan.flow = Matrix::Zero(m, n);

  // Northwest corner start; ties advance the row so the basis keeps m + n - 1
  // cells (degenerate zeros included).
  std::vector<Cell> basis;
  basis.reserve(m + n - 1);
  {
    int i = 0, j = 0;
    while (true) {
      const double x = std::max(0.0, std::min(a(i), b(j)));
      plan.flow(i, j) = x;
      a(i) -= x;
      b(j) -= x;
      basis.push_back({i, j});
      if (i == m - 1 && j == n - 1) break;
      if (j == n - 1 || (i < m - 1 && a(i) <= b(j))) {
        ++i;
      } else {
        ++j;
      }
    }
  }

  const double scale = std::max(1.0, cost.cwiseAbs().maxCoeff());
  const double tol = 1e-12 * scale;
  const int max_pivots = 50 * (m + n) * std::max(m, n) + 100;

  // Tree bookkeeping: node r in [0, m) is a row, node m + c a column.
  std::vector<std::vector<int>> adj(m + n);
  std::vector<double> pot(m + n);
  std::vector<int> parent_edge(m + n);
  std::vector<int> order;
  order.reserve(m + n);

  auto build_tree = [&](int root) {
    for (auto& v : adj) v.clear();
    for (int e = 0; e < static_cast<int>(basis.size()); ++e) {
      adj[basis[e].row].push_back(e);
      adj[m + basis[e].col].push_back(e);
    }
    std::fill(parent_edge.begin(), parent_edge.end(), -2);
    order.clear();
    parent_edge[root] = -1;
    order.push_back(root);
    for (std::size_t k = 0; k < order.size(); ++k) {
      const int node = order[k];
      for (int e : adj[node]) {
        const int other = node < m ? m + basis[e].col : basis[e].row;
        if (parent_edge[other] != -2) continue;
        parent_edge[other] = e;
        order.push_back(other);
      }
    }
  };

  for (; plan.pivots < max_pivots; ++plan.pivots) {
    build_tree(0);
    if (static_cast<int>(order.size()) != m + n) {
      throw NumericalFailure("transport basis lost connectivity", plan.pivots, -1);
    }
    pot[0] = 0.0;
    for (std::size_t k = 1; k < order.size(); ++k) {
      const int node = order[k];
      const Cell& c = basis[parent_edge[node]];
      // u_row + v_col = cost(row, col)
      if (node < m) {
        pot[node] = cost(c.row, c.col) - pot[m + c.col];
      } else {
        pot[node] = cost(c.row, c.col) - pot[c.row];
      }
    }

    double best = -tol;
    int enter_i = -1, enter_j = -1;
    for (int i = 0; i < m; ++i) {
      for (int j = 0; j < n; ++j) {
        const double reduced = cost(i, j) - pot[i] - pot[m + j];
        if (reduced < best) {
          best = reduced;
          enter_i = i;
          enter_j = j;
        }
      }
    }
    if (enter_i < 0) break;

    // Cycle = entering cell + tree path from column enter_j back to row enter_i.
    build_tree(enter_i);
    std::vector<int> path;  // basis edges, starting next to column enter_j
    for (int node = m + enter_j; node != enter_i;) {
      const int e = parent_edge[node];
      path.push_back(e);
      node = node < m ? m + basis[e].col : basis[e].row;
    }
    double theta = std::numeric_limits<double>::infinity();
    int leave = -1;
    for (std::size_t k = 0; k < path.size(); k += 2) {
      const Cell& c = basis[path[k]];
      if (plan.flow(c.row, c.col) < theta) {
        theta = plan.flow(c.row, c.col);
        leave = path[k];
      }
    }
    for (std::size_t k = 0; k < path.size(); ++k) {
      const Cell& c = basis[path[k]];
      plan.flow(c.row, c.col) += (k % 2 == 0) ? -theta : theta;
    }
    plan.flow(enter_i, enter_j) += theta;
    const Cell& gone = basis[leave];
    plan.flow(gone.row, gone.col) = 0.0;
    basis[leave] = {enter_i, enter_j};
  }
  if (plan.pivots >= max_pivots) {
    throw NumericalFailure("transport simplex hit its pivot limit", plan.pivots, -1);
  }
  plan.flow = plan.flow.cwiseMax(0.0);
  plan.cost = plan.flow.cwiseProduct(cost).sum();
  return plan;
}

Matrix squared_distances(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) {
    throw InputError(fmt::format("atom dimensions differ ({} vs {})", a.cols(), b.cols()));
  }
  Matrix d(a.rows(), b.rows());
  for (Eigen::Index j = 0; j < b.rows(); ++j) {
    for (Eigen::Index i = 0; i < a.rows(); ++i) d(i, j) = (a.row(i) - b.row(j)).squaredNorm();
  }
  return d;
}

namespace {

bool is_uniform(const Vector& w) {
  const double target = 1.0 / static_cast<double>(w.size());
  return ((w.array() - target).abs() <= 1e-12).all();
}

}  // namespace

double w2_squared(const DiscreteDistribution& p, const DiscreteDistribution& q, W2Method method) {
  p.validate();
  q.validate();
  const Matrix c = squared_distances(p.atoms, q.atoms);
  const bool assignable = p.size() == q.size() && is_uniform(p.weights) && is_uniform(q.weights);
  if (method == W2Method::kAssignment && !assignable) {
    throw InputError("assignment route needs equal-size uniform supports");
  }
  if (method == W2Method::kAssignment || (method == W2Method::kAuto && assignable)) {
    return solve_assignment(c).cost / static_cast<double>(p.size());
  }
  return std::max(0.0, solve_transport(p.weights, q.weights, c).cost);
}

double w2_distance(const DiscreteDistribution& p, const DiscreteDistribution& q, W2Method method) {
  return std::sqrt(w2_squared(p, q, method));
}

double guaranteed_bound(const AmbiguityParams& params, double j_lambda_sup_est) {
  params.validate();
  return params.lambda * params.horizon * params.theta * params.theta + j_lambda_sup_est;
}

}  // namespace drddp
