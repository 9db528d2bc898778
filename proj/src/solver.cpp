#include "drddp/solver.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "drddp/errors.hpp"
#include "drddp/parallel.hpp"
#include "drddp/random.hpp"
#include "drddp/transport.hpp"

namespace drddp {

namespace {

constexpr double kConvergenceMu = 1e-5;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

double max_feedforward(const std::vector<PolicyStep>& policies) {
  double m = 0.0;
  for (const PolicyStep& p : policies) {
    if (p.k.size() > 0) m = std::max(m, p.k.cwiseAbs().maxCoeff());
  }
  return m;
}

BackwardResult regularized_backward(const OcpModel& model, const NominalTrajectories& nominal,
                                    const DisturbanceDataset& ds, const SolverConfig& config,
                                    Regularization& reg, int iteration) {
  ExpansionOptions opts;
  opts.lambda = config.lambda;
  opts.gauss_newton = config.gauss_newton;
  opts.adversarial = config.adversarial;
  opts.regularize_adversary = config.regularize_adversary;
  while (true) {
    opts.adversary_shift = config.regularize_adversary ? reg.mu : 0.0;
    try {
      return backward_pass(model, nominal, ds, opts, reg);
    } catch (const CurvatureError&) {
      throw;
    } catch (const BackwardPassError& err) {
      if (reg.saturated()) {
        throw NumericalFailure(
            fmt::format("backward pass failed at iteration {} (t={}) with mu at its cap: {}",
                        iteration, err.timestep(), err.what()),
            iteration, err.timestep());
      }
      reg.increase();
      spdlog::debug("iteration {}: backward pass failed at t={} ({}), mu -> {:g}", iteration,
                    err.timestep(), err.what(), reg.mu);
    }
  }
}

std::pair<double, double> mean_and_std_error(const std::vector<double>& v) {
  const double n = static_cast<double>(v.size());
  double mean = 0.0;
  for (double c : v) mean += c;
  mean /= n;
  double ss = 0.0;
  for (double c : v) ss += (c - mean) * (c - mean);
  const double std = v.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
  return {mean, std / std::sqrt(n)};
}

}  // namespace

void SolverConfig::validate() const {
  if (!(lambda > 0.0)) throw ConfigError(fmt::format("lambda must be positive, got {}", lambda));
  if (!(theta >= 0.0)) throw ConfigError(fmt::format("theta must be nonnegative, got {}", theta));
  if (max_iters < 1) throw ConfigError("max_iters must be >= 1");
  if (!(cost_tolerance > 0.0) || !(gradient_tolerance > 0.0)) {
    throw ConfigError("convergence tolerances must be positive");
  }
  if (!(regularization.mu >= 0.0) || !(regularization.increase_factor > 1.0) ||
      !(regularization.decrease_factor > 1.0)) {
    throw ConfigError("invalid regularization schedule");
  }
  if (!(line_search.backtrack > 0.0 && line_search.backtrack < 1.0) ||
      !(line_search.alpha0 > 0.0 && line_search.alpha0 <= 1.0) || line_search.max_trials < 1) {
    throw ConfigError("invalid line-search settings");
  }
}

double Solution::final_cost_penalized() const {
  return history.empty() ? std::numeric_limits<double>::quiet_NaN()
                         : history.back().cost_penalized;
}

double Solution::final_cost_nominal() const {
  return history.empty() ? std::numeric_limits<double>::quiet_NaN() : history.back().cost_nominal;
}

double Solution::mean_iteration_time() const {
  double sum = 0.0;
  int n = 0;
  for (const IterationRecord& r : history) {
    if (r.iteration == 0) continue;
    sum += r.wall_time;
    ++n;
  }
  return n == 0 ? 0.0 : sum / n;
}

NominalTrajectories simulate(const OcpModel& model, const Vector& x0, const VectorList& controls,
                             const VectorList& disturbances) {
  const Dims d = model.dims();
  if (x0.size() != d.nx) throw InputError("initial state has wrong dimension");
  if (static_cast<int>(controls.size()) != d.horizon ||
      static_cast<int>(disturbances.size()) != d.horizon) {
    throw InputError("control/disturbance sequences must have length T");
  }
  const Vector lower = model.control_lower();
  const Vector upper = model.control_upper();
  NominalTrajectories tr;
  tr.x.reserve(d.horizon + 1);
  tr.x.push_back(x0);
  for (int t = 0; t < d.horizon; ++t) {
    if (controls[t].size() != d.nu || disturbances[t].size() != d.nw) {
      throw InputError(fmt::format("control or disturbance at t={} has wrong dimension", t));
    }
    tr.u.push_back(controls[t].cwiseMax(lower).cwiseMin(upper));
    tr.w.push_back(disturbances[t]);
    tr.x.push_back(model.dynamics(tr.x[t], tr.u[t], tr.w[t], t));
  }
  return tr;
}

Solution solve(const OcpModel& model, const Vector& x0, const DisturbanceDataset& ds,
               const SolverConfig& config) {
  const auto start = Clock::now();
  config.validate();
  const Dims d = model.dims();
  d.validate();
  if (ds.horizon() < d.horizon || ds.dim() != d.nw) {
    throw InputError(fmt::format("dataset is {} steps x {} dims, model needs {} x {}",
                                 ds.horizon(), ds.dim(), d.horizon, d.nw));
  }

  VectorList controls = config.initial_controls;
  if (controls.empty()) controls.assign(d.horizon, Vector::Zero(d.nu));
  VectorList disturbances(d.horizon);
  for (int t = 0; t < d.horizon; ++t) {
    disturbances[t] = config.adversarial ? ds.mean(t) : Vector::Zero(d.nw);
  }

  Solution sol;
  sol.lambda = config.lambda;
  sol.adversarial = config.adversarial;
  sol.nominal = simulate(model, x0, controls, disturbances);

  Rng forward_rng = make_rng(config.seed, stream::kForward);
  sol.atoms = draw_atom_sequence(d.horizon, config.adversarial ? ds.count() : 1, forward_rng);

  AdversarySpec adversary;
  adversary.dataset = &ds;
  adversary.lambda = config.lambda;
  adversary.adversarial = config.adversarial;

  RolloutResult incumbent = evaluate_trajectories(model, sol.nominal, adversary, sol.atoms);
  if (!std::isfinite(incumbent.cost_penalized)) {
    throw NumericalFailure("initial nominal trajectory has non-finite cost", 0, -1);
  }
  sol.history.push_back({0, incumbent.cost_penalized, incumbent.cost_nominal, 0.0, 0.0, 0.0,
                         true, 0.0});

  Regularization reg = config.regularization;
  for (int iter = 1; iter <= config.max_iters; ++iter) {
    const auto iter_start = Clock::now();
    BackwardResult bw = regularized_backward(model, sol.nominal, ds, config, reg, iter);
    IterationRecord rec;
    rec.iteration = iter;
    rec.mu = reg.mu;
    rec.max_feedforward = max_feedforward(bw.policies);
    sol.iterations = iter;

    // A heavily regularized pass shrinks k without the problem being solved.
    if (rec.max_feedforward < config.gradient_tolerance && reg.mu < kConvergenceMu) {
      rec.cost_penalized = incumbent.cost_penalized;
      rec.cost_nominal = incumbent.cost_nominal;
      rec.accepted = true;
      rec.wall_time = seconds_since(iter_start);
      sol.history.push_back(rec);
      sol.policies = std::move(bw.policies);
      sol.value0 = bw.value0.v0;
      sol.converged = true;
      break;
    }

    RolloutResult trial = line_search(model, sol.nominal, incumbent.cost_penalized, bw.policies,
                                      bw.along(sol.atoms), adversary, sol.atoms,
                                      config.line_search);
    rec.alpha = trial.alpha;
    rec.accepted = trial.accepted;
    if (trial.accepted) {
      const double change = incumbent.cost_penalized - trial.cost_penalized;
      incumbent = std::move(trial);
      sol.nominal = incumbent.trajectories;
      reg.decrease();
      rec.cost_penalized = incumbent.cost_penalized;
      rec.cost_nominal = incumbent.cost_nominal;
      rec.wall_time = seconds_since(iter_start);
      sol.history.push_back(rec);
      spdlog::debug("iter {:3d}  J_lambda {:.6e}  J {:.6e}  alpha {:.3g}  mu {:.2e}", iter,
                    rec.cost_penalized, rec.cost_nominal, rec.alpha, rec.mu);
      if (std::abs(change) / std::max(1.0, std::abs(incumbent.cost_penalized)) <
          config.cost_tolerance) {
        sol.converged = true;
        break;
      }
    } else {
      rec.cost_penalized = incumbent.cost_penalized;
      rec.cost_nominal = incumbent.cost_nominal;
      rec.wall_time = seconds_since(iter_start);
      sol.history.push_back(rec);
      spdlog::debug("iter {:3d}  line search failed, mu {:.2e}", iter, reg.mu);
      if (reg.saturated()) break;
      reg.increase();
    }
  }

  if (sol.policies.empty()) {
    // Policies must match the final nominal, so run one more backward pass,
    // restarting mu from its initial value to avoid damped gains.
    Regularization final_reg = config.regularization;
    BackwardResult bw =
        regularized_backward(model, sol.nominal, ds, config, final_reg, sol.iterations + 1);
    sol.policies = std::move(bw.policies);
    sol.value0 = bw.value0.v0;
  }
  sol.total_time = seconds_since(start);
  spdlog::info("{}: {} after {} iterations, J_lambda = {:.6e}", model.name(),
               sol.converged ? "converged" : "stopped", sol.iterations,
               sol.final_cost_penalized());
  return sol;
}

SupEstimate estimate_sup_j_lambda(const OcpModel& model, const Solution& solution,
                                  const DisturbanceDataset& ds, double lambda, int runs,
                                  std::uint64_t seed) {
  if (runs < 1) throw InputError("need at least one Monte Carlo run");
  const Dims d = model.dims();
  std::vector<Matrix> played(d.horizon, Matrix(runs, d.nw));
  std::vector<double> costs(runs);
  for (int r = 0; r < runs; ++r) {
    Rng rng = make_rng(seed, stream::kWorstCase, r);
    const std::vector<int> atoms = draw_atom_sequence(d.horizon, ds.count(), rng);
    auto adversary = [&](int t, const Vector&, const Vector& dx) -> Vector {
      const PolicyStep& p = solution.policies[t];
      return solution.nominal.w[t] + p.h_i.row(atoms[t]).transpose() + p.H * dx;
    };
    const RolloutResult res = policy_rollout(model, solution.nominal, solution.policies, adversary);
    if (res.diverged) {
      throw NumericalFailure(fmt::format("worst-case rollout {} diverged", r), r, -1);
    }
    costs[r] = res.cost_nominal;
    for (int t = 0; t < d.horizon; ++t) played[t].row(r) = res.trajectories.w[t].transpose();
  }
  SupEstimate est;
  est.runs = runs;
  std::tie(est.mean_cost, est.std_error) = mean_and_std_error(costs);
  for (int t = 0; t < d.horizon; ++t) {
    est.transport += lambda * w2_squared(DiscreteDistribution::uniform(played[t]),
                                         DiscreteDistribution::uniform(ds.samples(t)));
  }
  est.j_lambda = est.mean_cost - est.transport;
  return est;
}

ProjectedEstimate estimate_projected_worst_case(const OcpModel& model, const Solution& solution,
                                                const DisturbanceDataset& ds, double theta,
                                                int runs, std::uint64_t seed) {
  if (runs < 1) throw InputError("need at least one Monte Carlo run");
  if (!(theta >= 0.0)) throw InputError("theta must be nonnegative");
  const Dims d = model.dims();
  const int n = ds.count();

  ProjectedEstimate est;
  std::vector<Matrix> atoms(d.horizon);
  for (int t = 0; t < d.horizon; ++t) {
    const PolicyStep& p = solution.policies[t];
    Matrix shifted = p.h_i;
    shifted.rowwise() += solution.nominal.w[t].transpose();
    const Matrix& base = ds.samples(t);
    const Matrix disp = shifted - base;
    const double rms = std::sqrt(disp.rowwise().squaredNorm().mean());
    const double scale = rms > theta ? theta / rms : 1.0;
    atoms[t] = base + scale * disp;
    est.max_w2 = std::max(est.max_w2, w2_distance(DiscreteDistribution::uniform(atoms[t]),
                                                  DiscreteDistribution::uniform(base)));
  }

  std::vector<double> costs(runs);
  for (int r = 0; r < runs; ++r) {
    Rng rng = make_rng(seed, stream::kWorstCase, r);
    const std::vector<int> pick = draw_atom_sequence(d.horizon, n, rng);
    auto adversary = [&](int t, const Vector&, const Vector&) -> Vector {
      return atoms[t].row(pick[t]).transpose();
    };
    const RolloutResult res = policy_rollout(model, solution.nominal, solution.policies, adversary);
    if (res.diverged) {
      throw NumericalFailure(fmt::format("projected worst-case rollout {} diverged", r), r, -1);
    }
    costs[r] = res.cost_nominal;
  }
  est.runs = runs;
  std::tie(est.mean_cost, est.std_error) = mean_and_std_error(costs);
  return est;
}

TuneResult tune_lambda(const OcpModel& model, const Vector& x0, const DisturbanceDataset& ds,
                       double theta, const std::vector<double>& grid, int eval_runs,
                       const SolverConfig& base, int threads) {
  if (grid.empty()) throw ConfigError("lambda grid is empty");
  for (double l : grid) {
    if (!(l > 0.0)) throw ConfigError(fmt::format("lambda grid entries must be positive ({})", l));
  }
  if (!(theta >= 0.0)) throw ConfigError("theta must be nonnegative");
  const int horizon = model.dims().horizon;

  TuneResult out;
  out.rows.resize(grid.size());
  parallel_for(static_cast<int>(grid.size()), threads, [&](int idx) {
    TuneRow& row = out.rows[idx];
    row.lambda = grid[idx];
    row.penalty_term = row.lambda * horizon * theta * theta;
    SolverConfig cfg = base;
    cfg.lambda = row.lambda;
    cfg.theta = theta;
    cfg.seed = derive_seed(base.seed, stream::kTune, idx);
    try {
      const Solution sol = solve(model, x0, ds, cfg);
      row.converged = sol.converged;
      const SupEstimate est = estimate_sup_j_lambda(
          model, sol, ds, row.lambda, eval_runs, derive_seed(base.seed, stream::kWorstCase, idx));
      row.sup_j_lambda = est.j_lambda;
      row.bound = row.penalty_term + row.sup_j_lambda;
    } catch (const std::exception& err) {
      spdlog::warn("lambda = {:g} failed: {}", row.lambda, err.what());
      row.failed = true;
      row.sup_j_lambda = row.bound = std::numeric_limits<double>::quiet_NaN();
    }
  });

  for (int i = 0; i < static_cast<int>(out.rows.size()); ++i) {
    const TuneRow& row = out.rows[i];
    if (row.failed || !row.converged) continue;
    if (out.best_index < 0) {
      out.best_index = i;
      continue;
    }
    const TuneRow& best = out.rows[out.best_index];
    if (row.bound < best.bound || (row.bound == best.bound && row.lambda < best.lambda)) {
      out.best_index = i;
    }
  }
  if (out.best_index < 0) throw NumericalFailure("no lambda candidate converged", -1, -1);
  out.lambda_star = out.rows[out.best_index].lambda;
  return out;
}

}  // namespace drddp
