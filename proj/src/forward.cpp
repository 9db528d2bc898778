#include "drddp/forward.hpp"

#include <cmath>
#include <limits>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "drddp/errors.hpp"

namespace drddp {

namespace {

constexpr double kDivergenceLimit = 1e8;

bool diverged_state(const Vector& x) {
  return !x.allFinite() || x.cwiseAbs().maxCoeff() > kDivergenceLimit;
}

void check_adversary(const AdversarySpec& adv, int horizon) {
  if (!adv.adversarial) return;
  if (adv.dataset == nullptr) throw InputError("adversarial rollout needs a dataset");
  if (adv.dataset->horizon() < horizon) {
    throw InputError(fmt::format("dataset covers {} steps, horizon is {}",
                                 adv.dataset->horizon(), horizon));
  }
}

double step_penalty(const AdversarySpec& adv, const Vector& w, int t, int atom) {
  if (!adv.adversarial) return 0.0;
  return adv.lambda * (w - adv.dataset->samples(t).row(atom).transpose()).squaredNorm();
}

}  // namespace

std::vector<int> draw_atom_sequence(int horizon, int count, Rng& rng) {
  if (count < 1) throw InputError("atom count must be positive");
  std::uniform_int_distribution<int> pick(0, count - 1);
  std::vector<int> atoms(horizon);
  for (int& a : atoms) a = pick(rng);
  return atoms;
}

RolloutResult rollout(const OcpModel& model, const NominalTrajectories& nominal,
                      const std::vector<PolicyStep>& policies, double alpha,
                      const AdversarySpec& adversary, const std::vector<int>& atoms) {
  return rollout(model, nominal, policies, alpha, alpha, adversary, atoms);
}

RolloutResult rollout(const OcpModel& model, const NominalTrajectories& nominal,
                      const std::vector<PolicyStep>& policies, double alpha_u, double alpha_w,
                      const AdversarySpec& adversary, const std::vector<int>& atoms) {
  const Dims d = model.dims();
  const int T = d.horizon;
  nominal.validate(T, d.nx, d.nu, d.nw);
  if (static_cast<int>(policies.size()) != T) {
    throw InputError(fmt::format("expected {} policy steps, got {}", T, policies.size()));
  }
  check_adversary(adversary, T);
  if (adversary.adversarial && static_cast<int>(atoms.size()) < T) {
    throw InputError("atom sequence shorter than the horizon");
  }
  const Vector lower = model.control_lower();
  const Vector upper = model.control_upper();

  RolloutResult r;
  r.alpha = alpha_u;
  NominalTrajectories& tr = r.trajectories;
  tr.x.resize(T + 1);
  tr.u.resize(T);
  tr.w.resize(T);
  tr.x[0] = nominal.x[0];

  double running = 0.0;
  double penalty = 0.0;
  for (int t = 0; t < T; ++t) {
    const PolicyStep& p = policies[t];
    const Vector dx = tr.x[t] - nominal.x[t];
    tr.u[t] = (nominal.u[t] + alpha_u * p.k + p.K * dx).cwiseMax(lower).cwiseMin(upper);
    if (adversary.adversarial) {
      const int i = atoms[t];
      tr.w[t] = nominal.w[t] + alpha_w * p.h_i.row(i).transpose() + p.H * dx;
      penalty += step_penalty(adversary, tr.w[t], t, i);
    } else {
      tr.w[t] = nominal.w[t];
    }
    running += model.running_cost(tr.x[t], tr.u[t], t);
    tr.x[t + 1] = model.dynamics(tr.x[t], tr.u[t], tr.w[t], t);
    if (diverged_state(tr.x[t + 1])) {
      r.diverged = true;
      r.cost_nominal = r.cost_penalized = std::numeric_limits<double>::infinity();
      return r;
    }
  }
  r.cost_nominal = running + model.terminal_cost(tr.x[T]);
  r.cost_penalized = r.cost_nominal - penalty;
  if (!std::isfinite(r.cost_penalized)) {
    r.diverged = true;
    r.cost_nominal = r.cost_penalized = std::numeric_limits<double>::infinity();
  }
  return r;
}

RolloutResult rollout(const OcpModel& model, const NominalTrajectories& nominal,
                      const std::vector<PolicyStep>& policies, double alpha,
                      const AdversarySpec& adversary, Rng& rng) {
  const int count = adversary.adversarial && adversary.dataset ? adversary.dataset->count() : 1;
  const std::vector<int> atoms = draw_atom_sequence(model.dims().horizon, count, rng);
  return rollout(model, nominal, policies, alpha, adversary, atoms);
}

RolloutResult evaluate_trajectories(const OcpModel& model, NominalTrajectories traj,
                                    const AdversarySpec& adversary,
                                    const std::vector<int>& atoms) {
  const Dims d = model.dims();
  traj.validate(d.horizon, d.nx, d.nu, d.nw);
  check_adversary(adversary, d.horizon);
  RolloutResult r;
  double running = 0.0;
  double penalty = 0.0;
  for (int t = 0; t < d.horizon; ++t) {
    running += model.running_cost(traj.x[t], traj.u[t], t);
    if (adversary.adversarial) penalty += step_penalty(adversary, traj.w[t], t, atoms.at(t));
  }
  r.cost_nominal = running + model.terminal_cost(traj.x[d.horizon]);
  r.cost_penalized = r.cost_nominal - penalty;
  r.trajectories = std::move(traj);
  r.accepted = true;
  return r;
}

RolloutResult policy_rollout(const OcpModel& model, const NominalTrajectories& nominal,
                             const std::vector<PolicyStep>& policies,
                             const DisturbanceFn& disturbance) {
  const Dims d = model.dims();
  const int T = d.horizon;
  nominal.validate(T, d.nx, d.nu, d.nw);
  if (static_cast<int>(policies.size()) != T) {
    throw InputError(fmt::format("expected {} policy steps, got {}", T, policies.size()));
  }
  const Vector lower = model.control_lower();
  const Vector upper = model.control_upper();

  RolloutResult r;
  NominalTrajectories& tr = r.trajectories;
  tr.x.resize(T + 1);
  tr.u.resize(T);
  tr.w.resize(T);
  tr.x[0] = nominal.x[0];
  double running = 0.0;
  for (int t = 0; t < T; ++t) {
    const Vector dx = tr.x[t] - nominal.x[t];
    tr.u[t] = (nominal.u[t] + policies[t].K * dx).cwiseMax(lower).cwiseMin(upper);
    tr.w[t] = disturbance(t, tr.x[t], dx);
    running += model.running_cost(tr.x[t], tr.u[t], t);
    tr.x[t + 1] = model.dynamics(tr.x[t], tr.u[t], tr.w[t], t);
    if (diverged_state(tr.x[t + 1])) {
      r.diverged = true;
      r.cost_nominal = r.cost_penalized = std::numeric_limits<double>::infinity();
      return r;
    }
  }
  r.cost_nominal = r.cost_penalized = running + model.terminal_cost(tr.x[T]);
  r.diverged = !std::isfinite(r.cost_nominal);
  r.accepted = !r.diverged;
  return r;
}

RolloutResult line_search(const OcpModel& model, const NominalTrajectories& nominal,
                          double incumbent_cost, const std::vector<PolicyStep>& policies,
                          const ImprovementModel& model_change, const AdversarySpec& adversary,
                          const std::vector<int>& atoms, const LineSearchConfig& config) {
  if (!(config.alpha0 > 0.0 && config.alpha0 <= 1.0) || !(config.backtrack > 0.0) ||
      !(config.backtrack < 1.0) || config.max_trials < 1) {
    throw InputError("invalid line-search configuration");
  }
  RolloutResult best;
  best.cost_penalized = std::numeric_limits<double>::infinity();
  best.diverged = true;
  double alpha = config.alpha0;
  for (int trial = 0; trial < config.max_trials; ++trial, alpha *= config.backtrack) {
    RolloutResult r = rollout(model, nominal, policies, alpha, adversary, atoms);
    if (r.diverged) continue;
    // The disturbance player's move alone separates the two shares.
    double adv_actual = 0.0;
    if (adversary.adversarial) {
      const RolloutResult b = rollout(model, nominal, policies, 0.0, alpha, adversary, atoms);
      if (b.diverged) continue;
      adv_actual = b.cost_penalized - incumbent_cost;
    }
    const double ctrl_actual = r.cost_penalized - incumbent_cost - adv_actual;
    const double ctrl = model_change.control_change(alpha);
    const double adv = model_change.adversary_change(alpha);
    spdlog::trace("alpha {:.3g}: control {:.6e} (model {:.6e}), adversary {:.6e} (model {:.6e})",
                  alpha, ctrl_actual, ctrl, adv_actual, adv);
    const bool ctrl_ok = ctrl_actual <= config.armijo * ctrl;
    // Near the saddle the disturbance model along one atom path is dominated by
    // the gap between the atom-averaged and the realized value gradient, so
    // only a collapse well beyond the predicted magnitude is rejected.
    const bool adv_ok = adv_actual >= -2.0 * (std::abs(adv) + std::abs(ctrl));
    if (ctrl_ok && adv_ok) {
      r.accepted = true;
      return r;
    }
    if (r.cost_penalized < best.cost_penalized) best = std::move(r);
  }
  best.accepted = false;
  return best;
}

}  // namespace drddp
