#include "drddp/baselines.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "drddp/errors.hpp"

namespace drddp {

ControllerKind parse_controller(const std::string& name) {
  if (name == "dr_ddp" || name == "drddp" || name == "dr-ddp") return ControllerKind::kDrDdp;
  if (name == "box_ddp" || name == "box-ddp") return ControllerKind::kBoxDdp;
  if (name == "minimax_ddp" || name == "minimax-ddp") return ControllerKind::kMinimaxDdp;
  throw ConfigError(fmt::format("unknown controller '{}' (expected dr_ddp, box_ddp or minimax_ddp)",
                                name));
}

std::string controller_name(ControllerKind kind) {
  switch (kind) {
    case ControllerKind::kDrDdp:
      return "dr_ddp";
    case ControllerKind::kBoxDdp:
      return "box_ddp";
    case ControllerKind::kMinimaxDdp:
      return "minimax_ddp";
  }
  return "unknown";
}

std::string controller_label(ControllerKind kind) {
  switch (kind) {
    case ControllerKind::kDrDdp:
      return "DR-DDP";
    case ControllerKind::kBoxDdp:
      return "box-DDP";
    case ControllerKind::kMinimaxDdp:
      return "minimax-DDP (GT-DDP-style)";
  }
  return "unknown";
}

void BaselineKind::validate() const {
  if (kind == ControllerKind::kMinimaxDdp && !(minimax_gamma > 0.0)) {
    throw ConfigError("minimax_gamma must be positive");
  }
}

Solution solve_box_ddp(const OcpModel& model, const Vector& x0, const SolverConfig& config) {
  const Dims d = model.dims();
  SolverConfig cfg = config;
  cfg.adversarial = false;
  const DisturbanceDataset none = DisturbanceDataset::constant(d.horizon, Vector::Zero(d.nw));
  return solve(model, x0, none, cfg);
}

Solution solve_minimax_ddp(const OcpModel& model, const Vector& x0, const SolverConfig& config,
                           double gamma_w) {
  if (!(gamma_w > 0.0)) throw ConfigError("gamma_w must be positive");
  const Dims d = model.dims();
  SolverConfig cfg = config;
  cfg.adversarial = true;
  cfg.regularize_adversary = false;
  cfg.lambda = gamma_w;
  const DisturbanceDataset origin = DisturbanceDataset::constant(d.horizon, Vector::Zero(d.nw));
  try {
    return solve(model, x0, origin, cfg);
  } catch (const CurvatureError& err) {
    throw CurvatureError(fmt::format("{}; increase gamma_w above {:g}", err.what(), gamma_w),
                         err.timestep());
  }
}

GammaSelection select_minimax_gamma(const OcpModel& model, const Vector& x0,
                                    const SolverConfig& config, std::vector<double> grid) {
  if (grid.empty()) throw ConfigError("gamma grid is empty");
  std::sort(grid.begin(), grid.end());
  GammaSelection sel;
  sel.grid = grid;
  sel.feasible.assign(grid.size(), false);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    try {
      solve_minimax_ddp(model, x0, config, grid[i]);
      sel.feasible[i] = true;
    } catch (const CurvatureError& err) {
      spdlog::debug("gamma_w = {:g}: {}", grid[i], err.what());
      continue;
    } catch (const NumericalFailure& err) {
      spdlog::debug("gamma_w = {:g}: {}", grid[i], err.what());
      continue;
    }
    sel.smallest_feasible = grid[i];
    sel.gamma = 2.0 * grid[i];
    return sel;
  }
  throw NumericalFailure("no gamma_w on the grid keeps the adversary concave", -1, -1);
}

std::vector<double> log_grid(double lo, double hi, int per_decade) {
  if (!(lo > 0.0) || !(hi >= lo) || per_decade < 1) throw ConfigError("invalid log grid");
  std::vector<double> g;
  const int steps = static_cast<int>(std::round(std::log10(hi / lo) * per_decade));
  for (int k = 0; k <= steps; ++k) g.push_back(lo * std::pow(10.0, static_cast<double>(k) / per_decade));
  return g;
}

}  // namespace drddp
