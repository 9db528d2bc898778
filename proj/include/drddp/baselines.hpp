#pragma once

#include <string>
#include <vector>

#include "drddp/solver.hpp"

namespace drddp {

enum class ControllerKind { kDrDdp, kBoxDdp, kMinimaxDdp };

// "dr_ddp", "box_ddp", "minimax_ddp"
ControllerKind parse_controller(const std::string& name);
std::string controller_name(ControllerKind kind);
// Label used in reports, e.g. "minimax-DDP (GT-DDP-style)".
std::string controller_label(ControllerKind kind);

struct BaselineKind {
  ControllerKind kind = ControllerKind::kBoxDdp;
  double minimax_gamma = 0.0;

  void validate() const;
};

// Deterministic DDP: w_t = 0 in the dynamics, no disturbance player. Control
// bounds go through the same projected-Newton gains as DR-DDP.
Solution solve_box_ddp(const OcpModel& model, const Vector& x0, const SolverConfig& config);

// Soft-constrained min-max game: a single atom at zero and penalty
// gamma_w ||w||^2. The adversary curvature is never regularized, so a gamma_w
// too small for concavity raises CurvatureError.
Solution solve_minimax_ddp(const OcpModel& model, const Vector& x0, const SolverConfig& config,
                           double gamma_w);

struct GammaSelection {
  double gamma = 0.0;
  double smallest_feasible = 0.0;
  std::vector<double> grid;
  std::vector<bool> feasible;
};

// Smallest grid value for which solve_minimax_ddp completes without a
// curvature failure, times 2. The grid is sorted ascending first.
GammaSelection select_minimax_gamma(const OcpModel& model, const Vector& x0,
                                    const SolverConfig& config, std::vector<double> grid);

// Log-spaced grid lo, lo*10^(1/per_decade), ..., hi.
std::vector<double> log_grid(double lo, double hi, int per_decade);

}  // namespace drddp
