#pragma once

#include "drddp/types.hpp"

namespace drddp {

// Nominal state (T+1), control (T) and disturbance (T) trajectories.
struct NominalTrajectories {
  VectorList x;
  VectorList u;
  VectorList w;

  int horizon() const { return static_cast<int>(u.size()); }

  // Throws InputError if lengths are inconsistent with `horizon` or the state
  // dimensions disagree with (nx, nu, nw).
  void validate(int horizon, int nx, int nu, int nw) const;
};

}  // namespace drddp
