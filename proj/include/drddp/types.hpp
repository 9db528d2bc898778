#pragma once

#include <Eigen/Core>
#include <vector>

namespace drddp {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

using VectorList = std::vector<Vector>;
using MatrixList = std::vector<Matrix>;

inline bool all_finite(const Eigen::Ref<const Matrix>& m) { return m.allFinite(); }

inline void symmetrize(Matrix& m) { m = 0.5 * (m + m.transpose()).eval(); }

}  // namespace drddp
