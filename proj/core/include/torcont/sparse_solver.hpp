#pragma once

#include <Eigen/SparseLU>
#include <vector>

#include "torcont/types.hpp"

namespace torcont {

/// Square sparse LU with determinant access.
class SparseLinearSolver {
public:
  /// Returns false if the matrix is numerically singular.
  bool factorize(const SpMat& A);
  Vec solve(const Vec& b) const;
  int sign_determinant();
  double log_abs_determinant() const;

private:
  Eigen::SparseLU<SpMat, Eigen::COLAMDOrdering<int>> lu_;
  bool ok_ = false;
};

/// Builds [J; border^T] from Jacobian triplets of a rows x cols matrix, cols = rows + 1.
SpMat assemble_bordered(const std::vector<Triplet>& jac, Index rows, Index cols, const Vec& border);

}  // namespace torcont
