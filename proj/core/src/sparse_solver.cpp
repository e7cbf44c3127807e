#include "torcont/sparse_solver.hpp"

#include "torcont/error.hpp"

namespace torcont {

bool SparseLinearSolver::factorize(const SpMat& A) {
  if (A.rows() != A.cols()) throw InputError("SparseLinearSolver: matrix must be square");
  lu_.analyzePattern(A);
  lu_.factorize(A);
  ok_ = lu_.info() == Eigen::Success;
  return ok_;
}

Vec SparseLinearSolver::solve(const Vec& b) const {
  if (!ok_) throw ConvergenceError("SparseLinearSolver: no valid factorization");
  return lu_.solve(b);
}

int SparseLinearSolver::sign_determinant() {
  if (!ok_) return 0;
  return static_cast<int>(lu_.signDeterminant());
}

double SparseLinearSolver::log_abs_determinant() const {
  if (!ok_) return -std::numeric_limits<double>::infinity();
  return lu_.logAbsDeterminant();
}

SpMat assemble_bordered(const std::vector<Triplet>& jac, Index rows, Index cols, const Vec& border) {
  if (border.size() != cols) throw InputError("assemble_bordered: border length mismatch");
  std::vector<Triplet> all;
  all.reserve(jac.size() + static_cast<std::size_t>(cols));
  all.insert(all.end(), jac.begin(), jac.end());
  for (Index j = 0; j < cols; ++j)
    if (border[j] != 0.0) all.emplace_back(rows, j, border[j]);
  SpMat A(rows + 1, cols);
  A.setFromTriplets(all.begin(), all.end());
  return A;
}

}  // namespace torcont
