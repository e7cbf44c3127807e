#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>

namespace torcont {

using Index = Eigen::Index;
using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using RowVec = Eigen::RowVectorXd;
using SpMat = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;

/// Base-point states of one segment, one row per base point.  Row-major so that
/// the flat storage matches the unknown-vector layout (point-major, state-minor).
using StateMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

}  // namespace torcont
