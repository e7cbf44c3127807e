#include "torcont/fourier.hpp"

#include <cmath>
#include <numbers>

#include "torcont/error.hpp"

namespace torcont {

CouplingMatrices dft_matrix(int N) {
  if (N < 1) throw InputError("dft_matrix: N must be >= 1");
  CouplingMatrices cm;
  cm.N = N;
  cm.n_seg = 2 * N + 1;
  const int m = cm.n_seg;
  for (int j = 0; j < m; ++j) cm.angles.push_back(2 * std::numbers::pi * j / m);

  cm.F.resize(m, m);
  cm.Finv.resize(m, m);
  for (int j = 0; j < m; ++j) {
    const double phi = cm.angles[j];
    cm.F(0, j) = 1.0 / m;
    cm.Finv(j, 0) = 1.0;
    for (int k = 1; k <= N; ++k) {
      cm.F(2 * k - 1, j) = 2.0 / m * std::cos(k * phi);
      cm.F(2 * k, j) = 2.0 / m * std::sin(k * phi);
      cm.Finv(j, 2 * k - 1) = std::cos(k * phi);
      cm.Finv(j, 2 * k) = std::sin(k * phi);
    }
  }
  cm.phase_weights = phase_derivative_weights(cm.F, N);
  return cm;
}

Mat rotation_matrix(int N, double varrho) {
  if (N < 1) throw InputError("rotation_matrix: N must be >= 1");
  Mat R = Mat::Zero(2 * N + 1, 2 * N + 1);
  R(0, 0) = 1;
  for (int k = 1; k <= N; ++k) {
    const double c = std::cos(2 * std::numbers::pi * k * varrho);
    const double s = std::sin(2 * std::numbers::pi * k * varrho);
    R(2 * k - 1, 2 * k - 1) = c;
    R(2 * k - 1, 2 * k) = s;
    R(2 * k, 2 * k - 1) = -s;
    R(2 * k, 2 * k) = c;
  }
  return R;
}

Mat rotation_matrix_derivative(int N, double varrho) {
  Mat D = Mat::Zero(2 * N + 1, 2 * N + 1);
  for (int k = 1; k <= N; ++k) {
    const double w = 2 * std::numbers::pi * k;
    const double c = std::cos(w * varrho), s = std::sin(w * varrho);
    D(2 * k - 1, 2 * k - 1) = -w * s;
    D(2 * k - 1, 2 * k) = w * c;
    D(2 * k, 2 * k - 1) = -w * c;
    D(2 * k, 2 * k) = -w * s;
  }
  return D;
}

Vec coupling_residual(const Vec& v0, const Vec& vT, const Mat& R, const Mat& F, int n) {
  const Index m = F.rows();
  if (F.cols() != m || R.rows() != m || R.cols() != m)
    throw InputError("coupling_residual: F and R must be square of equal size");
  if (v0.size() != m * n || vT.size() != m * n) throw InputError("coupling_residual: state vectors have wrong length");
  // Segment-major stacking means the Kronecker product acts on the n x m reshaping.
  Eigen::Map<const Mat> V0(v0.data(), n, m), VT(vT.data(), n, m);
  const Mat RF = R * F;
  Mat out = VT * F.transpose() - V0 * RF.transpose();
  return Eigen::Map<const Vec>(out.data(), out.size());
}

RowVec phase_derivative_weights(const Mat& F, int N) {
  RowVec w = RowVec::Zero(F.cols());
  for (int k = 1; k <= N; ++k) w += k * F.row(2 * k);
  return w;
}

Vec trig_interpolate(const CouplingMatrices& cm, const Eigen::Ref<const StateMatrix>& samples, double phi) {
  if (samples.rows() != cm.n_seg) throw InputError("trig_interpolate: expected one sample row per segment");
  const Mat coeffs = cm.F * samples;  // (2N+1) x n
  Vec out = coeffs.row(0).transpose();
  for (int k = 1; k <= cm.N; ++k)
    out += std::cos(k * phi) * coeffs.row(2 * k - 1).transpose() + std::sin(k * phi) * coeffs.row(2 * k).transpose();
  return out;
}

}  // namespace torcont
