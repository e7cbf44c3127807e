#pragma once

#include <vector>

#include "torcont/types.hpp"

namespace torcont {

/// Real discrete Fourier transform on the 2N+1 equispaced angles
/// phi_j = 2 pi j / (2N+1), j = 0..2N.  Coefficient order is
/// (a0, a1, b1, ..., aN, bN) for chi(phi) = a0 + sum_k a_k cos(k phi) + b_k sin(k phi).
struct CouplingMatrices {
  int N = 0;
  int n_seg = 0;
  std::vector<double> angles;
  Mat F;
  Mat Finv;
  RowVec phase_weights;  // w . samples = d chi / d phi at phi = 0
};

/// Throws InputError for N < 1.
CouplingMatrices dft_matrix(int N);

/// Shift of the coefficients corresponding to chi(phi) -> chi(phi + 2 pi varrho).
Mat rotation_matrix(int N, double varrho);

/// d R / d varrho.
Mat rotation_matrix_derivative(int N, double varrho);

/// (F (x) I_n) vT - ((R F) (x) I_n) v0 for segment-stacked vectors (segment-major).
Vec coupling_residual(const Vec& v0, const Vec& vT, const Mat& R, const Mat& F, int n);

/// sum_k k * (row of F producing b_k).
RowVec phase_derivative_weights(const Mat& F, int N);

/// Trigonometric interpolant through segment samples (rows = segments) at angle phi.
Vec trig_interpolate(const CouplingMatrices& cm, const Eigen::Ref<const StateMatrix>& samples, double phi);

}  // namespace torcont
