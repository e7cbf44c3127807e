#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "torcont/types.hpp"
#include "torcont/vector_field.hpp"

namespace torcont {

/// Piecewise-polynomial mesh on normalized time [0, 1].  Each subinterval holds
/// degree+1 uniformly spaced base points (endpoints included) and `degree`
/// Gauss-Legendre collocation nodes.
struct SegmentMesh {
  int ntst = 0;
  int degree = 0;
  std::vector<double> subinterval_bounds;  // ntst + 1
  std::vector<double> basepoints;          // ntst * (degree + 1)
  std::vector<double> collnodes;           // ntst * degree

  std::vector<double> ref_base;   // base points on the reference interval [0, 1]
  std::vector<double> ref_nodes;  // Gauss nodes on [0, 1]
  Mat W;                          // degree x (degree+1): L_l(node_c)
  Mat Wp;                         // degree x (degree+1): dL_l/ds(node_c)

  int num_basepoints() const { return ntst * (degree + 1); }
  int num_nodes() const { return ntst * degree; }
  double width(int k) const { return subinterval_bounds[k + 1] - subinterval_bounds[k]; }
};

/// Uniform mesh; throws InputError for ntst < 1 or degree outside [1, 7].
SegmentMesh build_mesh(int ntst, int degree = 4);
std::shared_ptr<const SegmentMesh> make_mesh(int ntst, int degree = 4);

/// Gauss-Legendre nodes on [-1, 1], ascending.
std::vector<double> gauss_legendre_nodes(int m);

/// Lagrange basis values / derivatives at s for the given nodes.
Vec lagrange_basis(const std::vector<double>& nodes, double s);
Vec lagrange_basis_derivative(const std::vector<double>& nodes, double s);

/// One collocation segment: base-point states over normalized time, mapped to
/// physical time t = t_offset + duration * tau.
struct Trajectory {
  std::shared_ptr<const SegmentMesh> mesh;
  StateMatrix x_bp;
  double duration = 0;
  double t_offset = 0;

  int dim() const { return static_cast<int>(x_bp.cols()); }
  Vec first() const { return x_bp.row(0).transpose(); }
  Vec last() const { return x_bp.row(x_bp.rows() - 1).transpose(); }
};

/// Fills base points from a function of physical time.
Trajectory sample_trajectory(std::shared_ptr<const SegmentMesh> mesh, double duration, double t_offset, int n,
                             const std::function<Vec(double)>& fn);

/// Evaluates the piecewise interpolant at normalized time tau in [0, 1].
Vec interpolate_normalized(const SegmentMesh& mesh, const Eigen::Ref<const StateMatrix>& x_bp, double tau);

/// Evaluates the trajectory at physical time t; throws InputError outside
/// [t_offset, t_offset + duration].
Vec interpolate(const Trajectory& traj, double t);

/// Re-expresses a trajectory on another mesh by interpolation.
Trajectory resample(const Trajectory& traj, std::shared_ptr<const SegmentMesh> mesh);

/// Number of rows produced by segment_residual: ntst*m*n + (ntst-1)*n.
Index segment_residual_size(const SegmentMesh& mesh, int n);

/// Residual block in the layout [collocation rows | continuity rows]; the row at
/// node tau is x'(tau) - duration * f(t_offset + duration * tau, x(tau), p).
void segment_residual_into(const VectorField& vf, const SegmentMesh& mesh,
                           const Eigen::Ref<const StateMatrix>& x_bp, double duration, double t_offset,
                           const Vec& p, Eigen::Ref<Vec> out);

Vec segment_residual(const VectorField& vf, const Trajectory& traj, const Vec& p);

/// Column placement for segment Jacobian entries; negative indices are dropped.
struct SegmentColumns {
  Index x0 = 0;
  Index duration = -1;
  Index t_offset = -1;
  Index params = -1;
};

void append_segment_jacobian(const VectorField& vf, const SegmentMesh& mesh,
                             const Eigen::Ref<const StateMatrix>& x_bp, double duration, double t_offset,
                             const Vec& p, Index row0, const SegmentColumns& cols, std::vector<Triplet>& out);

/// Jacobian with column layout [x_bp (flattened) | duration | t_offset | p].
SpMat segment_jacobian(const VectorField& vf, const Trajectory& traj, const Vec& p);

}  // namespace torcont
