#pragma once

#include <memory>
#include <optional>
#include <vector>

#include "torcont/colloc.hpp"
#include "torcont/fourier.hpp"
#include "torcont/po.hpp"
#include "torcont/vector_field.hpp"
#include "torcont/zero_problem.hpp"

namespace torcont {

/// Poincare sections anchoring the two phases of the torus.
struct ReferenceSection {
  Vec v00;    // first segment's initial point
  Vec v_phi;  // d/dphi of the initial circle at phi = 0
  Vec v_t;    // f(0, v00, p); empty for forced fields
};

/// 2N+1 collocation segments v(phi_j, t), t in [T0, T0 + T], on one shared mesh.
/// Segment j starts on the initial circle at phi_j = 2 pi j / (2N+1).
struct TorusSolution {
  std::shared_ptr<const SegmentMesh> mesh;
  std::shared_ptr<const CouplingMatrices> coupling;
  std::vector<StateMatrix> segments;
  double T0 = 0;
  double T = 0;
  Vec p;
  double om1 = 0;
  double om2 = 0;
  double varrho = 0;
  ReferenceSection reference;

  int N() const { return coupling->N; }
  int num_segments() const { return static_cast<int>(segments.size()); }
  int dim() const { return static_cast<int>(segments.front().cols()); }
  Trajectory segment(int j) const { return {mesh, segments[static_cast<std::size_t>(j)], T, T0}; }
  /// Initial points of all segments, one row per segment.
  StateMatrix initial_circle() const;
  StateMatrix final_circle() const;
};

/// Section computed from `sol` itself (moving Poincare section).
ReferenceSection make_reference(const VectorField& vf, const TorusSolution& sol);
TorusSolution update_reference(const VectorField& vf, TorusSolution sol);

/// Residual blocks in order: segment collocation and continuity, all-to-all
/// coupling (n (2N+1) rows), T0, T - 2 pi/om2, varrho - om1/om2, phi-phase,
/// then the t-phase (autonomous) or Omega2 - om2 (forced).
Vec torus_residual(const VectorField& vf, const TorusSolution& sol);

/// Torus zero problem.  Unknowns:
///   [segment 0 x_bp | ... | segment 2N x_bp | T0 | T | p | om1 | om2 | varrho]
/// with each segment's base points flattened row-major.
class TorusProblem : public ZeroProblem {
public:
  TorusProblem(VectorField vf, TorusSolution initial);

  Index num_unknowns() const override;
  Index num_equations() const override;
  Index parameter_offset() const override;
  std::vector<std::string> parameter_names() const override;
  Vec residual(const Vec& u) const override;
  void jacobian_triplets(const Vec& u, std::vector<Triplet>& out) const override;
  void accept(const Vec& u) override;
  std::vector<Monitor> monitors(const Vec& u) const override;

  const VectorField& field() const { return vf_; }
  Vec pack(const TorusSolution& sol) const;
  /// Solution at u, carrying the problem's current reference section.
  TorusSolution unpack(const Vec& u) const;
  const ReferenceSection& reference() const { return reference_; }
  void set_reference(ReferenceSection ref) { reference_ = std::move(ref); }

  Index t0_index() const { return x_size(); }
  Index period_index() const { return x_size() + 1; }

private:
  Index x_size() const;
  Index segment_block() const;

  VectorField vf_;
  std::shared_ptr<const SegmentMesh> mesh_;
  std::shared_ptr<const CouplingMatrices> coupling_;
  int n_;
  int n_seg_;
  ReferenceSection reference_;
};

/// Torus guess from sampled trajectories: samples[j] holds segment j's states at
/// t_grid (rows), t_grid spanning one return.  The reference is the guess itself.
TorusSolution init_from_samples(const VectorField& vf, const std::vector<double>& t_grid,
                                const std::vector<StateMatrix>& samples, const Vec& p, double om1, double om2,
                                double varrho, int ntst, int degree = 4);

struct TrInitialization {
  TorusSolution torus;
  /// eps * perturbation per segment: the predictor direction away from the orbit.
  std::vector<StateMatrix> direction;
  double eps = 0;
  double theta = 0;  // eigenvector rotation
  CVec eigvec;       // rotated, normalized
};

/// sqrt(mean |x - mean(x)|^2) over the base points.
double rms_amplitude(const Trajectory& traj);

/// Torus guess x_p(t) + eps * Re/Im rotation of the TR eigenfunction; eps
/// defaults to 0.1 * rms_amplitude(orbit).
TrInitialization init_from_TR(const VectorField& vf, const PeriodicOrbit& po, const FloquetData& floq, int N,
                              std::optional<double> eps = std::nullopt);

/// Initial-circle interpolant v(phi, t) at arbitrary phi and t in [T0, T0 + T].
Vec evaluate_torus(const TorusSolution& sol, double phi, double t);

struct TorusMesh {
  std::vector<double> theta1;
  std::vector<double> theta2;
  std::vector<std::vector<Vec>> points;  // [theta1 index][theta2 index]
};

/// u(theta1, theta2) = v(theta1 - varrho theta2, theta2 / om2).  theta1 defaults
/// to the segment angles; theta2 is uniform on [0, 2 pi] inclusive.
TorusMesh export_torus_mesh(const TorusSolution& sol, int theta2_count,
                            const std::vector<double>& theta1 = {});

struct InvarianceReport {
  std::vector<double> deviations;  // after each return
  double max_deviation = 0;
  double mean_deviation = 0;
};

/// Integrates from v(0, T0) over `returns` periods and compares the state after
/// return k with the initial circle at 2 pi k varrho.
InvarianceReport validate_invariance(const VectorField& vf, const TorusSolution& sol, int returns,
                                     double tol = 1e-12);

/// Re-expresses a torus with N_new segments pairs and ntst_new subintervals by
/// trigonometric interpolation in phi and polynomial interpolation in t.
TorusSolution refine(const VectorField& vf, const TorusSolution& sol, int N_new, int ntst_new);

}  // namespace torcont
