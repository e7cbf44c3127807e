#pragma once

#include <complex>
#include <memory>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "torcont/colloc.hpp"
#include "torcont/ivp.hpp"
#include "torcont/vector_field.hpp"
#include "torcont/zero_problem.hpp"

namespace torcont {

using CVec = Eigen::VectorXcd;

/// Periodic orbit on [0, T].  `reference` anchors the Poincare phase condition
/// (autonomous fields only) and is replaced on every accepted continuation step.
struct PeriodicOrbit {
  Trajectory traj;
  Vec p;
  Trajectory reference;
  Vec reference_p;

  double period() const { return traj.duration; }
};

struct FloquetData {
  Mat monodromy;
  CVec multipliers;
  Eigen::MatrixXcd eigenvectors;
  std::optional<int> trivial_index;  // autonomous fields: multiplier closest to 1
  std::optional<double> tr_angle;    // alpha in (0, pi) of the pair used by the TR test
  std::optional<CVec> tr_eigvec;     // eigenvector for exp(i alpha)
  bool ill_conditioned = false;      // eigenvector basis close to singular
};

/// Phase condition for autonomous fields; T = 2 pi / Omega for forced ones.
Vec po_residual(const VectorField& vf, const PeriodicOrbit& po);

/// Orbit guess from forward simulation: integrate from y0 over `transient`, then
/// sample one period.  The reference is the guess itself.
PeriodicOrbit po_from_simulation(const VectorField& vf, const Vec& y0, const Vec& p, double transient,
                                 double period, int ntst, int degree = 4);

/// Monodromy by integrating the variational equation from x(0) over one period.
FloquetData floquet(const VectorField& vf, const PeriodicOrbit& po, double tol = 1e-10);

/// max over complex pairs (|Im| > 1e-6, trivial multiplier excluded) of |mu| - 1;
/// nullopt when there is no such pair.
std::optional<double> tr_test_function(const FloquetData& floq);

struct PoOptions {
  bool detect_tr = true;
  double floquet_tol = 1e-10;
};

/// Periodic-orbit zero problem, unknowns [x_bp (row-major) | T | p].
class PoProblem : public ZeroProblem {
public:
  PoProblem(VectorField vf, PeriodicOrbit initial, PoOptions opts = {});

  Index num_unknowns() const override;
  Index num_equations() const override;
  Index parameter_offset() const override;
  std::vector<std::string> parameter_names() const override;
  Vec residual(const Vec& u) const override;
  void jacobian_triplets(const Vec& u, std::vector<Triplet>& out) const override;
  void accept(const Vec& u) override;
  std::vector<EventFunction> events() const override;
  std::vector<Monitor> monitors(const Vec& u) const override;

  const VectorField& field() const { return vf_; }
  Vec pack(const PeriodicOrbit& po) const;
  /// Orbit at u, carrying the problem's current reference.
  PeriodicOrbit unpack(const Vec& u) const;
  const Trajectory& reference() const { return reference_; }
  const Vec& reference_params() const { return reference_p_; }
  void set_reference(const Trajectory& traj, const Vec& p);

private:
  VectorField vf_;
  std::shared_ptr<const SegmentMesh> mesh_;
  int n_;
  Trajectory reference_;
  Vec reference_p_;
  Vec phase_normal_;  // f(0, x_ref(0), p_ref)
  PoOptions opts_;
};

}  // namespace torcont
