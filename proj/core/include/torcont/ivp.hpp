#pragma once

#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "torcont/types.hpp"
#include "torcont/vector_field.hpp"

namespace torcont {

struct IvpOptions {
  double rel_tol = 1e-8;
  double abs_tol = 1e-10;
  std::optional<double> max_step;
  bool dense_output = false;
  std::size_t max_steps = 5'000'000;
};

/// Continuous extension of an accepted Dormand-Prince run (4th-order Hermite-type
/// interpolant per step).
class DenseOutput {
public:
  struct Step {
    double t0;
    double h;
    Mat coeffs;  // 5 x n
  };

  Vec operator()(double t) const;
  double t_begin() const;
  double t_end() const;
  bool empty() const { return steps_.empty(); }
  void push(Step s) { steps_.push_back(std::move(s)); }

private:
  std::vector<Step> steps_;
};

struct IvpSolution {
  std::vector<double> t;
  std::vector<Vec> y;
  std::optional<DenseOutput> dense;
  std::size_t accepted_steps = 0;
  std::size_t rejected_steps = 0;
};

using OdeFunction = std::function<void(double t, const Vec& y, Vec& dydt)>;

/// Integrates y' = rhs(t, y) with an embedded 5(4) pair and PI step control.  The
/// first entry of t_out is the initial time; the remaining entries must be strictly
/// monotone in one direction.  Values at t_out are produced from the dense
/// interpolant, so output times do not constrain the step size.
IvpSolution solve_ivp(const OdeFunction& rhs, std::span<const double> t_out, const Vec& y0,
                      const IvpOptions& opts = {});

/// Convenience wrapper for a VectorField at fixed parameters.
IvpSolution integrate(const VectorField& vf, std::span<const double> t_span, const Vec& y0, const Vec& p,
                      const IvpOptions& opts = {});

struct TransitionMatrixResult {
  std::vector<double> times;
  std::vector<Vec> states;  // reference states at `times`
  std::vector<Mat> phi;     // raw solutions Phi(t) with Phi(t0) = phi0
  Mat phi0;
  Mat monodromy;            // M(t0 + T, t0) = Phi(t0 + T) phi0^{-1}

  /// M(times[k], t0) = Phi(times[k]) phi0^{-1}.
  Mat transition(std::size_t k) const;
};

/// Solves the variational equation Phi' = f_x(t, y(t), p) Phi jointly with the state
/// from y(t0) = y0.  sample_times must be >= t0; t0 + T is always included.
TransitionMatrixResult transition_matrix(const VectorField& vf, double t0, double T, const Vec& y0, const Vec& p,
                                         std::span<const double> sample_times, const IvpOptions& opts,
                                         const std::optional<Mat>& phi0 = std::nullopt);

/// Reference curve given by an interpolant on [t_begin, t_end].
struct ReferenceCurve {
  std::function<Vec(double)> eval;
  double t_begin = 0;
  double t_end = 0;
};

/// Same as transition_matrix, but along a frozen reference curve instead of a fresh
/// trajectory.  Throws InputError if the curve does not cover the requested times.
TransitionMatrixResult transition_matrix_along(const VectorField& vf, double t0, double T, const ReferenceCurve& ref,
                                               const Vec& p, std::span<const double> sample_times,
                                               const IvpOptions& opts,
                                               const std::optional<Mat>& phi0 = std::nullopt);

}  // namespace torcont
