#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "torcont/types.hpp"

namespace torcont {

/// Raw description of an ODE right-hand side f(t, y, p).  Jacobian callbacks are
/// optional; missing ones are replaced by central differences.
struct VectorFieldSpec {
  using RhsFn = std::function<Vec(double t, const Vec& y, const Vec& p)>;
  using JacFn = std::function<Mat(double t, const Vec& y, const Vec& p)>;
  using TimeJacFn = std::function<Vec(double t, const Vec& y, const Vec& p)>;

  std::string name;
  int dim_state = 0;
  int dim_params = 0;
  bool autonomous = true;
  std::vector<std::string> param_names;
  /// Name of the forcing-frequency parameter (Omega_2) of a periodically forced field.
  std::optional<std::string> forcing_param;

  RhsFn rhs;
  JacFn jac_state;   // n x n
  JacFn jac_params;  // n x q
  TimeJacFn jac_time;
};

/// Immutable vector field with dimension-checked evaluation.  Safe to share
/// between threads once constructed.
class VectorField {
public:
  explicit VectorField(VectorFieldSpec spec);

  const std::string& name() const { return spec_.name; }
  int dim_state() const { return spec_.dim_state; }
  int dim_params() const { return spec_.dim_params; }
  bool autonomous() const { return spec_.autonomous; }
  const std::vector<std::string>& param_names() const { return spec_.param_names; }
  bool has_analytic_jac_state() const { return analytic_state_; }
  bool has_analytic_jac_params() const { return analytic_params_; }

  /// Index of a named parameter; throws InputError for unknown names.
  int param_index(const std::string& name) const;
  std::optional<int> forcing_param_index() const;

  Vec rhs(double t, const Vec& y, const Vec& p) const;
  Mat jac_state(double t, const Vec& y, const Vec& p) const;
  Mat jac_params(double t, const Vec& y, const Vec& p) const;
  Vec jac_time(double t, const Vec& y, const Vec& p) const;

private:
  void check(const Vec& y, const Vec& p) const;
  Mat fd_state(double t, const Vec& y, const Vec& p) const;
  Mat fd_params(double t, const Vec& y, const Vec& p) const;
  Vec fd_time(double t, const Vec& y, const Vec& p) const;

  VectorFieldSpec spec_;
  bool analytic_state_ = false;
  bool analytic_params_ = false;
  bool analytic_time_ = false;
};

/// Central-difference step used wherever an analytic derivative is missing.
double fd_step(double value);

}  // namespace torcont
