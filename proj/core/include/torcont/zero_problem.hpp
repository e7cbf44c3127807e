#pragma once

#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "torcont/types.hpp"

namespace torcont {

/// Scalar test function whose sign change along a branch marks an event.
/// Returning nullopt means "not defined here" (e.g. no complex multiplier pair).
struct EventFunction {
  std::string type;
  std::function<std::optional<double>(const Vec& u)> evaluate;
};

using Monitor = std::pair<std::string, double>;

/// Zero problem F(u) = 0 over a full unknown vector u.  The named parameters
/// occupy the tail of u starting at parameter_offset(); everything before it is
/// always active.  Which parameters are released is decided by the caller.
class ZeroProblem {
public:
  virtual ~ZeroProblem() = default;

  virtual Index num_unknowns() const = 0;
  virtual Index num_equations() const = 0;
  virtual Index parameter_offset() const = 0;
  virtual std::vector<std::string> parameter_names() const = 0;

  virtual Vec residual(const Vec& u) const = 0;
  /// Jacobian entries in full-vector column coordinates.
  virtual void jacobian_triplets(const Vec& u, std::vector<Triplet>& out) const = 0;

  /// Called after every accepted continuation point (moving Poincare sections).
  virtual void accept(const Vec& /*u*/) {}
  virtual std::vector<EventFunction> events() const { return {}; }
  /// Named scalars reported per point; defaults to all named parameters.
  virtual std::vector<Monitor> monitors(const Vec& u) const;

  /// Position of a named parameter in u; throws ConfigError for unknown names.
  Index parameter_index(const std::string& name) const;
  SpMat jacobian(const Vec& u) const;
};

/// Jacobian of `problem` by central differences (test and diagnostic use).
Mat finite_difference_jacobian(const ZeroProblem& problem, const Vec& u, double rel_step = 1e-7);

}  // namespace torcont
