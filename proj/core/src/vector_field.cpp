#include "torcont/vector_field.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "torcont/error.hpp"

namespace torcont {

double fd_step(double value) { return std::max(1e-7, 1e-7 * std::abs(value)); }

VectorField::VectorField(VectorFieldSpec spec) : spec_(std::move(spec)) {
  if (spec_.dim_state <= 0) throw InputError("vector field '" + spec_.name + "': dim_state must be positive");
  if (spec_.dim_params <= 0) throw InputError("vector field '" + spec_.name + "': dim_params must be positive");
  if (static_cast<int>(spec_.param_names.size()) != spec_.dim_params)
    throw InputError("vector field '" + spec_.name + "': param_names has " +
                     std::to_string(spec_.param_names.size()) + " entries, expected " +
                     std::to_string(spec_.dim_params));
  std::set<std::string> unique(spec_.param_names.begin(), spec_.param_names.end());
  if (unique.size() != spec_.param_names.size())
    throw InputError("vector field '" + spec_.name + "': duplicate parameter names");
  if (!spec_.rhs) throw InputError("vector field '" + spec_.name + "': rhs is required");
  if (spec_.forcing_param) param_index(*spec_.forcing_param);

  analytic_state_ = static_cast<bool>(spec_.jac_state);
  analytic_params_ = static_cast<bool>(spec_.jac_params);
  analytic_time_ = static_cast<bool>(spec_.jac_time);
}

int VectorField::param_index(const std::string& name) const {
  auto it = std::find(spec_.param_names.begin(), spec_.param_names.end(), name);
  if (it == spec_.param_names.end())
    throw InputError("vector field '" + spec_.name + "' has no parameter '" + name + "'");
  return static_cast<int>(it - spec_.param_names.begin());
}

std::optional<int> VectorField::forcing_param_index() const {
  if (!spec_.forcing_param) return std::nullopt;
  return param_index(*spec_.forcing_param);
}

void VectorField::check(const Vec& y, const Vec& p) const {
  if (y.size() != spec_.dim_state)
    throw InputError("vector field '" + spec_.name + "': state has length " + std::to_string(y.size()) +
                     ", expected " + std::to_string(spec_.dim_state));
  if (p.size() != spec_.dim_params)
    throw InputError("vector field '" + spec_.name + "': parameter vector has length " +
                     std::to_string(p.size()) + ", expected " + std::to_string(spec_.dim_params));
}

Vec VectorField::rhs(double t, const Vec& y, const Vec& p) const {
  check(y, p);
  return spec_.rhs(spec_.autonomous ? 0.0 : t, y, p);
}

Mat VectorField::jac_state(double t, const Vec& y, const Vec& p) const {
  check(y, p);
  if (analytic_state_) return spec_.jac_state(spec_.autonomous ? 0.0 : t, y, p);
  return fd_state(t, y, p);
}

Mat VectorField::jac_params(double t, const Vec& y, const Vec& p) const {
  check(y, p);
  if (analytic_params_) return spec_.jac_params(spec_.autonomous ? 0.0 : t, y, p);
  return fd_params(t, y, p);
}

Vec VectorField::jac_time(double t, const Vec& y, const Vec& p) const {
  check(y, p);
  if (spec_.autonomous) return Vec::Zero(spec_.dim_state);
  if (analytic_time_) return spec_.jac_time(t, y, p);
  return fd_time(t, y, p);
}

Mat VectorField::fd_state(double t, const Vec& y, const Vec& p) const {
  const double tt = spec_.autonomous ? 0.0 : t;
  Mat J(spec_.dim_state, spec_.dim_state);
  Vec yp = y, ym = y;
  for (int j = 0; j < spec_.dim_state; ++j) {
    const double h = fd_step(y[j]);
    yp[j] = y[j] + h;
    ym[j] = y[j] - h;
    J.col(j) = (spec_.rhs(tt, yp, p) - spec_.rhs(tt, ym, p)) / (2 * h);
    yp[j] = ym[j] = y[j];
  }
  return J;
}

Mat VectorField::fd_params(double t, const Vec& y, const Vec& p) const {
  const double tt = spec_.autonomous ? 0.0 : t;
  Mat J(spec_.dim_state, spec_.dim_params);
  Vec pp = p, pm = p;
  for (int j = 0; j < spec_.dim_params; ++j) {
    const double h = fd_step(p[j]);
    pp[j] = p[j] + h;
    pm[j] = p[j] - h;
    J.col(j) = (spec_.rhs(tt, y, pp) - spec_.rhs(tt, y, pm)) / (2 * h);
    pp[j] = pm[j] = p[j];
  }
  return J;
}

Vec VectorField::fd_time(double t, const Vec& y, const Vec& p) const {
  const double h = fd_step(t);
  return (spec_.rhs(t + h, y, p) - spec_.rhs(t - h, y, p)) / (2 * h);
}

}  // namespace torcont
