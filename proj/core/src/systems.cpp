#include "torcont/systems.hpp"

#include <dlfcn.h>

#include <cmath>

#include "torcont/error.hpp"

namespace torcont {

VectorField builtin_langford() {
  VectorFieldSpec s;
  s.name = "langford";
  s.dim_state = 3;
  s.dim_params = 3;
  s.autonomous = true;
  s.param_names = {"om", "rho", "eps"};
  s.rhs = [](double, const Vec& x, const Vec& p) {
    const double x1 = x[0], x2 = x[1], x3 = x[2];
    const double om = p[0], ro = p[1], eps = p[2];
    Vec y(3);
    y[0] = (x3 - 0.7) * x1 - om * x2;
    y[1] = om * x1 + (x3 - 0.7) * x2;
    y[2] = 0.6 + x3 - x3 * x3 * x3 / 3 - (x1 * x1 + x2 * x2) * (1 + ro * x3) + eps * x3 * x1 * x1 * x1;
    return y;
  };
  s.jac_state = [](double, const Vec& x, const Vec& p) {
    const double x1 = x[0], x2 = x[1], x3 = x[2];
    const double om = p[0], ro = p[1], eps = p[2];
    Mat J(3, 3);
    J(0, 0) = x3 - 0.7;
    J(0, 1) = -om;
    J(0, 2) = x1;
    J(1, 0) = om;
    J(1, 1) = x3 - 0.7;
    J(1, 2) = x2;
    J(2, 0) = -2 * x1 * (1 + ro * x3) + 3 * eps * x3 * x1 * x1;
    J(2, 1) = -2 * x2 * (1 + ro * x3);
    J(2, 2) = 1 - x3 * x3 - ro * (x1 * x1 + x2 * x2) + eps * x1 * x1 * x1;
    return J;
  };
  s.jac_params = [](double, const Vec& x, const Vec&) {
    const double x1 = x[0], x2 = x[1], x3 = x[2];
    Mat J = Mat::Zero(3, 3);
    J(0, 0) = -x2;
    J(1, 0) = x1;
    J(2, 1) = -x3 * (x1 * x1 + x2 * x2);
    J(2, 2) = x3 * x1 * x1 * x1;
    return J;
  };
  return VectorField(std::move(s));
}

VectorField builtin_vdp() {
  VectorFieldSpec s;
  s.name = "vdp";
  s.dim_state = 2;
  s.dim_params = 3;
  s.autonomous = false;
  s.param_names = {"Om2", "c", "a"};
  s.forcing_param = "Om2";
  s.rhs = [](double t, const Vec& x, const Vec& p) {
    const double om = p[0], c = p[1], a = p[2];
    Vec y(2);
    y[0] = x[1];
    y[1] = c * (1 - x[0] * x[0]) * x[1] - x[0] + a * std::cos(om * t);
    return y;
  };
  s.jac_state = [](double, const Vec& x, const Vec& p) {
    const double c = p[1];
    Mat J(2, 2);
    J(0, 0) = 0;
    J(0, 1) = 1;
    J(1, 0) = -2 * c * x[0] * x[1] - 1;
    J(1, 1) = c * (1 - x[0] * x[0]);
    return J;
  };
  s.jac_params = [](double t, const Vec& x, const Vec& p) {
    const double om = p[0], a = p[2];
    Mat J = Mat::Zero(2, 3);
    J(1, 0) = -a * t * std::sin(om * t);
    J(1, 1) = (1 - x[0] * x[0]) * x[1];
    J(1, 2) = std::cos(om * t);
    return J;
  };
  s.jac_time = [](double t, const Vec&, const Vec& p) {
    const double om = p[0], a = p[2];
    Vec d(2);
    d[0] = 0;
    d[1] = -a * om * std::sin(om * t);
    return d;
  };
  return VectorField(std::move(s));
}

std::vector<std::string> builtin_system_names() { return {"langford", "vdp"}; }

VectorField builtin_system(const std::string& name) {
  if (name == "langford") return builtin_langford();
  if (name == "vdp") return builtin_vdp();
  throw NotFoundError("unknown builtin system '" + name + "'");
}

VectorField load_plugin_system(const std::string& path) {
  // Handles are intentionally never closed: the returned callbacks live in the library.
  void* handle = dlopen(path.c_str(), RTLD_NOW | RTLD_LOCAL);
  if (!handle) throw NotFoundError("cannot load plugin '" + path + "': " + dlerror());
  using DefineFn = void (*)(VectorFieldSpec&);
  auto define = reinterpret_cast<DefineFn>(dlsym(handle, "torcont_plugin_define"));
  if (!define) throw ConfigError("plugin '" + path + "' does not export torcont_plugin_define");
  VectorFieldSpec spec;
  define(spec);
  if (spec.name.empty()) spec.name = path;
  return VectorField(std::move(spec));
}

VectorField resolve_system(const std::string& reference) {
  const std::string prefix = "plugin:";
  if (reference.rfind(prefix, 0) == 0) return load_plugin_system(reference.substr(prefix.size()));
  return builtin_system(reference);
}

}  // namespace torcont
