#pragma once

#include <memory>
#include <string>
#include <vector>

#include "torcont/vector_field.hpp"

namespace torcont {

/// Langford system with parameters (om, rho, eps):
///   x1' = (x3 - 0.7) x1 - om x2
///   x2' = om x1 + (x3 - 0.7) x2
///   x3' = 0.6 + x3 - x3^3/3 - (x1^2 + x2^2)(1 + rho x3) + eps x3 x1^3
VectorField builtin_langford();

/// Harmonically forced Van der Pol oscillator x'' - c(1 - x^2) x' + x = a cos(Om2 t)
/// in first-order form, parameters (Om2, c, a); Om2 is the forcing frequency.
VectorField builtin_vdp();

std::vector<std::string> builtin_system_names();

/// Looks up a builtin by name; throws NotFoundError otherwise.
VectorField builtin_system(const std::string& name);

/// Loads a user field from a shared library exporting
///   extern "C" void torcont_plugin_define(torcont::VectorFieldSpec& spec);
VectorField load_plugin_system(const std::string& path);

/// Resolves either "name" or "plugin:/path/to/lib.so".
VectorField resolve_system(const std::string& reference);

}  // namespace torcont
