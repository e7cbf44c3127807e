#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "torcont/contin.hpp"
#include "torcont/store.hpp"

namespace torcont {

enum class SourceKind { Simulate, SimulateCircle, Samples, TR, Torus, BP };
const char* to_string(SourceKind k);

/// Where a stage's start data comes from.
struct SourceSpec {
  SourceKind kind = SourceKind::Simulate;
  // simulate: forward simulation to a periodic-orbit guess
  std::vector<double> y0;
  std::optional<double> period;
  std::optional<std::string> period_param;  // period = 2 pi / p[name]
  double transient_periods = 0;
  // simulate_circle: 2N+1 trajectories from a circle in the first two state components
  std::vector<double> center;
  double radius = 1;
  int transient_returns = 10;
  int samples_per_return = 0;  // 0: 10 (2N+1)
  std::optional<std::string> return_param;
  std::optional<double> return_time;
  // samples
  std::filesystem::path samples_path;
  // simulate_circle and samples: initial torus frequencies
  double om1 = 0, om2 = 0, varrho = 0;
  // TR / torus / BP restarts
  std::string run;
  std::string label;
  int N = 10;
  std::optional<double> eps;
};

struct StageConfig {
  std::string field;  // "stages[i]" for diagnostics
  std::string run_id;
  SolutionKind type = SolutionKind::PeriodicOrbit;
  SourceSpec source;
  std::map<std::string, double> params;
  int ntst = 10;
  int degree = 4;
  /// Ordered continuation parameters: the leading ones needed for a
  /// one-dimensional manifold are released, the rest are only monitored.
  std::vector<std::string> parameters;
  std::vector<Bound> bounds;
  ContinuationOptions cont;
};

struct RunConfig {
  std::string system;
  std::filesystem::path base_dir;  // relative paths in the config resolve here
  std::vector<StageConfig> stages;
};

/// Parses and validates a config document; errors are ConfigError messages that
/// start with the offending field path.
RunConfig parse_config(const std::string& text, const std::filesystem::path& base_dir = ".");
RunConfig load_config(const std::filesystem::path& path);

}  // namespace torcont
