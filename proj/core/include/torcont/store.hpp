#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "torcont/contin.hpp"
#include "torcont/po.hpp"
#include "torcont/torus.hpp"

namespace torcont {

inline constexpr int kRunFormatVersion = 1;
inline constexpr int kSolutionFormatVersion = 1;

enum class SolutionKind { PeriodicOrbit, Torus };
const char* to_string(SolutionKind k);

struct RunInfo {
  std::string run_id;
  SolutionKind kind = SolutionKind::PeriodicOrbit;
  std::string system;  // builtin name or plugin reference
  std::vector<std::string> released;
  std::vector<Bound> bounds;
  ContinuationOptions options;
  std::string origin;  // free-form description of the start data
};

struct BdRow {
  int label = 0;
  PointType type = PointType::RO;
  int pt = 0;
  int direction = 1;
  std::vector<Monitor> monitors;
  double residual_norm = 0;
  int iterations = 0;
  double step = 0;
  std::string note;

  std::optional<double> monitor(const std::string& name) const;
};

/// Everything needed to rebuild a labeled point without the run that made it.
struct Snapshot {
  int label = 0;
  PointType type = PointType::RO;
  std::string run_id;
  std::string system;
  std::vector<std::string> released;
  std::optional<PeriodicOrbit> orbit;  // kind po
  std::optional<TorusSolution> torus;  // kind torus
  Vec tangent;                         // full coordinates; may be empty

  SolutionKind kind() const { return torus ? SolutionKind::Torus : SolutionKind::PeriodicOrbit; }
};

/// Run directories under one root:
///   <root>/<run_id>/run.json, bd.jsonl, sol/<label>.json
class RunStore {
public:
  explicit RunStore(std::filesystem::path root);

  const std::filesystem::path& root() const { return root_; }
  std::filesystem::path run_dir(const std::string& run_id) const;
  bool exists(const std::string& run_id) const;
  std::vector<std::string> list_runs() const;

  /// Creates (or replaces a previous torcont run with) the run directory.
  void create_run(const RunInfo& info) const;
  void append_point(const std::string& run_id, const BdRow& row) const;
  void write_solution(const Snapshot& snap) const;

  RunInfo read_run(const std::string& run_id) const;
  std::vector<BdRow> read_bd(const std::string& run_id) const;
  Snapshot read_solution(const std::string& run_id, int label) const;

  /// Resolves "12", "EP:last", "TR:1", "BP:2", "EP:first" to a label.
  int resolve_label(const std::string& run_id, const std::string& selector) const;

private:
  std::filesystem::path root_;
};

BdRow bd_row_from_point(const LabeledPoint& p);

/// Start of a continuation run rebuilt from disk.
struct Restart {
  std::shared_ptr<ZeroProblem> problem;
  StartData start;
  std::string origin;
};

/// Torus snapshot -> same discretization and reference section.
Restart restart_tor2tor(const RunStore& store, const std::string& run_id, int label, const VectorField& vf);
/// TR-tagged orbit -> torus guess with 2N+1 segments; eps must be non-zero.
Restart restart_TR2tor(const RunStore& store, const std::string& run_id, int label, const VectorField& vf, int N = 10,
                       std::optional<double> eps = std::nullopt);
/// BP-tagged torus -> secondary-branch start (converged, with the new tangent).
Restart restart_BP2tor(const RunStore& store, const std::string& run_id, int label, const VectorField& vf,
                       const std::vector<std::string>& released);

/// Sampled trajectories on disk (format "torcont-samples").
struct SampleSet {
  std::vector<double> t;
  std::vector<StateMatrix> segments;
};
SampleSet read_samples(const std::filesystem::path& path);
void write_samples(const std::filesystem::path& path, const SampleSet& samples);
Restart restart_isol2tor(const std::filesystem::path& samples_path, const VectorField& vf, const Vec& p, double om1,
                         double om2, double varrho, int ntst, int degree = 4);

}  // namespace torcont
