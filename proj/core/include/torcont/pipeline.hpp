#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "torcont/config.hpp"
#include "torcont/store.hpp"

namespace torcont {

/// Leading entries of `parameters` that must be released so that the problem
/// has a one-dimensional solution manifold.  Throws ConfigError if too few
/// names are given.
std::vector<std::string> released_prefix(const ZeroProblem& problem, const std::vector<std::string>& parameters,
                                         const std::string& field = "parameters");

/// 2N+1 trajectories started on a circle in the (x1, x2) plane, integrated for
/// transient_returns returns and then sampled over one return.
SampleSet simulate_circle(const VectorField& vf, const Vec& p, const SourceSpec& src);

struct StageResult {
  std::string run_id;
  Branch branch;
};

/// Builds the start of one stage (from disk for restarts), runs the
/// continuation and writes run.json, bd.jsonl and one snapshot per label.  Rows
/// are echoed to `out` when it is non-null.
StageResult run_stage(const RunConfig& cfg, const StageConfig& stage, const RunStore& store, std::ostream* out);

/// Runs every stage in order, or only the one with run id `only` when non-empty.
std::vector<StageResult> run_config(const RunConfig& cfg, const RunStore& store, std::ostream* out,
                                    const std::string& only = {});

/// Forward-simulation check of a stored torus.
InvarianceReport validate_stored(const RunStore& store, const std::string& run_id, const std::string& label,
                                 int returns);

/// Plain-text surface grid: one line "theta1 theta2 x1 .. xn" per node, theta1
/// blocks separated by blank lines.
void write_grid(std::ostream& os, const TorusMesh& mesh);

/// Requested monitor columns of a run's bd table; `with_labels` prepends label
/// and point type.
void write_bd_columns(std::ostream& os, const std::vector<BdRow>& rows, const std::vector<std::string>& columns,
                      bool with_labels);

/// Per-point summary line as printed by run_stage.
std::string format_row(const BdRow& row);

}  // namespace torcont
