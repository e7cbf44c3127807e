#include "torcont/pipeline.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>
#include <ostream>

#include "torcont/error.hpp"
#include "torcont/systems.hpp"

namespace torcont {

namespace {

Vec stage_params(const VectorField& vf, const StageConfig& stage) {
  Vec p(vf.dim_params());
  for (int i = 0; i < vf.dim_params(); ++i) p(i) = stage.params.at(vf.param_names()[static_cast<std::size_t>(i)]);
  return p;
}

double param_value(const VectorField& vf, const Vec& p, const std::string& name, const std::string& field) {
  try {
    return p(vf.param_index(name));
  } catch (const InputError&) {
    throw ConfigError(field + ": unknown parameter '" + name + "'");
  }
}

Restart build_start(const RunConfig& cfg, const StageConfig& stage, const RunStore& store, const VectorField& vf) {
  const SourceSpec& src = stage.source;
  const std::string field = stage.field + ".source";
  switch (src.kind) {
    case SourceKind::Simulate: {
      const Vec p = stage_params(vf, stage);
      if (static_cast<int>(src.y0.size()) != vf.dim_state())
        throw ConfigError(field + ".simulate.y0: expected " + std::to_string(vf.dim_state()) + " components");
      const double period = src.period ? *src.period
                                       : 2 * std::numbers::pi /
                                             param_value(vf, p, *src.period_param, field + ".simulate.period_param");
      if (!(period > 0) || !std::isfinite(period)) throw ConfigError(field + ".simulate: period must be positive");
      const Vec y0 = Eigen::Map<const Vec>(src.y0.data(), static_cast<Index>(src.y0.size()));
      auto po = po_from_simulation(vf, y0, p, src.transient_periods * period, period, stage.ntst, stage.degree);
      Restart r;
      r.problem = std::make_shared<PoProblem>(vf, po);
      r.start.u = static_cast<PoProblem&>(*r.problem).pack(po);
      r.origin = "simulation from y0";
      return r;
    }
    case SourceKind::SimulateCircle: {
      const Vec p = stage_params(vf, stage);
      // Staged next to the run directory; run_stage moves it in once the run exists.
      std::filesystem::create_directories(store.root());
      const auto path = store.root() / ("." + stage.run_id + ".samples.json");
      write_samples(path, simulate_circle(vf, p, src));
      return restart_isol2tor(path, vf, p, src.om1, src.om2, src.varrho, stage.ntst, stage.degree);
    }
    case SourceKind::Samples:
      return restart_isol2tor(src.samples_path, vf, stage_params(vf, stage), src.om1, src.om2, src.varrho, stage.ntst,
                              stage.degree);
    case SourceKind::TR:
      return restart_TR2tor(store, src.run, store.resolve_label(src.run, src.label), vf, src.N, src.eps);
    case SourceKind::Torus:
      return restart_tor2tor(store, src.run, store.resolve_label(src.run, src.label), vf);
    case SourceKind::BP: {
      // The secondary branch keeps the released set of the run that found the BP.
      const auto info = store.read_run(src.run);
      return restart_BP2tor(store, src.run, store.resolve_label(src.run, src.label), vf, info.released);
    }
  }
  (void)cfg;
  throw ConfigError(field + ": unsupported source");
}

Snapshot snapshot_of(const ZeroProblem& problem, const LabeledPoint& pt, const std::string& run_id,
                     const std::string& system, const std::vector<std::string>& released) {
  Snapshot s;
  s.label = pt.label;
  s.type = pt.type;
  s.run_id = run_id;
  s.system = system;
  s.released = released;
  if (const auto* po = dynamic_cast<const PoProblem*>(&problem))
    s.orbit = po->unpack(pt.u);
  else if (const auto* tor = dynamic_cast<const TorusProblem*>(&problem))
    s.torus = tor->unpack(pt.u);
  else
    throw KindError("cannot store solutions of this problem type");
  // RO tangents are not needed for restarts; special points keep theirs.
  if (pt.type != PointType::RO) s.tangent = pt.tangent;
  return s;
}

std::string header_of(const std::vector<Monitor>& monitors) {
  std::string h = "  LAB  TYPE   PT DIR      |F|    IT        h";
  for (const auto& [name, value] : monitors) {
    char buf[32];
    std::snprintf(buf, sizeof buf, " %14s", name.c_str());
    h += buf;
  }
  return h;
}

}  // namespace

std::vector<std::string> released_prefix(const ZeroProblem& problem, const std::vector<std::string>& parameters,
                                         const std::string& field) {
  const Index deficit = dimension_deficit(problem, {});
  const Index needed = 1 - deficit;
  if (needed < 0)
    throw ConfigError(field + ": problem is overdetermined by " + std::to_string(-needed) + " with no released parameters");
  if (static_cast<Index>(parameters.size()) < needed)
    throw ConfigError(field + ": " + std::to_string(needed) + " parameters must be released for a one-dimensional family, got " +
                      std::to_string(parameters.size()));
  return {parameters.begin(), parameters.begin() + needed};
}

SampleSet simulate_circle(const VectorField& vf, const Vec& p, const SourceSpec& src) {
  const int n = vf.dim_state();
  if (n < 2) throw InputError("simulate_circle needs at least two state components");
  Vec center = Vec::Zero(n);
  if (!src.center.empty()) {
    if (static_cast<int>(src.center.size()) != n)
      throw InputError("simulate_circle: center needs " + std::to_string(n) + " components");
    center = Eigen::Map<const Vec>(src.center.data(), n);
  }
  const double t_ret = src.return_time ? *src.return_time : 2 * std::numbers::pi / p(vf.param_index(*src.return_param));
  if (!(t_ret > 0) || !std::isfinite(t_ret)) throw InputError("simulate_circle: return time must be positive");
  double transient = src.transient_returns * t_ret;
  // Forced fields: sample time must be the forcing time modulo its period.
  if (const auto f = vf.forcing_param_index()) {
    const double period = 2 * std::numbers::pi / p(*f);
    transient = std::ceil(transient / period - 1e-9) * period;
  }
  const int segs = 2 * src.N + 1;
  const int m = src.samples_per_return > 0 ? src.samples_per_return : 10 * segs;

  SampleSet out;
  out.t.resize(static_cast<std::size_t>(m));
  for (int k = 0; k < m; ++k) out.t[static_cast<std::size_t>(k)] = t_ret * k / (m - 1);

  std::vector<double> t_out{0.0};
  for (double s : out.t)
    if (transient + s > 0) t_out.push_back(transient + s);
  const bool has_start = transient == 0;

  IvpOptions opts;
  opts.rel_tol = 1e-10;
  opts.abs_tol = 1e-12;
  for (int j = 0; j < segs; ++j) {
    const double phi = 2 * std::numbers::pi * j / segs;
    Vec y0 = center;
    y0(0) += src.radius * std::cos(phi);
    y0(1) += src.radius * std::sin(phi);
    const auto sol = integrate(vf, t_out, y0, p, opts);
    StateMatrix x(m, n);
    for (int k = 0; k < m; ++k) x.row(k) = sol.y[static_cast<std::size_t>(has_start ? k : k + 1)].transpose();
    out.segments.push_back(std::move(x));
  }
  return out;
}

StageResult run_stage(const RunConfig& cfg, const StageConfig& stage, const RunStore& store, std::ostream* out) {
  const VectorField vf = resolve_system(cfg.system);
  // Restarts read their source before this run's directory is (re)created.
  Restart start = build_start(cfg, stage, store, vf);
  const bool is_torus = dynamic_cast<const TorusProblem*>(start.problem.get()) != nullptr;
  if (is_torus != (stage.type == SolutionKind::Torus))
    throw ConfigError(stage.field + ".type: does not match the source");

  ContinuationProblem cp;
  cp.problem = start.problem;
  cp.released = released_prefix(*start.problem, stage.parameters, stage.field + ".parameters");
  cp.bounds = stage.bounds;
  RunInfo info;
  info.run_id = stage.run_id;
  info.kind = stage.type;
  info.system = cfg.system;
  info.released = cp.released;
  info.bounds = stage.bounds;
  info.options = stage.cont;
  info.origin = start.origin;
  const bool staged_samples = stage.source.kind == SourceKind::SimulateCircle;
  if (staged_samples) info.origin = "isol2tor " + (store.run_dir(stage.run_id) / "samples.json").string();
  store.create_run(info);
  if (staged_samples)
    std::filesystem::rename(store.root() / ("." + stage.run_id + ".samples.json"),
                            store.run_dir(stage.run_id) / "samples.json");

  bool header = false;
  auto on_point = [&](const LabeledPoint& pt) {
    const BdRow row = bd_row_from_point(pt);
    store.append_point(stage.run_id, row);
    store.write_solution(snapshot_of(*cp.problem, pt, stage.run_id, cfg.system, cp.released));
    if (out) {
      if (!header) {
        *out << "run " << stage.run_id << ": " << start.origin << "\n" << header_of(row.monitors) << "\n";
        header = true;
      }
      *out << format_row(row) << "\n";
    }
  };
  StageResult res;
  res.run_id = stage.run_id;
  res.branch = run(cp, start.start, stage.cont, on_point);
  if (out)
    for (const auto& d : res.branch.diagnostics) *out << "  note: " << d << "\n";
  return res;
}

std::vector<StageResult> run_config(const RunConfig& cfg, const RunStore& store, std::ostream* out,
                                    const std::string& only) {
  std::vector<StageResult> results;
  bool found = only.empty();
  for (const auto& stage : cfg.stages) {
    if (!only.empty() && stage.run_id != only) continue;
    found = true;
    results.push_back(run_stage(cfg, stage, store, out));
  }
  if (!found) throw NotFoundError("no stage with run id '" + only + "' in the config");
  return results;
}

InvarianceReport validate_stored(const RunStore& store, const std::string& run_id, const std::string& label,
                                 int returns) {
  if (returns < 1) throw InputError("returns must be >= 1");
  const Snapshot snap = store.read_solution(run_id, store.resolve_label(run_id, label));
  if (!snap.torus) throw KindError("label " + label + " of run " + run_id + " is not a torus");
  return validate_invariance(resolve_system(snap.system), *snap.torus, returns);
}

void write_grid(std::ostream& os, const TorusMesh& mesh) {
  const int n = mesh.points.empty() || mesh.points.front().empty()
                    ? 0
                    : static_cast<int>(mesh.points.front().front().size());
  os << "# torcont torus grid\n# theta1_count " << mesh.theta1.size() << " theta2_count " << mesh.theta2.size()
     << " dim " << n << "\n# theta1 theta2";
  for (int i = 0; i < n; ++i) os << " x" << (i + 1);
  os << "\n";
  char buf[64];
  for (std::size_t a = 0; a < mesh.theta1.size(); ++a) {
    if (a > 0) os << "\n";
    for (std::size_t b = 0; b < mesh.theta2.size(); ++b) {
      std::snprintf(buf, sizeof buf, "%.17g %.17g", mesh.theta1[a], mesh.theta2[b]);
      os << buf;
      for (int i = 0; i < n; ++i) {
        std::snprintf(buf, sizeof buf, " %.17g", mesh.points[a][b](i));
        os << buf;
      }
      os << "\n";
    }
  }
}

void write_bd_columns(std::ostream& os, const std::vector<BdRow>& rows, const std::vector<std::string>& columns,
                      bool with_labels) {
  os << "#";
  if (with_labels) os << " label type";
  for (const auto& c : columns) os << " " << c;
  os << "\n";
  char buf[64];
  for (const auto& row : rows) {
    std::string line;
    if (with_labels) line = std::to_string(row.label) + " " + to_string(row.type);
    for (const auto& c : columns) {
      const auto v = row.monitor(c);
      if (!v) throw NotFoundError("run has no monitor '" + c + "'");
      std::snprintf(buf, sizeof buf, "%.17g", *v);
      if (!line.empty()) line += " ";
      line += buf;
    }
    os << line << "\n";
  }
}

std::string format_row(const BdRow& row) {
  char buf[96];
  std::snprintf(buf, sizeof buf, "%5d  %-4s %4d %3d %8.2e %5d %8.2e", row.label, to_string(row.type), row.pt,
                row.direction, row.residual_norm, row.iterations, row.step);
  std::string s = buf;
  for (const auto& [name, value] : row.monitors) {
    std::snprintf(buf, sizeof buf, " %14.7e", value);
    s += buf;
  }
  if (!row.note.empty()) s += "  " + row.note;
  return s;
}

}  // namespace torcont
