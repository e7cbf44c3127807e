#include "torcont/store.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "torcont/error.hpp"

namespace torcont {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

constexpr const char* kRunFormat = "torcont-run";
constexpr const char* kSolutionFormat = "torcont-solution";
constexpr const char* kSamplesFormat = "torcont-samples";

json vec_json(const Vec& v) { return json(std::vector<double>(v.data(), v.data() + v.size())); }

Vec json_vec(const json& j) {
  const auto values = j.get<std::vector<double>>();
  return Eigen::Map<const Vec>(values.data(), static_cast<Index>(values.size()));
}

json states_json(const StateMatrix& x) {
  return json{{"rows", x.rows()}, {"cols", x.cols()}, {"data", std::vector<double>(x.data(), x.data() + x.size())}};
}

StateMatrix json_states(const json& j) {
  const Index rows = j.at("rows").get<Index>(), cols = j.at("cols").get<Index>();
  const auto data = j.at("data").get<std::vector<double>>();
  if (static_cast<Index>(data.size()) != rows * cols) throw FormatError("state block size does not match rows x cols");
  return Eigen::Map<const StateMatrix>(data.data(), rows, cols);
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw NotFoundError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

void write_json(const fs::path& path, const json& j) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp);
    if (!out) throw Error("cannot write " + tmp.string());
    out << j.dump() << '\n';
    if (!out) throw Error("write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

void check_format(const json& j, const char* format, int version, const fs::path& path) {
  if (!j.is_object() || !j.contains("format") || j.at("format") != format)
    throw FormatError(path.string() + ": not a " + std::string(format) + " file");
  const int v = j.at("version").get<int>();
  if (v != version)
    throw FormatError(path.string() + ": " + format + " version " + std::to_string(v) + " is not supported (expected " +
                      std::to_string(version) + ")");
}

template <class F>
auto guarded(const fs::path& path, F&& f) {
  try {
    return f();
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

json options_json(const ContinuationOptions& o) {
  return json{{"h0", o.h0},
              {"h_min", o.h_min},
              {"h_max", o.h_max},
              {"pt_max", o.pt_max},
              {"bi_direct", o.bi_direct},
              {"max_corrector_iterations", o.max_corrector_iterations},
              {"fast_iterations", o.fast_iterations},
              {"residual_tol", o.residual_tol},
              {"min_tangent_cos", o.min_tangent_cos},
              {"detect_bp", o.detect_bp},
              {"detect_events", o.detect_events},
              {"event_tol", o.event_tol},
              {"bracket_tol", o.bracket_tol},
              {"max_bisections", o.max_bisections}};
}

ContinuationOptions json_options(const json& j) {
  ContinuationOptions o;
  o.h0 = j.at("h0");
  o.h_min = j.at("h_min");
  o.h_max = j.at("h_max");
  o.pt_max = j.at("pt_max");
  o.bi_direct = j.at("bi_direct");
  o.max_corrector_iterations = j.at("max_corrector_iterations");
  o.fast_iterations = j.at("fast_iterations");
  o.residual_tol = j.at("residual_tol");
  o.min_tangent_cos = j.at("min_tangent_cos");
  o.detect_bp = j.at("detect_bp");
  o.detect_events = j.at("detect_events");
  o.event_tol = j.at("event_tol");
  o.bracket_tol = j.at("bracket_tol");
  o.max_bisections = j.at("max_bisections");
  return o;
}

json mesh_json(const SegmentMesh& m) { return json{{"ntst", m.ntst}, {"degree", m.degree}}; }

std::shared_ptr<const SegmentMesh> json_mesh(const json& j) {
  return make_mesh(j.at("ntst").get<int>(), j.at("degree").get<int>());
}

json monitors_json(const std::vector<Monitor>& monitors) {
  json j = json::object();
  for (const auto& [k, v] : monitors) j[k] = v;
  return j;
}

std::vector<Monitor> json_monitors(const json& j) {
  std::vector<Monitor> out;
  for (auto it = j.begin(); it != j.end(); ++it) out.emplace_back(it.key(), it.value().get<double>());
  return out;
}

SolutionKind kind_from_string(const std::string& s) {
  if (s == "po") return SolutionKind::PeriodicOrbit;
  if (s == "torus") return SolutionKind::Torus;
  throw FormatError("unknown solution kind '" + s + "'");
}

}  // namespace

const char* to_string(SolutionKind k) { return k == SolutionKind::Torus ? "torus" : "po"; }

std::optional<double> BdRow::monitor(const std::string& name) const {
  for (const auto& [k, v] : monitors)
    if (k == name) return v;
  return std::nullopt;
}

BdRow bd_row_from_point(const LabeledPoint& p) {
  BdRow r;
  r.label = p.label;
  r.type = p.type;
  r.pt = p.pt;
  r.direction = p.direction;
  r.monitors = p.monitors;
  r.residual_norm = p.residual_norm;
  r.iterations = p.iterations;
  r.step = p.step;
  r.note = p.note;
  return r;
}

// ---------------------------------------------------------------- RunStore

RunStore::RunStore(fs::path root) : root_(std::move(root)) {}

fs::path RunStore::run_dir(const std::string& run_id) const {
  if (run_id.empty() || run_id.find('/') != std::string::npos || run_id == "." || run_id == "..")
    throw ConfigError("invalid run id '" + run_id + "'");
  return root_ / run_id;
}

bool RunStore::exists(const std::string& run_id) const { return fs::exists(run_dir(run_id) / "run.json"); }

std::vector<std::string> RunStore::list_runs() const {
  std::vector<std::string> out;
  if (!fs::exists(root_)) return out;
  for (const auto& entry : fs::directory_iterator(root_))
    if (entry.is_directory() && fs::exists(entry.path() / "run.json")) out.push_back(entry.path().filename().string());
  std::sort(out.begin(), out.end());
  return out;
}

void RunStore::create_run(const RunInfo& info) const {
  const fs::path dir = run_dir(info.run_id);
  if (fs::exists(dir)) {
    // Only ever replace something this tool wrote.
    const fs::path marker = dir / "run.json";
    if (!fs::exists(marker)) throw ConfigError("refusing to overwrite non-run directory " + dir.string());
    check_format(read_json(marker), kRunFormat, kRunFormatVersion, marker);
    fs::remove_all(dir);
  }
  fs::create_directories(dir / "sol");
  json bounds = json::array();
  for (const auto& b : info.bounds) bounds.push_back(json{{"name", b.name}, {"lo", b.lo}, {"hi", b.hi}});
  json j{{"format", kRunFormat},
         {"version", kRunFormatVersion},
         {"run_id", info.run_id},
         {"kind", to_string(info.kind)},
         {"system", info.system},
         {"released", info.released},
         {"bounds", bounds},
         {"options", options_json(info.options)},
         {"origin", info.origin}};
  write_json(dir / "run.json", j);
  std::ofstream(dir / "bd.jsonl", std::ios::trunc);
}

void RunStore::append_point(const std::string& run_id, const BdRow& row) const {
  json j{{"label", row.label},
         {"type", to_string(row.type)},
         {"pt", row.pt},
         {"dir", row.direction},
         {"monitors", monitors_json(row.monitors)},
         {"residual", row.residual_norm},
         {"iterations", row.iterations},
         {"step", row.step},
         {"note", row.note}};
  std::ofstream out(run_dir(run_id) / "bd.jsonl", std::ios::app);
  if (!out) throw Error("cannot append to bd table of run '" + run_id + "'");
  out << j.dump() << '\n';
}

void RunStore::write_solution(const Snapshot& s) const {
  json j{{"format", kSolutionFormat},
         {"version", kSolutionFormatVersion},
         {"run_id", s.run_id},
         {"label", s.label},
         {"type", to_string(s.type)},
         {"kind", to_string(s.kind())},
         {"system", s.system},
         {"released", s.released}};
  if (s.torus) {
    const auto& t = *s.torus;
    json segs = json::array();
    for (const auto& x : t.segments) segs.push_back(states_json(x));
    j["mesh"] = mesh_json(*t.mesh);
    j["N"] = t.N();
    j["T0"] = t.T0;
    j["T"] = t.T;
    j["p"] = vec_json(t.p);
    j["om1"] = t.om1;
    j["om2"] = t.om2;
    j["varrho"] = t.varrho;
    j["segments"] = segs;
    j["reference"] = json{{"v00", vec_json(t.reference.v00)},
                          {"v_phi", vec_json(t.reference.v_phi)},
                          {"v_t", vec_json(t.reference.v_t)}};
  } else if (s.orbit) {
    const auto& o = *s.orbit;
    j["mesh"] = mesh_json(*o.traj.mesh);
    j["T"] = o.traj.duration;
    j["t_offset"] = o.traj.t_offset;
    j["x_bp"] = states_json(o.traj.x_bp);
    j["p"] = vec_json(o.p);
    j["reference"] = json{{"x_bp", states_json(o.reference.x_bp)},
                          {"T", o.reference.duration},
                          {"p", vec_json(o.reference_p)}};
  } else {
    throw InputError("snapshot carries no solution");
  }
  j["tangent"] = vec_json(s.tangent);
  write_json(run_dir(s.run_id) / "sol" / (std::to_string(s.label) + ".json"), j);
}

RunInfo RunStore::read_run(const std::string& run_id) const {
  const fs::path path = run_dir(run_id) / "run.json";
  if (!fs::exists(path)) throw NotFoundError("run '" + run_id + "' not found under " + root_.string());
  const json j = read_json(path);
  check_format(j, kRunFormat, kRunFormatVersion, path);
  return guarded(path, [&] {
    RunInfo info;
    info.run_id = j.at("run_id");
    info.kind = kind_from_string(j.at("kind"));
    info.system = j.at("system");
    info.released = j.at("released").get<std::vector<std::string>>();
    for (const auto& b : j.at("bounds")) info.bounds.push_back({b.at("name"), b.at("lo"), b.at("hi")});
    info.options = json_options(j.at("options"));
    info.origin = j.at("origin");
    return info;
  });
}

std::vector<BdRow> RunStore::read_bd(const std::string& run_id) const {
  const fs::path path = run_dir(run_id) / "bd.jsonl";
  if (!fs::exists(path)) throw NotFoundError("run '" + run_id + "' not found under " + root_.string());
  std::ifstream in(path);
  std::vector<BdRow> rows;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      BdRow r;
      r.label = j.at("label");
      r.type = point_type_from_string(j.at("type"));
      r.pt = j.at("pt");
      r.direction = j.at("dir");
      r.monitors = json_monitors(j.at("monitors"));
      r.residual_norm = j.at("residual");
      r.iterations = j.at("iterations");
      r.step = j.at("step");
      r.note = j.at("note");
      rows.push_back(std::move(r));
    } catch (const json::exception& e) {
      throw FormatError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return rows;
}

Snapshot RunStore::read_solution(const std::string& run_id, int label) const {
  const fs::path path = run_dir(run_id) / "sol" / (std::to_string(label) + ".json");
  if (!fs::exists(run_dir(run_id) / "run.json")) throw NotFoundError("run '" + run_id + "' not found");
  if (!fs::exists(path)) throw NotFoundError("run '" + run_id + "' has no solution with label " + std::to_string(label));
  const json j = read_json(path);
  check_format(j, kSolutionFormat, kSolutionFormatVersion, path);
  return guarded(path, [&] {
    Snapshot s;
    s.run_id = j.at("run_id");
    s.label = j.at("label");
    s.type = point_type_from_string(j.at("type"));
    s.system = j.at("system");
    s.released = j.at("released").get<std::vector<std::string>>();
    s.tangent = json_vec(j.at("tangent"));
    const auto mesh = json_mesh(j.at("mesh"));
    if (kind_from_string(j.at("kind")) == SolutionKind::Torus) {
      TorusSolution t;
      t.mesh = mesh;
      t.coupling = std::make_shared<const CouplingMatrices>(dft_matrix(j.at("N").get<int>()));
      t.T0 = j.at("T0");
      t.T = j.at("T");
      t.p = json_vec(j.at("p"));
      t.om1 = j.at("om1");
      t.om2 = j.at("om2");
      t.varrho = j.at("varrho");
      for (const auto& seg : j.at("segments")) t.segments.push_back(json_states(seg));
      if (static_cast<int>(t.segments.size()) != t.coupling->n_seg)
        throw FormatError(path.string() + ": segment count does not match N");
      const auto& r = j.at("reference");
      t.reference.v00 = json_vec(r.at("v00"));
      t.reference.v_phi = json_vec(r.at("v_phi"));
      t.reference.v_t = json_vec(r.at("v_t"));
      s.torus = std::move(t);
    } else {
      PeriodicOrbit o;
      o.traj.mesh = mesh;
      o.traj.duration = j.at("T");
      o.traj.t_offset = j.at("t_offset");
      o.traj.x_bp = json_states(j.at("x_bp"));
      o.p = json_vec(j.at("p"));
      const auto& r = j.at("reference");
      o.reference.mesh = mesh;
      o.reference.x_bp = json_states(r.at("x_bp"));
      o.reference.duration = r.at("T");
      o.reference_p = json_vec(r.at("p"));
      s.orbit = std::move(o);
    }
    return s;
  });
}

int RunStore::resolve_label(const std::string& run_id, const std::string& selector) const {
  const auto rows = read_bd(run_id);
  const auto colon = selector.find(':');
  if (colon == std::string::npos) {
    int label = 0;
    try {
      std::size_t used = 0;
      label = std::stoi(selector, &used);
      if (used != selector.size()) throw std::invalid_argument(selector);
    } catch (const std::exception&) {
      throw ConfigError("label selector '" + selector + "' is neither a number nor TYPE:index");
    }
    for (const auto& r : rows)
      if (r.label == label) return label;
    throw NotFoundError("run '" + run_id + "' has no label " + selector);
  }
  const PointType type = [&] {
    try {
      return point_type_from_string(selector.substr(0, colon));
    } catch (const FormatError&) {
      throw ConfigError("label selector '" + selector + "': unknown point type");
    }
  }();
  std::vector<int> labels;
  for (const auto& r : rows)
    if (r.type == type) labels.push_back(r.label);
  const std::string which = selector.substr(colon + 1);
  if (labels.empty()) throw NotFoundError("run '" + run_id + "' has no " + selector.substr(0, colon) + " points");
  if (which == "last") return labels.back();
  if (which == "first") return labels.front();
  int k = 0;
  try {
    k = std::stoi(which);
  } catch (const std::exception&) {
    throw ConfigError("label selector '" + selector + "': index must be a number, 'first' or 'last'");
  }
  if (k < 1 || k > static_cast<int>(labels.size()))
    throw NotFoundError("run '" + run_id + "' has " + std::to_string(labels.size()) + " " +
                        selector.substr(0, colon) + " points, asked for " + which);
  return labels[static_cast<std::size_t>(k - 1)];
}

// ---------------------------------------------------------------- restarts

namespace {

void check_system(const Snapshot& s, const VectorField& vf) {
  const Index n = s.torus ? s.torus->dim() : s.orbit->traj.dim();
  const Index q = s.torus ? s.torus->p.size() : s.orbit->p.size();
  if (n != vf.dim_state() || q != vf.dim_params())
    throw ConfigError("snapshot of run '" + s.run_id + "' was computed for system '" + s.system +
                      "', which does not match '" + vf.name() + "'");
}

std::string origin_of(const char* how, const std::string& run_id, int label) {
  return std::string(how) + " " + run_id + ":" + std::to_string(label);
}

}  // namespace

Restart restart_tor2tor(const RunStore& store, const std::string& run_id, int label, const VectorField& vf) {
  Snapshot s = store.read_solution(run_id, label);
  if (!s.torus) throw KindError("label " + std::to_string(label) + " of run '" + run_id + "' is not a torus");
  check_system(s, vf);
  auto problem = std::make_shared<TorusProblem>(vf, *s.torus);
  Restart r;
  r.start.u = problem->pack(*s.torus);
  if (s.tangent.size() == r.start.u.size()) r.start.tangent_seed = s.tangent;
  r.problem = problem;
  r.origin = origin_of("tor2tor", run_id, label);
  return r;
}

Restart restart_TR2tor(const RunStore& store, const std::string& run_id, int label, const VectorField& vf, int N,
                       std::optional<double> eps) {
  Snapshot s = store.read_solution(run_id, label);
  if (!s.orbit) throw KindError("label " + std::to_string(label) + " of run '" + run_id + "' is not a periodic orbit");
  if (s.type != PointType::TR)
    throw KindError("label " + std::to_string(label) + " of run '" + run_id + "' is a " + to_string(s.type) +
                    " point, not TR");
  if (eps && *eps == 0.0)
    throw InputError("eps = 0 gives a degenerate torus (every segment equals the orbit); use eps > 0");
  check_system(s, vf);
  const FloquetData floq = floquet(vf, *s.orbit);
  if (!floq.tr_angle) throw KindError("orbit at label " + std::to_string(label) + " has no complex multiplier pair");
  const TrInitialization init = init_from_TR(vf, *s.orbit, floq, N, eps);
  auto problem = std::make_shared<TorusProblem>(vf, init.torus);
  Restart r;
  r.start.u = problem->pack(init.torus);
  Vec seed = Vec::Zero(r.start.u.size());
  Index off = 0;
  for (const auto& d : init.direction) {
    seed.segment(off, d.size()) = Eigen::Map<const Vec>(d.data(), d.size());
    off += d.size();
  }
  r.start.tangent_seed = seed;
  r.problem = problem;
  r.origin = origin_of("TR2tor", run_id, label);
  return r;
}

Restart restart_BP2tor(const RunStore& store, const std::string& run_id, int label, const VectorField& vf,
                       const std::vector<std::string>& released) {
  Snapshot s = store.read_solution(run_id, label);
  if (!s.torus) throw KindError("label " + std::to_string(label) + " of run '" + run_id + "' is not a torus");
  if (s.type != PointType::BP)
    throw KindError("label " + std::to_string(label) + " of run '" + run_id + "' is a " + to_string(s.type) +
                    " point, not BP");
  check_system(s, vf);
  auto problem = std::make_shared<TorusProblem>(vf, *s.torus);
  const Vec u = problem->pack(*s.torus);
  if (s.tangent.size() != u.size()) throw FormatError("BP snapshot lacks its incoming tangent");
  Restart r;
  r.start = switch_branch(problem, released, u, s.tangent);
  r.problem = problem;
  r.origin = origin_of("BP2tor", run_id, label);
  return r;
}

// ---------------------------------------------------------------- samples

SampleSet read_samples(const fs::path& path) {
  const json j = read_json(path);
  check_format(j, kSamplesFormat, 1, path);
  return guarded(path, [&] {
    SampleSet s;
    s.t = j.at("t").get<std::vector<double>>();
    for (const auto& seg : j.at("segments")) s.segments.push_back(json_states(seg));
    return s;
  });
}

void write_samples(const fs::path& path, const SampleSet& samples) {
  json segs = json::array();
  for (const auto& s : samples.segments) segs.push_back(states_json(s));
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  write_json(path, json{{"format", kSamplesFormat}, {"version", 1}, {"t", samples.t}, {"segments", segs}});
}

Restart restart_isol2tor(const fs::path& samples_path, const VectorField& vf, const Vec& p, double om1, double om2,
                         double varrho, int ntst, int degree) {
  const SampleSet s = read_samples(samples_path);
  const TorusSolution sol = init_from_samples(vf, s.t, s.segments, p, om1, om2, varrho, ntst, degree);
  auto problem = std::make_shared<TorusProblem>(vf, sol);
  Restart r;
  r.start.u = problem->pack(sol);
  r.problem = problem;
  r.origin = "isol2tor " + samples_path.string();
  return r;
}

}  // namespace torcont
