#include "torcont/config.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "torcont/error.hpp"
#include "torcont/systems.hpp"

namespace torcont {

namespace {

using json = nlohmann::json;

[[noreturn]] void fail(const std::string& path, const std::string& msg) { throw ConfigError(path + ": " + msg); }

void allow_keys(const json& j, const std::string& path, std::initializer_list<const char*> keys) {
  if (!j.is_object()) fail(path, "expected an object");
  for (auto it = j.begin(); it != j.end(); ++it)
    if (std::find_if(keys.begin(), keys.end(), [&](const char* k) { return it.key() == k; }) == keys.end())
      fail(path + "." + it.key(), "unknown field");
}

template <class T>
T get(const json& j, const std::string& path, const char* key) {
  if (!j.contains(key)) fail(path + "." + key, "required field is missing");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    fail(path + "." + key, "has the wrong type");
  }
}

template <class T>
std::optional<T> opt(const json& j, const std::string& path, const char* key) {
  if (!j.contains(key)) return std::nullopt;
  return get<T>(j, path, key);
}

double positive(double v, const std::string& path) {
  if (!(v > 0)) fail(path, "must be positive");
  return v;
}

SourceSpec parse_source(const json& j, const std::string& path) {
  if (!j.is_object() || j.size() != 1)
    fail(path, "expected exactly one of simulate, simulate_circle, samples, TR, torus, BP");
  const std::string kind = j.begin().key();
  const json& s = j.begin().value();
  const std::string sp = path + "." + kind;
  SourceSpec src;
  if (kind == "simulate") {
    allow_keys(s, sp, {"y0", "period", "period_param", "transient_periods"});
    src.kind = SourceKind::Simulate;
    src.y0 = get<std::vector<double>>(s, sp, "y0");
    src.period = opt<double>(s, sp, "period");
    src.period_param = opt<std::string>(s, sp, "period_param");
    if (src.period.has_value() == src.period_param.has_value()) fail(sp, "give exactly one of period, period_param");
    if (src.period) positive(*src.period, sp + ".period");
    src.transient_periods = opt<double>(s, sp, "transient_periods").value_or(0.0);
    if (src.transient_periods < 0) fail(sp + ".transient_periods", "must be non-negative");
  } else if (kind == "simulate_circle") {
    allow_keys(s, sp, {"N", "center", "radius", "transient_returns", "samples_per_return", "return_param",
                       "return_time", "om1", "om2", "varrho"});
    src.kind = SourceKind::SimulateCircle;
    src.N = opt<int>(s, sp, "N").value_or(10);
    src.center = opt<std::vector<double>>(s, sp, "center").value_or(std::vector<double>{});
    src.radius = positive(opt<double>(s, sp, "radius").value_or(1.0), sp + ".radius");
    src.transient_returns = opt<int>(s, sp, "transient_returns").value_or(10);
    src.samples_per_return = opt<int>(s, sp, "samples_per_return").value_or(0);
    src.return_param = opt<std::string>(s, sp, "return_param");
    src.return_time = opt<double>(s, sp, "return_time");
    if (src.return_param.has_value() == src.return_time.has_value())
      fail(sp, "give exactly one of return_param, return_time");
    src.om1 = get<double>(s, sp, "om1");
    src.om2 = get<double>(s, sp, "om2");
    src.varrho = get<double>(s, sp, "varrho");
    if (src.N < 1) fail(sp + ".N", "must be >= 1");
    if (src.transient_returns < 0) fail(sp + ".transient_returns", "must be non-negative");
    if (src.samples_per_return < 0 || src.samples_per_return == 1)
      fail(sp + ".samples_per_return", "must be 0 (default) or >= 2");
  } else if (kind == "samples") {
    allow_keys(s, sp, {"path", "om1", "om2", "varrho"});
    src.kind = SourceKind::Samples;
    src.samples_path = get<std::string>(s, sp, "path");
    src.om1 = get<double>(s, sp, "om1");
    src.om2 = get<double>(s, sp, "om2");
    src.varrho = get<double>(s, sp, "varrho");
  } else if (kind == "TR" || kind == "torus" || kind == "BP") {
    if (kind == "TR")
      allow_keys(s, sp, {"run", "label", "N", "eps"});
    else
      allow_keys(s, sp, {"run", "label"});
    src.kind = kind == "TR" ? SourceKind::TR : kind == "torus" ? SourceKind::Torus : SourceKind::BP;
    src.run = get<std::string>(s, sp, "run");
    src.label = opt<std::string>(s, sp, "label").value_or(kind == "TR" ? "TR:1" : kind == "BP" ? "BP:1" : "EP:last");
    if (kind == "TR") {
      src.N = opt<int>(s, sp, "N").value_or(10);
      src.eps = opt<double>(s, sp, "eps");
      if (src.N < 1) fail(sp + ".N", "must be >= 1");
      if (src.eps && *src.eps == 0.0) fail(sp + ".eps", "eps = 0 is a degenerate torus; use eps > 0");
    }
  } else {
    fail(path, "unknown source '" + kind + "'");
  }
  return src;
}

ContinuationOptions parse_cont(const json& j, const std::string& path) {
  allow_keys(j, path, {"h0", "h_min", "h_max", "pt_max", "bi_direct", "max_corrector_iterations", "residual_tol",
                       "detect_bp", "detect_events"});
  ContinuationOptions o;
  o.h0 = opt<double>(j, path, "h0").value_or(o.h0);
  o.h_min = opt<double>(j, path, "h_min").value_or(o.h_min);
  o.h_max = opt<double>(j, path, "h_max").value_or(o.h_max);
  o.pt_max = opt<int>(j, path, "pt_max").value_or(o.pt_max);
  o.bi_direct = opt<bool>(j, path, "bi_direct").value_or(o.bi_direct);
  o.max_corrector_iterations = opt<int>(j, path, "max_corrector_iterations").value_or(o.max_corrector_iterations);
  o.residual_tol = opt<double>(j, path, "residual_tol").value_or(o.residual_tol);
  o.detect_bp = opt<bool>(j, path, "detect_bp").value_or(o.detect_bp);
  o.detect_events = opt<bool>(j, path, "detect_events").value_or(o.detect_events);
  if (!(o.h_min > 0)) fail(path + ".h_min", "must be positive");
  if (o.h_max < o.h_min) fail(path + ".h_max", "must be >= h_min");
  if (o.h0 < o.h_min || o.h0 > o.h_max) fail(path + ".h0", "must lie in [h_min, h_max]");
  if (o.pt_max < 0) fail(path + ".pt_max", "must be non-negative");
  if (o.max_corrector_iterations < 1) fail(path + ".max_corrector_iterations", "must be >= 1");
  return o;
}

StageConfig parse_stage(const json& j, const std::string& path, const std::vector<std::string>& system_params) {
  allow_keys(j, path, {"run_id", "type", "source", "params", "ntst", "degree", "parameters", "bounds", "cont"});
  StageConfig st;
  st.field = path;
  st.run_id = get<std::string>(j, path, "run_id");
  if (st.run_id.empty() || st.run_id.find_first_of("/\\") != std::string::npos || st.run_id == "." ||
      st.run_id == "..")
    fail(path + ".run_id", "must be a plain directory name");
  const std::string type = get<std::string>(j, path, "type");
  if (type == "po")
    st.type = SolutionKind::PeriodicOrbit;
  else if (type == "torus")
    st.type = SolutionKind::Torus;
  else
    fail(path + ".type", "must be \"po\" or \"torus\"");
  if (!j.contains("source")) fail(path + ".source", "required field is missing");
  st.source = parse_source(j.at("source"), path + ".source");

  const bool po = st.type == SolutionKind::PeriodicOrbit;
  const auto k = st.source.kind;
  if (po && k != SourceKind::Simulate) fail(path + ".source", "a po stage needs a simulate source");
  if (!po && k == SourceKind::Simulate) fail(path + ".source", "a torus stage cannot start from simulate");

  const bool fresh = k == SourceKind::Simulate || k == SourceKind::SimulateCircle || k == SourceKind::Samples;
  if (j.contains("params")) {
    if (!fresh) fail(path + ".params", "only allowed for simulate, simulate_circle and samples sources");
    const json& p = j.at("params");
    if (!p.is_object()) fail(path + ".params", "expected an object of name: value");
    for (auto it = p.begin(); it != p.end(); ++it) {
      if (std::find(system_params.begin(), system_params.end(), it.key()) == system_params.end())
        fail(path + ".params." + it.key(), "not a parameter of the system");
      if (!it.value().is_number()) fail(path + ".params." + it.key(), "must be a number");
      st.params[it.key()] = it.value().get<double>();
    }
  }
  if (fresh)
    for (const auto& name : system_params)
      if (!st.params.count(name)) fail(path + ".params." + name, "missing value for system parameter");

  if (j.contains("ntst") && !fresh) fail(path + ".ntst", "restarts keep the stored mesh");
  if (j.contains("degree") && !fresh) fail(path + ".degree", "restarts keep the stored mesh");
  st.ntst = opt<int>(j, path, "ntst").value_or(st.ntst);
  st.degree = opt<int>(j, path, "degree").value_or(st.degree);
  if (st.ntst < 1) fail(path + ".ntst", "must be >= 1");
  if (st.degree < 1 || st.degree > 7) fail(path + ".degree", "must lie in [1, 7]");

  std::vector<std::string> valid = system_params;
  if (!po) valid.insert(valid.end(), {"om1", "om2", "varrho"});
  st.parameters = get<std::vector<std::string>>(j, path, "parameters");
  if (st.parameters.empty()) fail(path + ".parameters", "needs at least one parameter");
  std::set<std::string> seen;
  for (std::size_t i = 0; i < st.parameters.size(); ++i) {
    const auto& name = st.parameters[i];
    const std::string fp = path + ".parameters[" + std::to_string(i) + "]";
    if (std::find(valid.begin(), valid.end(), name) == valid.end()) {
      std::string list;
      for (const auto& v : valid) list += (list.empty() ? "" : ", ") + v;
      fail(fp, "unknown parameter '" + name + "' (expected one of " + list + ")");
    }
    if (!seen.insert(name).second) fail(fp, "parameter '" + name + "' listed twice");
  }
  if (j.contains("bounds")) {
    const json& b = j.at("bounds");
    if (!b.is_object()) fail(path + ".bounds", "expected an object of name: [lo, hi]");
    for (auto it = b.begin(); it != b.end(); ++it) {
      const std::string fp = path + ".bounds." + it.key();
      if (std::find(valid.begin(), valid.end(), it.key()) == valid.end() && it.key() != "T")
        fail(fp, "unknown monitor");
      std::vector<double> lohi;
      try {
        lohi = it.value().get<std::vector<double>>();
      } catch (const json::exception&) {
        fail(fp, "expected [lo, hi]");
      }
      if (lohi.size() != 2 || !(lohi[0] < lohi[1])) fail(fp, "expected [lo, hi] with lo < hi");
      st.bounds.push_back({it.key(), lohi[0], lohi[1]});
    }
  }
  if (j.contains("cont")) st.cont = parse_cont(j.at("cont"), path + ".cont");
  return st;
}

}  // namespace

const char* to_string(SourceKind k) {
  switch (k) {
    case SourceKind::Simulate: return "simulate";
    case SourceKind::SimulateCircle: return "simulate_circle";
    case SourceKind::Samples: return "samples";
    case SourceKind::TR: return "TR";
    case SourceKind::Torus: return "torus";
    case SourceKind::BP: return "BP";
  }
  return "simulate";
}

RunConfig parse_config(const std::string& text, const std::filesystem::path& base_dir) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  allow_keys(j, "config", {"system", "stages"});
  RunConfig cfg;
  cfg.base_dir = base_dir;
  cfg.system = get<std::string>(j, "config", "system");
  std::vector<std::string> params;
  try {
    params = resolve_system(cfg.system).param_names();
  } catch (const NotFoundError& e) {
    fail("config.system", e.what());
  } catch (const InputError& e) {
    fail("config.system", e.what());
  }
  if (!j.contains("stages") || !j.at("stages").is_array() || j.at("stages").empty())
    fail("config.stages", "expected a non-empty array");
  std::set<std::string> ids;
  for (std::size_t i = 0; i < j.at("stages").size(); ++i) {
    const std::string path = "config.stages[" + std::to_string(i) + "]";
    auto st = parse_stage(j.at("stages")[i], path, params);
    if (!ids.insert(st.run_id).second) fail(path + ".run_id", "duplicate run id '" + st.run_id + "'");
    if (st.source.kind == SourceKind::Samples && st.source.samples_path.is_relative())
      st.source.samples_path = base_dir / st.source.samples_path;
    cfg.stages.push_back(std::move(st));
  }
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw NotFoundError("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path.has_parent_path() ? path.parent_path() : std::filesystem::path("."));
}

}  // namespace torcont
