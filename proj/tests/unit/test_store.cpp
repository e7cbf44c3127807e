#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

#include "torcont/config.hpp"
#include "torcont/error.hpp"
#include "torcont/pipeline.hpp"
#include "torcont/store.hpp"
#include "torcont/systems.hpp"

using namespace torcont;
namespace fs = std::filesystem;

namespace {

constexpr double kPi = std::numbers::pi;

// One Langford orbit branch through the TR and a short torus branch from it,
// computed once for the whole file.
const RunStore& stored_runs() {
  static const RunStore store = [] {
    const fs::path root = fs::path(TORCONT_TEST_TMP) / "store_runs";
    fs::remove_all(root);
    const char* text = R"({
      "system": "langford",
      "stages": [
        {"run_id": "po", "type": "po",
         "source": {"simulate": {"y0": [0.3, 0.4, 0.0], "period_param": "om", "transient_periods": 100}},
         "params": {"om": 3.5, "rho": 1.5, "eps": 0.0}, "ntst": 10, "degree": 4,
         "parameters": ["rho"], "bounds": {"rho": [0.5, 2.0]},
         "cont": {"h_max": 0.5, "pt_max": 40}},
        {"run_id": "tor", "type": "torus",
         "source": {"TR": {"run": "po", "label": "TR:1", "N": 3}},
         "parameters": ["varrho", "rho", "om1", "om2", "eps"],
         "cont": {"h_max": 0.5, "pt_max": 3, "bi_direct": false}}
      ]})";
    RunStore s(root);
    run_config(parse_config(text), s, nullptr);
    return s;
  }();
  return store;
}

Vec random_vec(std::mt19937& rng, Index n) {
  std::uniform_real_distribution<double> u(-3, 3);
  Vec v(n);
  for (auto& x : v) x = u(rng) / 7.0;  // full-mantissa values
  return v;
}

StateMatrix random_state(std::mt19937& rng, Index rows, Index cols) {
  const Vec v = random_vec(rng, rows * cols);
  return Eigen::Map<const StateMatrix>(v.data(), rows, cols);
}

RunStore empty_store(const std::string& name) {
  const fs::path root = fs::path(TORCONT_TEST_TMP) / name;
  fs::remove_all(root);
  return RunStore(root);
}

RunInfo fresh_run(const RunStore& store, const std::string& id, SolutionKind kind) {
  RunInfo info;
  info.run_id = id;
  info.kind = kind;
  info.system = "langford";
  info.released = {"rho"};
  info.bounds = {{"rho", 0.1, 2.0 / 3.0}};
  info.options.h_max = 1.0 / 3.0;
  info.origin = "synthetic";
  store.create_run(info);
  return info;
}

void set_version(const fs::path& file, int version) {
  std::ifstream in(file);
  auto j = nlohmann::json::parse(in);
  in.close();
  j["version"] = version;
  std::ofstream(file) << j.dump();
}

}  // namespace

TEST_CASE("periodic-orbit snapshots round-trip bit for bit") {
  const RunStore store = empty_store("store_orbit");
  fresh_run(store, "orbit", SolutionKind::PeriodicOrbit);
  std::mt19937 rng(5);
  Snapshot s;
  s.label = 7;
  s.type = PointType::TR;
  s.run_id = "orbit";
  s.system = "langford";
  s.released = {"rho"};
  PeriodicOrbit po;
  po.traj = Trajectory{make_mesh(6, 3), random_state(rng, 24, 3), 1.0 / 3.0 + 1.7, 0.1};
  po.p = random_vec(rng, 3);
  po.reference = Trajectory{po.traj.mesh, random_state(rng, 24, 3), 2.2, 0.1};
  po.reference_p = random_vec(rng, 3);
  s.orbit = po;
  s.tangent = random_vec(rng, 24 * 3 + 4);
  store.write_solution(s);

  const Snapshot r = store.read_solution("orbit", 7);
  REQUIRE(r.orbit.has_value());
  CHECK(r.kind() == SolutionKind::PeriodicOrbit);
  CHECK(r.type == PointType::TR);
  CHECK(r.released == s.released);
  CHECK(r.orbit->traj.x_bp == po.traj.x_bp);
  CHECK(r.orbit->traj.duration == po.traj.duration);
  CHECK(r.orbit->traj.t_offset == po.traj.t_offset);
  CHECK(r.orbit->traj.mesh->basepoints == po.traj.mesh->basepoints);
  CHECK(r.orbit->p == po.p);
  CHECK(r.orbit->reference.x_bp == po.reference.x_bp);
  CHECK(r.orbit->reference_p == po.reference_p);
  CHECK(r.tangent == s.tangent);

  const RunInfo info = store.read_run("orbit");
  CHECK(info.bounds.front().hi == 2.0 / 3.0);
  CHECK(info.options.h_max == 1.0 / 3.0);
  CHECK(info.origin == "synthetic");

  CHECK_THROWS_AS(store.read_solution("orbit", 8), NotFoundError);
  CHECK_THROWS_AS(store.read_solution("missing", 1), NotFoundError);

  set_version(store.run_dir("orbit") / "sol" / "7.json", kSolutionFormatVersion + 1);
  CHECK_THROWS_AS(store.read_solution("orbit", 7), FormatError);
  set_version(store.run_dir("orbit") / "run.json", kRunFormatVersion + 1);
  CHECK_THROWS_AS(store.read_run("orbit"), FormatError);
}

TEST_CASE("torus snapshots round-trip bit for bit") {
  const RunStore store = empty_store("store_torus");
  fresh_run(store, "torus", SolutionKind::Torus);
  std::mt19937 rng(6);
  TorusSolution t;
  t.mesh = make_mesh(5, 4);
  t.coupling = std::make_shared<const CouplingMatrices>(dft_matrix(2));
  for (int j = 0; j < 5; ++j) t.segments.push_back(random_state(rng, 25, 3));
  t.T0 = 0.1 / 3;
  t.T = 1.0 / 7;
  t.p = random_vec(rng, 3);
  t.om1 = -1.0 / 9;
  t.om2 = 11.0 / 13;
  t.varrho = 1.0 / 17;
  t.reference = {random_vec(rng, 3), random_vec(rng, 3), random_vec(rng, 3)};
  Snapshot s;
  s.label = 1;
  s.type = PointType::EP;
  s.run_id = "torus";
  s.system = "langford";
  s.torus = t;
  store.write_solution(s);

  const Snapshot r = store.read_solution("torus", 1);
  REQUIRE(r.torus.has_value());
  CHECK(r.tangent.size() == 0);
  const auto& u = *r.torus;
  CHECK(u.N() == 2);
  REQUIRE(u.num_segments() == 5);
  for (int j = 0; j < 5; ++j) CHECK(u.segments[j] == t.segments[j]);
  CHECK(u.T0 == t.T0);
  CHECK(u.T == t.T);
  CHECK(u.p == t.p);
  CHECK(u.om1 == t.om1);
  CHECK(u.om2 == t.om2);
  CHECK(u.varrho == t.varrho);
  CHECK(u.reference.v00 == t.reference.v00);
  CHECK(u.reference.v_phi == t.reference.v_phi);
  CHECK(u.reference.v_t == t.reference.v_t);

  // Writing what was read reproduces the file byte for byte.
  const fs::path file = store.run_dir("torus") / "sol" / "1.json";
  std::stringstream before;
  before << std::ifstream(file).rdbuf();
  store.write_solution(r);
  std::stringstream after;
  after << std::ifstream(file).rdbuf();
  CHECK(before.str() == after.str());
}

TEST_CASE("run directories") {
  const RunStore store = empty_store("store_dirs");
  const fs::path root = store.root();
  CHECK(store.list_runs().empty());
  fs::create_directories(root / "precious");
  std::ofstream(root / "precious" / "notes.txt") << "keep";
  RunInfo info;
  info.run_id = "precious";
  CHECK_THROWS_AS(store.create_run(info), ConfigError);
  CHECK(fs::exists(root / "precious" / "notes.txt"));
  info.run_id = "../escape";
  CHECK_THROWS_AS(store.create_run(info), ConfigError);

  fresh_run(store, "b", SolutionKind::Torus);
  fresh_run(store, "a", SolutionKind::Torus);
  CHECK(store.list_runs() == std::vector<std::string>{"a", "b"});
  BdRow row;
  row.label = 1;
  row.monitors = {{"rho", 0.25}};
  store.append_point("a", row);
  fresh_run(store, "a", SolutionKind::Torus);  // replacing a run starts it empty
  CHECK(store.read_bd("a").empty());
}

TEST_CASE("sample sets round-trip") {
  std::mt19937 rng(7);
  SampleSet s;
  for (int k = 0; k < 9; ++k) s.t.push_back(k / 7.0);
  for (int j = 0; j < 3; ++j) s.segments.push_back(random_state(rng, 9, 2));
  const fs::path file = fs::path(TORCONT_TEST_TMP) / "samples_roundtrip.json";
  write_samples(file, s);
  const SampleSet r = read_samples(file);
  CHECK(r.t == s.t);
  REQUIRE(r.segments.size() == 3);
  for (int j = 0; j < 3; ++j) CHECK(r.segments[j] == s.segments[j]);
  CHECK_THROWS_AS(read_samples(file.string() + ".absent"), NotFoundError);
  std::ofstream(file) << "{\"format\": \"something-else\", \"version\": 1}";
  CHECK_THROWS_AS(read_samples(file), FormatError);
}

TEST_CASE("stored branch tables") {
  const auto& store = stored_runs();
  const auto rows = store.read_bd("po");
  REQUIRE(!rows.empty());
  int tr = 0;
  for (const auto& r : rows) {
    REQUIRE(r.monitor("rho").has_value());
    REQUIRE(r.monitor("T").has_value());
    if (r.type == PointType::TR) {
      ++tr;
      CHECK(*r.monitor("rho") == doctest::Approx(0.6154).epsilon(0.005 / 0.6154));
    }
  }
  CHECK(tr == 1);
  CHECK_FALSE(rows.front().monitor("varrho").has_value());

  const auto info = store.read_run("tor");
  CHECK(info.kind == SolutionKind::Torus);
  CHECK(info.released == std::vector<std::string>{"varrho", "rho", "om1", "om2"});
  CHECK(info.origin.find("TR2tor") != std::string::npos);
}

TEST_CASE("label selectors") {
  const auto& store = stored_runs();
  const auto rows = store.read_bd("po");
  int tr_label = 0, last_ep = 0;
  for (const auto& r : rows) {
    if (r.type == PointType::TR && !tr_label) tr_label = r.label;
    if (r.type == PointType::EP) last_ep = r.label;
  }
  CHECK(store.resolve_label("po", "3") == 3);
  CHECK(store.resolve_label("po", "TR:1") == tr_label);
  CHECK(store.resolve_label("po", "TR:first") == tr_label);
  CHECK(store.resolve_label("po", "EP:first") == 1);
  CHECK(store.resolve_label("po", "EP:last") == last_ep);
  CHECK_THROWS_AS(store.resolve_label("po", "TR:2"), NotFoundError);
  CHECK_THROWS_AS(store.resolve_label("po", "BP:1"), NotFoundError);
  CHECK_THROWS_AS(store.resolve_label("po", "9999"), NotFoundError);
  CHECK_THROWS_AS(store.resolve_label("po", "XX:1"), ConfigError);
  CHECK_THROWS_AS(store.resolve_label("po", "TR:one"), ConfigError);
  CHECK_THROWS_AS(store.resolve_label("po", "12abc"), ConfigError);
  CHECK_THROWS_AS(store.resolve_label("nope", "1"), NotFoundError);
}

TEST_CASE("restarts from stored points") {
  const auto& store = stored_runs();
  const auto vf = builtin_langford();
  const int tr = store.resolve_label("po", "TR:1");

  SUBCASE("TR to torus") {
    const auto r10 = restart_TR2tor(store, "po", tr, vf);
    auto* p10 = dynamic_cast<TorusProblem*>(r10.problem.get());
    REQUIRE(p10 != nullptr);
    CHECK(p10->unpack(r10.start.u).num_segments() == 21);
    CHECK(r10.start.tangent_seed.has_value());
    const auto r50 = restart_TR2tor(store, "po", tr, vf, 50);
    CHECK(dynamic_cast<TorusProblem&>(*r50.problem).unpack(r50.start.u).num_segments() == 101);
    CHECK_THROWS_AS(restart_TR2tor(store, "po", tr, vf, 10, 0.0), InputError);
    CHECK_THROWS_AS(restart_TR2tor(store, "po", 1, vf), KindError);
    CHECK_THROWS_AS(restart_TR2tor(store, "tor", 1, vf), KindError);
    CHECK_THROWS_AS(restart_TR2tor(store, "po", tr, builtin_vdp()), ConfigError);
  }

  SUBCASE("torus to torus keeps the discretization") {
    const int last = store.resolve_label("tor", "EP:last");
    const Snapshot snap = store.read_solution("tor", last);
    const auto r = restart_tor2tor(store, "tor", last, vf);
    auto& prob = dynamic_cast<TorusProblem&>(*r.problem);
    CHECK(r.start.u == prob.pack(*snap.torus));
    const auto back = prob.unpack(r.start.u);
    CHECK(back.N() == snap.torus->N());
    CHECK(back.mesh->ntst == snap.torus->mesh->ntst);
    CHECK(back.mesh->degree == snap.torus->mesh->degree);
    CHECK(prob.reference().v00 == snap.torus->reference.v00);
    CHECK(prob.residual(r.start.u).cwiseAbs().maxCoeff() < 1e-8);

    // A zero-step continuation reproduces the stored point.
    ContinuationProblem cp{r.problem, {"eps", "rho", "om1", "om2"}, {}};
    ContinuationOptions opts;
    opts.pt_max = 0;
    opts.bi_direct = false;
    const auto br = run(cp, r.start, opts);
    REQUIRE(!br.points.empty());
    CHECK((br.points.front().u - r.start.u).cwiseAbs().maxCoeff() < 1e-8);

    CHECK_THROWS_AS(restart_tor2tor(store, "po", 1, vf), KindError);
    CHECK_THROWS_AS(restart_BP2tor(store, "tor", last, vf, {"eps", "rho", "om1", "om2"}), KindError);
    CHECK_THROWS_AS(restart_BP2tor(store, "po", tr, vf, {"rho"}), KindError);
  }
}

TEST_CASE("validation of a stored torus") {
  const auto& store = stored_runs();
  CHECK_THROWS_AS(validate_stored(store, "po", "1", 5), KindError);
  const auto rep = validate_stored(store, "tor", "EP:last", 5);
  CHECK(rep.deviations.size() == 5);
  CHECK(rep.max_deviation < 1e-2);
}
