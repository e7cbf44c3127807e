#include <doctest.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "torcont/config.hpp"
#include "torcont/error.hpp"
#include "torcont/store.hpp"

using namespace torcont;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  int status = -1;
  std::string out;
};

// Runs the CLI with stdout and stderr merged.
Outcome cli(const std::string& args) {
  const std::string cmd = std::string(TORCONT_CLI) + " " + args + " 2>&1";
  Outcome o;
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  std::array<char, 4096> buf{};
  std::size_t n;
  while ((n = std::fread(buf.data(), 1, buf.size(), pipe)) > 0) o.out.append(buf.data(), n);
  const int raw = pclose(pipe);
  o.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  return o;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::path(TORCONT_TEST_TMP) / "cli" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

const char* kPoConfig = R"({
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
     "cont": {"h_max": 0.5, "pt_max": 2, "bi_direct": false}}
  ]})";

// Message of the ConfigError raised by `text`, or "" when it parses.
std::string config_error(const std::string& text) {
  try {
    parse_config(text);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

// kPoConfig with one field of the first stage replaced.
std::string with_stage_field(const std::string& key, const nlohmann::json& value) {
  auto j = nlohmann::json::parse(kPoConfig);
  if (value.is_null())
    j["stages"][0].erase(key);
  else
    j["stages"][0][key] = value;
  return j.dump();
}

}  // namespace

TEST_CASE("config diagnostics name the offending field") {
  CHECK(config_error(kPoConfig).empty());
  CHECK(config_error("{").find("config") != std::string::npos);
  CHECK(config_error(R"({"system": "lorenz", "stages": []})").rfind("config.system", 0) == 0);
  CHECK(config_error(R"({"system": "langford"})").rfind("config.stages", 0) == 0);
  CHECK(config_error(R"({"system": "langford", "stages": [], "extra": 1})").rfind("config.extra: unknown field", 0) == 0);

  const std::string unknown = config_error(with_stage_field("parameters", {"rh0"}));
  CHECK(unknown.rfind("config.stages[0].parameters", 0) == 0);
  CHECK(unknown.find("unknown parameter 'rh0'") != std::string::npos);
  CHECK(unknown.find("rho") != std::string::npos);  // lists the valid names

  CHECK(config_error(with_stage_field("parameters", {"rho", "rho"})).find("listed twice") != std::string::npos);
  CHECK(config_error(with_stage_field("ntst", "ten")).rfind("config.stages[0].ntst: has the wrong type", 0) == 0);
  CHECK(config_error(with_stage_field("degree", 9)).rfind("config.stages[0].degree", 0) == 0);
  CHECK(config_error(with_stage_field("type", "cycle")).rfind("config.stages[0].type", 0) == 0);
  CHECK(config_error(with_stage_field("run_id", "a/b")).rfind("config.stages[0].run_id", 0) == 0);
  CHECK(config_error(with_stage_field("bounds", {{"rho", {2.0, 1.0}}})).rfind("config.stages[0].bounds.rho", 0) == 0);
  CHECK(config_error(with_stage_field("bounds", {{"zeta", {0.0, 1.0}}})).rfind("config.stages[0].bounds.zeta", 0) == 0);
  CHECK(config_error(with_stage_field("cont", {{"h_max", -1.0}})).rfind("config.stages[0].cont", 0) == 0);
  CHECK(config_error(with_stage_field("cont", {{"hmax", 1.0}})).rfind("config.stages[0].cont.hmax: unknown field", 0) ==
        0);
  CHECK(config_error(with_stage_field("params", {{"om", 3.5}, {"rho", 1.5}})).rfind("config.stages[0].params.eps", 0) ==
        0);
  CHECK(config_error(with_stage_field("source", {{"simulate", {{"y0", {0, 0, 0}}}}})).find("exactly one of period") !=
        std::string::npos);

  auto j = nlohmann::json::parse(kPoConfig);
  j["stages"][1]["run_id"] = "po";
  CHECK(config_error(j.dump()).find("duplicate run id") != std::string::npos);
  j = nlohmann::json::parse(kPoConfig);
  j["stages"][1]["source"]["TR"]["eps"] = 0.0;
  CHECK(config_error(j.dump()).rfind("config.stages[1].source.TR.eps", 0) == 0);
  j = nlohmann::json::parse(kPoConfig);
  j["stages"][1]["ntst"] = 20;
  CHECK(config_error(j.dump()).rfind("config.stages[1].ntst: restarts keep the stored mesh", 0) == 0);

  CHECK_THROWS_AS(load_config(fs::path(TORCONT_TEST_TMP) / "no_such_config.json"), NotFoundError);
}

TEST_CASE("command line pipeline") {
  const fs::path dir = scratch("pipeline");
  const fs::path cfg = dir / "langford.json";
  std::ofstream(cfg) << kPoConfig;
  const std::string root = "--root " + (dir / "runs").string() + " ";

  const auto ran = cli(root + "run " + cfg.string() + " -q");
  REQUIRE(ran.status == 0);
  CHECK(ran.out.find("run po:") != std::string::npos);
  CHECK(ran.out.find("run tor:") != std::string::npos);

  SUBCASE("listing") {
    const auto all = cli(root + "list");
    CHECK(all.status == 0);
    CHECK(all.out.find("po") != std::string::npos);
    const auto one = cli(root + "list po");
    CHECK(one.status == 0);
    CHECK(one.out.find("TR") != std::string::npos);
  }

  SUBCASE("bd columns reproduce the stored monitors exactly") {
    const auto out = cli(root + "bd po rho,T --labels");
    REQUIRE(out.status == 0);
    const RunStore store(dir / "runs");
    const auto rows = store.read_bd("po");
    std::istringstream in(out.out);
    std::string line;
    std::size_t k = 0;
    while (std::getline(in, line)) {
      if (line.empty() || line[0] == '#') continue;
      REQUIRE(k < rows.size());
      std::istringstream ls(line);
      int label;
      std::string type;
      double rho, T;
      ls >> label >> type >> rho >> T;
      CHECK(label == rows[k].label);
      CHECK(type == to_string(rows[k].type));
      CHECK(rho == *rows[k].monitor("rho"));
      CHECK(T == *rows[k].monitor("T"));
      ++k;
    }
    CHECK(k == rows.size());
    CHECK(cli(root + "bd po rho,nope").status == 4);
  }

  SUBCASE("export writes a closed grid") {
    const fs::path grid = dir / "grid.dat";
    REQUIRE(cli(root + "export tor EP:last --theta2 9 -o " + grid.string()).status == 0);
    std::istringstream in(slurp(grid));
    std::string line;
    std::vector<std::vector<double>> block, first, last;
    auto flush = [&] {
      if (block.empty()) return;
      CHECK(block.size() == 9);
      double gap = 0;
      for (std::size_t c = 2; c < block.front().size(); ++c)
        gap = std::max(gap, std::abs(block.front()[c] - block.back()[c]));
      CHECK(gap < 1e-4);  // theta2 = 0 and 2 pi coincide on an invariant torus
      block.clear();
    };
    int blocks = 0;
    while (std::getline(in, line)) {
      if (line.empty()) {
        blocks += !block.empty();
        flush();
        continue;
      }
      if (line[0] == '#') continue;
      std::istringstream ls(line);
      std::vector<double> row;
      double v;
      while (ls >> v) row.push_back(v);
      CHECK(row.size() == 5);
      block.push_back(row);
    }
    blocks += !block.empty();
    flush();
    CHECK(blocks == 7);
    CHECK(cli(root + "export po 1").status == 2);
  }

  SUBCASE("validation and corrupted data") {
    const auto ok = cli(root + "validate tor EP:last -n 5");
    CHECK(ok.status == 0);
    CHECK(ok.out.find("ok") != std::string::npos);

    // Scale one stored torus by 1.1: no longer invariant.
    const RunStore store(dir / "runs");
    const int last = store.resolve_label("tor", "EP:last");
    Snapshot s = store.read_solution("tor", last);
    for (auto& seg : s.torus->segments) seg *= 1.1;
    store.write_solution(s);
    const auto bad = cli(root + "validate tor EP:last -n 5");
    CHECK(bad.status == 0);
    CHECK(bad.out.find("FLAGGED") != std::string::npos);

    // A large x3 x1^3 coupling drives the flow to finite-time blow-up.
    s.torus->p(2) = 1e3;
    for (auto& seg : s.torus->segments) seg *= 3;
    store.write_solution(s);
    CHECK(cli(root + "validate tor EP:last -n 5").status == 3);
  }

  SUBCASE("missing runs and labels") {
    CHECK(cli(root + "validate nope 1").status == 4);
    CHECK(cli(root + "validate tor 999").status == 4);
    CHECK(cli(root + "list nope").status == 4);
    CHECK(cli(root + "run " + (dir / "absent.json").string()).status == 4);
    CHECK(cli(root + "run " + cfg.string() + " --stage nope").status == 4);
  }
}

TEST_CASE("command line errors") {
  const fs::path dir = scratch("errors");
  const std::string root = "--root " + (dir / "runs").string() + " ";
  CHECK(cli("").status == 2);
  CHECK(cli("frobnicate").status == 2);
  CHECK(cli(root + "validate").status == 2);

  const fs::path bad = dir / "bad.json";
  std::ofstream(bad) << R"({"system": "langford", "stages": [{"run_id": "x", "type": "po"}]})";
  const auto o = cli(root + "run " + bad.string());
  CHECK(o.status == 2);
  CHECK(o.out.find("config.stages[0].source") != std::string::npos);

  // A torus guess made of a single repeated state cannot be corrected.
  SampleSet flat_samples;
  for (int k = 0; k < 11; ++k) flat_samples.t.push_back(0.1 * k);
  for (int j = 0; j < 3; ++j) flat_samples.segments.push_back(StateMatrix::Constant(11, 3, 0.5));
  write_samples(dir / "flat.json", flat_samples);
  const fs::path flat = dir / "flat_cfg.json";
  std::ofstream(flat) << R"({"system": "langford", "stages": [{"run_id": "flat", "type": "torus",
      "source": {"samples": {"path": "flat.json", "om1": 1.0, "om2": 3.5, "varrho": 0.3}},
      "params": {"om": 3.5, "rho": 0.6, "eps": 0.0}, "ntst": 4,
      "parameters": ["varrho", "rho", "om1", "om2"], "cont": {"pt_max": 2}}]})";
  CHECK(cli(root + "run " + flat.string() + " -q").status == 3);
}

TEST_CASE("runs are deterministic") {
  const fs::path dir = scratch("determinism");
  const fs::path cfg = dir / "langford.json";
  std::ofstream(cfg) << kPoConfig;
  REQUIRE(cli("--root " + (dir / "a").string() + " run " + cfg.string() + " -q --stage po").status == 0);
  REQUIRE(cli("--root " + (dir / "b").string() + " run " + cfg.string() + " -q --stage po").status == 0);
  CHECK(slurp(dir / "a" / "po" / "bd.jsonl") == slurp(dir / "b" / "po" / "bd.jsonl"));
  CHECK(slurp(dir / "a" / "po" / "sol" / "1.json") == slurp(dir / "b" / "po" / "sol" / "1.json"));
}
