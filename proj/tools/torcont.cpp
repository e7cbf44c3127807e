// torcont: run continuation configs and inspect stored runs.
//
// Exit codes: 0 success, 2 configuration/input error, 3 convergence or
// integration failure, 4 missing run/label/file, 1 anything else.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "torcont/config.hpp"
#include "torcont/error.hpp"
#include "torcont/pipeline.hpp"
#include "torcont/store.hpp"

namespace {

using namespace torcont;

constexpr int kExitConfig = 2;
constexpr int kExitConvergence = 3;
constexpr int kExitNotFound = 4;

std::vector<std::string> split_columns(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

// Writes to `path`, or stdout for "-".
template <class F>
void with_output(const std::string& path, F&& body) {
  if (path == "-") {
    body(std::cout);
    return;
  }
  std::ofstream os(path);
  if (!os) throw NotFoundError("cannot open " + path + " for writing");
  body(os);
}

int cmd_list(const RunStore& store, const std::string& run_id) {
  if (run_id.empty()) {
    for (const auto& id : store.list_runs()) {
      const auto info = store.read_run(id);
      const auto rows = store.read_bd(id);
      std::printf("%-24s %-6s %4zu points  %s\n", id.c_str(), to_string(info.kind), rows.size(), info.origin.c_str());
    }
    return 0;
  }
  const auto info = store.read_run(run_id);
  std::cout << "run " << run_id << " (" << to_string(info.kind) << ", system " << info.system << ")\n"
            << "origin: " << info.origin << "\nreleased:";
  for (const auto& r : info.released) std::cout << " " << r;
  std::cout << "\n";
  for (const auto& row : store.read_bd(run_id)) std::cout << format_row(row) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Continuation of periodic orbits and quasi-periodic invariant tori"};
  app.require_subcommand(1);
  std::string root = "runs";
  app.add_option("--root", root, "Directory holding run directories")->capture_default_str();

  auto* run = app.add_subcommand("run", "Execute the stages of a config file");
  std::string config_path, stage;
  bool quiet = false;
  run->add_option("config", config_path, "Config file (JSON)")->required();
  run->add_option("--stage", stage, "Only run the stage with this run id");
  run->add_flag("-q,--quiet", quiet, "Do not print per-point rows");

  auto* validate = app.add_subcommand("validate", "Forward-simulate a stored torus and report the invariance error");
  std::string v_run, v_label;
  int returns = 20;
  double flag_tol = 1e-3;
  validate->add_option("run", v_run, "Run id")->required();
  validate->add_option("label", v_label, "Label or selector such as EP:last")->required();
  validate->add_option("-n,--returns", returns, "Number of returns to integrate")->capture_default_str();
  validate->add_option("--flag", flag_tol, "Deviation above which the torus is flagged")->capture_default_str();

  auto* exp = app.add_subcommand("export", "Write a stored torus as a (theta1, theta2) surface grid");
  std::string e_run, e_label, e_out = "-";
  int theta2 = 64;
  exp->add_option("run", e_run, "Run id")->required();
  exp->add_option("label", e_label, "Label or selector")->required();
  exp->add_option("--theta2", theta2, "Number of theta2 nodes (inclusive of 0 and 2 pi)")->capture_default_str();
  exp->add_option("-o,--output", e_out, "Output file, - for stdout")->capture_default_str();

  auto* bd = app.add_subcommand("bd", "Write monitor columns of a run's branch table");
  std::string b_run, b_cols, b_out = "-";
  bool b_labels = false;
  bd->add_option("run", b_run, "Run id")->required();
  bd->add_option("columns", b_cols, "Comma-separated monitor names, e.g. rho,eps")->required();
  bd->add_flag("--labels", b_labels, "Prepend label and point type");
  bd->add_option("-o,--output", b_out, "Output file, - for stdout")->capture_default_str();

  auto* list = app.add_subcommand("list", "List runs, or the branch table of one run");
  std::string l_run;
  list->add_option("run", l_run, "Run id");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    const RunStore store(root);
    if (*run) {
      const auto cfg = load_config(config_path);
      for (const auto& res : run_config(cfg, store, quiet ? nullptr : &std::cout, stage)) {
        std::size_t special = 0;
        for (const auto& p : res.branch.points) special += p.type != PointType::RO;
        std::cout << "run " << res.run_id << ": " << res.branch.points.size() << " points, " << special
                  << " special\n";
      }
      return 0;
    }
    if (*validate) {
      try {
        const auto rep = validate_stored(store, v_run, v_label, returns);
        for (std::size_t k = 0; k < rep.deviations.size(); ++k)
          std::printf("return %3zu  deviation %.6e\n", k + 1, rep.deviations[k]);
        std::printf("max %.6e  mean %.6e  %s\n", rep.max_deviation, rep.mean_deviation,
                    rep.max_deviation < flag_tol ? "ok" : "FLAGGED");
      } catch (const IntegrationError& e) {
        std::printf("integration failed at t = %.17g: %s\n", e.last_time(), e.what());
        return kExitConvergence;
      }
      return 0;
    }
    if (*exp) {
      const Snapshot snap = store.read_solution(e_run, store.resolve_label(e_run, e_label));
      if (!snap.torus) throw KindError("label " + e_label + " of run " + e_run + " is not a torus");
      if (theta2 < 2) throw InputError("--theta2 must be >= 2");
      with_output(e_out, [&](std::ostream& os) { write_grid(os, export_torus_mesh(*snap.torus, theta2)); });
      return 0;
    }
    if (*bd) {
      const auto cols = split_columns(b_cols);
      if (cols.empty()) throw InputError("no columns given");
      const auto rows = store.read_bd(b_run);
      with_output(b_out, [&](std::ostream& os) { write_bd_columns(os, rows, cols, b_labels); });
      return 0;
    }
    if (*list) return cmd_list(store, l_run);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const InputError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const KindError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const FormatError& e) {
    std::cerr << "format error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const ConvergenceError& e) {
    std::cerr << "convergence failure: " << e.what() << "\n";
    return kExitConvergence;
  } catch (const IntegrationError& e) {
    std::cerr << "integration failure at t = " << e.last_time() << ": " << e.what() << "\n";
    return kExitConvergence;
  } catch (const NotFoundError& e) {
    std::cerr << "not found: " << e.what() << "\n";
    return kExitNotFound;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
