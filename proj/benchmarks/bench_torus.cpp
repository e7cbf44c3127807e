// Cost of the per-step kernels of torus continuation on a Langford-like torus.

#include <benchmark/benchmark.h>

#include <cmath>
#include <numbers>

#include "torcont/contin.hpp"
#include "torcont/sparse_solver.hpp"
#include "torcont/systems.hpp"
#include "torcont/torus.hpp"

using namespace torcont;

namespace {

// Product of the Langford periodic orbit's shape with a circle: not invariant,
// but every Jacobian block is populated as on a real branch.
struct Fixture {
  std::shared_ptr<TorusProblem> problem;
  Vec u;
};

Fixture make_fixture(const benchmark::State& state) {
  const int N = static_cast<int>(state.range(0));
  const int ntst = static_cast<int>(state.range(1));
  const auto vf = builtin_langford();
  TorusSolution sol;
  sol.mesh = make_mesh(ntst, 4);
  sol.coupling = std::make_shared<const CouplingMatrices>(dft_matrix(N));
  sol.T = 2 * std::numbers::pi / 3.5;
  sol.p = Vec(3);
  sol.p << 3.5, 0.6, 0.1;
  sol.om2 = 3.5;
  sol.varrho = 0.4;
  sol.om1 = sol.varrho * sol.om2;
  for (double phi : sol.coupling->angles)
    sol.segments.push_back(sample_trajectory(sol.mesh, sol.T, 0, 3, [&](double t) {
                             Vec v(3);
                             const double th = sol.om2 * t;
                             v << std::cos(th) * (1 + 0.1 * std::cos(phi + sol.om1 * t)),
                                 std::sin(th) * (1 + 0.1 * std::cos(phi + sol.om1 * t)),
                                 0.2 * std::sin(phi + sol.om1 * t);
                             return v;
                           }).x_bp);
  sol = update_reference(vf, sol);
  auto problem = std::make_shared<TorusProblem>(vf, sol);
  return {problem, problem->pack(sol)};
}

void BM_TorusResidual(benchmark::State& state) {
  const auto fx = make_fixture(state);
  for (auto _ : state) benchmark::DoNotOptimize(fx.problem->residual(fx.u));
  state.counters["unknowns"] = static_cast<double>(fx.problem->num_unknowns());
}

void BM_TorusJacobian(benchmark::State& state) {
  const auto fx = make_fixture(state);
  std::vector<Triplet> trips;
  for (auto _ : state) {
    trips.clear();
    fx.problem->jacobian_triplets(fx.u, trips);
    benchmark::DoNotOptimize(trips.data());
  }
  state.counters["nonzeros"] = static_cast<double>(trips.size());
}

// One LU of [J; t^T] with the four parameters a torus continuation releases.
void BM_BorderedFactorization(benchmark::State& state) {
  const auto fx = make_fixture(state);
  const BorderedSystem sys(fx.problem, {"varrho", "rho", "om1", "om2"}, fx.u);
  const Index na = sys.layout().num_active();
  const Vec border = Vec::Ones(na) / std::sqrt(static_cast<double>(na));
  const SpMat A = assemble_bordered(sys.jacobian(sys.layout().restrict(fx.u)), fx.problem->num_equations(), na, border);
  SparseLinearSolver solver;
  for (auto _ : state) benchmark::DoNotOptimize(solver.factorize(A));
}

}  // namespace

BENCHMARK(BM_TorusResidual)->Args({10, 20})->Args({50, 20})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_TorusJacobian)->Args({10, 20})->Args({50, 20})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_BorderedFactorization)->Args({10, 20})->Args({50, 20})->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
