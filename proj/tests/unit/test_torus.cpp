#include <doctest.h>

#include <cmath>
#include <numbers>

#include "oracles.hpp"
#include "torcont/contin.hpp"
#include "torcont/error.hpp"
#include "torcont/po.hpp"
#include "torcont/systems.hpp"
#include "torcont/torus.hpp"

using namespace torcont;

namespace {

constexpr double kPi = std::numbers::pi;

// Rotation at rate w1 in (x1, x2) times an attracting unit cycle at rate w2 in
// (x3, x4).  Every product of a circle and the cycle is an invariant torus.
VectorField product_field() {
  VectorFieldSpec s;
  s.name = "product";
  s.dim_state = 4;
  s.dim_params = 2;
  s.param_names = {"w1", "w2"};
  s.rhs = [](double, const Vec& y, const Vec& p) {
    const double r2 = y(2) * y(2) + y(3) * y(3);
    Vec f(4);
    f << -p(0) * y(1), p(0) * y(0), (1 - r2) * y(2) - p(1) * y(3), (1 - r2) * y(3) + p(1) * y(2);
    return f;
  };
  return VectorField(std::move(s));
}

Vec product_point(double phi, double t, double w1, double w2) {
  Vec v(4);
  v << std::cos(phi + w1 * t), std::sin(phi + w1 * t), std::cos(w2 * t), std::sin(w2 * t);
  return v;
}

TorusSolution product_torus(const VectorField& vf, double w1, double w2, int N, int ntst) {
  TorusSolution sol;
  sol.mesh = make_mesh(ntst, 4);
  sol.coupling = std::make_shared<const CouplingMatrices>(dft_matrix(N));
  sol.T = 2 * kPi / w2;
  sol.p = Vec(2);
  sol.p << w1, w2;
  sol.om1 = w1;
  sol.om2 = w2;
  sol.varrho = w1 / w2;
  for (double phi : sol.coupling->angles)
    sol.segments.push_back(
        sample_trajectory(sol.mesh, sol.T, 0, 4, [&](double t) { return product_point(phi, t, w1, w2); }).x_bp);
  return update_reference(vf, sol);
}

// Residual blocks: collocation, coupling, then five scalar rows.
struct Blocks {
  Index colloc, coupling;
};
Blocks blocks(const TorusSolution& sol) {
  const Index ns = segment_residual_size(*sol.mesh, sol.dim());
  return {ns * sol.num_segments(), static_cast<Index>(sol.dim()) * sol.num_segments()};
}

struct LangfordTr {
  VectorField vf = builtin_langford();
  PeriodicOrbit po;
  FloquetData fq;
};

const LangfordTr& langford_tr() {
  static const LangfordTr tr = [] {
    LangfordTr out;
    Vec y0(3), p(3);
    y0 << 0.3, 0.4, 0;
    p << 3.5, 0.6154, 0;
    const double T = 2 * kPi / 3.5;
    const auto guess = po_from_simulation(out.vf, y0, p, 100 * T, T, 8, 4);
    auto prob = std::make_shared<PoProblem>(out.vf, guess);
    const auto res = solve_square(prob, {}, prob->pack(guess));
    REQUIRE(res.converged);
    out.po = prob->unpack(res.u);
    out.fq = floquet(out.vf, out.po);
    return out;
  }();
  return tr;
}

}  // namespace

TEST_CASE("exact product torus has small residual blocks") {
  const auto vf = product_field();
  const auto sol = product_torus(vf, 0.7, 2.0, 5, 10);
  const Vec r = torus_residual(vf, sol);
  const auto b = blocks(sol);
  // Collocation rows carry the interpolation error of the sampled states.
  const double coarse = r.head(b.colloc).cwiseAbs().maxCoeff();
  CHECK(coarse < 5e-4);
  const auto fine = product_torus(vf, 0.7, 2.0, 5, 20);
  const double fine_err = torus_residual(vf, fine).head(blocks(fine).colloc).cwiseAbs().maxCoeff();
  CHECK(coarse / fine_err > 12);
  // Coupling holds up to trigonometric interpolation of a first harmonic: exact.
  CHECK(r.segment(b.colloc, b.coupling).cwiseAbs().maxCoeff() < 1e-10);
  CHECK(r.tail(5).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("zero rotation number makes coupling plain periodicity") {
  const auto vf = product_field();
  const auto sol = product_torus(vf, 0.0, 2.0, 3, 10);
  const Mat R = rotation_matrix(3, 0.0);
  CHECK((R - Mat::Identity(7, 7)).cwiseAbs().maxCoeff() == 0.0);
  const Vec r = torus_residual(vf, sol);
  const auto b = blocks(sol);
  CHECK(r.segment(b.colloc, b.coupling).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("a torus is its own reference") {
  const auto vf = product_field();
  auto sol = product_torus(vf, 0.7, 2.0, 4, 6);
  sol.segments[0].row(0) += Vec::Constant(4, 0.01).transpose();  // any state
  const auto fixed = update_reference(vf, sol);
  const Vec r = torus_residual(vf, fixed);
  CHECK(r(r.size() - 2) == 0.0);
  CHECK(r(r.size() - 1) == 0.0);
  const auto twice = update_reference(vf, fixed);
  CHECK(twice.reference.v00 == fixed.reference.v00);
  CHECK(twice.reference.v_phi == fixed.reference.v_phi);
  CHECK(twice.reference.v_t == fixed.reference.v_t);
}

TEST_CASE("torus jacobian matches finite differences") {
  const auto& tr = langford_tr();
  auto init = init_from_TR(tr.vf, tr.po, tr.fq, 5);
  auto sol = init.torus;
  sol.p(2) = 0.05;
  sol.varrho += 0.01;  // off the solution so every block is generic
  TorusProblem prob(tr.vf, sol);
  const Vec u = prob.pack(sol);
  const Mat an = Mat(prob.jacobian(u));
  const Mat fd = finite_difference_jacobian(prob, u);
  CHECK((an - fd).cwiseAbs().maxCoeff() < 1e-5 * std::max(1.0, an.cwiseAbs().maxCoeff()));

  const auto b = blocks(sol);
  const Index period_row = b.colloc + b.coupling + 1;
  CHECK(an(period_row, prob.parameter_index("om2")) == doctest::Approx(2 * kPi / (sol.om2 * sol.om2)));

  const Mat RF = rotation_matrix(5, sol.varrho) * sol.coupling->F;
  const Index blk = sol.mesh->num_basepoints() * 3;
  for (int r : {0, 4, 10})
    for (int j : {0, 3, 10})
      for (int i = 0; i < 3; ++i)
        CHECK(an(b.colloc + r * 3 + i, j * blk + i) == doctest::Approx(-RF(r, j)).epsilon(1e-12));
}

TEST_CASE("dimension deficit is three short of a torus family") {
  const auto vf = product_field();
  const auto sol = product_torus(vf, 0.7, 2.0, 3, 5);
  auto prob = std::make_shared<TorusProblem>(vf, sol);
  CHECK(dimension_deficit(*prob, {}) == -3);
  CHECK(dimension_deficit(*prob, {"w1", "w2", "om1", "om2"}) == 1);
  CHECK(dimension_deficit(*prob, {"w1", "om1", "om2"}) == 0);

  VectorFieldSpec s;
  s.name = "forced";
  s.dim_state = 2;
  s.dim_params = 2;
  s.autonomous = false;
  s.param_names = {"Om", "c"};
  s.forcing_param = "Om";
  s.rhs = [](double t, const Vec& y, const Vec& p) {
    Vec f(2);
    f << y(1), -p(1) * y(1) - y(0) + std::cos(p(0) * t);
    return f;
  };
  const VectorField forced(s);
  TorusSolution fsol;
  fsol.mesh = make_mesh(4, 3);
  fsol.coupling = std::make_shared<const CouplingMatrices>(dft_matrix(2));
  fsol.segments.assign(5, StateMatrix::Ones(fsol.mesh->num_basepoints(), 2));
  fsol.T = 1;
  fsol.om2 = 2 * kPi;
  fsol.p = Vec::Ones(2);
  TorusProblem fprob(forced, fsol);
  CHECK(dimension_deficit(fprob, {}) == -3);
  const Vec r = fprob.residual(fprob.pack(fsol));
  CHECK(r(r.size() - 1) == doctest::Approx(1.0 - 2 * kPi));

  s.forcing_param.reset();
  CHECK_THROWS_AS(TorusProblem(VectorField(s), fsol), ConfigError);
}

TEST_CASE("initialization from samples") {
  const auto vf = product_field();
  const double w1 = -0.7, w2 = 2.0, T = 2 * kPi / w2;
  const int N = 3;
  std::vector<double> t_grid;
  for (int k = 0; k <= 200; ++k) t_grid.push_back(T * k / 200);
  auto sample = [&](int segs) {
    std::vector<StateMatrix> out;
    for (int j = 0; j < segs; ++j) {
      StateMatrix m(t_grid.size(), 4);
      for (std::size_t k = 0; k < t_grid.size(); ++k)
        m.row(static_cast<Index>(k)) = product_point(2 * kPi * j / segs, t_grid[k], w1, w2).transpose();
      out.push_back(m);
    }
    return out;
  };
  Vec p(2);
  p << w1, w2;
  const auto sol = init_from_samples(vf, t_grid, sample(2 * N + 1), p, w1, w2, w1 / w2, 10);
  CHECK(sol.N() == N);
  CHECK(sol.om1 == w1);
  CHECK(sol.varrho < 0);
  CHECK(torus_residual(vf, sol).cwiseAbs().maxCoeff() < 5e-4);

  CHECK_THROWS_AS(init_from_samples(vf, t_grid, sample(6), p, w1, w2, w1 / w2, 10), InputError);
  CHECK_THROWS_AS(init_from_samples(vf, t_grid, sample(1), p, w1, w2, w1 / w2, 10), InputError);
  auto backwards = t_grid;
  std::swap(backwards[3], backwards[4]);
  CHECK_THROWS_AS(init_from_samples(vf, backwards, sample(7), p, w1, w2, w1 / w2, 10), InputError);
}

TEST_CASE("initialization from a torus bifurcation") {
  const auto& tr = langford_tr();
  REQUIRE(tr.fq.tr_angle.has_value());

  SUBCASE("eigenvector rotation makes real and imaginary parts orthogonal") {
    const auto init = init_from_TR(tr.vf, tr.po, tr.fq, 4);
    CHECK(std::abs(init.eigvec.real().dot(init.eigvec.imag())) < 1e-12);
    CHECK(init.eigvec.norm() == doctest::Approx(1.0));
    CHECK(init.eps == doctest::Approx(0.1 * rms_amplitude(tr.po.traj)));
    CHECK(init.torus.om2 == doctest::Approx(2 * kPi / tr.po.period()));
    CHECK(init.torus.varrho == doctest::Approx(*tr.fq.tr_angle / (2 * kPi)));
    CHECK(init.torus.om1 / init.torus.om2 == doctest::Approx(init.torus.varrho));
  }

  SUBCASE("zero amplitude collapses every segment onto the orbit") {
    const auto init = init_from_TR(tr.vf, tr.po, tr.fq, 3, 0.0);
    for (const auto& seg : init.torus.segments) CHECK((seg - tr.po.traj.x_bp).cwiseAbs().maxCoeff() == 0.0);
  }

  SUBCASE("flipping the amplitude is a half turn in phi") {
    const auto a = init_from_TR(tr.vf, tr.po, tr.fq, 3, 0.02);
    const auto b = init_from_TR(tr.vf, tr.po, tr.fq, 3, -0.02);
    for (double phi : {0.0, 0.4, 2.0})
      for (double t : {0.0, 0.3 * tr.po.period(), tr.po.period()})
        CHECK((evaluate_torus(a.torus, phi + kPi, t) - evaluate_torus(b.torus, phi, t)).norm() < 1e-10);
  }

  SUBCASE("the guess is first-order close to invariant") {
    const auto small = init_from_TR(tr.vf, tr.po, tr.fq, 3, 1e-3);
    const auto big = init_from_TR(tr.vf, tr.po, tr.fq, 3, 2e-3);
    const auto b = blocks(small.torus);
    const double rs = torus_residual(tr.vf, small.torus).segment(b.colloc, b.coupling).cwiseAbs().maxCoeff();
    const double rb = torus_residual(tr.vf, big.torus).segment(b.colloc, b.coupling).cwiseAbs().maxCoeff();
    CHECK(rs < 1e-4);
    CHECK(rb > rs);
  }
}

TEST_CASE("torus export") {
  const auto vf = product_field();
  const auto sol = product_torus(vf, 0.7, 2.0, 5, 10);
  const auto mesh = export_torus_mesh(sol, 33);
  REQUIRE(mesh.theta2.size() == 33);
  REQUIRE(mesh.theta1.size() == 11);
  CHECK(mesh.theta2.front() == 0.0);
  CHECK(mesh.theta2.back() == doctest::Approx(2 * kPi));
  for (std::size_t i = 0; i < mesh.theta1.size(); ++i) {
    CHECK((mesh.points[i].front() - sol.segments[i].row(0).transpose()).norm() < 1e-12);
    CHECK((mesh.points[i].front() - mesh.points[i].back()).norm() < 1e-6);
    // Torus coordinates of the product torus are the two plane angles.
    const Vec exact = product_point(mesh.theta1[i], 0, 0, 1);
    CHECK((mesh.points[i].front() - exact).norm() < 1e-12);
  }
}

TEST_CASE("invariance validation separates good and corrupted tori") {
  const auto vf = product_field();
  const auto sol = product_torus(vf, 0.7, 2.0, 5, 10);
  const auto good = validate_invariance(vf, sol, 10);
  CHECK(good.deviations.size() == 10);
  CHECK(good.max_deviation < 1e-5);

  auto bad = sol;
  for (auto& seg : bad.segments) seg *= 1.1;
  const auto report = validate_invariance(vf, bad, 10);
  CHECK(report.max_deviation > 1e-2);
  CHECK(report.max_deviation >= report.mean_deviation);
}
