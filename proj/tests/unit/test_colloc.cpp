#include <doctest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "sweeps.hpp"
#include "torcont/colloc.hpp"
#include "torcont/error.hpp"
#include "torcont/systems.hpp"

using namespace torcont;

namespace {

VectorField constant_field(double c) {
  VectorFieldSpec s;
  s.name = "constant";
  s.dim_state = 1;
  s.dim_params = 1;
  s.param_names = {"c"};
  s.rhs = [c](double, const Vec&, const Vec&) { return Vec::Constant(1, c); };
  s.jac_state = [](double, const Vec&, const Vec&) { return Mat::Zero(1, 1); };
  s.jac_params = [](double, const Vec&, const Vec&) { return Mat::Zero(1, 1); };
  return VectorField(std::move(s));
}

}  // namespace

TEST_CASE("gauss nodes match closed forms") {
  for (int m = 1; m <= 5; ++m) {
    const auto nodes = gauss_legendre_nodes(m);
    const auto ref = oracle::gauss_nodes(m);
    REQUIRE(nodes.size() == ref.size());
    for (std::size_t i = 0; i < ref.size(); ++i) CHECK(std::abs(nodes[i] - ref[i]) < 1e-15);
  }
}

TEST_CASE("mesh layout") {
  const auto m11 = build_mesh(1, 1);
  REQUIRE(m11.collnodes.size() == 1);
  CHECK(m11.collnodes[0] == doctest::Approx(0.5).epsilon(1e-15));

  const auto m22 = build_mesh(2, 2);
  const double d = 0.25 / std::sqrt(3.0);
  const std::vector<double> expect{0.25 - d, 0.25 + d, 0.75 - d, 0.75 + d};
  REQUIRE(m22.collnodes.size() == 4);
  for (int i = 0; i < 4; ++i) CHECK(std::abs(m22.collnodes[i] - expect[i]) < 1e-15);

  const auto m104 = build_mesh(10, 4);
  CHECK(m104.collnodes.size() == 40);
  CHECK(m104.basepoints.size() == 50);
  CHECK(m104.subinterval_bounds.front() == 0.0);
  CHECK(m104.subinterval_bounds.back() == 1.0);
  for (int k = 0; k < 10; ++k) {
    CHECK(m104.subinterval_bounds[k] < m104.subinterval_bounds[k + 1]);
    // Base points include both ends; nodes are strictly inside.
    CHECK(m104.basepoints[k * 5] == doctest::Approx(m104.subinterval_bounds[k]));
    CHECK(m104.basepoints[k * 5 + 4] == doctest::Approx(m104.subinterval_bounds[k + 1]));
    for (int c = 0; c < 4; ++c) {
      CHECK(m104.collnodes[k * 4 + c] > m104.subinterval_bounds[k]);
      CHECK(m104.collnodes[k * 4 + c] < m104.subinterval_bounds[k + 1]);
    }
  }
  CHECK_THROWS_AS(build_mesh(0, 4), InputError);
  CHECK_THROWS_AS(build_mesh(4, 0), InputError);
  CHECK_THROWS_AS(build_mesh(4, 8), InputError);
}

TEST_CASE("trivial fields have zero residuals to round-off") {
  auto mesh = make_mesh(5, 4);
  const Vec p = Vec::Zero(1);
  Trajectory flat{mesh, StateMatrix::Constant(mesh->num_basepoints(), 1, 2.5), 3.0, 0};
  CHECK(segment_residual(constant_field(0), flat, p).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(segment_residual(constant_field(0), flat, p).size() == segment_residual_size(*mesh, 1));

  const double T = 1.7;
  const auto ramp = sample_trajectory(mesh, T, 0, 1, [](double t) { return Vec::Constant(1, t); });
  CHECK(segment_residual(constant_field(1), ramp, p).cwiseAbs().maxCoeff() < 1e-13);
}

TEST_CASE("residual of sampled exponential decays at order m") {
  Mat A(1, 1);
  A(0, 0) = 1.0;
  const auto vf = oracle::linear_field(A);
  const std::vector<int> ntsts{4, 8, 16, 32};
  for (int m : {2, 3, 4}) {
    std::vector<double> err;
    for (int ntst : ntsts) {
      const auto traj = sample_trajectory(make_mesh(ntst, m), 1.0, 0, 1,
                                          [](double t) { return Vec::Constant(1, std::exp(t)); });
      // Rows are scaled by the subinterval width relative to a local derivative.
      err.push_back(segment_residual(vf, traj, Vec::Zero(1)).cwiseAbs().maxCoeff());
    }
    const double slope = oracle::loglog_slope(sweeps::widths(ntsts, 1.0), err);
    CHECK(slope > m - 0.5);
  }
}

TEST_CASE("jacobian agrees with directional differences") {
  const auto vf = builtin_vdp();
  auto mesh = make_mesh(4, 3);
  std::mt19937 rng(21);
  std::uniform_real_distribution<double> u(-1, 1);
  StateMatrix x(mesh->num_basepoints(), 2);
  for (auto& v : x.reshaped()) v = u(rng);
  Vec p(3);
  p << 1.3, 0.4, 0.2;
  const double T = 2.1, T0 = 0.3;
  const Index nx = x.size();
  auto pack = [&](const StateMatrix& xs, double dur, double off, const Vec& pp) {
    Vec z(nx + 2 + pp.size());
    z << Eigen::Map<const Vec>(xs.data(), nx), dur, off, pp;
    return z;
  };
  auto resid = [&](const Vec& z) {
    StateMatrix xs = Eigen::Map<const StateMatrix>(z.data(), x.rows(), 2);
    Trajectory tr{mesh, xs, z(nx), z(nx + 1)};
    return segment_residual(vf, tr, z.tail(3));
  };
  const Vec z0 = pack(x, T, T0, p);
  const Mat J = Mat(segment_jacobian(vf, Trajectory{mesh, x, T, T0}, p));
  for (int k = 0; k < 20; ++k) {
    Vec dir(z0.size());
    for (auto& v : dir) v = u(rng);
    const double h = 1e-6;
    const Vec fd = (resid(z0 + h * dir) - resid(z0 - h * dir)) / (2 * h);
    const Vec an = J * dir;
    CHECK((fd - an).cwiseAbs().maxCoeff() / std::max(1e-8, an.cwiseAbs().maxCoeff()) < 1e-5);
  }
}

TEST_CASE("jacobian structure for linear and autonomous fields") {
  Mat A(2, 2);
  A << 0.1, -1, 1, 0.1;
  const auto vf = oracle::linear_field(A);
  auto mesh = make_mesh(3, 4);
  std::mt19937 rng(2);
  std::uniform_real_distribution<double> u(-1, 1);
  StateMatrix x1(mesh->num_basepoints(), 2), x2(mesh->num_basepoints(), 2);
  for (auto& v : x1.reshaped()) v = u(rng);
  for (auto& v : x2.reshaped()) v = u(rng);
  const Index nx = x1.size();
  const Mat J1 = Mat(segment_jacobian(vf, Trajectory{mesh, x1, 1.5, 0}, Vec::Zero(1)));
  const Mat J2 = Mat(segment_jacobian(vf, Trajectory{mesh, x2, 1.5, 0}, Vec::Zero(1)));
  CHECK((J1.leftCols(nx) - J2.leftCols(nx)).cwiseAbs().maxCoeff() == 0.0);
  CHECK(J1.col(nx + 1).cwiseAbs().maxCoeff() == 0.0);  // d/d t_offset
}

TEST_CASE("interpolation reproduces base points and polynomials") {
  auto mesh = make_mesh(6, 4);
  const double T = 2.5, T0 = -1.0;
  auto poly = [](double t) { return 0.3 - t + 0.7 * t * t - 0.2 * t * t * t + 0.05 * t * t * t * t; };
  const auto traj = sample_trajectory(mesh, T, T0, 1, [&](double t) { return Vec::Constant(1, poly(t)); });
  for (int i = 0; i < mesh->num_basepoints(); ++i) {
    const double t = T0 + T * mesh->basepoints[i];
    CHECK(interpolate(traj, t)(0) == doctest::Approx(traj.x_bp(i, 0)).epsilon(1e-13));
  }
  for (double t : {-0.93, -0.2, 0.0, 0.77, 1.49})
    CHECK(std::abs(interpolate(traj, t)(0) - poly(t)) < 1e-12);
  CHECK_THROWS_AS(interpolate(traj, T0 - 0.1), InputError);
  CHECK_THROWS_AS(interpolate(traj, T0 + T + 0.1), InputError);
}

TEST_CASE("interior interpolation order is m + 1") {
  const std::vector<int> ntsts{2, 4, 8, 16};
  for (int m : {2, 3, 4}) {
    const auto err = sweeps::interior_errors(m, ntsts, 1.0, 1.0);
    const double slope = oracle::loglog_slope(sweeps::widths(ntsts, 1.0), err);
    CHECK(std::abs(slope - (m + 1)) < 0.5);
  }
}

TEST_CASE("gauss collocation superconverges at the endpoint") {
  const std::vector<int> ntsts{2, 4, 8, 16};
  const auto err = sweeps::endpoint_errors(3, ntsts, 1.0, 1.0);
  const double slope = oracle::loglog_slope(sweeps::widths(ntsts, 1.0), err);
  INFO("errors " << err[0] << " " << err[1] << " " << err[2] << " " << err[3]);
  CHECK(std::abs(slope - 6) < 0.5);
  for (std::size_t i = 1; i < err.size(); ++i) CHECK(err[i] < err[i - 1]);
}

TEST_CASE("resampling onto a nested mesh keeps the interpolant") {
  auto coarse = make_mesh(4, 3);
  const auto traj = sample_trajectory(coarse, 2.0, 0, 2, [](double t) {
    Vec v(2);
    v << std::sin(t), t * t;
    return v;
  });
  // Every fine subinterval lies inside one coarse one and the degree is higher.
  const auto fine = resample(traj, make_mesh(8, 5));
  for (double t : {0.1, 0.55, 1.3, 1.95})
    CHECK((interpolate(fine, t) - interpolate(traj, t)).cwiseAbs().maxCoeff() < 1e-12);
}
