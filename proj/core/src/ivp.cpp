#include "torcont/ivp.hpp"

#include <Eigen/LU>
#include <algorithm>
#include <cmath>
#include <limits>

#include "torcont/error.hpp"

namespace torcont {

namespace {

// Dormand-Prince 5(4) tableau.
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                 a65 = -5103.0 / 18656;
constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192, a75 = -2187.0 / 6784,
                 a76 = 11.0 / 84;
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                 e6 = 22.0 / 525, e7 = -1.0 / 40;
constexpr double d1 = -12715105075.0 / 11282082432, d3 = 87487479700.0 / 32700410799,
                 d4 = -10690763975.0 / 1880347072, d5 = 701980252875.0 / 199316789632,
                 d6 = -1453857185.0 / 822651844, d7 = 69997945.0 / 29380423;

Vec eval_step(const DenseOutput::Step& s, double t) {
  const double theta = (t - s.t0) / s.h;
  const double theta1 = 1 - theta;
  return s.coeffs.row(0).transpose() +
         theta * (s.coeffs.row(1).transpose() +
                  theta1 * (s.coeffs.row(2).transpose() +
                            theta * (s.coeffs.row(3).transpose() + theta1 * s.coeffs.row(4).transpose())));
}

double error_norm(const Vec& err, const Vec& y0, const Vec& y1, double rtol, double atol) {
  double acc = 0;
  for (Index i = 0; i < err.size(); ++i) {
    const double sc = atol + rtol * std::max(std::abs(y0[i]), std::abs(y1[i]));
    acc += (err[i] / sc) * (err[i] / sc);
  }
  return std::sqrt(acc / static_cast<double>(err.size()));
}

double initial_step(const OdeFunction& f, double t0, const Vec& y0, const Vec& f0, double dir, double hmax,
                    double rtol, double atol) {
  // Hairer-Norsett-Wanner starting step heuristic.
  Vec sc = (atol + rtol * y0.array().abs()).matrix();
  const double dnf = std::sqrt((f0.array() / sc.array()).square().mean());
  const double dny = std::sqrt((y0.array() / sc.array()).square().mean());
  double h = (dnf <= 1e-10 || dny <= 1e-10) ? 1e-6 : 0.01 * dny / dnf;
  h = std::min(h, hmax);
  Vec y1 = y0 + dir * h * f0;
  Vec f1(y0.size());
  f(t0 + dir * h, y1, f1);
  const double der2 = std::sqrt(((f1 - f0).array() / sc.array()).square().mean()) / h;
  const double der12 = std::max(std::abs(der2), dnf);
  const double h1 = der12 <= 1e-15 ? std::max(1e-6, h * 1e-3) : std::pow(0.01 / der12, 1.0 / 5);
  return std::min({100 * h, h1, hmax});
}

}  // namespace

Vec DenseOutput::operator()(double t) const {
  if (steps_.empty()) throw InputError("dense output is empty");
  const double lo = std::min(t_begin(), t_end()), hi = std::max(t_begin(), t_end());
  const double slack = 1e-12 * std::max(1.0, hi - lo);
  if (t < lo - slack || t > hi + slack) throw InputError("dense output evaluated outside its domain");
  const bool forward = steps_.front().h > 0;
  // Steps are ordered in integration direction; binary search on start times.
  auto it = std::upper_bound(steps_.begin(), steps_.end(), t, [forward](double value, const Step& s) {
    return forward ? value < s.t0 : value > s.t0;
  });
  if (it != steps_.begin()) --it;
  return eval_step(*it, t);
}

double DenseOutput::t_begin() const { return steps_.front().t0; }
double DenseOutput::t_end() const { return steps_.back().t0 + steps_.back().h; }

IvpSolution solve_ivp(const OdeFunction& f, std::span<const double> t_out, const Vec& y0, const IvpOptions& opts) {
  if (opts.rel_tol <= 0 || opts.abs_tol <= 0) throw InputError("ivp tolerances must be positive");
  if (t_out.size() < 2) throw InputError("ivp needs at least an initial and a final time");
  const double dir = t_out.back() > t_out.front() ? 1.0 : -1.0;
  for (std::size_t i = 1; i < t_out.size(); ++i)
    if (dir * (t_out[i] - t_out[i - 1]) <= 0) throw InputError("ivp output times must be strictly monotone");

  const Index n = y0.size();
  const double t_end = t_out.back();
  const double span = std::abs(t_end - t_out.front());
  const double hmax = opts.max_step ? std::abs(*opts.max_step) : span;

  IvpSolution sol;
  if (opts.dense_output) sol.dense.emplace();
  sol.t.push_back(t_out.front());
  sol.y.push_back(y0);
  std::size_t next_out = 1;

  double t = t_out.front();
  Vec y = y0;
  Vec k1(n), k2(n), k3(n), k4(n), k5(n), k6(n), k7(n), ytmp(n), ynew(n), errv(n);
  f(t, y, k1);

  double h = initial_step(f, t, y, k1, dir, hmax, opts.rel_tol, opts.abs_tol);
  double err_old = 1e-4;
  bool last_rejected = false;
  constexpr double beta = 0.04, safe = 0.9, fac_min = 0.2, fac_max = 10.0;
  const double expo = 0.2 - beta * 0.75;

  std::size_t steps = 0;
  while (dir * (t_end - t) > 0) {
    if (++steps > opts.max_steps) throw IntegrationError("ivp: maximum number of steps exceeded", t);
    const double eps_t = 16 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(t));
    if (h < eps_t) throw IntegrationError("ivp: step size underflow (stiff or blow-up)", t);
    bool final_step = false;
    if (dir * (t + dir * h - t_end) >= 0) {
      h = std::abs(t_end - t);
      final_step = true;
    }
    const double hs = dir * h;

    ytmp = y + hs * a21 * k1;
    f(t + c2 * hs, ytmp, k2);
    ytmp = y + hs * (a31 * k1 + a32 * k2);
    f(t + c3 * hs, ytmp, k3);
    ytmp = y + hs * (a41 * k1 + a42 * k2 + a43 * k3);
    f(t + c4 * hs, ytmp, k4);
    ytmp = y + hs * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4);
    f(t + c5 * hs, ytmp, k5);
    ytmp = y + hs * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5);
    const double t_new = final_step ? t_end : t + hs;
    f(t_new, ytmp, k6);
    ynew = y + hs * (a71 * k1 + a73 * k3 + a74 * k4 + a75 * k5 + a76 * k6);
    f(t_new, ynew, k7);
    errv = hs * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);

    double err = error_norm(errv, y, ynew, opts.rel_tol, opts.abs_tol);
    if (!std::isfinite(err)) {
      if (!ynew.allFinite() && h <= 16 * eps_t) throw IntegrationError("ivp: non-finite state", t);
      h *= 0.1;
      last_rejected = true;
      ++sol.rejected_steps;
      continue;
    }
    const double fac11 = std::pow(err, expo);
    if (err <= 1.0) {
      DenseOutput::Step step{t, hs, Mat(5, n)};
      const Vec ydiff = ynew - y;
      const Vec bspl = hs * k1 - ydiff;
      step.coeffs.row(0) = y.transpose();
      step.coeffs.row(1) = ydiff.transpose();
      step.coeffs.row(2) = bspl.transpose();
      step.coeffs.row(3) = (ydiff - hs * k7 - bspl).transpose();
      step.coeffs.row(4) = (hs * (d1 * k1 + d3 * k3 + d4 * k4 + d5 * k5 + d6 * k6 + d7 * k7)).transpose();

      while (next_out < t_out.size() && dir * (t_out[next_out] - t_new) <= 0) {
        sol.t.push_back(t_out[next_out]);
        sol.y.push_back(next_out + 1 == t_out.size() ? Vec(ynew) : eval_step(step, t_out[next_out]));
        ++next_out;
      }
      if (sol.dense) sol.dense->push(std::move(step));

      double fac = fac11 / std::pow(err_old, beta);
      fac = std::clamp(fac / safe, 1.0 / fac_max, 1.0 / fac_min);
      double h_new = h / fac;
      if (last_rejected) h_new = std::min(h_new, h);
      err_old = std::max(err, 1e-4);
      t = t_new;
      y = ynew;
      k1 = k7;
      h = std::min(h_new, hmax);
      last_rejected = false;
      ++sol.accepted_steps;
    } else {
      h /= std::min(1.0 / fac_min, fac11 / safe);
      last_rejected = true;
      ++sol.rejected_steps;
    }
  }
  return sol;
}

IvpSolution integrate(const VectorField& vf, std::span<const double> t_span, const Vec& y0, const Vec& p,
                      const IvpOptions& opts) {
  if (y0.size() != vf.dim_state()) throw InputError("integrate: initial state has wrong length");
  if (p.size() != vf.dim_params()) throw InputError("integrate: parameter vector has wrong length");
  OdeFunction f = [&](double t, const Vec& y, Vec& dy) { dy = vf.rhs(t, y, p); };
  return solve_ivp(f, t_span, y0, opts);
}

Mat TransitionMatrixResult::transition(std::size_t k) const { return phi.at(k) * phi0.inverse(); }

namespace {

std::vector<double> output_grid(double t0, double T, std::span<const double> samples) {
  std::vector<double> grid{t0, t0 + T};
  for (double s : samples) {
    if (s < t0 - 1e-14 * std::max(1.0, std::abs(t0))) throw InputError("transition_matrix: sample time before t0");
    grid.push_back(std::max(s, t0));
  }
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  return grid;
}

TransitionMatrixResult collect(const VectorField& vf, double t0, double T, std::span<const double> grid,
                               const IvpSolution& sol, const Mat& phi0, bool with_state,
                               const ReferenceCurve* ref) {
  const int n = vf.dim_state();
  TransitionMatrixResult out;
  out.phi0 = phi0;
  for (std::size_t k = 0; k < sol.t.size(); ++k) {
    out.times.push_back(sol.t[k]);
    const Vec& z = sol.y[k];
    if (with_state) {
      out.states.push_back(z.head(n));
      out.phi.push_back(Eigen::Map<const Mat>(z.data() + n, n, n));
    } else {
      out.states.push_back(ref->eval(sol.t[k]));
      out.phi.push_back(Eigen::Map<const Mat>(z.data(), n, n));
    }
  }
  const auto it = std::find(grid.begin(), grid.end(), t0 + T);
  const std::size_t k_end = static_cast<std::size_t>(it - grid.begin());
  out.monodromy = out.phi[k_end] * phi0.inverse();
  return out;
}

}  // namespace

TransitionMatrixResult transition_matrix(const VectorField& vf, double t0, double T, const Vec& y0, const Vec& p,
                                         std::span<const double> sample_times, const IvpOptions& opts,
                                         const std::optional<Mat>& phi0_opt) {
  const int n = vf.dim_state();
  if (y0.size() != n) throw InputError("transition_matrix: initial state has wrong length");
  if (T <= 0) throw InputError("transition_matrix: T must be positive");
  const Mat phi0 = phi0_opt ? *phi0_opt : Mat::Identity(n, n);
  if (phi0.rows() != n || phi0.cols() != n) throw InputError("transition_matrix: phi0 has wrong shape");
  const auto grid = output_grid(t0, T, sample_times);

  OdeFunction f = [&](double t, const Vec& z, Vec& dz) {
    const Vec y = z.head(n);
    dz.resize(z.size());
    dz.head(n) = vf.rhs(t, y, p);
    Eigen::Map<const Mat> phi(z.data() + n, n, n);
    Eigen::Map<Mat>(dz.data() + n, n, n) = vf.jac_state(t, y, p) * phi;
  };
  Vec z0(n + n * n);
  z0.head(n) = y0;
  Eigen::Map<Mat>(z0.data() + n, n, n) = phi0;
  const IvpSolution sol = solve_ivp(f, grid, z0, opts);
  return collect(vf, t0, T, grid, sol, phi0, true, nullptr);
}

TransitionMatrixResult transition_matrix_along(const VectorField& vf, double t0, double T, const ReferenceCurve& ref,
                                               const Vec& p, std::span<const double> sample_times,
                                               const IvpOptions& opts, const std::optional<Mat>& phi0_opt) {
  const int n = vf.dim_state();
  if (T <= 0) throw InputError("transition_matrix: T must be positive");
  const Mat phi0 = phi0_opt ? *phi0_opt : Mat::Identity(n, n);
  const auto grid = output_grid(t0, T, sample_times);
  const double slack = 1e-12 * std::max(1.0, std::abs(ref.t_end - ref.t_begin));
  if (grid.front() < ref.t_begin - slack || grid.back() > ref.t_end + slack)
    throw InputError("transition_matrix: reference curve does not cover the requested interval");

  OdeFunction f = [&](double t, const Vec& z, Vec& dz) {
    const double tc = std::clamp(t, ref.t_begin, ref.t_end);
    const Vec y = ref.eval(tc);
    dz.resize(z.size());
    Eigen::Map<const Mat> phi(z.data(), n, n);
    Eigen::Map<Mat>(dz.data(), n, n) = vf.jac_state(t, y, p) * phi;
  };
  Vec z0(n * n);
  Eigen::Map<Mat>(z0.data(), n, n) = phi0;
  const IvpSolution sol = solve_ivp(f, grid, z0, opts);
  return collect(vf, t0, T, grid, sol, phi0, false, &ref);
}

}  // namespace torcont
