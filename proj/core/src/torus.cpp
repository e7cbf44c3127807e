#include "torcont/torus.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "torcont/error.hpp"
#include "torcont/ivp.hpp"

namespace torcont {

namespace {

constexpr double kTwoPi = 2 * std::numbers::pi;

int forcing_index(const VectorField& vf) {
  auto idx = vf.forcing_param_index();
  if (!idx) throw ConfigError("non-autonomous field '" + vf.name() + "' declares no forcing-frequency parameter");
  return *idx;
}

// Cubic Lagrange interpolation on a sorted, possibly non-uniform grid.
Vec interpolate_rows(const std::vector<double>& t, const StateMatrix& y, double s) {
  const Index nt = static_cast<Index>(t.size());
  if (nt == 1) return y.row(0).transpose();
  Index k = std::upper_bound(t.begin(), t.end(), s) - t.begin() - 1;
  k = std::clamp<Index>(k, 0, nt - 2);
  const Index lo = std::clamp<Index>(k - 1, 0, std::max<Index>(0, nt - 4));
  const Index hi = std::min<Index>(nt - 1, lo + 3);
  Vec out = Vec::Zero(y.cols());
  for (Index a = lo; a <= hi; ++a) {
    double w = 1;
    for (Index b = lo; b <= hi; ++b)
      if (b != a) w *= (s - t[b]) / (t[a] - t[b]);
    out += w * y.row(a).transpose();
  }
  return out;
}

}  // namespace

StateMatrix TorusSolution::initial_circle() const {
  StateMatrix c(num_segments(), dim());
  for (int j = 0; j < num_segments(); ++j) c.row(j) = segments[j].row(0);
  return c;
}

StateMatrix TorusSolution::final_circle() const {
  StateMatrix c(num_segments(), dim());
  for (int j = 0; j < num_segments(); ++j) c.row(j) = segments[j].row(segments[j].rows() - 1);
  return c;
}

ReferenceSection make_reference(const VectorField& vf, const TorusSolution& sol) {
  ReferenceSection ref;
  const StateMatrix circle = sol.initial_circle();
  ref.v00 = circle.row(0).transpose();
  ref.v_phi = (sol.coupling->phase_weights * circle).transpose();
  if (vf.autonomous()) ref.v_t = vf.rhs(0, ref.v00, sol.p);
  return ref;
}

TorusSolution update_reference(const VectorField& vf, TorusSolution sol) {
  sol.reference = make_reference(vf, sol);
  return sol;
}

Vec torus_residual(const VectorField& vf, const TorusSolution& sol) {
  TorusProblem problem(vf, sol);
  return problem.residual(problem.pack(sol));
}

// ---------------------------------------------------------------- TorusProblem

TorusProblem::TorusProblem(VectorField vf, TorusSolution initial)
    : vf_(std::move(vf)),
      mesh_(initial.mesh),
      coupling_(initial.coupling),
      n_(vf_.dim_state()),
      n_seg_(initial.num_segments()),
      reference_(initial.reference) {
  if (!mesh_ || !coupling_) throw InputError("torus solution lacks mesh or coupling data");
  if (n_seg_ != coupling_->n_seg) throw InputError("torus segment count does not match the coupling matrices");
  for (const auto& s : initial.segments)
    if (s.rows() != mesh_->num_basepoints() || s.cols() != n_)
      throw InputError("torus segment has wrong shape");
  if (initial.p.size() != vf_.dim_params()) throw InputError("torus parameter count mismatch");
  if (!vf_.autonomous()) forcing_index(vf_);
  if (reference_.v00.size() != n_) reference_ = make_reference(vf_, initial);
}

Index TorusProblem::segment_block() const { return static_cast<Index>(mesh_->num_basepoints()) * n_; }
Index TorusProblem::x_size() const { return segment_block() * n_seg_; }
Index TorusProblem::num_unknowns() const { return x_size() + 2 + vf_.dim_params() + 3; }
Index TorusProblem::parameter_offset() const { return x_size() + 2; }

Index TorusProblem::num_equations() const {
  return static_cast<Index>(n_seg_) * segment_residual_size(*mesh_, n_) + static_cast<Index>(n_) * n_seg_ + 5;
}

std::vector<std::string> TorusProblem::parameter_names() const {
  auto names = vf_.param_names();
  names.insert(names.end(), {"om1", "om2", "varrho"});
  return names;
}

Vec TorusProblem::pack(const TorusSolution& sol) const {
  Vec u(num_unknowns());
  const Index blk = segment_block();
  for (int j = 0; j < n_seg_; ++j) u.segment(j * blk, blk) = Eigen::Map<const Vec>(sol.segments[j].data(), blk);
  const Index off = x_size();
  u[off] = sol.T0;
  u[off + 1] = sol.T;
  const Index q = vf_.dim_params();
  u.segment(off + 2, q) = sol.p;
  u[off + 2 + q] = sol.om1;
  u[off + 3 + q] = sol.om2;
  u[off + 4 + q] = sol.varrho;
  return u;
}

TorusSolution TorusProblem::unpack(const Vec& u) const {
  TorusSolution sol;
  sol.mesh = mesh_;
  sol.coupling = coupling_;
  const Index blk = segment_block();
  const Index nbp = mesh_->num_basepoints();
  sol.segments.reserve(static_cast<std::size_t>(n_seg_));
  for (int j = 0; j < n_seg_; ++j) sol.segments.emplace_back(Eigen::Map<const StateMatrix>(u.data() + j * blk, nbp, n_));
  const Index off = x_size();
  const Index q = vf_.dim_params();
  sol.T0 = u[off];
  sol.T = u[off + 1];
  sol.p = u.segment(off + 2, q);
  sol.om1 = u[off + 2 + q];
  sol.om2 = u[off + 3 + q];
  sol.varrho = u[off + 4 + q];
  sol.reference = reference_;
  return sol;
}

void TorusProblem::accept(const Vec& u) { reference_ = make_reference(vf_, unpack(u)); }

Vec TorusProblem::residual(const Vec& u) const {
  const Index blk = segment_block();
  const Index nbp = mesh_->num_basepoints();
  const Index ns = segment_residual_size(*mesh_, n_);
  const Index off = x_size();
  const Index q = vf_.dim_params();
  const double T0 = u[off], T = u[off + 1];
  const Vec p = u.segment(off + 2, q);
  const double om1 = u[off + 2 + q], om2 = u[off + 3 + q], varrho = u[off + 4 + q];

  Vec r(num_equations());
  Vec v0(static_cast<Index>(n_) * n_seg_), vT(static_cast<Index>(n_) * n_seg_);
  for (int j = 0; j < n_seg_; ++j) {
    Eigen::Map<const StateMatrix> x(u.data() + j * blk, nbp, n_);
    segment_residual_into(vf_, *mesh_, x, T, T0, p, r.segment(j * ns, ns));
    v0.segment(j * n_, n_) = x.row(0).transpose();
    vT.segment(j * n_, n_) = x.row(nbp - 1).transpose();
  }
  Index row = ns * n_seg_;
  const Mat R = rotation_matrix(coupling_->N, varrho);
  r.segment(row, v0.size()) = coupling_residual(v0, vT, R, coupling_->F, n_);
  row += v0.size();
  r[row++] = T0;
  r[row++] = T - kTwoPi / om2;
  r[row++] = varrho - om1 / om2;
  const Vec dv = v0.head(n_) - reference_.v00;
  r[row++] = reference_.v_phi.dot(dv);
  if (vf_.autonomous())
    r[row++] = reference_.v_t.dot(dv);
  else
    r[row++] = p[forcing_index(vf_)] - om2;
  return r;
}

void TorusProblem::jacobian_triplets(const Vec& u, std::vector<Triplet>& out) const {
  const Index blk = segment_block();
  const Index nbp = mesh_->num_basepoints();
  const Index ns = segment_residual_size(*mesh_, n_);
  const Index off = x_size();
  const Index q = vf_.dim_params();
  const double T0 = u[off], T = u[off + 1];
  const Vec p = u.segment(off + 2, q);
  const double om1 = u[off + 2 + q], om2 = u[off + 3 + q], varrho = u[off + 4 + q];
  const Index c_T0 = off, c_T = off + 1, c_p = off + 2, c_om1 = off + 2 + q, c_om2 = off + 3 + q,
              c_rho = off + 4 + q;

  out.reserve(out.size() + static_cast<std::size_t>(n_seg_) *
                               (static_cast<std::size_t>(mesh_->num_nodes()) * n_ * (n_ * (mesh_->degree + 1) + 2 + q) +
                                2 * static_cast<std::size_t>(n_seg_) * n_));
  for (int j = 0; j < n_seg_; ++j) {
    Eigen::Map<const StateMatrix> x(u.data() + j * blk, nbp, n_);
    SegmentColumns cols{j * blk, c_T, c_T0, c_p};
    append_segment_jacobian(vf_, *mesh_, x, T, T0, p, j * ns, cols, out);
  }

  // Coupling: row (i, r) = sum_j F(r, j) vT_j[i] - (R F)(r, j) v0_j[i].
  Index row = ns * n_seg_;
  const Mat& F = coupling_->F;
  const Mat RF = rotation_matrix(coupling_->N, varrho) * F;
  const Mat dRF = rotation_matrix_derivative(coupling_->N, varrho) * F;
  Mat V0(n_, n_seg_);
  for (int j = 0; j < n_seg_; ++j) V0.col(j) = Eigen::Map<const Vec>(u.data() + j * blk, n_);
  const Mat dvarrho = V0 * dRF.transpose();  // n x n_seg
  for (int r = 0; r < n_seg_; ++r) {
    for (int j = 0; j < n_seg_; ++j) {
      const Index first = j * blk, last = j * blk + (nbp - 1) * n_;
      for (int i = 0; i < n_; ++i) {
        if (F(r, j) != 0.0) out.emplace_back(row + r * n_ + i, last + i, F(r, j));
        if (RF(r, j) != 0.0) out.emplace_back(row + r * n_ + i, first + i, -RF(r, j));
      }
    }
    for (int i = 0; i < n_; ++i) out.emplace_back(row + r * n_ + i, c_rho, -dvarrho(i, r));
  }
  row += static_cast<Index>(n_) * n_seg_;

  out.emplace_back(row++, c_T0, 1.0);
  out.emplace_back(row, c_T, 1.0);
  out.emplace_back(row++, c_om2, kTwoPi / (om2 * om2));
  out.emplace_back(row, c_rho, 1.0);
  out.emplace_back(row, c_om1, -1.0 / om2);
  out.emplace_back(row++, c_om2, om1 / (om2 * om2));
  for (int i = 0; i < n_; ++i) out.emplace_back(row, i, reference_.v_phi[i]);
  ++row;
  if (vf_.autonomous()) {
    for (int i = 0; i < n_; ++i) out.emplace_back(row, i, reference_.v_t[i]);
  } else {
    out.emplace_back(row, c_p + forcing_index(vf_), 1.0);
    out.emplace_back(row, c_om2, -1.0);
  }
}

std::vector<Monitor> TorusProblem::monitors(const Vec& u) const {
  auto out = ZeroProblem::monitors(u);
  out.emplace_back("T", u[period_index()]);
  return out;
}

// ---------------------------------------------------------------- initial guesses

TorusSolution init_from_samples(const VectorField& vf, const std::vector<double>& t_grid,
                                const std::vector<StateMatrix>& samples, const Vec& p, double om1, double om2,
                                double varrho, int ntst, int degree) {
  const int n_seg = static_cast<int>(samples.size());
  if (n_seg < 3 || n_seg % 2 == 0) throw InputError("torus samples need an odd number (>= 3) of segments");
  if (t_grid.size() < 2) throw InputError("torus samples need at least two time points");
  if (!std::is_sorted(t_grid.begin(), t_grid.end()) || t_grid.back() <= t_grid.front())
    throw InputError("torus sample times must be increasing");
  for (const auto& s : samples)
    if (s.rows() != static_cast<Index>(t_grid.size()) || s.cols() != vf.dim_state())
      throw InputError("torus sample block has wrong shape");
  if (p.size() != vf.dim_params()) throw InputError("torus parameter count mismatch");

  TorusSolution sol;
  sol.mesh = make_mesh(ntst, degree);
  sol.coupling = std::make_shared<const CouplingMatrices>(dft_matrix((n_seg - 1) / 2));
  sol.T0 = 0;
  sol.T = t_grid.back() - t_grid.front();
  sol.p = p;
  sol.om1 = om1;
  sol.om2 = om2;
  sol.varrho = varrho;
  const double t_start = t_grid.front();
  for (const auto& s : samples) {
    StateMatrix x(sol.mesh->num_basepoints(), vf.dim_state());
    for (int k = 0; k < sol.mesh->num_basepoints(); ++k)
      x.row(k) = interpolate_rows(t_grid, s, t_start + sol.T * sol.mesh->basepoints[k]).transpose();
    sol.segments.push_back(std::move(x));
  }
  sol.reference = make_reference(vf, sol);
  return sol;
}

double rms_amplitude(const Trajectory& traj) {
  const Vec mean = traj.x_bp.colwise().mean().transpose();
  double acc = 0;
  for (Index k = 0; k < traj.x_bp.rows(); ++k) acc += (traj.x_bp.row(k).transpose() - mean).squaredNorm();
  return std::sqrt(acc / static_cast<double>(traj.x_bp.rows()));
}

TrInitialization init_from_TR(const VectorField& vf, const PeriodicOrbit& po, const FloquetData& floq, int N,
                              std::optional<double> eps) {
  if (!floq.tr_angle || !floq.tr_eigvec) throw InputError("init_from_TR: Floquet data carries no TR pair");
  if (N < 1) throw InputError("init_from_TR: N must be >= 1");
  const int n = vf.dim_state();
  const double T = po.period();
  const double alpha = *floq.tr_angle;

  // Rotate v so that its real and imaginary parts are orthogonal.
  CVec v = *floq.tr_eigvec;
  v /= v.norm();
  const Vec vr0 = v.real(), vi0 = v.imag();
  const double theta = 0.5 * std::atan2(2 * vr0.dot(vi0), vi0.dot(vi0) - vr0.dot(vr0));
  v *= std::polar(1.0, theta);

  const auto& mesh = *po.traj.mesh;
  std::vector<double> times;
  for (double tau : mesh.basepoints) times.push_back(po.traj.t_offset + T * tau);
  IvpOptions opts;
  opts.rel_tol = 1e-10;
  opts.abs_tol = 1e-12;
  const auto tm = transition_matrix(vf, po.traj.t_offset, T, po.traj.first(), po.p, times, opts);

  TrInitialization init;
  init.theta = theta;
  init.eigvec = v;
  init.eps = eps ? *eps : 0.1 * rms_amplitude(po.traj);

  TorusSolution& sol = init.torus;
  sol.mesh = po.traj.mesh;
  sol.coupling = std::make_shared<const CouplingMatrices>(dft_matrix(N));
  sol.T0 = 0;
  sol.T = T;
  sol.p = po.p;
  sol.om1 = alpha / T;
  sol.om2 = kTwoPi / T;
  sol.varrho = alpha / kTwoPi;
  if (!vf.autonomous()) sol.p[forcing_index(vf)] = kTwoPi / T;

  const int nbp = mesh.num_basepoints();
  std::vector<Vec> ur(nbp), ui(nbp);
  for (int k = 0; k < nbp; ++k) {
    const double t = times[k] - po.traj.t_offset;
    const auto it = std::lower_bound(tm.times.begin(), tm.times.end(), times[k] - 1e-14 * std::max(1.0, T));
    const Mat M = tm.transition(static_cast<std::size_t>(it - tm.times.begin()));
    const CVec w = std::polar(1.0, -alpha * t / T) * (M.cast<std::complex<double>>() * v);
    ur[k] = w.real();
    ui[k] = w.imag();
  }
  for (int j = 0; j < sol.coupling->n_seg; ++j) {
    const double phi = sol.coupling->angles[j];
    StateMatrix x(nbp, n), d(nbp, n);
    for (int k = 0; k < nbp; ++k) {
      const double t = times[k] - po.traj.t_offset;
      const double th1 = phi + sol.om1 * t;
      const Vec pert = std::cos(th1) * ur[k] - std::sin(th1) * ui[k];
      d.row(k) = (init.eps * pert).transpose();
      x.row(k) = po.traj.x_bp.row(k) + d.row(k);
    }
    sol.segments.push_back(std::move(x));
    init.direction.push_back(std::move(d));
  }
  sol.reference = make_reference(vf, sol);
  return init;
}

// ---------------------------------------------------------------- evaluation

Vec evaluate_torus(const TorusSolution& sol, double phi, double t) {
  const double tau = (t - sol.T0) / sol.T;
  if (tau < -1e-12 || tau > 1 + 1e-12) throw InputError("evaluate_torus: t outside [T0, T0 + T]");
  StateMatrix circle(sol.num_segments(), sol.dim());
  for (int j = 0; j < sol.num_segments(); ++j)
    circle.row(j) = interpolate_normalized(*sol.mesh, sol.segments[j], std::clamp(tau, 0.0, 1.0)).transpose();
  return trig_interpolate(*sol.coupling, circle, phi);
}

TorusMesh export_torus_mesh(const TorusSolution& sol, int theta2_count, const std::vector<double>& theta1) {
  if (theta2_count < 2) throw InputError("export needs at least two theta2 samples");
  TorusMesh out;
  out.theta1 = theta1.empty() ? sol.coupling->angles : theta1;
  for (int k = 0; k < theta2_count; ++k) out.theta2.push_back(kTwoPi * k / (theta2_count - 1));
  out.points.assign(out.theta1.size(), std::vector<Vec>(out.theta2.size()));
  StateMatrix circle(sol.num_segments(), sol.dim());
  for (std::size_t k = 0; k < out.theta2.size(); ++k) {
    const double tau = k + 1 == out.theta2.size() ? 1.0 : out.theta2[k] / kTwoPi;
    for (int j = 0; j < sol.num_segments(); ++j)
      circle.row(j) = interpolate_normalized(*sol.mesh, sol.segments[j], tau).transpose();
    const Mat coeffs = sol.coupling->F * circle;
    for (std::size_t i = 0; i < out.theta1.size(); ++i) {
      const double phi = out.theta1[i] - sol.varrho * out.theta2[k];
      Vec v = coeffs.row(0).transpose();
      for (int m = 1; m <= sol.N(); ++m)
        v += std::cos(m * phi) * coeffs.row(2 * m - 1).transpose() + std::sin(m * phi) * coeffs.row(2 * m).transpose();
      out.points[i][k] = std::move(v);
    }
  }
  return out;
}

InvarianceReport validate_invariance(const VectorField& vf, const TorusSolution& sol, int returns, double tol) {
  if (returns < 1) throw InputError("validate needs at least one return");
  std::vector<double> span;
  for (int k = 0; k <= returns; ++k) span.push_back(sol.T0 + k * sol.T);
  IvpOptions opts;
  opts.rel_tol = tol;
  opts.abs_tol = tol;
  const auto traj = integrate(vf, span, sol.segments.front().row(0).transpose(), sol.p, opts);
  const StateMatrix circle = sol.initial_circle();
  InvarianceReport rep;
  for (int k = 1; k <= returns; ++k) {
    const Vec expected = trig_interpolate(*sol.coupling, circle, sol.coupling->angles[0] + kTwoPi * k * sol.varrho);
    rep.deviations.push_back((traj.y[static_cast<std::size_t>(k)] - expected).norm());
  }
  rep.max_deviation = *std::max_element(rep.deviations.begin(), rep.deviations.end());
  double sum = 0;
  for (double d : rep.deviations) sum += d;
  rep.mean_deviation = sum / returns;
  return rep;
}

TorusSolution refine(const VectorField& vf, const TorusSolution& sol, int N_new, int ntst_new) {
  TorusSolution out = sol;
  out.mesh = make_mesh(ntst_new, sol.mesh->degree);
  out.coupling = std::make_shared<const CouplingMatrices>(dft_matrix(N_new));
  const int nbp = out.mesh->num_basepoints();
  out.segments.assign(static_cast<std::size_t>(out.coupling->n_seg), StateMatrix(nbp, sol.dim()));
  StateMatrix circle(sol.num_segments(), sol.dim());
  for (int k = 0; k < nbp; ++k) {
    const double tau = out.mesh->basepoints[k];
    for (int j = 0; j < sol.num_segments(); ++j)
      circle.row(j) = interpolate_normalized(*sol.mesh, sol.segments[j], tau).transpose();
    for (int j = 0; j < out.coupling->n_seg; ++j)
      out.segments[j].row(k) = trig_interpolate(*sol.coupling, circle, out.coupling->angles[j]).transpose();
  }
  out.reference = make_reference(vf, out);
  return out;
}

}  // namespace torcont
