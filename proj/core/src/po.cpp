#include "torcont/po.hpp"

#include <cmath>
#include <numbers>

#include "torcont/error.hpp"

namespace torcont {

namespace {

constexpr double kTwoPi = 2 * std::numbers::pi;
constexpr double kPairImagTol = 1e-6;

Eigen::Map<const StateMatrix> as_states(const Vec& u, Index rows, int n) {
  return Eigen::Map<const StateMatrix>(u.data(), rows, n);
}

double forcing_frequency(const VectorField& vf, const Vec& p) {
  auto idx = vf.forcing_param_index();
  if (!idx) throw ConfigError("non-autonomous field '" + vf.name() + "' declares no forcing-frequency parameter");
  return p[*idx];
}

}  // namespace

Vec po_residual(const VectorField& vf, const PeriodicOrbit& po) {
  const int n = po.traj.dim();
  const Index ns = segment_residual_size(*po.traj.mesh, n);
  Vec r(ns + n + 1);
  segment_residual_into(vf, *po.traj.mesh, po.traj.x_bp, po.traj.duration, po.traj.t_offset, po.p, r.segment(0, ns));
  r.segment(ns, n) = po.traj.last() - po.traj.first();
  if (vf.autonomous()) {
    const Vec x_ref = po.reference.first();
    r[ns + n] = vf.rhs(0, x_ref, po.reference_p).dot(po.traj.first() - x_ref);
  } else {
    r[ns + n] = po.traj.duration - kTwoPi / forcing_frequency(vf, po.p);
  }
  return r;
}

PeriodicOrbit po_from_simulation(const VectorField& vf, const Vec& y0, const Vec& p, double transient,
                                 double period, int ntst, int degree) {
  if (!(period > 0)) throw InputError("periodic orbit guess needs a positive period");
  if (transient < 0) throw InputError("transient must be non-negative");
  IvpOptions opts;
  opts.rel_tol = 1e-10;
  opts.abs_tol = 1e-12;
  opts.dense_output = true;
  // Forced fields: sampling starts at a multiple of the period so that t = 0 on
  // the orbit is the true forcing time.
  const double t_settle = vf.autonomous() ? transient : std::ceil(transient / period) * period;
  std::vector<double> span{0.0, t_settle + period};
  auto sol = integrate(vf, span, y0, p, opts);
  const auto& dense = *sol.dense;
  auto mesh = make_mesh(ntst, degree);
  PeriodicOrbit po;
  po.traj = sample_trajectory(mesh, period, 0.0, vf.dim_state(), [&](double t) { return dense(t_settle + t); });
  po.p = p;
  po.reference = po.traj;
  po.reference_p = p;
  return po;
}

FloquetData floquet(const VectorField& vf, const PeriodicOrbit& po, double tol) {
  IvpOptions opts;
  opts.rel_tol = tol;
  opts.abs_tol = tol * 1e-2;
  const auto tm = transition_matrix(vf, po.traj.t_offset, po.period(), po.traj.first(), po.p, {}, opts);
  FloquetData fd;
  fd.monodromy = tm.monodromy;
  Eigen::EigenSolver<Mat> es(fd.monodromy, true);
  if (es.info() != Eigen::Success) throw ConvergenceError("monodromy eigenproblem failed");
  fd.multipliers = es.eigenvalues();
  fd.eigenvectors = es.eigenvectors();
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(fd.eigenvectors);
  const auto& sv = svd.singularValues();
  fd.ill_conditioned = sv[sv.size() - 1] < 1e-10 * sv[0];
  if (vf.autonomous()) {
    int best = 0;
    for (int i = 1; i < fd.multipliers.size(); ++i)
      if (std::abs(fd.multipliers[i] - 1.0) < std::abs(fd.multipliers[best] - 1.0)) best = i;
    fd.trivial_index = best;
  }
  // TR pair: the complex pair attaining the test-function maximum.
  double best_val = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < fd.multipliers.size(); ++i) {
    if (fd.trivial_index && *fd.trivial_index == i) continue;
    const auto mu = fd.multipliers[i];
    if (mu.imag() <= kPairImagTol) continue;
    const double val = std::abs(mu) - 1;
    if (val > best_val) {
      best_val = val;
      fd.tr_angle = std::arg(mu);
      CVec v = fd.eigenvectors.col(i);
      fd.tr_eigvec = v;
    }
  }
  return fd;
}

std::optional<double> tr_test_function(const FloquetData& floq) {
  std::optional<double> best;
  for (int i = 0; i < floq.multipliers.size(); ++i) {
    if (floq.trivial_index && *floq.trivial_index == i) continue;
    const auto mu = floq.multipliers[i];
    if (std::abs(mu.imag()) <= kPairImagTol) continue;
    const double val = std::abs(mu) - 1;
    if (!best || val > *best) best = val;
  }
  return best;
}

// ---------------------------------------------------------------- PoProblem

PoProblem::PoProblem(VectorField vf, PeriodicOrbit initial, PoOptions opts)
    : vf_(std::move(vf)), mesh_(initial.traj.mesh), n_(vf_.dim_state()), opts_(opts) {
  if (!mesh_) throw InputError("periodic orbit has no mesh");
  if (initial.traj.dim() != n_) throw InputError("periodic orbit dimension does not match the field");
  if (initial.p.size() != vf_.dim_params()) throw InputError("periodic orbit parameter count mismatch");
  if (!vf_.autonomous()) forcing_frequency(vf_, initial.p);
  if (initial.reference.x_bp.rows() != initial.traj.x_bp.rows()) {
    initial.reference = initial.traj;
    initial.reference_p = initial.p;
  }
  set_reference(initial.reference, initial.reference_p);
}

Index PoProblem::num_unknowns() const { return static_cast<Index>(mesh_->num_basepoints()) * n_ + 1 + vf_.dim_params(); }

Index PoProblem::num_equations() const { return segment_residual_size(*mesh_, n_) + n_ + 1; }

Index PoProblem::parameter_offset() const { return static_cast<Index>(mesh_->num_basepoints()) * n_ + 1; }

std::vector<std::string> PoProblem::parameter_names() const { return vf_.param_names(); }

Vec PoProblem::pack(const PeriodicOrbit& po) const {
  Vec u(num_unknowns());
  const Index nx = parameter_offset() - 1;
  u.head(nx) = Eigen::Map<const Vec>(po.traj.x_bp.data(), nx);
  u[nx] = po.traj.duration;
  u.tail(vf_.dim_params()) = po.p;
  return u;
}

PeriodicOrbit PoProblem::unpack(const Vec& u) const {
  const Index nx = parameter_offset() - 1;
  PeriodicOrbit po;
  po.traj.mesh = mesh_;
  po.traj.x_bp = as_states(u, mesh_->num_basepoints(), n_);
  po.traj.duration = u[nx];
  po.traj.t_offset = 0;
  po.p = u.tail(vf_.dim_params());
  po.reference = reference_;
  po.reference_p = reference_p_;
  return po;
}

void PoProblem::set_reference(const Trajectory& traj, const Vec& p) {
  reference_ = traj;
  reference_p_ = p;
  phase_normal_ = vf_.rhs(0, traj.first(), p);
}

void PoProblem::accept(const Vec& u) {
  const auto po = unpack(u);
  set_reference(po.traj, po.p);
}

Vec PoProblem::residual(const Vec& u) const {
  const Index nbp = mesh_->num_basepoints();
  const Index nx = nbp * n_;
  const auto x = as_states(u, nbp, n_);
  const Vec p = u.tail(vf_.dim_params());
  const double T = u[nx];
  const Index ns = segment_residual_size(*mesh_, n_);
  Vec r(num_equations());
  segment_residual_into(vf_, *mesh_, x, T, 0.0, p, r.segment(0, ns));
  r.segment(ns, n_) = (x.row(nbp - 1) - x.row(0)).transpose();
  if (vf_.autonomous())
    r[ns + n_] = phase_normal_.dot(x.row(0).transpose() - reference_.first());
  else
    r[ns + n_] = T - kTwoPi / forcing_frequency(vf_, p);
  return r;
}

void PoProblem::jacobian_triplets(const Vec& u, std::vector<Triplet>& out) const {
  const Index nbp = mesh_->num_basepoints();
  const Index nx = nbp * n_;
  const auto x = as_states(u, nbp, n_);
  const Vec p = u.tail(vf_.dim_params());
  const double T = u[nx];
  SegmentColumns cols{0, nx, -1, nx + 1};
  append_segment_jacobian(vf_, *mesh_, x, T, 0.0, p, 0, cols, out);
  const Index ns = segment_residual_size(*mesh_, n_);
  for (int i = 0; i < n_; ++i) {
    out.emplace_back(ns + i, (nbp - 1) * n_ + i, 1.0);
    out.emplace_back(ns + i, i, -1.0);
  }
  const Index row = ns + n_;
  if (vf_.autonomous()) {
    for (int i = 0; i < n_; ++i) out.emplace_back(row, i, phase_normal_[i]);
  } else {
    const int k = *vf_.forcing_param_index();
    const double om = p[k];
    out.emplace_back(row, nx, 1.0);
    out.emplace_back(row, nx + 1 + k, kTwoPi / (om * om));
  }
}

std::vector<EventFunction> PoProblem::events() const {
  if (!opts_.detect_tr) return {};
  EventFunction tr;
  tr.type = "TR";
  tr.evaluate = [this](const Vec& u) -> std::optional<double> {
    try {
      return tr_test_function(floquet(vf_, unpack(u), opts_.floquet_tol));
    } catch (const Error&) {
      return std::nullopt;
    }
  };
  return {tr};
}

std::vector<Monitor> PoProblem::monitors(const Vec& u) const {
  auto out = ZeroProblem::monitors(u);
  out.emplace_back("T", u[parameter_offset() - 1]);
  return out;
}

}  // namespace torcont
