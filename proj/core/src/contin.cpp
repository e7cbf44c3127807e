#include "torcont/contin.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "torcont/error.hpp"

namespace torcont {

namespace {

// Relative determinant value above which a bracketed sign change is a jump.
constexpr double kDeterminantJump = 1e-3;

double inf_norm(const Vec& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }

std::optional<double> monitor_value(const std::vector<Monitor>& monitors, const std::string& name) {
  for (const auto& [k, v] : monitors)
    if (k == name) return v;
  return std::nullopt;
}

}  // namespace

// ---------------------------------------------------------------- ZeroProblem

std::vector<Monitor> ZeroProblem::monitors(const Vec& u) const {
  std::vector<Monitor> out;
  const auto names = parameter_names();
  for (std::size_t i = 0; i < names.size(); ++i)
    out.emplace_back(names[i], u[parameter_offset() + static_cast<Index>(i)]);
  return out;
}

Index ZeroProblem::parameter_index(const std::string& name) const {
  const auto names = parameter_names();
  auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) throw ConfigError("unknown continuation parameter '" + name + "'");
  return parameter_offset() + static_cast<Index>(it - names.begin());
}

SpMat ZeroProblem::jacobian(const Vec& u) const {
  std::vector<Triplet> trip;
  jacobian_triplets(u, trip);
  SpMat J(num_equations(), num_unknowns());
  J.setFromTriplets(trip.begin(), trip.end());
  return J;
}

Mat finite_difference_jacobian(const ZeroProblem& problem, const Vec& u, double rel_step) {
  Mat J(problem.num_equations(), problem.num_unknowns());
  Vec up = u, um = u;
  for (Index j = 0; j < u.size(); ++j) {
    const double h = std::max(rel_step, rel_step * std::abs(u[j]));
    up[j] = u[j] + h;
    um[j] = u[j] - h;
    J.col(j) = (problem.residual(up) - problem.residual(um)) / (2 * h);
    up[j] = um[j] = u[j];
  }
  return J;
}

// ---------------------------------------------------------------- point types

const char* to_string(PointType t) {
  switch (t) {
    case PointType::EP: return "EP";
    case PointType::TR: return "TR";
    case PointType::BP: return "BP";
    case PointType::RO: return "RO";
  }
  return "RO";
}

PointType point_type_from_string(const std::string& s) {
  if (s == "EP") return PointType::EP;
  if (s == "TR") return PointType::TR;
  if (s == "BP") return PointType::BP;
  if (s == "RO") return PointType::RO;
  throw FormatError("unknown point type '" + s + "'");
}

// ---------------------------------------------------------------- layout

ActiveLayout::ActiveLayout(const ZeroProblem& problem, const std::vector<std::string>& released)
    : full_size_(problem.num_unknowns()), map_(static_cast<std::size_t>(problem.num_unknowns()), -1) {
  const Index offset = problem.parameter_offset();
  for (Index i = 0; i < offset; ++i) active_.push_back(i);
  std::vector<Index> rel;
  for (const auto& name : released) {
    const Index idx = problem.parameter_index(name);
    if (std::find(rel.begin(), rel.end(), idx) != rel.end())
      throw ConfigError("parameter '" + name + "' released twice");
    rel.push_back(idx);
  }
  active_.insert(active_.end(), rel.begin(), rel.end());
  for (std::size_t k = 0; k < active_.size(); ++k) map_[static_cast<std::size_t>(active_[k])] = static_cast<Index>(k);
}

Vec ActiveLayout::restrict(const Vec& full) const {
  Vec a(num_active());
  for (Index k = 0; k < num_active(); ++k) a[k] = full[active_[static_cast<std::size_t>(k)]];
  return a;
}

Vec ActiveLayout::expand(const Vec& active, const Vec& full_template) const {
  Vec f = full_template;
  for (Index k = 0; k < num_active(); ++k) f[active_[static_cast<std::size_t>(k)]] = active[k];
  return f;
}

Vec ActiveLayout::expand_direction(const Vec& active) const { return expand(active, Vec::Zero(full_size_)); }

Index dimension_deficit(const ZeroProblem& problem, const std::vector<std::string>& released) {
  ActiveLayout layout(problem, released);
  return layout.num_active() - problem.num_equations();
}

// ---------------------------------------------------------------- bordered system

BorderedSystem::BorderedSystem(std::shared_ptr<ZeroProblem> problem, std::vector<std::string> released,
                               Vec full_template)
    : problem_(std::move(problem)), layout_(*problem_, released), template_(std::move(full_template)) {}

Vec BorderedSystem::residual(const Vec& active) const { return problem_->residual(full(active)); }

std::vector<Triplet> BorderedSystem::jacobian(const Vec& active) const {
  std::vector<Triplet> full_trip;
  problem_->jacobian_triplets(full(active), full_trip);
  std::vector<Triplet> out;
  out.reserve(full_trip.size());
  for (const auto& t : full_trip) {
    const Index c = layout_.active_index(t.col());
    if (c >= 0) out.emplace_back(t.row(), c, t.value());
  }
  return out;
}

CorrectorResult BorderedSystem::correct(const Vec& u_pred, const Vec& border, int max_iterations, double tol) const {
  CorrectorResult res;
  res.u = u_pred;
  const Index m = problem_->num_equations();
  const Index na = layout_.num_active();
  Vec r = residual(res.u);
  res.residual_norm = inf_norm(r);
  const double r0 = std::max(1.0, res.residual_norm);
  if (res.residual_norm < tol) {
    res.converged = true;
    return res;
  }
  SparseLinearSolver solver;
  for (int it = 1; it <= max_iterations; ++it) {
    const SpMat A = assemble_bordered(jacobian(res.u), m, na, border);
    if (!solver.factorize(A)) return res;
    Vec rhs(m + 1);
    rhs.head(m) = -r;
    rhs[m] = -border.dot(res.u - u_pred);
    const Vec du = solver.solve(rhs);
    if (!du.allFinite()) return res;
    res.u += du;
    res.iterations = it;
    r = residual(res.u);
    res.residual_norm = inf_norm(r);
    if (!std::isfinite(res.residual_norm) || res.residual_norm > 1e8 * r0) return res;
    if (res.residual_norm < tol) {
      res.converged = true;
      return res;
    }
  }
  return res;
}

BorderedSystem::TangentInfo BorderedSystem::tangent(const Vec& u, const Vec& border) const {
  TangentInfo info;
  const Index m = problem_->num_equations();
  const Index na = layout_.num_active();
  SparseLinearSolver solver;
  if (!solver.factorize(assemble_bordered(jacobian(u), m, na, border))) return info;
  Vec e = Vec::Zero(m + 1);
  e[m] = 1;
  Vec z = solver.solve(e);
  const double nz = z.norm();
  if (!std::isfinite(nz) || nz == 0) return info;
  info.tangent = z / nz;
  info.det_sign = solver.sign_determinant();
  info.log_abs_det = solver.log_abs_determinant();
  info.ok = true;
  return info;
}

BranchPointTest branch_point_test(const BorderedSystem& sys, const Vec& u_active, const Vec& tangent_active) {
  const auto info = sys.tangent(u_active, tangent_active);
  return {info.det_sign, info.log_abs_det};
}

// ---------------------------------------------------------------- localization

LocateResult locate_event(const std::function<std::optional<double>(const Vec&)>& test,
                          const std::function<std::optional<Vec>(double)>& point_at, double length, double f_lo,
                          double f_hi, double f_tol, double s_tol, int max_iterations, LocateMethod method) {
  LocateResult res;
  double lo = 0, hi = length;
  double flo = f_lo, fhi = f_hi;
  int retained = 0;  // Illinois: +1 when lo was kept repeatedly, -1 for hi
  res.s_lo = lo;
  res.s_hi = hi;
  if (flo * fhi > 0) return res;
  for (int it = 0; it < max_iterations; ++it) {
    double s = 0.5 * (lo + hi);
    if (method == LocateMethod::Illinois && fhi != flo) {
      s = (lo * fhi - hi * flo) / (fhi - flo);
      if (!(s > lo && s < hi)) s = 0.5 * (lo + hi);
    }
    auto p = point_at(s);
    ++res.evaluations;
    if (!p) return res;
    auto f = test(*p);
    if (!f) return res;
    res.point = std::move(*p);
    res.s = s;
    res.value = *f;
    if (std::abs(*f) < f_tol) {
      res.located = true;
      break;
    }
    if ((*f < 0) == (flo < 0)) {
      lo = s;
      flo = *f;
      if (method == LocateMethod::Illinois && retained == -1) fhi *= 0.5;
      retained = -1;
    } else {
      hi = s;
      fhi = *f;
      if (method == LocateMethod::Illinois && retained == 1) flo *= 0.5;
      retained = 1;
    }
    res.s_lo = lo;
    res.s_hi = hi;
    if (hi - lo < s_tol) {
      res.located = true;
      break;
    }
  }
  res.s_lo = lo;
  res.s_hi = hi;
  res.bracket_width = hi - lo;
  return res;
}

// ---------------------------------------------------------------- continuation

namespace {

struct PointState {
  Vec u;
  Vec t;
  int det_sign = 0;
  double log_det = 0;
  std::vector<std::optional<double>> events;
  std::vector<Monitor> monitors;
  int iterations = 0;
  double residual = 0;
};

struct PendingEvent {
  double s;
  PointType type;
  Vec u;
  Vec t;
  std::string note;
  bool terminal = false;
};

class Runner {
public:
  Runner(ContinuationProblem& cp, const ContinuationOptions& opts, const PointCallback& cb, const Vec& tmpl)
      : cp_(cp), opts_(opts), cb_(cb), sys_(cp.problem, cp.released, tmpl), events_(cp.problem->events()) {}

  Branch execute(const StartData& start);

private:
  PointState make_state(const Vec& u, const Vec& t, const Vec& border, int iterations, double residual,
                        bool singular_ok);
  void emit(PointType type, int pt, int dir, const Vec& u, const Vec& t, int iterations, double residual,
            double step, const std::string& note);
  void run_direction(const PointState& start, int dir);
  std::vector<PendingEvent> scan_events(const PointState& prev, const PointState& next);
  std::optional<Vec> point_on_chord(const Vec& base, const Vec& dir, double s) const;

  ContinuationProblem& cp_;
  ContinuationOptions opts_;
  const PointCallback& cb_;
  BorderedSystem sys_;
  std::vector<EventFunction> events_;
  Branch branch_;
  int next_label_ = 1;
  bool orientation_jump_ = false;
  bool skip_first_angle_check_ = false;
};

PointState Runner::make_state(const Vec& u, const Vec& t, const Vec& border, int iterations, double residual,
                              bool singular_ok) {
  PointState st;
  st.u = u;
  st.t = t;
  st.iterations = iterations;
  st.residual = residual;
  if (opts_.detect_bp && !singular_ok) {
    auto info = sys_.tangent(u, border);
    st.det_sign = info.det_sign;
    st.log_det = info.log_abs_det;
  }
  const Vec full = sys_.full(u);
  st.monitors = sys_.problem().monitors(full);
  if (opts_.detect_events)
    for (const auto& ev : events_) st.events.push_back(ev.evaluate(full));
  return st;
}

void Runner::emit(PointType type, int pt, int dir, const Vec& u, const Vec& t, int iterations, double residual,
                  double step, const std::string& note) {
  LabeledPoint p;
  p.label = next_label_++;
  p.type = type;
  p.pt = pt;
  p.direction = dir;
  p.u = sys_.full(u);
  p.tangent = sys_.layout().expand_direction(t);
  p.monitors = sys_.problem().monitors(p.u);
  p.residual_norm = residual;
  p.iterations = iterations;
  p.step = step;
  p.note = note;
  if (cb_) cb_(p);
  branch_.points.push_back(std::move(p));
}

std::optional<Vec> Runner::point_on_chord(const Vec& base, const Vec& dir, double s) const {
  auto c = sys_.correct(base + s * dir, dir, opts_.max_corrector_iterations, opts_.residual_tol);
  if (!c.converged) return std::nullopt;
  return c.u;
}

std::vector<PendingEvent> Runner::scan_events(const PointState& prev, const PointState& next) {
  std::vector<PendingEvent> found;
  const Vec chord = next.u - prev.u;
  const double length = chord.norm();
  if (length == 0) return found;
  const Vec d = chord / length;
  auto point_at = [&](double s) { return point_on_chord(prev.u, d, s); };
  // Interpolated tangent; at a branch point the bordered system is singular, so
  // the null vector there would be meaningless.
  auto tangent_at = [&](double s) {
    Vec t = (1 - s / length) * prev.t + (s / length) * next.t;
    return Vec(t / t.norm());
  };

  // Bounds: the first crossing terminates this direction.
  std::optional<PendingEvent> bound_event;
  for (const auto& b : cp_.bounds) {
    const auto v0 = monitor_value(prev.monitors, b.name);
    const auto v1 = monitor_value(next.monitors, b.name);
    if (!v0 || !v1) continue;
    for (double edge : {b.lo, b.hi}) {
      const double f0 = *v0 - edge, f1 = *v1 - edge;
      const bool inside0 = *v0 >= b.lo && *v0 <= b.hi;
      if (!inside0 || f0 == 0.0 || f0 * f1 > 0) continue;
      {
        auto test = [&](const Vec& u) -> std::optional<double> {
          auto v = monitor_value(sys_.problem().monitors(sys_.full(u)), b.name);
          if (!v) return std::nullopt;
          return *v - edge;
        };
        auto res = locate_event(test, point_at, length, f0, f1, 1e-10 * (1 + std::abs(edge)), opts_.bracket_tol,
                                opts_.max_bisections, LocateMethod::Illinois);
        PendingEvent ev;
        ev.type = PointType::EP;
        ev.terminal = true;
        if (res.located && res.point.size()) {
          ev.s = res.s;
          ev.u = res.point;
        } else {
          ev.s = length;
          ev.u = next.u;
        }
        ev.t = tangent_at(ev.s);
        std::ostringstream note;
        note << "boundary " << b.name << "=" << edge;
        ev.note = note.str();
        if (!bound_event || ev.s < bound_event->s) bound_event = ev;
      }
    }
  }

  // Problem-defined events (TR).
  if (opts_.detect_events) {
    for (std::size_t k = 0; k < events_.size(); ++k) {
      const auto& a = prev.events[k];
      const auto& b = next.events[k];
      if (!a || !b || (*a < 0) == (*b < 0)) continue;
      auto test = [&](const Vec& u) { return events_[k].evaluate(sys_.full(u)); };
      auto res = locate_event(test, point_at, length, *a, *b, opts_.event_tol, opts_.bracket_tol,
                              opts_.max_bisections);
      PendingEvent ev;
      ev.type = point_type_from_string(events_[k].type);
      ev.s = res.point.size() ? res.s : length;
      ev.u = res.point.size() ? res.point : next.u;
      ev.t = tangent_at(ev.s);
      if (!res.located) ev.note = "unlocated: bracket lost";
      found.push_back(std::move(ev));
    }
  }

  // Branch points: sign change of det([J; t^T]).
  if (opts_.detect_bp && prev.det_sign != 0 && next.det_sign != 0 && prev.det_sign != next.det_sign) {
    const auto end_a = sys_.tangent(prev.u, d);
    const auto end_b = sys_.tangent(next.u, d);
    const double ref = std::max(end_a.log_abs_det, end_b.log_abs_det);
    auto det_value = [&](const Vec& u) -> std::optional<double> {
      auto info = sys_.tangent(u, d);
      if (!info.ok && info.det_sign == 0) return 0.0;
      return info.det_sign * std::exp(info.log_abs_det - ref);
    };
    const double fa = end_a.det_sign * std::exp(end_a.log_abs_det - ref);
    const double fb = end_b.det_sign * std::exp(end_b.log_abs_det - ref);
    // A genuine branch point is a zero of the determinant; a sign flip without a
    // zero means the corrector jumped to a returning leg of a sharp turn.
    bool genuine = false;
    PendingEvent ev;
    ev.type = PointType::BP;
    if (fa * fb < 0) {
      auto res = locate_event(det_value, point_at, length, fa, fb, opts_.event_tol, opts_.bracket_tol,
                              opts_.max_bisections);
      genuine = res.located && res.point.size() && std::abs(res.value) < kDeterminantJump;
      ev.s = res.s;
      ev.u = res.point;
    }
    if (!genuine) {
      orientation_jump_ = true;
      return {};
    }
    ev.t = tangent_at(ev.s);
    found.push_back(std::move(ev));
  }

  std::sort(found.begin(), found.end(), [](const auto& x, const auto& y) { return x.s < y.s; });
  if (bound_event) {
    std::erase_if(found, [&](const PendingEvent& e) { return e.s > bound_event->s; });
    found.push_back(*bound_event);
  }
  return found;
}

void Runner::run_direction(const PointState& start, int dir) {
  sys_.problem().accept(sys_.full(start.u));
  PointState prev = start;
  prev.t = dir * start.t;
  if (dir < 0) prev.det_sign = -prev.det_sign;  // det([J; -t^T]) = -det([J; t^T])
  Vec direction = prev.t;
  double h = std::clamp(opts_.h0, opts_.h_min, opts_.h_max);
  int pts = 0;
  const Index fold_idx = sys_.layout().num_active() - static_cast<Index>(cp_.released.size());
  bool first = true;

  while (pts < opts_.pt_max) {
    const Vec u_pred = prev.u + h * direction;
    auto corr = sys_.correct(u_pred, direction, opts_.max_corrector_iterations, opts_.residual_tol);
    bool ok = corr.converged;
    BorderedSystem::TangentInfo ti;
    if (ok) {
      if ((corr.u - prev.u).norm() > 2 * h) ok = false;
    }
    if (ok) {
      ti = sys_.tangent(corr.u, direction);
      ok = ti.ok;
      const bool check_angle = !(first && skip_first_angle_check_);
      if (ok && check_angle && ti.tangent.dot(prev.t) < opts_.min_tangent_cos && h > opts_.h_min * (1 + 1e-12))
        ok = false;
    }
    if (!ok) {
      if (h <= opts_.h_min * (1 + 1e-12)) {
        std::ostringstream msg;
        msg << "direction " << dir << ": corrector failed at h_min=" << opts_.h_min << " after " << pts
            << " points";
        branch_.diagnostics.push_back(msg.str());
        emit(PointType::EP, pts, dir, prev.u, prev.t, prev.iterations, prev.residual, h,
             "corrector failure at h_min");
        return;
      }
      h = std::max(0.5 * h, opts_.h_min);
      continue;
    }
    ++pts;
    PointState next = make_state(corr.u, ti.tangent, direction, corr.iterations, corr.residual_norm, false);
    next.det_sign = ti.det_sign;
    next.log_det = ti.log_abs_det;

    orientation_jump_ = false;
    auto found = scan_events(prev, next);
    if (orientation_jump_) {
      --pts;
      if (h <= opts_.h_min * (1 + 1e-12)) {
        branch_.diagnostics.push_back("direction " + std::to_string(dir) +
                                      ": branch orientation reverses at h_min");
        emit(PointType::EP, pts, dir, prev.u, prev.t, prev.iterations, prev.residual, h,
             "orientation reversal at h_min");
        return;
      }
      h = std::max(0.5 * h, opts_.h_min);
      continue;
    }
    bool terminal = false;
    for (auto& ev : found) {
      emit(ev.type, pts, dir, ev.u, ev.t, corr.iterations, inf_norm(sys_.residual(ev.u)), h, ev.note);
      if (ev.terminal) terminal = true;
    }
    if (terminal) return;

    std::string note;
    if (fold_idx < next.t.size() && prev.t[fold_idx] * next.t[fold_idx] < 0)
      note = "FP: extremum in " + cp_.released.front();
    const bool last = pts == opts_.pt_max;
    emit(last ? PointType::EP : PointType::RO, pts, dir, next.u, next.t, corr.iterations, corr.residual_norm, h,
         note);
    sys_.problem().accept(sys_.full(next.u));

    if (corr.iterations <= opts_.fast_iterations) h = std::min(2 * h, opts_.h_max);
    const Vec chord = next.u - prev.u;
    direction = chord / chord.norm();
    prev = std::move(next);
    first = false;
  }
}

Branch Runner::execute(const StartData& start) {
  auto& problem = *cp_.problem;
  if (start.u.size() != problem.num_unknowns()) throw InputError("continuation start vector has wrong length");
  const Index deficit = sys_.layout().num_active() - problem.num_equations();
  if (deficit != 1) {
    std::ostringstream msg;
    msg << "released parameters give a " << deficit << "-dimensional problem (need 1): "
        << problem.num_equations() << " equations, " << sys_.layout().num_active() << " active unknowns";
    throw ConfigError(msg.str());
  }
  {
    const auto mons = problem.monitors(start.u);
    for (const auto& b : cp_.bounds)
      if (!monitor_value(mons, b.name)) throw ConfigError("bound on unknown monitor '" + b.name + "'");
  }

  Vec u0 = sys_.layout().restrict(start.u);
  Vec t0;
  int iterations = 0;
  double residual = 0;

  if (start.converged) {
    residual = inf_norm(sys_.residual(u0));
    if (residual >= opts_.residual_tol * 10)
      throw ConvergenceError("start point marked converged but residual is " + std::to_string(residual));
    if (start.tangent) {
      t0 = sys_.layout().restrict(*start.tangent);
      t0.normalize();
      skip_first_angle_check_ = true;
    } else {
      Vec seed = Vec::Zero(u0.size());
      seed[u0.size() - static_cast<Index>(cp_.released.size())] = 1;
      auto ti = sys_.tangent(u0, seed);
      if (!ti.ok) throw ConvergenceError("cannot compute the initial tangent");
      t0 = ti.tangent;
    }
  } else {
    Vec seed = Vec::Zero(u0.size());
    if (start.tangent_seed) seed = sys_.layout().restrict(*start.tangent_seed);
    if (seed.norm() == 0) seed[u0.size() - static_cast<Index>(cp_.released.size())] = 1;
    seed.normalize();
    auto ti = sys_.tangent(u0, seed);
    if (!ti.ok) throw ConvergenceError("cannot compute the initial tangent (singular Jacobian at the start point)");
    auto corr = sys_.correct(u0, ti.tangent, opts_.max_corrector_iterations, opts_.residual_tol);
    if (!corr.converged) {
      std::ostringstream msg;
      msg << "initial correction failed after " << corr.iterations << " iterations, |F| = " << corr.residual_norm;
      throw ConvergenceError(msg.str());
    }
    u0 = corr.u;
    iterations = corr.iterations;
    residual = corr.residual_norm;
    auto ti2 = sys_.tangent(u0, ti.tangent);
    if (!ti2.ok) throw ConvergenceError("cannot compute the tangent at the corrected start point");
    t0 = ti2.tangent;
  }

  PointState st = make_state(u0, t0, t0, iterations, residual, start.converged && start.tangent.has_value());
  emit(PointType::EP, 0, 1, u0, t0, iterations, residual, 0, start.converged ? "start (converged)" : "start");
  std::vector<int> dirs{1};
  if (opts_.bi_direct) dirs.push_back(-1);
  for (int dir : dirs) run_direction(st, dir);
  return std::move(branch_);
}

}  // namespace

Branch run(ContinuationProblem& cp, const StartData& start, const ContinuationOptions& opts,
           const PointCallback& on_point) {
  if (!cp.problem) throw InputError("continuation problem is empty");
  if (opts.h_min <= 0 || opts.h_max < opts.h_min) throw ConfigError("need 0 < h_min <= h_max");
  if (opts.pt_max < 0) throw ConfigError("pt_max must be non-negative");
  Runner runner(cp, opts, on_point, start.u);
  return runner.execute(start);
}

CorrectorResult solve_square(std::shared_ptr<ZeroProblem> problem, const std::vector<std::string>& released,
                             const Vec& u_full, int max_iterations, double tol) {
  ActiveLayout layout(*problem, released);
  const Index m = problem->num_equations();
  if (layout.num_active() != m) {
    std::ostringstream msg;
    msg << "square solve needs as many active unknowns as equations (" << layout.num_active() << " vs " << m << ")";
    throw ConfigError(msg.str());
  }
  CorrectorResult res;
  res.u = u_full;
  Vec r = problem->residual(res.u);
  res.residual_norm = inf_norm(r);
  SparseLinearSolver solver;
  for (int it = 1; it <= max_iterations && res.residual_norm >= tol; ++it) {
    std::vector<Triplet> full_trip, trip;
    problem->jacobian_triplets(res.u, full_trip);
    for (const auto& t : full_trip) {
      const Index c = layout.active_index(t.col());
      if (c >= 0) trip.emplace_back(t.row(), c, t.value());
    }
    SpMat J(m, m);
    J.setFromTriplets(trip.begin(), trip.end());
    if (!solver.factorize(J)) return res;
    const Vec du = solver.solve(-r);
    if (!du.allFinite()) return res;
    res.u = layout.expand(layout.restrict(res.u) + du, res.u);
    res.iterations = it;
    r = problem->residual(res.u);
    res.residual_norm = inf_norm(r);
    if (!std::isfinite(res.residual_norm)) return res;
  }
  res.converged = res.residual_norm < tol;
  return res;
}

// ---------------------------------------------------------------- branch switching

StartData switch_branch(std::shared_ptr<ZeroProblem> problem, const std::vector<std::string>& released,
                        const Vec& u_bp, const Vec& tangent_in, double null_tol) {
  BorderedSystem sys(problem, released, u_bp);
  const Vec u = sys.layout().restrict(u_bp);
  Vec t_in = sys.layout().restrict(tangent_in);
  if (t_in.norm() == 0) throw KindError("switch_branch: incoming tangent is zero");
  t_in.normalize();
  const Index m = problem->num_equations();
  const Index na = sys.layout().num_active();
  if (na != m + 1) throw ConfigError("switch_branch: released parameters do not give a one-dimensional problem");

  const auto jac = sys.jacobian(u);
  const SpMat A = assemble_bordered(jac, m, na, t_in);
  SparseLinearSolver solver;
  if (!solver.factorize(A)) throw KindError("switch_branch: bordered Jacobian is exactly singular");

  std::mt19937 rng(20240607u);
  std::normal_distribution<double> normal;
  Vec w(na);
  for (Index i = 0; i < na; ++i) w[i] = normal(rng);
  w.normalize();
  for (int it = 0; it < 4; ++it) {
    w = solver.solve(w);
    w -= w.dot(t_in) * t_in;
    const double nw = w.norm();
    if (!std::isfinite(nw) || nw == 0) throw KindError("switch_branch: inverse iteration broke down");
    w /= nw;
  }
  SpMat J(m, na);
  J.setFromTriplets(jac.begin(), jac.end());
  // Scale of the bordered matrix: J alone may vanish entirely at a branch point.
  double scale = t_in.cwiseAbs().maxCoeff();
  for (Index k = 0; k < J.outerSize(); ++k)
    for (SpMat::InnerIterator it(J, k); it; ++it) scale = std::max(scale, std::abs(it.value()));
  const double defect = inf_norm(J * w) / std::max(scale, 1e-300);
  if (defect > null_tol) {
    std::ostringstream msg;
    msg << "switch_branch: null space is not two-dimensional (relative defect " << defect << ")";
    throw KindError(msg.str());
  }
  StartData out;
  out.u = u_bp;
  out.tangent = sys.layout().expand_direction(w);
  out.converged = true;
  return out;
}

}  // namespace torcont
