#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "torcont/sparse_solver.hpp"
#include "torcont/zero_problem.hpp"

namespace torcont {

struct ContinuationOptions {
  double h0 = 0.1;
  double h_min = 1e-3;
  double h_max = 1.0;
  int pt_max = 50;             // points per direction
  bool bi_direct = true;
  int max_corrector_iterations = 10;
  int fast_iterations = 4;     // converging in at most this many iterations doubles h
  double residual_tol = 1e-8;
  double min_tangent_cos = 0.5;  // reject steps that turn the tangent more than this
  bool detect_bp = true;
  bool detect_events = true;
  double event_tol = 1e-6;     // |test| (relative for BP) stopping tolerance
  double bracket_tol = 1e-8;   // arclength bracket stopping tolerance
  int max_bisections = 60;
};

/// Bound on a monitor; leaving [lo, hi] ends the current direction with an EP.
struct Bound {
  std::string name;
  double lo = 0;
  double hi = 0;
};

struct ContinuationProblem {
  std::shared_ptr<ZeroProblem> problem;
  std::vector<std::string> released;
  std::vector<Bound> bounds;
};

enum class PointType { EP, TR, BP, RO };
const char* to_string(PointType t);
PointType point_type_from_string(const std::string& s);

struct LabeledPoint {
  int label = 0;
  PointType type = PointType::RO;
  int pt = 0;
  int direction = 1;
  Vec u;        // full unknown vector
  Vec tangent;  // full coordinates, zero on inactive parameters
  std::vector<Monitor> monitors;
  double residual_norm = 0;
  int iterations = 0;
  double step = 0;
  std::string note;
};

struct Branch {
  std::vector<LabeledPoint> points;
  std::vector<std::string> diagnostics;
};

struct StartData {
  Vec u;                             // full unknown vector
  std::optional<Vec> tangent;        // full coordinates; used as is when `converged`
  std::optional<Vec> tangent_seed;   // orientation hint for the initial null vector
  bool converged = false;            // skip the initial correction (e.g. branch switching)
};

using PointCallback = std::function<void(const LabeledPoint&)>;

/// Maps between full unknown vectors and the active (core + released) subset.
class ActiveLayout {
public:
  ActiveLayout(const ZeroProblem& problem, const std::vector<std::string>& released);

  Index num_active() const { return static_cast<Index>(active_.size()); }
  Vec restrict(const Vec& full) const;
  Vec expand(const Vec& active, const Vec& full_template) const;
  Vec expand_direction(const Vec& active) const;
  Index active_index(Index full) const { return map_[static_cast<std::size_t>(full)]; }
  const std::vector<Index>& active_indices() const { return active_; }

private:
  Index full_size_;
  std::vector<Index> active_;
  std::vector<Index> map_;
};

/// Unknowns minus equations with only `released` parameters active.
Index dimension_deficit(const ZeroProblem& problem, const std::vector<std::string>& released);

struct CorrectorResult {
  bool converged = false;
  int iterations = 0;
  Vec u;
  double residual_norm = 0;
};

/// Bordered Newton/projection machinery shared by continuation, localization and
/// branch switching.  Works in active coordinates.
class BorderedSystem {
public:
  BorderedSystem(std::shared_ptr<ZeroProblem> problem, std::vector<std::string> released, Vec full_template);

  const ActiveLayout& layout() const { return layout_; }
  ZeroProblem& problem() { return *problem_; }
  Vec full(const Vec& active) const { return layout_.expand(active, template_); }
  void set_template(const Vec& full) { template_ = full; }

  Vec residual(const Vec& active) const;
  std::vector<Triplet> jacobian(const Vec& active) const;

  /// Solves F(u) = 0, border . (u - u_pred) = 0 starting from u_pred.
  CorrectorResult correct(const Vec& u_pred, const Vec& border, int max_iterations, double tol) const;

  struct TangentInfo {
    Vec tangent;
    int det_sign = 0;
    double log_abs_det = 0;
    bool ok = false;
  };
  /// Unit null vector of J(u) oriented so that tangent . border > 0, with the
  /// determinant of [J; border^T].
  TangentInfo tangent(const Vec& u, const Vec& border) const;

private:
  std::shared_ptr<ZeroProblem> problem_;
  ActiveLayout layout_;
  Vec template_;
};

enum class LocateMethod { Bisection, Illinois };

struct LocateResult {
  bool located = false;
  double s = 0;              // arclength position in [0, length]
  double value = 0;
  int evaluations = 0;
  double bracket_width = 0;
  Vec point;                 // point_at(s) of the final estimate
  double s_lo = 0, s_hi = 0; // final bracket
};

/// Locates a sign change of test(point_at(s)) on [0, length] given the values at
/// both ends.  point_at returns nullopt when no point can be computed (corrector
/// failure); test returns nullopt where it is undefined.  Either ends the search
/// with located = false and the last valid bracket.
LocateResult locate_event(const std::function<std::optional<double>(const Vec&)>& test,
                          const std::function<std::optional<Vec>(double)>& point_at, double length, double f_lo,
                          double f_hi, double f_tol, double s_tol, int max_iterations,
                          LocateMethod method = LocateMethod::Bisection);

/// Runs pseudo-arclength continuation from `start`.  Throws ConfigError when the
/// released parameters do not give a one-dimensional manifold and
/// ConvergenceError when the start point cannot be corrected.
Branch run(ContinuationProblem& cp, const StartData& start, const ContinuationOptions& opts,
           const PointCallback& on_point = {});

/// Second tangent at a branch point: null direction of [J; t_in^T] via inverse
/// iteration, orthogonalized against t_in.  Throws KindError if the null space is
/// not (numerically) two-dimensional.
StartData switch_branch(std::shared_ptr<ZeroProblem> problem, const std::vector<std::string>& released,
                        const Vec& u_bp, const Vec& tangent_in, double null_tol = 1e-4);

/// Plain Newton on a square system (released parameters give deficit 0).  The
/// result vector is in full coordinates.  Throws ConfigError for a non-square
/// system.
CorrectorResult solve_square(std::shared_ptr<ZeroProblem> problem, const std::vector<std::string>& released,
                             const Vec& u_full, int max_iterations = 10, double tol = 1e-8);

/// Sign/log-magnitude of det([J; t^T]) at a point: the branch-point test.
struct BranchPointTest {
  int sign = 0;
  double log_abs = 0;
};
BranchPointTest branch_point_test(const BorderedSystem& sys, const Vec& u_active, const Vec& tangent_active);

}  // namespace torcont
