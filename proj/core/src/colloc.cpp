#include "torcont/colloc.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "torcont/error.hpp"

namespace torcont {

std::vector<double> gauss_legendre_nodes(int m) {
  std::vector<double> x(m);
  for (int i = 0; i < m; ++i) {
    double z = std::cos(std::numbers::pi * (i + 0.75) / (m + 0.5));
    for (int it = 0; it < 100; ++it) {
      double p0 = 1, p1 = z;
      for (int k = 2; k <= m; ++k) {
        const double pk = ((2 * k - 1) * z * p1 - (k - 1) * p0) / k;
        p0 = p1;
        p1 = pk;
      }
      if (m == 1) p0 = 1;
      // P_m = p1, P_{m-1} = p0
      const double dp = m * (z * p1 - p0) / (z * z - 1);
      const double dz = p1 / dp;
      z -= dz;
      if (std::abs(dz) < 1e-16) break;
    }
    x[i] = z;
  }
  std::sort(x.begin(), x.end());
  return x;
}

Vec lagrange_basis(const std::vector<double>& nodes, double s) {
  const int np = static_cast<int>(nodes.size());
  Vec L(np);
  for (int l = 0; l < np; ++l) {
    double v = 1;
    for (int k = 0; k < np; ++k)
      if (k != l) v *= (s - nodes[k]) / (nodes[l] - nodes[k]);
    L[l] = v;
  }
  return L;
}

Vec lagrange_basis_derivative(const std::vector<double>& nodes, double s) {
  const int np = static_cast<int>(nodes.size());
  Vec D = Vec::Zero(np);
  for (int l = 0; l < np; ++l) {
    double denom = 1;
    for (int k = 0; k < np; ++k)
      if (k != l) denom *= nodes[l] - nodes[k];
    double sum = 0;
    for (int j = 0; j < np; ++j) {
      if (j == l) continue;
      double prod = 1;
      for (int k = 0; k < np; ++k)
        if (k != l && k != j) prod *= s - nodes[k];
      sum += prod;
    }
    D[l] = sum / denom;
  }
  return D;
}

SegmentMesh build_mesh(int ntst, int degree) {
  if (ntst < 1) throw InputError("build_mesh: ntst must be >= 1");
  if (degree < 1 || degree > 7) throw InputError("build_mesh: degree must be in [1, 7]");
  SegmentMesh mesh;
  mesh.ntst = ntst;
  mesh.degree = degree;
  for (int k = 0; k <= ntst; ++k) mesh.subinterval_bounds.push_back(static_cast<double>(k) / ntst);

  for (int l = 0; l <= degree; ++l) mesh.ref_base.push_back(static_cast<double>(l) / degree);
  for (double g : gauss_legendre_nodes(degree)) mesh.ref_nodes.push_back(0.5 * (g + 1));

  mesh.W.resize(degree, degree + 1);
  mesh.Wp.resize(degree, degree + 1);
  for (int c = 0; c < degree; ++c) {
    mesh.W.row(c) = lagrange_basis(mesh.ref_base, mesh.ref_nodes[c]).transpose();
    mesh.Wp.row(c) = lagrange_basis_derivative(mesh.ref_base, mesh.ref_nodes[c]).transpose();
  }
  for (int k = 0; k < ntst; ++k) {
    const double a = mesh.subinterval_bounds[k], h = mesh.width(k);
    for (double s : mesh.ref_base) mesh.basepoints.push_back(a + h * s);
    for (double s : mesh.ref_nodes) mesh.collnodes.push_back(a + h * s);
  }
  return mesh;
}

std::shared_ptr<const SegmentMesh> make_mesh(int ntst, int degree) {
  return std::make_shared<const SegmentMesh>(build_mesh(ntst, degree));
}

Trajectory sample_trajectory(std::shared_ptr<const SegmentMesh> mesh, double duration, double t_offset, int n,
                             const std::function<Vec(double)>& fn) {
  Trajectory traj;
  traj.x_bp.resize(mesh->num_basepoints(), n);
  for (int i = 0; i < mesh->num_basepoints(); ++i)
    traj.x_bp.row(i) = fn(t_offset + duration * mesh->basepoints[i]).transpose();
  traj.mesh = std::move(mesh);
  traj.duration = duration;
  traj.t_offset = t_offset;
  return traj;
}

Vec interpolate_normalized(const SegmentMesh& mesh, const Eigen::Ref<const StateMatrix>& x_bp, double tau) {
  const auto& b = mesh.subinterval_bounds;
  int k = static_cast<int>(std::upper_bound(b.begin(), b.end(), tau) - b.begin()) - 1;
  k = std::clamp(k, 0, mesh.ntst - 1);
  const double s = (tau - b[k]) / mesh.width(k);
  const Vec L = lagrange_basis(mesh.ref_base, s);
  const int m1 = mesh.degree + 1;
  return (L.transpose() * x_bp.middleRows(k * m1, m1)).transpose();
}

Vec interpolate(const Trajectory& traj, double t) {
  const double slack = 1e-12 * std::max(1.0, std::abs(traj.duration));
  if (t < traj.t_offset - slack || t > traj.t_offset + traj.duration + slack)
    throw InputError("interpolate: time outside trajectory domain");
  const double tau = std::clamp((t - traj.t_offset) / traj.duration, 0.0, 1.0);
  return interpolate_normalized(*traj.mesh, traj.x_bp, tau);
}

Trajectory resample(const Trajectory& traj, std::shared_ptr<const SegmentMesh> mesh) {
  Trajectory out;
  out.x_bp.resize(mesh->num_basepoints(), traj.dim());
  for (int i = 0; i < mesh->num_basepoints(); ++i)
    out.x_bp.row(i) = interpolate_normalized(*traj.mesh, traj.x_bp, mesh->basepoints[i]).transpose();
  out.mesh = std::move(mesh);
  out.duration = traj.duration;
  out.t_offset = traj.t_offset;
  return out;
}

Index segment_residual_size(const SegmentMesh& mesh, int n) {
  return static_cast<Index>(mesh.ntst) * mesh.degree * n + static_cast<Index>(mesh.ntst - 1) * n;
}

void segment_residual_into(const VectorField& vf, const SegmentMesh& mesh,
                           const Eigen::Ref<const StateMatrix>& x_bp, double duration, double t_offset,
                           const Vec& p, Eigen::Ref<Vec> out) {
  const int n = static_cast<int>(x_bp.cols());
  const int m = mesh.degree, m1 = m + 1;
  if (x_bp.rows() != mesh.num_basepoints()) throw InputError("segment_residual: base-point count mismatch");
  if (out.size() != segment_residual_size(mesh, n)) throw InputError("segment_residual: output size mismatch");
  Index row = 0;
  for (int k = 0; k < mesh.ntst; ++k) {
    const auto xs = x_bp.middleRows(k * m1, m1);
    const double h = mesh.width(k);
    for (int c = 0; c < m; ++c) {
      const Vec x = (mesh.W.row(c) * xs).transpose();
      const Vec dx = (mesh.Wp.row(c) * xs).transpose() / h;
      const double tau = mesh.collnodes[k * m + c];
      out.segment(row, n) = dx - duration * vf.rhs(t_offset + duration * tau, x, p);
      row += n;
    }
  }
  for (int k = 0; k + 1 < mesh.ntst; ++k) {
    out.segment(row, n) = (x_bp.row(k * m1 + m) - x_bp.row((k + 1) * m1)).transpose();
    row += n;
  }
}

Vec segment_residual(const VectorField& vf, const Trajectory& traj, const Vec& p) {
  Vec r(segment_residual_size(*traj.mesh, traj.dim()));
  segment_residual_into(vf, *traj.mesh, traj.x_bp, traj.duration, traj.t_offset, p, r);
  return r;
}

void append_segment_jacobian(const VectorField& vf, const SegmentMesh& mesh,
                             const Eigen::Ref<const StateMatrix>& x_bp, double duration, double t_offset,
                             const Vec& p, Index row0, const SegmentColumns& cols, std::vector<Triplet>& out) {
  const int n = static_cast<int>(x_bp.cols());
  const int q = static_cast<int>(p.size());
  const int m = mesh.degree, m1 = m + 1;
  const bool timed = !vf.autonomous();
  Index row = row0;
  for (int k = 0; k < mesh.ntst; ++k) {
    const auto xs = x_bp.middleRows(k * m1, m1);
    const double h = mesh.width(k);
    for (int c = 0; c < m; ++c) {
      const Vec x = (mesh.W.row(c) * xs).transpose();
      const double tau = mesh.collnodes[k * m + c];
      const double t = t_offset + duration * tau;
      const Mat fx = vf.jac_state(t, x, p);
      for (int l = 0; l < m1; ++l) {
        const Index col = cols.x0 + static_cast<Index>(k * m1 + l) * n;
        const double wl = mesh.W(c, l), dl = mesh.Wp(c, l) / h;
        for (int i = 0; i < n; ++i)
          for (int j = 0; j < n; ++j) {
            double v = -duration * fx(i, j) * wl;
            if (i == j) v += dl;
            out.emplace_back(row + i, col + j, v);
          }
      }
      Vec ft;
      if (timed && (cols.duration >= 0 || cols.t_offset >= 0)) ft = vf.jac_time(t, x, p);
      if (cols.duration >= 0) {
        Vec d = -vf.rhs(t, x, p);
        if (timed) d -= duration * tau * ft;
        for (int i = 0; i < n; ++i) out.emplace_back(row + i, cols.duration, d[i]);
      }
      if (cols.t_offset >= 0 && timed)
        for (int i = 0; i < n; ++i) out.emplace_back(row + i, cols.t_offset, -duration * ft[i]);
      if (cols.params >= 0) {
        const Mat fp = vf.jac_params(t, x, p);
        for (int i = 0; i < n; ++i)
          for (int j = 0; j < q; ++j) out.emplace_back(row + i, cols.params + j, -duration * fp(i, j));
      }
      row += n;
    }
  }
  for (int k = 0; k + 1 < mesh.ntst; ++k) {
    const Index a = cols.x0 + static_cast<Index>(k * m1 + m) * n;
    const Index b = cols.x0 + static_cast<Index>((k + 1) * m1) * n;
    for (int i = 0; i < n; ++i) {
      out.emplace_back(row + i, a + i, 1.0);
      out.emplace_back(row + i, b + i, -1.0);
    }
    row += n;
  }
}

SpMat segment_jacobian(const VectorField& vf, const Trajectory& traj, const Vec& p) {
  const int n = traj.dim();
  const Index nx = static_cast<Index>(traj.mesh->num_basepoints()) * n;
  SegmentColumns cols{0, nx, nx + 1, nx + 2};
  std::vector<Triplet> trip;
  append_segment_jacobian(vf, *traj.mesh, traj.x_bp, traj.duration, traj.t_offset, p, 0, cols, trip);
  SpMat J(segment_residual_size(*traj.mesh, n), nx + 2 + p.size());
  J.setFromTriplets(trip.begin(), trip.end());
  return J;
}

}  // namespace torcont
