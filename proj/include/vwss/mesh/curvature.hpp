#pragma once

// Discrete curvature operators on triangle meshes (mixed-Voronoi-area
// cotangent discretisation).  The helpers (corner angles, cotangents, mixed
// areas) are shared with the diffusion operators in the heat module.

#include <Eigen/Dense>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include "vwss/mesh/queries.hpp"
#include "vwss/mesh/surface_mesh.hpp"

namespace vwss::mesh {

/// Corner angles (m x 3; column e is the angle at faces(f, e)) and face
/// areas.  Degenerate (zero-area or zero-edge) faces are an error.
inline void corner_angles(const SurfaceMesh& mesh, Eigen::MatrixXd& angles,
                          Eigen::VectorXd& areas) {
  const int m = mesh.n_faces();
  angles.resize(m, 3);
  areas.resize(m);
  for (int f = 0; f < m; ++f) {
    const Eigen::Vector3d p0 = mesh.vertices.row(mesh.faces(f, 0));
    const Eigen::Vector3d p1 = mesh.vertices.row(mesh.faces(f, 1));
    const Eigen::Vector3d p2 = mesh.vertices.row(mesh.faces(f, 2));
    const double area = 0.5 * (p1 - p0).cross(p2 - p0).norm();
    if (!(area > 1e-20))
      throw std::runtime_error("curvature: degenerate face " + std::to_string(f));
    areas[f] = area;
    const Eigen::Vector3d e01 = p1 - p0, e02 = p2 - p0, e12 = p2 - p1;
    auto angle = [](const Eigen::Vector3d& u, const Eigen::Vector3d& v) {
      return std::atan2(u.cross(v).norm(), u.dot(v));
    };
    angles(f, 0) = angle(e01, e02);
    angles(f, 1) = angle(-e01, e12);
    angles(f, 2) = angle(-e02, -e12);
  }
}

/// Per-vertex mixed Voronoi area: the Voronoi cell inside non-obtuse
/// triangles, with the half/quarter-area fallback inside obtuse ones.
inline Eigen::VectorXd mixed_voronoi_areas(const SurfaceMesh& mesh) {
  Eigen::MatrixXd angles;
  Eigen::VectorXd areas;
  corner_angles(mesh, angles, areas);
  Eigen::VectorXd mixed = Eigen::VectorXd::Zero(mesh.n_vertices());
  constexpr double half_pi = std::numbers::pi / 2.0;
  for (int f = 0; f < mesh.n_faces(); ++f) {
    int obtuse = -1;
    for (int e = 0; e < 3; ++e)
      if (angles(f, e) > half_pi) obtuse = e;
    for (int e = 0; e < 3; ++e) {
      const int v = mesh.faces(f, e);
      if (obtuse < 0) {
        // Voronoi contribution: 1/8 (|PR|^2 cot(angle at Q) + |PQ|^2 cot(angle at R)).
        const int q = (e + 1) % 3, r = (e + 2) % 3;
        const Eigen::Vector3d p = mesh.vertices.row(mesh.faces(f, e));
        const Eigen::Vector3d pq = Eigen::Vector3d(mesh.vertices.row(mesh.faces(f, q))) - p;
        const Eigen::Vector3d pr = Eigen::Vector3d(mesh.vertices.row(mesh.faces(f, r))) - p;
        mixed[v] += (pr.squaredNorm() / std::tan(angles(f, q)) +
                     pq.squaredNorm() / std::tan(angles(f, r))) /
                    8.0;
      } else {
        mixed[v] += (e == obtuse) ? areas[f] / 2.0 : areas[f] / 4.0;
      }
    }
  }
  return mixed;
}

/// Principal curvatures via the angle-defect Gaussian curvature and the
/// cotangent mean-curvature normal:
///   kG = (2 pi - sum of incident angles) / A_mixed,
///   K  = (1 / (2 A_mixed)) sum_j (cot a_ij + cot b_ij) (v_i - v_j),
///   kH = <K, n> / 2   (positive on convex surfaces with outward normals),
///   D  = sqrt(max(0, kH^2 - kG)),  k1 = kH + D,  k2 = kH - D.
/// The discriminant uses the square-root form; the clamped negative branch
/// only occurs where the discretisation makes kG exceed kH^2.
inline CurvaturePair principal_curvatures(const SurfaceMesh& mesh) {
  const int n = mesh.n_vertices();
  Eigen::MatrixXd angles;
  Eigen::VectorXd areas;
  corner_angles(mesh, angles, areas);
  const Eigen::VectorXd mixed = mixed_voronoi_areas(mesh);
  const Eigen::MatrixXd normals = vertex_normals(mesh);

  Eigen::VectorXd angle_sum = Eigen::VectorXd::Zero(n);
  Eigen::MatrixXd cot_lap = Eigen::MatrixXd::Zero(n, 3); // sum (cot+cot)(v_i - v_j)
  for (int f = 0; f < mesh.n_faces(); ++f) {
    for (int e = 0; e < 3; ++e) angle_sum[mesh.faces(f, e)] += angles(f, e);
    // Edge opposite corner e carries weight cot(angle at e) toward both ends.
    for (int e = 0; e < 3; ++e) {
      const int a = mesh.faces(f, (e + 1) % 3), b = mesh.faces(f, (e + 2) % 3);
      const double w = 1.0 / std::tan(angles(f, e));
      const Eigen::RowVector3d diff = mesh.vertices.row(a) - mesh.vertices.row(b);
      cot_lap.row(a) += w * diff;
      cot_lap.row(b) -= w * diff;
    }
  }

  CurvaturePair out;
  out.kappa_gauss.resize(n);
  out.kappa_mean.resize(n);
  out.kappa1.resize(n);
  out.kappa2.resize(n);
  for (int v = 0; v < n; ++v) {
    const double area = std::max(mixed[v], 1e-20);
    out.kappa_gauss[v] = (2.0 * std::numbers::pi - angle_sum[v]) / area;
    const Eigen::RowVector3d k_vec = cot_lap.row(v) / (2.0 * area);
    out.kappa_mean[v] = 0.5 * k_vec.dot(normals.row(v));
    const double disc = out.kappa_mean[v] * out.kappa_mean[v] - out.kappa_gauss[v];
    const double delta = std::sqrt(std::max(0.0, disc));
    out.kappa1[v] = out.kappa_mean[v] + delta;
    out.kappa2[v] = out.kappa_mean[v] - delta;
  }
  return out;
}

} // namespace vwss::mesh
