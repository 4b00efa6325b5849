#pragma once

// Heat-method geodesic distance: diffuse an indicator for a short time,
// normalise the negative gradient, and recover the distance through a
// Poisson solve.

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <string>
#include <vector>

#include "vwss/heat/laplacian.hpp"
#include "vwss/mesh/surface_mesh.hpp"

namespace vwss::heat {

struct GeodesicMap {
  Eigen::VectorXd values; // per-vertex distance, mm
  std::string source_label;
};

/// Geodesic distance from a vertex set.  Time step t = (mean edge length)^2;
/// both sparse systems are SPD up to the constant mode, which the final
/// shift (min over source = 0) removes.
inline GeodesicMap geodesic_distance(const mesh::SurfaceMesh& m, const std::vector<int>& source,
                                     std::string label = "inlet") {
  require_connected_from(m, source, "geodesic_distance");
  const int n = m.n_vertices();
  const double t = mean_edge_length(m) * mean_edge_length(m);
  const SpMat l = cotan_stiffness(m);
  const Eigen::VectorXd mass = lumped_mass(m);

  SpMat heat_op = l * t;
  for (int i = 0; i < n; ++i) heat_op.coeffRef(i, i) += mass[i];
  Eigen::VectorXd u0 = Eigen::VectorXd::Zero(n);
  for (int s : source) u0[s] = 1.0;
  const Eigen::VectorXd u = solve_spd<double>(heat_op, u0);

  // Per-face unit descent directions of u.
  Eigen::VectorXd div = Eigen::VectorXd::Zero(n);
  Eigen::MatrixXd angles;
  Eigen::VectorXd areas;
  mesh::corner_angles(m, angles, areas);
  for (int f = 0; f < m.n_faces(); ++f) {
    const int i0 = m.faces(f, 0), i1 = m.faces(f, 1), i2 = m.faces(f, 2);
    const Eigen::Vector3d p0 = m.vertices.row(i0), p1 = m.vertices.row(i1),
                          p2 = m.vertices.row(i2);
    Eigen::Vector3d nrm = (p1 - p0).cross(p2 - p0);
    nrm /= nrm.norm();
    const Eigen::Vector3d grad =
        (nrm.cross(p2 - p1) * u[i0] + nrm.cross(p0 - p2) * u[i1] + nrm.cross(p1 - p0) * u[i2]) /
        (2.0 * areas[f]);
    const double len = grad.norm();
    if (len < 1e-300) continue;
    const Eigen::Vector3d x = -grad / len;
    // Integrated divergence: for each corner, the two emanating edges against
    // the cotangents of their opposite angles.
    for (int e = 0; e < 3; ++e) {
      const int vi = m.faces(f, e), vj = m.faces(f, (e + 1) % 3), vk = m.faces(f, (e + 2) % 3);
      const Eigen::Vector3d ej = m.vertices.row(vj) - m.vertices.row(vi);
      const Eigen::Vector3d ek = m.vertices.row(vk) - m.vertices.row(vi);
      div[vi] += 0.5 * (ej.dot(x) / std::tan(angles(f, (e + 2) % 3)) +
                        ek.dot(x) / std::tan(angles(f, (e + 1) % 3)));
    }
  }

  // Poisson solve; tiny diagonal shift pins the constant nullspace, and the
  // source-min shift below absorbs the arbitrary constant.
  SpMat poisson = l;
  const double reg = 1e-10 * (mass.sum() / n);
  for (int i = 0; i < n; ++i) poisson.coeffRef(i, i) += reg;
  Eigen::VectorXd phi = solve_spd<double>(poisson, div);

  // Distance grows away from the source; pick the global sign from the heat
  // profile (u is largest at the source), then shift and clamp.
  const Eigen::VectorXd uc = u.array() - u.mean();
  const Eigen::VectorXd pc = phi.array() - phi.mean();
  if (uc.dot(pc) > 0.0) phi = -phi;
  double src_min = std::numeric_limits<double>::infinity();
  for (int s : source) src_min = std::min(src_min, phi[s]);
  phi.array() -= src_min;
  phi = phi.cwiseMax(0.0);
  for (int s : source) phi[s] = 0.0;

  GeodesicMap out;
  out.values = phi;
  out.source_label = std::move(label);
  return out;
}

/// Pointwise minimum of the per-outlet geodesic maps.
inline GeodesicMap outlet_min_geodesic(const mesh::SurfaceMesh& m) {
  if (m.outlets.empty()) throw std::runtime_error("outlet_min_geodesic: mesh has no outlets");
  GeodesicMap out;
  out.source_label = "outlets-min";
  for (size_t k = 0; k < m.outlets.size(); ++k) {
    const GeodesicMap g = geodesic_distance(m, m.outlets[k], "outlet");
    if (k == 0)
      out.values = g.values;
    else
      out.values = out.values.cwiseMin(g.values);
  }
  return out;
}

} // namespace vwss::heat
