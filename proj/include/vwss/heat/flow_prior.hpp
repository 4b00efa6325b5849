#pragma once

// Flow-direction prior: the inlet's inward direction is transported across
// the wall with the vector heat method (connection-Laplacian diffusion plus
// scalar magnitude correction), then projected to the tangent planes and
// unit-normalised.

#include <Eigen/Dense>
#include <complex>

#include "vwss/heat/laplacian.hpp"
#include "vwss/mesh/surface_mesh.hpp"

namespace vwss::heat {

struct TangentVectorField {
  Eigen::MatrixXd vectors; // n x 3; unit tangent vectors, zero rows where no signal
};

inline TangentVectorField flow_prior(const mesh::SurfaceMesh& m) {
  if (m.inlet.empty()) throw std::runtime_error("flow_prior: mesh has no inlet patch");
  if (m.inlet_normal.norm() < 1e-12)
    throw std::runtime_error("flow_prior: inlet normal not defined");
  require_connected_from(m, m.inlet, "flow_prior");

  const int n = m.n_vertices();
  const VertexFrames fr = build_vertex_frames(m);
  const double t = mean_edge_length(m) * mean_edge_length(m);
  const Eigen::VectorXd mass = lumped_mass(m);

  // Source: inward inlet direction projected to each inlet vertex's tangent
  // plane, written in the local complex frame.
  Eigen::VectorXcd z0 = Eigen::VectorXcd::Zero(n);
  Eigen::VectorXd mag0 = Eigen::VectorXd::Zero(n), ind0 = Eigen::VectorXd::Zero(n);
  const Eigen::Vector3d d = m.inlet_normal.normalized();
  for (int s : m.inlet) {
    const Eigen::Vector3d nv = fr.normal.row(s);
    const Eigen::Vector3d p = d - d.dot(nv) * nv;
    const double len = p.norm();
    z0[s] = std::complex<double>(p.dot(fr.t1.row(s)), p.dot(fr.t2.row(s)));
    mag0[s] = len;
    ind0[s] = 1.0;
  }

  // Vector diffusion.
  SpMatC conn = connection_laplacian(m, fr) * std::complex<double>(t, 0.0);
  for (int i = 0; i < n; ++i) conn.coeffRef(i, i) += std::complex<double>(mass[i], 0.0);
  const Eigen::VectorXcd z = solve_spd<std::complex<double>>(conn, z0);

  // Scalar diffusion for the magnitude correction.
  SpMat heat_op = cotan_stiffness(m) * t;
  for (int i = 0; i < n; ++i) heat_op.coeffRef(i, i) += mass[i];
  const Eigen::VectorXd mdiff = solve_spd<double>(heat_op, mag0);
  const Eigen::VectorXd idiff = solve_spd<double>(heat_op, ind0);

  TangentVectorField out;
  out.vectors = Eigen::MatrixXd::Zero(n, 3);
  for (int v = 0; v < n; ++v) {
    const double zlen = std::abs(z[v]);
    if (zlen < 1e-300 || idiff[v] < 1e-300) continue; // no transported signal
    const double corrected = mdiff[v] / idiff[v];
    if (corrected <= 0.0) continue;
    Eigen::Vector3d vec =
        (z[v].real() * fr.t1.row(v) + z[v].imag() * fr.t2.row(v)).transpose() *
        (corrected / zlen);
    // Tangent projection is exact by construction of the frame; re-project to
    // guard against accumulated rounding, then unit-normalise.
    const Eigen::Vector3d nv = fr.normal.row(v);
    vec -= vec.dot(nv) * nv;
    const double len = vec.norm();
    if (len < 1e-300) continue;
    out.vectors.row(v) = (vec / len).transpose();
  }
  return out;
}

} // namespace vwss::heat
