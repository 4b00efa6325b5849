#pragma once

// Sparse discrete operators for the intrinsic surface PDE solvers: cotangent
// stiffness matrix, lumped mixed-Voronoi mass matrix, and the complex
// connection Laplacian built from per-edge rotations between adjacent vertex
// tangent frames.  Natural (zero-Neumann) boundary conditions everywhere:
// boundary terms are simply absent, which matches the cap treatment.

#include <Eigen/Dense>
#include <Eigen/IterativeLinearSolvers>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <complex>
#include <map>
#include <queue>
#include <stdexcept>
#include <vector>

#include "vwss/mesh/curvature.hpp"
#include "vwss/mesh/queries.hpp"
#include "vwss/mesh/surface_mesh.hpp"

namespace vwss::heat {

using SpMat = Eigen::SparseMatrix<double>;
using SpMatC = Eigen::SparseMatrix<std::complex<double>>;

/// Positive semi-definite cotangent stiffness matrix:
/// L_ii = sum_j w_ij, L_ij = -w_ij with w_ij = (cot a + cot b) / 2.
inline SpMat cotan_stiffness(const mesh::SurfaceMesh& m) {
  Eigen::MatrixXd angles;
  Eigen::VectorXd areas;
  mesh::corner_angles(m, angles, areas);
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<size_t>(m.n_faces()) * 12);
  for (int f = 0; f < m.n_faces(); ++f)
    for (int e = 0; e < 3; ++e) {
      const int a = m.faces(f, (e + 1) % 3), b = m.faces(f, (e + 2) % 3);
      const double w = 0.5 / std::tan(angles(f, e));
      trip.emplace_back(a, b, -w);
      trip.emplace_back(b, a, -w);
      trip.emplace_back(a, a, w);
      trip.emplace_back(b, b, w);
    }
  SpMat l(m.n_vertices(), m.n_vertices());
  l.setFromTriplets(trip.begin(), trip.end());
  return l;
}

/// Lumped mass matrix: diagonal of mixed Voronoi areas.
inline Eigen::VectorXd lumped_mass(const mesh::SurfaceMesh& m) {
  return mesh::mixed_voronoi_areas(m);
}

inline double mean_edge_length(const mesh::SurfaceMesh& m) {
  std::map<std::pair<int, int>, bool> seen;
  double acc = 0.0;
  int cnt = 0;
  for (int f = 0; f < m.n_faces(); ++f)
    for (int e = 0; e < 3; ++e) {
      const auto key = std::minmax(m.faces(f, e), m.faces(f, (e + 1) % 3));
      if (seen.emplace(key, true).second) {
        acc += (m.vertices.row(key.first) - m.vertices.row(key.second)).norm();
        ++cnt;
      }
    }
  return acc / cnt;
}

/// Breadth-first reachability from a seed set over mesh edges; throws naming
/// the unreachable component size when the mesh is disconnected from it.
inline void require_connected_from(const mesh::SurfaceMesh& m, const std::vector<int>& seeds,
                                   const char* what) {
  const int n = m.n_vertices();
  std::vector<std::vector<int>> adj(static_cast<size_t>(n));
  for (int f = 0; f < m.n_faces(); ++f)
    for (int e = 0; e < 3; ++e) {
      adj[static_cast<size_t>(m.faces(f, e))].push_back(m.faces(f, (e + 1) % 3));
      adj[static_cast<size_t>(m.faces(f, (e + 1) % 3))].push_back(m.faces(f, e));
    }
  std::vector<bool> seen(static_cast<size_t>(n), false);
  std::queue<int> q;
  for (int s : seeds) {
    if (s < 0 || s >= n)
      throw std::runtime_error(std::string(what) + ": source index out of range");
    if (!seen[static_cast<size_t>(s)]) {
      seen[static_cast<size_t>(s)] = true;
      q.push(s);
    }
  }
  if (q.empty()) throw std::runtime_error(std::string(what) + ": empty source set");
  while (!q.empty()) {
    const int v = q.front();
    q.pop();
    for (int u : adj[static_cast<size_t>(v)])
      if (!seen[static_cast<size_t>(u)]) {
        seen[static_cast<size_t>(u)] = true;
        q.push(u);
      }
  }
  int unreachable = 0;
  for (bool s : seen)
    if (!s) ++unreachable;
  if (unreachable > 0)
    throw std::runtime_error(std::string(what) + ": disconnected component of " +
                             std::to_string(unreachable) + " vertices unreachable from source");
}

/// Direct sparse Cholesky with a conjugate-gradient fallback (tol 1e-10,
/// max 10 n iterations) for symmetric positive (semi-)definite systems.
template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> solve_spd(
    const Eigen::SparseMatrix<Scalar>& a,
    const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& b) {
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<Scalar>> ldlt(a);
  if (ldlt.info() == Eigen::Success) {
    auto x = ldlt.solve(b);
    if (ldlt.info() == Eigen::Success && x.allFinite()) return x;
  }
  Eigen::ConjugateGradient<Eigen::SparseMatrix<Scalar>, Eigen::Lower | Eigen::Upper> cg;
  cg.setTolerance(1e-10);
  cg.setMaxIterations(10 * a.rows());
  cg.compute(a);
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> x = cg.solve(b);
  if (cg.info() != Eigen::Success)
    throw std::runtime_error("sparse solve failed (Cholesky and CG)");
  return x;
}

// ---------------------------------------------------------------------------
// Vertex tangent frames and the connection Laplacian.  The tangent plane at a
// vertex is defined by its normal; tangent vectors are complex numbers in the
// orthonormal basis (t1, t2 = n x t1).  Transport across an edge rotates one
// endpoint's frame onto the other's by the minimal rotation aligning their
// normals, so encoding (3D -> complex) and the connection share a single
// convention.
// ---------------------------------------------------------------------------

struct VertexFrames {
  Eigen::MatrixXd normal; // n x 3 vertex normals
  Eigen::MatrixXd t1, t2; // n x 3 orthonormal tangent bases (t2 = n x t1)
};

inline VertexFrames build_vertex_frames(const mesh::SurfaceMesh& m) {
  const int n = m.n_vertices();
  VertexFrames fr;
  fr.normal = mesh::vertex_normals(m);
  fr.t1.resize(n, 3);
  fr.t2.resize(n, 3);
  // Anchor each frame on the projected edge toward the lowest-index
  // neighbour, for determinism.
  std::vector<int> anchor(static_cast<size_t>(n), -1);
  for (int f = 0; f < m.n_faces(); ++f)
    for (int e = 0; e < 3; ++e) {
      const int v = m.faces(f, e), u = m.faces(f, (e + 1) % 3);
      auto& a = anchor[static_cast<size_t>(v)];
      if (a < 0 || u < a) a = u;
      auto& b = anchor[static_cast<size_t>(u)];
      if (b < 0 || v < b) b = v;
    }
  for (int v = 0; v < n; ++v) {
    if (anchor[static_cast<size_t>(v)] < 0)
      throw std::runtime_error("tangent frames: isolated vertex " + std::to_string(v));
    const Eigen::Vector3d nv = fr.normal.row(v);
    Eigen::Vector3d e0 = m.vertices.row(anchor[static_cast<size_t>(v)]) - m.vertices.row(v);
    e0 -= e0.dot(nv) * nv;
    if (e0.norm() < 1e-14)
      throw std::runtime_error("tangent frames: anchor edge parallel to normal at vertex " +
                               std::to_string(v));
    e0.normalize();
    fr.t1.row(v) = e0.transpose();
    fr.t2.row(v) = nv.cross(e0).transpose();
  }
  return fr;
}

/// Minimal rotation taking unit vector `from` to unit vector `to` (Rodrigues).
inline Eigen::Matrix3d align_rotation(const Eigen::Vector3d& from, const Eigen::Vector3d& to) {
  const Eigen::Vector3d axis = from.cross(to);
  const double s = axis.norm(), c = from.dot(to);
  if (s < 1e-14) return Eigen::Matrix3d::Identity(); // parallel (or antiparallel: caller's meshes are smooth)
  const Eigen::Vector3d a = axis / s;
  Eigen::Matrix3d k;
  k << 0, -a.z(), a.y(), a.z(), 0, -a.x(), -a.y(), a.x(), 0;
  return Eigen::Matrix3d::Identity() + s * k + (1.0 - c) * k * k;
}

/// Unit complex number rotating j's frame onto i's across edge (i, j).
inline std::complex<double> frame_transport(const VertexFrames& fr, int j, int i) {
  const Eigen::Matrix3d r = align_rotation(fr.normal.row(j), fr.normal.row(i));
  const Eigen::Vector3d im = r * Eigen::Vector3d(fr.t1.row(j));
  std::complex<double> z(im.dot(fr.t1.row(i)), im.dot(fr.t2.row(i)));
  return z / std::abs(z);
}

/// Hermitian positive semi-definite connection Laplacian with cotangent
/// weights: off-diagonal (i, j) carries -w_ij r_{j->i}.
inline SpMatC connection_laplacian(const mesh::SurfaceMesh& m, const VertexFrames& fr) {
  Eigen::MatrixXd angles;
  Eigen::VectorXd areas;
  mesh::corner_angles(m, angles, areas);
  const int n = m.n_vertices();
  std::map<std::pair<int, int>, double> weight;
  for (int f = 0; f < m.n_faces(); ++f)
    for (int e = 0; e < 3; ++e) {
      const int a = m.faces(f, (e + 1) % 3), b = m.faces(f, (e + 2) % 3);
      weight[std::minmax(a, b)] += 0.5 / std::tan(angles(f, e));
    }
  std::vector<Eigen::Triplet<std::complex<double>>> trip;
  trip.reserve(weight.size() * 4);
  for (const auto& [edge, w] : weight) {
    const int i = edge.first, j = edge.second;
    const std::complex<double> r_ji = frame_transport(fr, j, i);
    trip.emplace_back(i, j, -w * r_ji);
    trip.emplace_back(j, i, -w * std::conj(r_ji));
    trip.emplace_back(i, i, std::complex<double>(w, 0.0));
    trip.emplace_back(j, j, std::complex<double>(w, 0.0));
  }
  SpMatC l(n, n);
  l.setFromTriplets(trip.begin(), trip.end());
  return l;
}

} // namespace vwss::heat
