#pragma once

#include <Eigen/Dense>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace vwss::mesh {

/// Triangulated vessel-wall surface.  Vertices in millimetres.  Caps are
/// labelled vertex patches: on capped (closed) meshes they mark the fan discs,
/// on open meshes the boundary rings.
struct SurfaceMesh {
  Eigen::MatrixXd vertices; // n x 3
  Eigen::MatrixXi faces;    // m x 3, consistently wound (outward normals)
  std::vector<int> inlet;
  std::vector<std::vector<int>> outlets;
  double inlet_area = 0.0;                                   // mm^2
  Eigen::Vector3d inlet_normal = Eigen::Vector3d::Zero();    // inward unit vector

  int n_vertices() const { return static_cast<int>(vertices.rows()); }
  int n_faces() const { return static_cast<int>(faces.rows()); }

  /// True per vertex when it belongs to the inlet or any outlet patch.
  std::vector<bool> cap_flags() const {
    std::vector<bool> flag(static_cast<size_t>(n_vertices()), false);
    for (int v : inlet) flag.at(static_cast<size_t>(v)) = true;
    for (const auto& o : outlets)
      for (int v : o) flag.at(static_cast<size_t>(v)) = true;
    return flag;
  }

  /// Structural checks: index bounds, consistent winding (no directed edge
  /// repeats), manifold edges (every undirected edge on at most two faces).
  /// When require_closed, every edge must lie on exactly two faces.
  void validate(bool require_closed = false) const {
    const int n = n_vertices();
    if (n < 3 || n_faces() < 1) throw std::runtime_error("mesh: too few vertices or faces");
    if (!vertices.allFinite()) throw std::runtime_error("mesh: non-finite vertex");
    std::map<std::pair<int, int>, int> directed;
    for (int f = 0; f < n_faces(); ++f) {
      for (int e = 0; e < 3; ++e) {
        const int a = faces(f, e), b = faces(f, (e + 1) % 3);
        if (a < 0 || a >= n || b < 0 || b >= n)
          throw std::runtime_error("mesh: face index out of range in face " + std::to_string(f));
        if (a == b) throw std::runtime_error("mesh: degenerate face " + std::to_string(f));
        if (++directed[{a, b}] > 1)
          throw std::runtime_error("mesh: inconsistent winding at edge " + std::to_string(a) +
                                   "-" + std::to_string(b));
      }
    }
    for (const auto& [edge, cnt] : directed) {
      const auto rev = directed.find({edge.second, edge.first});
      const int total = cnt + (rev == directed.end() ? 0 : rev->second);
      if (total > 2)
        throw std::runtime_error("mesh: non-manifold edge " + std::to_string(edge.first) + "-" +
                                 std::to_string(edge.second));
      if (require_closed && rev == directed.end())
        throw std::runtime_error("mesh: boundary edge " + std::to_string(edge.first) + "-" +
                                 std::to_string(edge.second) + " on a mesh declared closed");
    }
    for (const auto& o : outlets)
      if (o.empty()) throw std::runtime_error("mesh: empty outlet patch");
  }
};

/// Bare point set (n >= 4 finite points), optionally views a mesh's vertices.
struct PointCloud {
  Eigen::MatrixXd points; // n x 3

  PointCloud() = default;
  explicit PointCloud(Eigen::MatrixXd p) : points(std::move(p)) {
    if (points.rows() < 4) throw std::runtime_error("point cloud: fewer than 4 points");
    if (!points.allFinite()) throw std::runtime_error("point cloud: non-finite coordinates");
  }
  explicit PointCloud(const SurfaceMesh& m) : PointCloud(Eigen::MatrixXd(m.vertices)) {}

  int size() const { return static_cast<int>(points.rows()); }
};

/// Per-vertex principal curvatures (1/mm) with the Gaussian and mean
/// intermediates they were derived from.  kappa1 >= kappa2 pointwise.
struct CurvaturePair {
  Eigen::VectorXd kappa1, kappa2, kappa_gauss, kappa_mean;
};

} // namespace vwss::mesh
