#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "vwss/mesh/surface_mesh.hpp"

namespace vwss::mesh {

/// Area-unweighted average of incident unit face normals, renormalised.
/// Outward orientation follows the face winding.  A vertex with no incident
/// face is an error (it has no normal).
inline Eigen::MatrixXd vertex_normals(const SurfaceMesh& mesh) {
  const int n = mesh.n_vertices();
  Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(n, 3);
  std::vector<int> incident(static_cast<size_t>(n), 0);
  for (int f = 0; f < mesh.n_faces(); ++f) {
    const Eigen::Vector3d a = mesh.vertices.row(mesh.faces(f, 0));
    const Eigen::Vector3d b = mesh.vertices.row(mesh.faces(f, 1));
    const Eigen::Vector3d c = mesh.vertices.row(mesh.faces(f, 2));
    Eigen::Vector3d fn = (b - a).cross(c - a);
    const double len = fn.norm();
    if (len < 1e-30) continue; // zero-area face carries no direction
    fn /= len;
    for (int e = 0; e < 3; ++e) {
      acc.row(mesh.faces(f, e)) += fn.transpose();
      ++incident[static_cast<size_t>(mesh.faces(f, e))];
    }
  }
  for (int v = 0; v < n; ++v) {
    if (incident[static_cast<size_t>(v)] == 0)
      throw std::runtime_error("vertex_normals: isolated vertex " + std::to_string(v));
    const double len = acc.row(v).norm();
    if (len < 1e-30)
      throw std::runtime_error("vertex_normals: degenerate normal at vertex " +
                               std::to_string(v));
    acc.row(v) /= len;
  }
  return acc;
}

/// Farthest-point sampling in Euclidean distance.  Selects ceil(rate * n)
/// indices.  First index: seed mod n when seed >= 0; otherwise the lowest
/// index among the points farthest from the centroid.  Every later pick
/// maximises the distance to the already-selected set, ties broken by lowest
/// index, so the result is deterministic across platforms.
inline std::vector<int> farthest_point_sample(const PointCloud& cloud, double rate, int seed) {
  const int n = cloud.size();
  if (n == 0) throw std::runtime_error("farthest_point_sample: empty cloud");
  if (!(rate > 0.0) || rate > 1.0)
    throw std::runtime_error("farthest_point_sample: rate must be in (0, 1]");
  const int count = static_cast<int>(std::ceil(rate * n));

  int first = 0;
  if (seed >= 0) {
    first = seed % n;
  } else {
    const Eigen::RowVector3d centroid = cloud.points.colwise().mean();
    double best = -1.0;
    for (int i = 0; i < n; ++i) {
      const double d = (cloud.points.row(i) - centroid).squaredNorm();
      if (d > best) {
        best = d;
        first = i;
      }
    }
  }

  std::vector<int> picked;
  picked.reserve(static_cast<size_t>(count));
  picked.push_back(first);
  Eigen::VectorXd min_d2(n);
  for (int i = 0; i < n; ++i)
    min_d2[i] = (cloud.points.row(i) - cloud.points.row(first)).squaredNorm();
  while (static_cast<int>(picked.size()) < count) {
    int arg = 0;
    double best = -1.0;
    for (int i = 0; i < n; ++i)
      if (min_d2[i] > best) {
        best = min_d2[i];
        arg = i;
      }
    picked.push_back(arg);
    for (int i = 0; i < n; ++i)
      min_d2[i] = std::min(min_d2[i],
                           (cloud.points.row(i) - cloud.points.row(arg)).squaredNorm());
  }
  return picked;
}

/// Exact k-nearest-neighbour query: row i lists the k reference points
/// nearest to query point i, ascending distance, ties broken by index.
inline Eigen::MatrixXi knn(const PointCloud& query, const PointCloud& reference, int k) {
  const int nq = query.size(), nr = reference.size();
  if (k < 1 || k > nr) throw std::runtime_error("knn: k out of range");
  Eigen::MatrixXi out(nq, k);
  std::vector<std::pair<double, int>> d(static_cast<size_t>(nr));
  for (int i = 0; i < nq; ++i) {
    for (int j = 0; j < nr; ++j)
      d[static_cast<size_t>(j)] = {(reference.points.row(j) - query.points.row(i)).squaredNorm(),
                                   j};
    std::partial_sort(d.begin(), d.begin() + k, d.end());
    for (int j = 0; j < k; ++j) out(i, j) = d[static_cast<size_t>(j)].second;
  }
  return out;
}

} // namespace vwss::mesh
