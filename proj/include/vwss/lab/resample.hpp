#pragma once

// Isotropic remeshing to a target edge length: iterated edge splits, collapses,
// valence-improving flips, tangential smoothing, and back-projection onto the
// source surface.  Cap labels ride along on the vertices (splits inside a cap
// stay in the cap, mixed edges become wall), and cap vertices are neither
// smoothed nor projected so the inlet/outlet discs stay crisp.

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <iostream>
#include <map>
#include <set>
#include <stdexcept>
#include <vector>

#include "vwss/mesh/surface_mesh.hpp"

namespace vwss::lab {

namespace detail {

inline Eigen::Vector3d closest_point_on_triangle(const Eigen::Vector3d& p,
                                                 const Eigen::Vector3d& a,
                                                 const Eigen::Vector3d& b,
                                                 const Eigen::Vector3d& c) {
  const Eigen::Vector3d ab = b - a, ac = c - a, ap = p - a;
  const double d1 = ab.dot(ap), d2 = ac.dot(ap);
  if (d1 <= 0.0 && d2 <= 0.0) return a;
  const Eigen::Vector3d bp = p - b;
  const double d3 = ab.dot(bp), d4 = ac.dot(bp);
  if (d3 >= 0.0 && d4 <= d3) return b;
  const double vc = d1 * d4 - d3 * d2;
  if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) return a + ab * (d1 / (d1 - d3));
  const Eigen::Vector3d cp = p - c;
  const double d5 = ab.dot(cp), d6 = ac.dot(cp);
  if (d6 >= 0.0 && d5 <= d6) return c;
  const double vb = d5 * d2 - d1 * d6;
  if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) return a + ac * (d2 / (d2 - d6));
  const double va = d3 * d6 - d5 * d4;
  if (va <= 0.0 && d4 - d3 >= 0.0 && d5 - d6 >= 0.0)
    return b + (c - b) * ((d4 - d3) / ((d4 - d3) + (d5 - d6)));
  const double denom = 1.0 / (va + vb + vc);
  return a + ab * (vb * denom) + ac * (vc * denom);
}

inline Eigen::Vector3d project_to_surface(const Eigen::Vector3d& p, const Eigen::MatrixXd& v,
                                          const Eigen::MatrixXi& f) {
  Eigen::Vector3d best = p;
  double best_d = std::numeric_limits<double>::max();
  for (int i = 0; i < f.rows(); ++i) {
    const Eigen::Vector3d q = closest_point_on_triangle(
        p, v.row(f(i, 0)).transpose(), v.row(f(i, 1)).transpose(), v.row(f(i, 2)).transpose());
    const double d = (q - p).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = q;
    }
  }
  return best;
}

/// Mutable triangle soup with per-vertex cap labels (-1 wall, 0 inlet,
/// 1+k outlet k).  Deleted faces are tombstoned with a[0] == -1.
struct Rework {
  std::vector<Eigen::Vector3d> v;
  std::vector<int> label;
  std::vector<std::array<int, 3>> f;

  bool live(size_t fi) const { return f[fi][0] >= 0; }
};

inline std::map<std::pair<int, int>, int> directed_edges(const Rework& m) {
  std::map<std::pair<int, int>, int> out;
  for (size_t fi = 0; fi < m.f.size(); ++fi) {
    if (!m.live(fi)) continue;
    for (int e = 0; e < 3; ++e)
      out[{m.f[fi][static_cast<size_t>(e)], m.f[fi][static_cast<size_t>((e + 1) % 3)]}] =
          static_cast<int>(fi);
  }
  return out;
}

inline void split_long_edges(Rework& m, double target) {
  const double limit = 4.0 / 3.0 * target;
  for (int sweep = 0; sweep < 10; ++sweep) {
    const auto dir = directed_edges(m);
    struct Item {
      double len;
      int a, b;
    };
    std::vector<Item> todo;
    for (const auto& [e, fi] : dir) {
      (void)fi;
      if (e.first < e.second) {
        const double len = (m.v[static_cast<size_t>(e.first)] - m.v[static_cast<size_t>(e.second)]).norm();
        if (len > limit) todo.push_back({len, e.first, e.second});
      }
    }
    if (todo.empty()) return;
    std::sort(todo.begin(), todo.end(), [](const Item& x, const Item& y) {
      return x.len > y.len || (x.len == y.len && std::pair(x.a, x.b) < std::pair(y.a, y.b));
    });
    std::vector<bool> dirty(m.f.size(), false);
    for (const auto& it : todo) {
      const auto f1 = dir.find({it.a, it.b});
      const auto f2 = dir.find({it.b, it.a});
      if (f1 == dir.end() || f2 == dir.end()) continue;
      if (dirty[static_cast<size_t>(f1->second)] || dirty[static_cast<size_t>(f2->second)]) continue;
      dirty[static_cast<size_t>(f1->second)] = dirty[static_cast<size_t>(f2->second)] = true;

      const int mid = static_cast<int>(m.v.size());
      m.v.push_back(0.5 * (m.v[static_cast<size_t>(it.a)] + m.v[static_cast<size_t>(it.b)]));
      m.label.push_back(m.label[static_cast<size_t>(it.a)] == m.label[static_cast<size_t>(it.b)]
                            ? m.label[static_cast<size_t>(it.a)]
                            : -1);
      auto split_face = [&](int fi, int a, int b) {
        auto tri = m.f[static_cast<size_t>(fi)];
        int c = -1;
        for (int e = 0; e < 3; ++e)
          if (tri[static_cast<size_t>(e)] != a && tri[static_cast<size_t>(e)] != b)
            c = tri[static_cast<size_t>(e)];
        m.f[static_cast<size_t>(fi)] = {a, mid, c};
        m.f.push_back({mid, b, c});
      };
      split_face(f1->second, it.a, it.b);
      split_face(f2->second, it.b, it.a);
      dirty.resize(m.f.size(), true); // freshly added faces wait for next sweep
    }
  }
}

inline std::vector<int> valences(const Rework& m) {
  std::vector<int> deg(m.v.size(), 0);
  std::set<std::pair<int, int>> seen;
  for (size_t fi = 0; fi < m.f.size(); ++fi) {
    if (!m.live(fi)) continue;
    for (int e = 0; e < 3; ++e) {
      int a = m.f[fi][static_cast<size_t>(e)], b = m.f[fi][static_cast<size_t>((e + 1) % 3)];
      if (a > b) std::swap(a, b);
      if (seen.insert({a, b}).second) {
        ++deg[static_cast<size_t>(a)];
        ++deg[static_cast<size_t>(b)];
      }
    }
  }
  return deg;
}

inline void collapse_short_edges(Rework& m, double target) {
  const double low = 0.8 * target, high = 4.0 / 3.0 * target;
  const auto dir = directed_edges(m);

  std::vector<std::set<int>> nbr(m.v.size());
  for (const auto& [e, fi] : dir) {
    (void)fi;
    nbr[static_cast<size_t>(e.first)].insert(e.second);
    nbr[static_cast<size_t>(e.second)].insert(e.first);
  }
  std::map<int, int> patch_size;
  for (size_t vi = 0; vi < m.v.size(); ++vi)
    if (m.label[vi] >= 0 && !nbr[vi].empty()) ++patch_size[m.label[vi]];

  // a cap vertex adjacent to any differently-labelled vertex sits on the cap
  // rim; moving it would erode the cap boundary polygon, so it never collapses
  std::vector<bool> rim(m.v.size(), false);
  for (size_t vi = 0; vi < m.v.size(); ++vi) {
    if (m.label[vi] < 0) continue;
    for (const int x : nbr[vi])
      if (m.label[static_cast<size_t>(x)] != m.label[vi]) {
        rim[vi] = true;
        break;
      }
  }

  std::vector<bool> gone(m.v.size(), false);
  std::vector<bool> dirty(m.f.size(), false);
  for (const auto& [e, fwd_face] : dir) {
    const int a = e.first, b = e.second;
    if (a > b) continue;
    if (gone[static_cast<size_t>(a)] || gone[static_cast<size_t>(b)]) continue;
    if (m.label[static_cast<size_t>(a)] != m.label[static_cast<size_t>(b)]) continue;
    if (rim[static_cast<size_t>(a)] || rim[static_cast<size_t>(b)]) continue;
    if ((m.v[static_cast<size_t>(a)] - m.v[static_cast<size_t>(b)]).norm() >= low) continue;
    const auto rev = dir.find({b, a});
    if (rev == dir.end()) continue;
    if (dirty[static_cast<size_t>(fwd_face)] || dirty[static_cast<size_t>(rev->second)]) continue;
    const int lbl = m.label[static_cast<size_t>(a)];
    if (lbl >= 0 && patch_size[lbl] <= 4) continue;

    // link condition: the one-rings may share exactly the two opposite corners
    std::vector<int> common;
    for (const int x : nbr[static_cast<size_t>(a)])
      if (nbr[static_cast<size_t>(b)].count(x)) common.push_back(x);
    if (common.size() != 2) continue;

    // geometric guards on the merged vertex
    const Eigen::Vector3d mid = 0.5 * (m.v[static_cast<size_t>(a)] + m.v[static_cast<size_t>(b)]);
    bool ok = true;
    std::vector<int> touched;
    for (size_t fi = 0; fi < m.f.size() && ok; ++fi) {
      if (!m.live(fi)) continue;
      const auto& tri = m.f[fi];
      const bool has_a = tri[0] == a || tri[1] == a || tri[2] == a;
      const bool has_b = tri[0] == b || tri[1] == b || tri[2] == b;
      if (!has_a && !has_b) continue;
      touched.push_back(static_cast<int>(fi));
      if (has_a && has_b) continue; // these two faces vanish
      Eigen::Vector3d p[3], q[3];
      for (int c = 0; c < 3; ++c) {
        p[c] = m.v[static_cast<size_t>(tri[static_cast<size_t>(c)])];
        q[c] = (tri[static_cast<size_t>(c)] == a || tri[static_cast<size_t>(c)] == b) ? mid : p[c];
      }
      const Eigen::Vector3d n0 = (p[1] - p[0]).cross(p[2] - p[0]);
      const Eigen::Vector3d n1 = (q[1] - q[0]).cross(q[2] - q[0]);
      // collapse may not flip or crush any surviving face, nor leave an
      // overlong edge behind
      if (n1.norm() < 1e-12 || n0.dot(n1) <= 0.0) ok = false;
      for (int c = 0; c < 3 && ok; ++c)
        if ((q[c] - q[(c + 1) % 3]).norm() > high) ok = false;
    }
    if (!ok) continue;

    m.v[static_cast<size_t>(a)] = mid;
    gone[static_cast<size_t>(b)] = true;
    if (lbl >= 0) --patch_size[lbl];
    for (const int fi : touched) {
      auto& tri = m.f[static_cast<size_t>(fi)];
      const bool has_a = tri[0] == a || tri[1] == a || tri[2] == a;
      const bool has_b = tri[0] == b || tri[1] == b || tri[2] == b;
      if (has_a && has_b) {
        tri[0] = -1; // tombstone
        continue;
      }
      for (int c = 0; c < 3; ++c)
        if (tri[static_cast<size_t>(c)] == b) tri[static_cast<size_t>(c)] = a;
      dirty[static_cast<size_t>(fi)] = true;
    }
    // conservative: one-ring connectivity changed, refresh neighbour sets
    nbr[static_cast<size_t>(a)].insert(nbr[static_cast<size_t>(b)].begin(),
                                       nbr[static_cast<size_t>(b)].end());
    nbr[static_cast<size_t>(a)].erase(a);
    nbr[static_cast<size_t>(a)].erase(b);
    for (const int x : nbr[static_cast<size_t>(b)]) {
      nbr[static_cast<size_t>(x)].erase(b);
      nbr[static_cast<size_t>(x)].insert(a);
    }
    nbr[static_cast<size_t>(b)].clear();
  }
}

inline void flip_for_valence(Rework& m) {
  const auto dir = directed_edges(m);
  auto deg = valences(m);
  std::set<std::pair<int, int>> edges;
  for (const auto& [e, fi] : dir) {
    (void)fi;
    edges.insert({std::min(e.first, e.second), std::max(e.first, e.second)});
  }
  std::vector<bool> dirty(m.f.size(), false);
  for (const auto& [e, f1] : dir) {
    const int a = e.first, b = e.second;
    if (a > b) continue;
    const auto rev = dir.find({b, a});
    if (rev == dir.end()) continue;
    const int f2 = rev->second;
    if (dirty[static_cast<size_t>(f1)] || dirty[static_cast<size_t>(f2)]) continue;
    auto third = [&](int fi, int x, int y) {
      for (int c = 0; c < 3; ++c) {
        const int v = m.f[static_cast<size_t>(fi)][static_cast<size_t>(c)];
        if (v != x && v != y) return v;
      }
      return -1;
    };
    const int c = third(f1, a, b), d = third(f2, a, b);
    if (edges.count({std::min(c, d), std::max(c, d)})) continue;
    auto dev = [](int v) { return (v - 6) * (v - 6); };
    const int before = dev(deg[static_cast<size_t>(a)]) + dev(deg[static_cast<size_t>(b)]) +
                       dev(deg[static_cast<size_t>(c)]) + dev(deg[static_cast<size_t>(d)]);
    const int after = dev(deg[static_cast<size_t>(a)] - 1) + dev(deg[static_cast<size_t>(b)] - 1) +
                      dev(deg[static_cast<size_t>(c)] + 1) + dev(deg[static_cast<size_t>(d)] + 1);
    if (after >= before || deg[static_cast<size_t>(a)] <= 3 || deg[static_cast<size_t>(b)] <= 3)
      continue;
    const Eigen::Vector3d n_old =
        (m.v[static_cast<size_t>(b)] - m.v[static_cast<size_t>(a)])
            .cross(m.v[static_cast<size_t>(c)] - m.v[static_cast<size_t>(a)]);
    const Eigen::Vector3d n1 = (m.v[static_cast<size_t>(d)] - m.v[static_cast<size_t>(a)])
                                   .cross(m.v[static_cast<size_t>(c)] - m.v[static_cast<size_t>(a)]);
    const Eigen::Vector3d n2 = (m.v[static_cast<size_t>(c)] - m.v[static_cast<size_t>(b)])
                                   .cross(m.v[static_cast<size_t>(d)] - m.v[static_cast<size_t>(b)]);
    if (n1.norm() < 1e-12 || n2.norm() < 1e-12 || n_old.dot(n1) <= 0.0 || n_old.dot(n2) <= 0.0)
      continue;

    m.f[static_cast<size_t>(f1)] = {a, d, c};
    m.f[static_cast<size_t>(f2)] = {b, c, d};
    dirty[static_cast<size_t>(f1)] = dirty[static_cast<size_t>(f2)] = true;
    edges.erase({a, b});
    edges.insert({std::min(c, d), std::max(c, d)});
    --deg[static_cast<size_t>(a)];
    --deg[static_cast<size_t>(b)];
    ++deg[static_cast<size_t>(c)];
    ++deg[static_cast<size_t>(d)];
  }
}

inline void smooth_and_project(Rework& m, const Eigen::MatrixXd& src_v,
                               const Eigen::MatrixXi& src_f) {
  std::vector<Eigen::Vector3d> centroid(m.v.size(), Eigen::Vector3d::Zero());
  std::vector<int> count(m.v.size(), 0);
  const auto dir = directed_edges(m);
  for (const auto& [e, fi] : dir) {
    (void)fi;
    centroid[static_cast<size_t>(e.first)] += m.v[static_cast<size_t>(e.second)];
    ++count[static_cast<size_t>(e.first)];
  }
  for (size_t vi = 0; vi < m.v.size(); ++vi) {
    if (m.label[vi] >= 0 || count[vi] == 0) continue; // caps stay put
    const Eigen::Vector3d target = centroid[vi] / count[vi];
    m.v[vi] = project_to_surface(m.v[vi] + 0.5 * (target - m.v[vi]), src_v, src_f);
  }
}

} // namespace detail

/// Remesh to the target mean edge length, transferring cap labels.  The inlet
/// area and normal are carried over from the source: the caps are preserved
/// geometrically, only their triangulation changes.
inline mesh::SurfaceMesh resample_mesh(const mesh::SurfaceMesh& src, double target_edge_mm,
                                       int iterations = 5) {
  if (!(target_edge_mm > 0.0))
    throw std::invalid_argument("resample: target edge length must be > 0");
  src.validate();

  const double diag =
      (src.vertices.colwise().maxCoeff() - src.vertices.colwise().minCoeff()).norm();
  if (target_edge_mm > 0.3 * diag)
    std::cerr << "resample: target edge " << target_edge_mm
              << " mm is coarser than the geometry supports; best effort only\n";

  detail::Rework m;
  m.v.resize(static_cast<size_t>(src.n_vertices()));
  for (int v = 0; v < src.n_vertices(); ++v) m.v[static_cast<size_t>(v)] = src.vertices.row(v);
  m.label.assign(static_cast<size_t>(src.n_vertices()), -1);
  for (const int v : src.inlet) m.label[static_cast<size_t>(v)] = 0;
  for (size_t o = 0; o < src.outlets.size(); ++o)
    for (const int v : src.outlets[o]) m.label[static_cast<size_t>(v)] = 1 + static_cast<int>(o);
  m.f.resize(static_cast<size_t>(src.n_faces()));
  for (int f = 0; f < src.n_faces(); ++f)
    m.f[static_cast<size_t>(f)] = {src.faces(f, 0), src.faces(f, 1), src.faces(f, 2)};

  for (int it = 0; it < iterations; ++it) {
    detail::split_long_edges(m, target_edge_mm);
    detail::collapse_short_edges(m, target_edge_mm);
    detail::flip_for_valence(m);
    detail::smooth_and_project(m, src.vertices, src.faces);
  }

  // compact tombstoned faces and orphaned vertices
  std::vector<bool> used(m.v.size(), false);
  for (size_t fi = 0; fi < m.f.size(); ++fi)
    if (m.live(fi))
      for (int e = 0; e < 3; ++e) used[static_cast<size_t>(m.f[fi][static_cast<size_t>(e)])] = true;
  std::vector<int> remap(m.v.size(), -1);
  int live = 0;
  for (size_t vi = 0; vi < m.v.size(); ++vi)
    if (used[vi]) remap[vi] = live++;

  mesh::SurfaceMesh out;
  out.vertices.resize(live, 3);
  for (size_t vi = 0; vi < m.v.size(); ++vi)
    if (used[vi]) out.vertices.row(remap[vi]) = m.v[vi].transpose();
  int live_faces = 0;
  for (size_t fi = 0; fi < m.f.size(); ++fi)
    if (m.live(fi)) ++live_faces;
  out.faces.resize(live_faces, 3);
  int at = 0;
  for (size_t fi = 0; fi < m.f.size(); ++fi) {
    if (!m.live(fi)) continue;
    for (int e = 0; e < 3; ++e)
      out.faces(at, e) = remap[static_cast<size_t>(m.f[fi][static_cast<size_t>(e)])];
    ++at;
  }
  out.outlets.resize(src.outlets.size());
  for (size_t vi = 0; vi < m.v.size(); ++vi) {
    if (!used[vi] || m.label[vi] < 0) continue;
    if (m.label[vi] == 0)
      out.inlet.push_back(remap[vi]);
    else
      out.outlets[static_cast<size_t>(m.label[vi] - 1)].push_back(remap[vi]);
  }
  out.inlet_area = src.inlet_area;
  out.inlet_normal = src.inlet_normal;
  out.validate();
  return out;
}

} // namespace vwss::lab
