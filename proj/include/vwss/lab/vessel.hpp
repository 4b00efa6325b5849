#pragma once

// Parametric vessel generator: a tapered (optionally bulged) tube around a
// smooth centerline, with optional side branches carved into the wall and
// stitched on watertight.  Geometry in mm.  Deterministic: identical spec and
// seed produce identical meshes byte for byte.
//
// Construction outline
//   * The trunk is a quad grid: rings i = 0..S of K points each, swept along a
//     Catmull-Rom centerline with parallel-transported frames, plus a
//     triangle-fan cap (with a centre vertex) at each end.
//   * Each branch removes a rectangular window of wall quads, walks the
//     resulting boundary loop, and extrudes rings of matching vertex count
//     along the branch axis, ending in its own fan cap.  The surviving trunk
//     vertices are untouched, so specs that differ only in their branch lists
//     agree exactly outside the carved windows.

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <stdexcept>
#include <vector>

#include "vwss/mesh/surface_mesh.hpp"

namespace vwss::lab {

struct BulgeSpec {
  double center_s = 0.5;    // centerline parameter of the bulge peak
  double amplitude_mm = 0.0;
  double width_s = 0.12;    // Gaussian width in centerline parameter
};

struct BranchSpec {
  double attach_s = 0.5;     // take-off position on the parent centerline
  double azimuth_rad = 0.0;  // rotation of the take-off around the parent axis
  double takeoff_rad = 1.2;  // angle between branch axis and parent tangent
  double length_mm = 40.0;
  double radius0_mm = 5.0;   // radius at the take-off
  double radius1_mm = 4.0;   // radius at the branch outlet
};

struct VesselSpec {
  Eigen::MatrixXd control_points; // k x 3 centerline control polygon (k >= 2)
  double radius0_mm = 10.0;       // trunk radius at the inlet
  double radius1_mm = 10.0;       // trunk radius at the outlet
  BulgeSpec bulge;
  std::vector<BranchSpec> branches;
  double target_edge_mm = 4.0;
  std::uint64_t seed = 0;
  double noise_mm = 0.0; // amplitude of the seed-driven centerline waviness

  /// Trunk radius at centerline parameter s in [0, 1]: linear taper plus an
  /// optional Gaussian bulge.
  double radius_at(double s) const {
    const double base = radius0_mm + (radius1_mm - radius0_mm) * s;
    const double z = (s - bulge.center_s) / bulge.width_s;
    return base + bulge.amplitude_mm * std::exp(-0.5 * z * z);
  }

  void validate() const {
    if (control_points.rows() < 2 || control_points.cols() != 3)
      throw std::invalid_argument("vessel spec: need at least 2 centerline control points");
    if (!control_points.allFinite())
      throw std::invalid_argument("vessel spec: non-finite control point");
    if (!(target_edge_mm > 0.0))
      throw std::invalid_argument("vessel spec: target edge length must be > 0");
    if (bulge.amplitude_mm < 0.0)
      throw std::invalid_argument("vessel spec: bulge amplitude must be >= 0");
    if (!(bulge.width_s > 0.0)) throw std::invalid_argument("vessel spec: bulge width must be > 0");
    if (noise_mm < 0.0) throw std::invalid_argument("vessel spec: noise amplitude must be >= 0");
    for (int i = 0; i <= 100; ++i)
      if (!(radius_at(i / 100.0) > 0.0))
        throw std::invalid_argument("vessel spec: radius profile must stay positive");
    for (const auto& b : branches) {
      if (!(b.attach_s > 0.05 && b.attach_s < 0.95))
        throw std::invalid_argument("vessel spec: branch attach point too close to a cap");
      if (!(b.takeoff_rad >= 0.5 && b.takeoff_rad <= 1.5708))
        throw std::invalid_argument("vessel spec: branch take-off angle out of range");
      if (!(b.length_mm > 0.0 && b.radius0_mm > 0.0 && b.radius1_mm > 0.0))
        throw std::invalid_argument("vessel spec: branch dimensions must be > 0");
    }
  }
};

namespace detail {

/// Uniform Catmull-Rom interpolation through the control polygon with clamped
/// endpoints, evaluated at global parameter s in [0, 1].
inline Eigen::Vector3d catmull_rom(const Eigen::MatrixXd& pts, double s) {
  const int k = static_cast<int>(pts.rows());
  if (k == 2) return (1.0 - s) * pts.row(0).transpose() + s * pts.row(1).transpose();
  const double x = std::clamp(s, 0.0, 1.0) * (k - 1);
  const int seg = std::min(static_cast<int>(x), k - 2);
  const double t = x - seg;
  auto P = [&](int i) -> Eigen::Vector3d {
    return pts.row(std::clamp(i, 0, k - 1)).transpose();
  };
  const Eigen::Vector3d p0 = P(seg - 1), p1 = P(seg), p2 = P(seg + 1), p3 = P(seg + 2);
  return 0.5 * ((2.0 * p1) + (-p0 + p2) * t + (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3) * t * t +
                (-p0 + 3.0 * p1 - 3.0 * p2 + p3) * t * t * t);
}

} // namespace detail

/// One sampled centerline station; used both to place mesh vertices and as the
/// lookup table of the analytic oracle.
struct CenterlineSample {
  Eigen::Vector3d point;
  Eigen::Vector3d tangent; // unit, pointing downstream
  double radius_mm = 0.0;
};

/// Grid-space window of wall quads removed for one branch.
struct BranchWindow {
  int i0 = 0, wi = 0; // ring range [i0, i0+wi]
  int j0 = 0, wj = 0; // angular range [j0, j0+wj], indices mod K
};

/// Deterministic sampled geometry shared by the mesh builder and the oracle.
struct VesselModel {
  std::vector<CenterlineSample> trunk;    // S+1 stations at mesh resolution
  std::vector<Eigen::Vector3d> e1, e2;    // parallel-transported ring frames
  int ring_points = 0;                    // K
  std::vector<BranchWindow> windows;      // one per branch
  std::vector<Eigen::Vector3d> branch_origin, branch_axis, branch_u1, branch_u2;
  std::vector<std::vector<CenterlineSample>> branch_levels; // per branch, mesh rings
  std::vector<double> outlet_area_mm2;    // trunk outlet first, then branches

  // Fixed-count station tables for the analytic oracle.  Their sampling is
  // independent of the mesh grid, so derived fields do not change when the
  // target edge length (or a rounding-boundary grid size) does.
  std::vector<CenterlineSample> oracle_trunk;
  std::vector<std::vector<CenterlineSample>> oracle_branches;
};

inline VesselModel sample_vessel(const VesselSpec& spec) {
  spec.validate();
  VesselModel model;

  // centerline length estimate for grid sizing
  double length = 0.0;
  {
    Eigen::Vector3d prev = detail::catmull_rom(spec.control_points, 0.0);
    for (int i = 1; i <= 64; ++i) {
      const Eigen::Vector3d p = detail::catmull_rom(spec.control_points, i / 64.0);
      length += (p - prev).norm();
      prev = p;
    }
  }
  const double mean_r = 0.5 * (spec.radius0_mm + spec.radius1_mm);
  const int S = std::max(8, static_cast<int>(std::lround(length / spec.target_edge_mm)));
  const int K =
      std::max(8, static_cast<int>(std::lround(2.0 * M_PI * mean_r / spec.target_edge_mm)));
  model.ring_points = K;

  // seed-driven smooth waviness, independent of the bulge and branch lists
  const Eigen::Vector3d span =
      (spec.control_points.row(spec.control_points.rows() - 1) - spec.control_points.row(0))
          .transpose();
  const Eigen::Vector3d axis = span.norm() > 1e-9 ? span.normalized() : Eigen::Vector3d::UnitZ();
  const Eigen::Vector3d lat1 = axis.unitOrthogonal();
  const Eigen::Vector3d lat2 = axis.cross(lat1);
  std::vector<double> amp(6, 0.0), phase(6, 0.0);
  if (spec.noise_mm > 0.0) {
    std::mt19937_64 rng(spec.seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int m = 0; m < 6; ++m) {
      amp[static_cast<size_t>(m)] = u(rng) * spec.noise_mm / (1.0 + m % 3);
      phase[static_cast<size_t>(m)] = (u(rng) + 1.0) * M_PI;
    }
  }
  auto center_at = [&](double s) {
    Eigen::Vector3d c = detail::catmull_rom(spec.control_points, s);
    for (int m = 0; m < 3; ++m) {
      c += amp[static_cast<size_t>(m)] * std::sin(M_PI * (m + 1) * s + phase[static_cast<size_t>(m)]) * lat1;
      c += amp[static_cast<size_t>(m + 3)] *
           std::sin(M_PI * (m + 1) * s + phase[static_cast<size_t>(m + 3)]) * lat2;
    }
    return c;
  };

  // stations and parallel-transported frames
  model.trunk.resize(static_cast<size_t>(S + 1));
  model.e1.resize(static_cast<size_t>(S + 1));
  model.e2.resize(static_cast<size_t>(S + 1));
  const double h = 1.0 / (16.0 * S);
  for (int i = 0; i <= S; ++i) {
    const double s = static_cast<double>(i) / S;
    auto& st = model.trunk[static_cast<size_t>(i)];
    st.point = center_at(s);
    st.tangent = (center_at(std::min(1.0, s + h)) - center_at(std::max(0.0, s - h))).normalized();
    st.radius_mm = spec.radius_at(s);
  }
  model.e1[0] = model.trunk[0].tangent.unitOrthogonal();
  model.e2[0] = model.trunk[0].tangent.cross(model.e1[0]);
  for (int i = 1; i <= S; ++i) {
    // rotate the previous frame by the minimal rotation aligning the tangents
    const Eigen::Vector3d a = model.trunk[static_cast<size_t>(i - 1)].tangent;
    const Eigen::Vector3d b = model.trunk[static_cast<size_t>(i)].tangent;
    const Eigen::Vector3d v = a.cross(b);
    const double c = a.dot(b);
    Eigen::Vector3d e1p = model.e1[static_cast<size_t>(i - 1)];
    if (v.norm() > 1e-14 && c > -0.999) {
      const Eigen::Matrix3d vx = (Eigen::Matrix3d() << 0, -v.z(), v.y(), v.z(), 0, -v.x(),
                                  -v.y(), v.x(), 0)
                                     .finished();
      const Eigen::Matrix3d rot =
          Eigen::Matrix3d::Identity() + vx + vx * vx * (1.0 / (1.0 + c));
      e1p = rot * e1p;
    }
    e1p -= e1p.dot(b) * b; // re-orthogonalise against drift
    model.e1[static_cast<size_t>(i)] = e1p.normalized();
    model.e2[static_cast<size_t>(i)] = b.cross(model.e1[static_cast<size_t>(i)]);
  }

  // trunk must not fold onto itself: stations far apart along the centerline
  // may not come closer than the sum of their radii
  for (int i = 0; i <= S; ++i)
    for (int j = i + 1; j <= S; ++j) {
      const auto& a = model.trunk[static_cast<size_t>(i)];
      const auto& b = model.trunk[static_cast<size_t>(j)];
      const double arc = (j - i) * length / S;
      const double rr = a.radius_mm + b.radius_mm;
      if (arc > 2.0 * rr && (a.point - b.point).norm() < rr)
        throw std::invalid_argument("vessel spec: self-intersecting centerline");
    }

  // branch windows, axes, and rings
  const int nb = static_cast<int>(spec.branches.size());
  model.windows.resize(static_cast<size_t>(nb));
  model.branch_origin.resize(static_cast<size_t>(nb));
  model.branch_axis.resize(static_cast<size_t>(nb));
  model.branch_u1.resize(static_cast<size_t>(nb));
  model.branch_u2.resize(static_cast<size_t>(nb));
  model.branch_levels.resize(static_cast<size_t>(nb));
  const double ds_mm = length / S;
  for (int b = 0; b < nb; ++b) {
    const auto& br = spec.branches[static_cast<size_t>(b)];
    auto& w = model.windows[static_cast<size_t>(b)];
    const int ic = static_cast<int>(std::lround(br.attach_s * S));
    const double r_here = spec.radius_at(br.attach_s);
    w.wi = std::clamp(static_cast<int>(std::lround(2.0 * br.radius0_mm / ds_mm)), 2, S - 2);
    w.wj = std::clamp(
        static_cast<int>(std::lround(K * br.radius0_mm / (M_PI * r_here))), 2, K - 3);
    w.i0 = std::clamp(ic - w.wi / 2, 1, S - 1 - w.wi);
    const int jc = static_cast<int>(std::lround(br.azimuth_rad / (2.0 * M_PI / K)));
    w.j0 = ((jc - w.wj / 2) % K + K) % K;

    // take-off frame and axis
    const int ia = std::clamp(w.i0 + w.wi / 2, 0, S);
    const auto& st = model.trunk[static_cast<size_t>(ia)];
    const double theta = 2.0 * M_PI * (w.j0 + 0.5 * w.wj) / K;
    const Eigen::Vector3d radial = std::cos(theta) * model.e1[static_cast<size_t>(ia)] +
                                   std::sin(theta) * model.e2[static_cast<size_t>(ia)];
    const Eigen::Vector3d d =
        (std::cos(br.takeoff_rad) * st.tangent + std::sin(br.takeoff_rad) * radial).normalized();
    model.branch_origin[static_cast<size_t>(b)] = st.point + st.radius_mm * radial;
    model.branch_axis[static_cast<size_t>(b)] = d;
    Eigen::Vector3d u1 = st.tangent - st.tangent.dot(d) * d;
    if (u1.norm() < 1e-9) u1 = d.unitOrthogonal();
    model.branch_u1[static_cast<size_t>(b)] = u1.normalized();
    model.branch_u2[static_cast<size_t>(b)] = d.cross(model.branch_u1[static_cast<size_t>(b)]);

    const int sb = std::max(3, static_cast<int>(std::lround(br.length_mm / spec.target_edge_mm)));
    auto& levels = model.branch_levels[static_cast<size_t>(b)];
    levels.resize(static_cast<size_t>(sb));
    for (int r = 1; r <= sb; ++r) {
      const double f = static_cast<double>(r) / sb;
      auto& lv = levels[static_cast<size_t>(r - 1)];
      lv.point = model.branch_origin[static_cast<size_t>(b)] + f * br.length_mm * d;
      lv.tangent = d;
      lv.radius_mm = br.radius0_mm + (br.radius1_mm - br.radius0_mm) * f;
    }
  }

  // branch/branch and branch/trunk clearance (coarse bounding checks)
  for (int a = 0; a < nb; ++a)
    for (int b = a + 1; b < nb; ++b) {
      const auto& wa = model.windows[static_cast<size_t>(a)];
      const auto& wb = model.windows[static_cast<size_t>(b)];
      const bool i_clear = wa.i0 > wb.i0 + wb.wi + 1 || wb.i0 > wa.i0 + wa.wi + 1;
      auto j_hit = [&](int j) {
        const int rel = ((j - wb.j0) % K + K) % K;
        return rel <= wb.wj + 1 || rel >= K - 1;
      };
      bool j_clear = true;
      for (int j = wa.j0 - 1; j <= wa.j0 + wa.wj + 1; ++j)
        if (j_hit((j % K + K) % K)) j_clear = false;
      if (!i_clear && !j_clear)
        throw std::invalid_argument("vessel spec: overlapping branches");
      for (const auto& la : model.branch_levels[static_cast<size_t>(a)])
        for (const auto& lb : model.branch_levels[static_cast<size_t>(b)])
          if ((la.point - lb.point).norm() < la.radius_mm + lb.radius_mm)
            throw std::invalid_argument("vessel spec: overlapping branches");
    }
  for (int b = 0; b < nb; ++b)
    for (const auto& lv : model.branch_levels[static_cast<size_t>(b)]) {
      const double off =
          (lv.point - model.branch_origin[static_cast<size_t>(b)]).norm();
      if (off < 2.0 * spec.branches[static_cast<size_t>(b)].radius0_mm) continue;
      for (const auto& st : model.trunk)
        if ((lv.point - st.point).norm() < 0.9 * (st.radius_mm + lv.radius_mm))
          throw std::invalid_argument("vessel spec: self-intersecting branch");
    }

  model.outlet_area_mm2.push_back(M_PI * spec.radius_at(1.0) * spec.radius_at(1.0));
  for (const auto& br : spec.branches)
    model.outlet_area_mm2.push_back(M_PI * br.radius1_mm * br.radius1_mm);

  // oracle station tables at a fixed sample count
  constexpr int kOracleTrunk = 128;
  constexpr int kOracleBranch = 32;
  const double ho = 1.0 / 2048.0;
  model.oracle_trunk.resize(kOracleTrunk + 1);
  for (int i = 0; i <= kOracleTrunk; ++i) {
    const double s = static_cast<double>(i) / kOracleTrunk;
    auto& st = model.oracle_trunk[static_cast<size_t>(i)];
    st.point = center_at(s);
    st.tangent =
        (center_at(std::min(1.0, s + ho)) - center_at(std::max(0.0, s - ho))).normalized();
    st.radius_mm = spec.radius_at(s);
  }
  model.oracle_branches.resize(static_cast<size_t>(nb));
  for (int b = 0; b < nb; ++b) {
    const auto& br = spec.branches[static_cast<size_t>(b)];
    auto& samples = model.oracle_branches[static_cast<size_t>(b)];
    samples.resize(kOracleBranch);
    for (int j = 1; j <= kOracleBranch; ++j) {
      const double f = static_cast<double>(j) / kOracleBranch;
      auto& st = samples[static_cast<size_t>(j - 1)];
      st.point = model.branch_origin[static_cast<size_t>(b)] +
                 f * br.length_mm * model.branch_axis[static_cast<size_t>(b)];
      st.tangent = model.branch_axis[static_cast<size_t>(b)];
      st.radius_mm = br.radius0_mm + (br.radius1_mm - br.radius0_mm) * f;
    }
  }
  return model;
}

/// Build the watertight labelled surface mesh for a spec.
inline mesh::SurfaceMesh generate_vessel(const VesselSpec& spec) {
  const VesselModel model = sample_vessel(spec);
  const int S = static_cast<int>(model.trunk.size()) - 1;
  const int K = model.ring_points;
  auto vid = [&](int i, int j) { return i * K + ((j % K + K) % K); };

  std::vector<Eigen::Vector3d> verts(static_cast<size_t>((S + 1) * K));
  for (int i = 0; i <= S; ++i) {
    const auto& st = model.trunk[static_cast<size_t>(i)];
    for (int j = 0; j < K; ++j) {
      const double theta = 2.0 * M_PI * j / K;
      verts[static_cast<size_t>(vid(i, j))] =
          st.point + st.radius_mm * (std::cos(theta) * model.e1[static_cast<size_t>(i)] +
                                     std::sin(theta) * model.e2[static_cast<size_t>(i)]);
    }
  }

  // wall quads, two triangles each, wound so normals point out of the lumen
  std::vector<bool> quad_removed(static_cast<size_t>(S * K), false);
  for (size_t b = 0; b < model.windows.size(); ++b) {
    const auto& w = model.windows[b];
    for (int i = w.i0; i < w.i0 + w.wi; ++i)
      for (int j = w.j0; j < w.j0 + w.wj; ++j)
        quad_removed[static_cast<size_t>(i * K + ((j % K + K) % K))] = true;
  }
  std::vector<std::array<int, 3>> faces;
  for (int i = 0; i < S; ++i)
    for (int j = 0; j < K; ++j) {
      if (quad_removed[static_cast<size_t>(i * K + j)]) continue;
      const int a = vid(i, j), b = vid(i + 1, j), c = vid(i + 1, j + 1), d = vid(i, j + 1);
      faces.push_back({a, c, b});
      faces.push_back({a, d, c});
    }

  // end caps: a centre vertex fanned to its ring
  std::vector<int> inlet, trunk_outlet;
  const int inlet_center = static_cast<int>(verts.size());
  verts.push_back(model.trunk[0].point);
  const int outlet_center = static_cast<int>(verts.size());
  verts.push_back(model.trunk[static_cast<size_t>(S)].point);
  for (int j = 0; j < K; ++j) {
    faces.push_back({inlet_center, vid(0, j + 1), vid(0, j)});
    faces.push_back({outlet_center, vid(S, j), vid(S, j + 1)});
    inlet.push_back(vid(0, j));
    trunk_outlet.push_back(vid(S, j));
  }
  inlet.push_back(inlet_center);
  trunk_outlet.push_back(outlet_center);

  std::vector<std::vector<int>> outlets;
  outlets.push_back(trunk_outlet);

  // branches: walk each window's boundary loop in the orientation the wall
  // left open, then extrude rings of the same vertex count along the axis
  for (size_t b = 0; b < model.windows.size(); ++b) {
    std::map<std::pair<int, int>, int> directed;
    for (const auto& f : faces)
      for (int e = 0; e < 3; ++e) ++directed[{f[static_cast<size_t>(e)], f[(e + 1) % 3]}];
    std::map<int, int> band_next; // band traversal: reverse of the open edges
    for (const auto& [edge, cnt] : directed) {
      (void)cnt;
      if (!directed.count({edge.second, edge.first})) band_next[edge.second] = edge.first;
    }
    if (band_next.empty()) throw std::logic_error("vessel: branch window produced no boundary");
    std::vector<int> loop;
    for (int v = band_next.begin()->first;;) {
      loop.push_back(v);
      v = band_next.at(v);
      if (v == loop.front()) break;
    }
    const int kb = static_cast<int>(loop.size());

    // ring angles follow the loop vertices so the collar is not twisted
    const Eigen::Vector3d& origin = model.branch_origin[b];
    const Eigen::Vector3d& u1 = model.branch_u1[b];
    const Eigen::Vector3d& u2 = model.branch_u2[b];
    std::vector<double> beta(static_cast<size_t>(kb));
    for (int k = 0; k < kb; ++k) {
      const Eigen::Vector3d rel = verts[static_cast<size_t>(loop[static_cast<size_t>(k)])] - origin;
      beta[static_cast<size_t>(k)] = std::atan2(rel.dot(u2), rel.dot(u1));
    }

    const auto& levels = model.branch_levels[b];
    std::vector<int> prev = loop;
    for (size_t r = 0; r < levels.size(); ++r) {
      std::vector<int> ring(static_cast<size_t>(kb));
      for (int k = 0; k < kb; ++k) {
        ring[static_cast<size_t>(k)] = static_cast<int>(verts.size());
        verts.push_back(levels[r].point +
                        levels[r].radius_mm * (std::cos(beta[static_cast<size_t>(k)]) * u1 +
                                               std::sin(beta[static_cast<size_t>(k)]) * u2));
      }
      for (int k = 0; k < kb; ++k) {
        const int k1 = (k + 1) % kb;
        faces.push_back({prev[static_cast<size_t>(k)], prev[static_cast<size_t>(k1)],
                         ring[static_cast<size_t>(k1)]});
        faces.push_back({prev[static_cast<size_t>(k)], ring[static_cast<size_t>(k1)],
                         ring[static_cast<size_t>(k)]});
      }
      prev = ring;
    }
    const int cap_center = static_cast<int>(verts.size());
    verts.push_back(levels.back().point);
    for (int k = 0; k < kb; ++k)
      faces.push_back({cap_center, prev[static_cast<size_t>(k)], prev[(static_cast<size_t>(k) + 1) % static_cast<size_t>(kb)]});
    prev.push_back(cap_center);
    outlets.push_back(prev);
  }

  // drop vertices that lost all faces (branch window interiors) and compact
  std::vector<bool> used(verts.size(), false);
  for (const auto& f : faces)
    for (int e = 0; e < 3; ++e) used[static_cast<size_t>(f[static_cast<size_t>(e)])] = true;
  std::vector<int> remap(verts.size(), -1);
  mesh::SurfaceMesh m;
  int live = 0;
  for (size_t v = 0; v < verts.size(); ++v)
    if (used[v]) remap[v] = live++;
  m.vertices.resize(live, 3);
  for (size_t v = 0; v < verts.size(); ++v)
    if (used[v]) m.vertices.row(remap[v]) = verts[v].transpose();
  m.faces.resize(static_cast<Eigen::Index>(faces.size()), 3);
  for (size_t f = 0; f < faces.size(); ++f)
    for (int e = 0; e < 3; ++e)
      m.faces(static_cast<Eigen::Index>(f), e) = remap[static_cast<size_t>(faces[f][static_cast<size_t>(e)])];
  auto relabel = [&](std::vector<int>& patch) {
    for (int& v : patch) v = remap[static_cast<size_t>(v)];
  };
  relabel(inlet);
  for (auto& o : outlets) relabel(o);
  m.inlet = inlet;
  m.outlets = outlets;

  // polygonal inlet-cap area and the inward (downstream) inlet normal
  const Eigen::Vector3d c0 = model.trunk[0].point;
  double area = 0.0;
  for (int j = 0; j < K; ++j) {
    const Eigen::Vector3d a = m.vertices.row(remap[static_cast<size_t>(vid(0, j))]).transpose();
    const Eigen::Vector3d d = m.vertices.row(remap[static_cast<size_t>(vid(0, j + 1))]).transpose();
    area += 0.5 * ((a - c0).cross(d - c0)).norm();
  }
  m.inlet_area = area;
  m.inlet_normal = model.trunk[0].tangent;
  return m;
}

/// Append branches to a base spec.  The returned spec generates a mesh that is
/// vertex-for-vertex identical to the base mesh outside the carved windows.
inline VesselSpec extend_topology(const VesselSpec& base,
                                  const std::vector<BranchSpec>& extra_branches) {
  VesselSpec out = base;
  for (const auto& b : extra_branches) out.branches.push_back(b);
  sample_vessel(out); // runs the overlap and clearance checks
  return out;
}

} // namespace vwss::lab
