#pragma once

// Per-vertex geometric descriptors and their multivector embedding.  The
// descriptor pipeline combines surface geometry (coordinates, normals,
// transported flow direction, geodesic distance maps, principal curvatures)
// with the inflow peak-velocity scalar, and encodes everything as an 8-channel
// multivector batch:
//   channel 0: vertex position (point object, centred at the mesh centroid)
//   channel 1: surface normal (plane object through the centred vertex)
//   channel 2: flow-direction prior (plane object through the centred vertex)
//   channels 3..7: scalars geo_inlet, geo_outlet, kappa1, kappa2, v_max
// Scalar features are z-scored with dataset statistics stored alongside the
// model parameters; coordinate centring keeps evaluation translation-covariant.

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "vwss/descriptors/waveform.hpp"
#include "vwss/ga/batch.hpp"
#include "vwss/ga/multivector.hpp"
#include "vwss/heat/flow_prior.hpp"
#include "vwss/heat/geodesics.hpp"
#include "vwss/io/field_file.hpp"
#include "vwss/mesh/curvature.hpp"
#include "vwss/mesh/queries.hpp"
#include "vwss/mesh/surface_mesh.hpp"

namespace vwss::desc {

struct DescriptorSet {
  Eigen::MatrixXd coords;     // n x 3 (mm)
  Eigen::MatrixXd normals;    // n x 3 (unit)
  Eigen::MatrixXd flow_prior; // n x 3 (unit tangent or zero)
  Eigen::VectorXd geo_inlet;  // n (mm)
  Eigen::VectorXd geo_outlet; // n (mm)
  Eigen::VectorXd kappa1;     // n (1/mm)
  Eigen::VectorXd kappa2;     // n (1/mm)
  double v_max = std::numeric_limits<double>::quiet_NaN(); // cm/s, one per sample

  int n_points() const { return static_cast<int>(coords.rows()); }

  void validate() const {
    const auto n = coords.rows();
    if (n == 0) throw std::invalid_argument("descriptors: missing descriptor coords");
    if (normals.rows() != n || normals.cols() != 3)
      throw std::invalid_argument("descriptors: missing descriptor normals");
    if (flow_prior.rows() != n || flow_prior.cols() != 3)
      throw std::invalid_argument("descriptors: missing descriptor flow_prior");
    if (geo_inlet.size() != n) throw std::invalid_argument("descriptors: missing descriptor geo_inlet");
    if (geo_outlet.size() != n)
      throw std::invalid_argument("descriptors: missing descriptor geo_outlet");
    if (kappa1.size() != n) throw std::invalid_argument("descriptors: missing descriptor kappa1");
    if (kappa2.size() != n) throw std::invalid_argument("descriptors: missing descriptor kappa2");
    if (!std::isfinite(v_max)) throw std::invalid_argument("descriptors: missing descriptor v_max");
  }
};

/// Full geometric featurisation of a labelled wall mesh plus its inflow.
inline DescriptorSet compute_descriptors(const mesh::SurfaceMesh& m, const InflowWaveform& w) {
  DescriptorSet d;
  d.coords = m.vertices;
  d.normals = mesh::vertex_normals(m);
  d.flow_prior = heat::flow_prior(m).vectors;
  d.geo_inlet = heat::geodesic_distance(m, m.inlet).values;
  d.geo_outlet = heat::outlet_min_geodesic(m).values;
  const mesh::CurvaturePair curv = mesh::principal_curvatures(m);
  d.kappa1 = curv.kappa1;
  d.kappa2 = curv.kappa2;
  d.v_max = v_max(w, m.inlet_area);
  return d;
}

// --- scalar-feature standardisation --------------------------------------------

inline constexpr int kScalarFeatureCount = 5; // geo_inlet, geo_outlet, kappa1, kappa2, v_max

struct FeatureStats {
  Eigen::Matrix<double, kScalarFeatureCount, 1> mean = decltype(mean)::Zero();
  Eigen::Matrix<double, kScalarFeatureCount, 1> std = decltype(std)::Ones();
};

/// Population statistics over every vertex of every sample (v_max over
/// samples); degenerate (constant) features keep std 1 so z-scoring is a
/// no-op shift.
inline FeatureStats compute_feature_stats(const std::vector<DescriptorSet>& dataset) {
  if (dataset.empty()) throw std::invalid_argument("feature stats: empty dataset");
  FeatureStats st;
  Eigen::Matrix<double, kScalarFeatureCount, 1> sum = decltype(sum)::Zero(), sq = decltype(sq)::Zero();
  Eigen::Matrix<double, kScalarFeatureCount, 1> cnt = decltype(cnt)::Zero();
  for (const auto& d : dataset) {
    d.validate();
    const Eigen::VectorXd* fields[4] = {&d.geo_inlet, &d.geo_outlet, &d.kappa1, &d.kappa2};
    for (int f = 0; f < 4; ++f) {
      sum[f] += fields[f]->sum();
      sq[f] += fields[f]->squaredNorm();
      cnt[f] += static_cast<double>(fields[f]->size());
    }
    sum[4] += d.v_max;
    sq[4] += d.v_max * d.v_max;
    cnt[4] += 1.0;
  }
  for (int f = 0; f < kScalarFeatureCount; ++f) {
    st.mean[f] = sum[f] / cnt[f];
    const double var = std::max(0.0, sq[f] / cnt[f] - st.mean[f] * st.mean[f]);
    const double sd = std::sqrt(var);
    st.std[f] = sd < 1e-12 ? 1.0 : sd;
  }
  return st;
}

// --- multivector embedding ---------------------------------------------------------

inline constexpr int kEmbeddingChannels = 8;
enum EmbeddingChannel : int {
  kChanPoint = 0,
  kChanNormal = 1,
  kChanFlowPrior = 2,
  kChanGeoInlet = 3,
  kChanGeoOutlet = 4,
  kChanKappa1 = 5,
  kChanKappa2 = 6,
  kChanVmax = 7,
};

/// Build the 8-channel input embedding.  Channel order is frozen (checkpoints
/// depend on it); unused multivector slots are exactly zero.
inline ga::MvBatch build_embedding(const DescriptorSet& d, const FeatureStats& stats) {
  d.validate();
  const int n = d.n_points();
  ga::MvBatch x(n, kEmbeddingChannels);
  const Eigen::RowVector3d centroid = d.coords.colwise().mean();
  const auto z = [&stats](int f, double v) { return (v - stats.mean[f]) / stats.std[f]; };
  for (int p = 0; p < n; ++p) {
    const Eigen::RowVector3d c = d.coords.row(p) - centroid;
    const util::Vec3 pc{c.x(), c.y(), c.z()};
    x.set(p, kChanPoint, ga::embed_point(pc));

    const Eigen::RowVector3d nr = d.normals.row(p);
    const util::Vec3 nv{nr.x(), nr.y(), nr.z()};
    x.set(p, kChanNormal, ga::embed_plane(nv, nr.dot(c)));

    const Eigen::RowVector3d fr = d.flow_prior.row(p);
    if (fr.norm() >= 1e-12) {
      const util::Vec3 fv{fr.x(), fr.y(), fr.z()};
      x.set(p, kChanFlowPrior, ga::embed_plane(fv, fr.dot(c)));
    } // else: channel stays exactly zero (no transported signal)

    ga::Multivector s;
    s[ga::kSlotScalar] = z(0, d.geo_inlet[p]);
    x.set(p, kChanGeoInlet, s);
    s[ga::kSlotScalar] = z(1, d.geo_outlet[p]);
    x.set(p, kChanGeoOutlet, s);
    s[ga::kSlotScalar] = z(2, d.kappa1[p]);
    x.set(p, kChanKappa1, s);
    s[ga::kSlotScalar] = z(3, d.kappa2[p]);
    x.set(p, kChanKappa2, s);
    s[ga::kSlotScalar] = z(4, d.v_max);
    x.set(p, kChanVmax, s);
  }
  return x;
}

// --- serialisation -------------------------------------------------------------------

/// The 14 per-vertex feature columns (v_max broadcast), as one field file.
inline constexpr int kDescriptorColumns = 14;

inline io::FieldFile descriptors_to_field(const DescriptorSet& d) {
  d.validate();
  io::FieldFile f;
  f.n = d.n_points();
  f.t = 1;
  f.components = kDescriptorColumns;
  f.kind = "descriptors";
  f.units = "mm;unit;unit;mm;mm;1/mm;1/mm;cm/s";
  f.values.resize(f.n, kDescriptorColumns);
  f.values << d.coords, d.normals, d.flow_prior, d.geo_inlet, d.geo_outlet, d.kappa1, d.kappa2,
      Eigen::VectorXd::Constant(f.n, d.v_max);
  return f;
}

inline DescriptorSet descriptors_from_field(const io::FieldFile& f) {
  if (f.kind != "descriptors" || f.components != kDescriptorColumns || f.t != 1)
    throw std::runtime_error("descriptors_from_field: not a descriptor field file");
  DescriptorSet d;
  d.coords = f.values.middleCols(0, 3);
  d.normals = f.values.middleCols(3, 3);
  d.flow_prior = f.values.middleCols(6, 3);
  d.geo_inlet = f.values.col(9);
  d.geo_outlet = f.values.col(10);
  d.kappa1 = f.values.col(11);
  d.kappa2 = f.values.col(12);
  d.v_max = f.n > 0 ? f.values(0, 13) : std::numeric_limits<double>::quiet_NaN();
  d.validate();
  return d;
}

} // namespace vwss::desc
