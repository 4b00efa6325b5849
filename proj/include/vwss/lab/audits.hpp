#pragma once

// Generalisation audits run against a trained (or freshly initialised)
// checkpoint: symmetry compliance, inflow extrapolation binned by peak flow,
// marker trajectories under staged wall remodelling, zero-shot evaluation on
// a branch-extended vessel, and prediction stability across mesh resolutions.
// Every audit is deterministic in its seed and returns a plain report struct
// so callers can serialise or assert on it.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>
#include <vector>

#include "vwss/descriptors/features.hpp"
#include "vwss/ga/batch.hpp"
#include "vwss/ga/transform.hpp"
#include "vwss/hemo/markers.hpp"
#include "vwss/hemo/metrics.hpp"
#include "vwss/lab/oracle.hpp"
#include "vwss/lab/recipe.hpp"
#include "vwss/lab/resample.hpp"
#include "vwss/lab/vessel.hpp"
#include "vwss/train/trainer.hpp"

namespace vwss::lab {

namespace detail {

/// Uniform random rotation from a normalised Gaussian quaternion.
inline Eigen::Matrix3d random_rotation(std::mt19937_64& rng) {
  std::normal_distribution<double> n01(0.0, 1.0);
  Eigen::Vector4d q(n01(rng), n01(rng), n01(rng), n01(rng));
  q.normalize();
  const double w = q[0], x = q[1], y = q[2], z = q[3];
  Eigen::Matrix3d r;
  r << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
      2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
      2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
  return r;
}

/// Random Euclidean motion; every other draw carries a reflection.
inline ga::EuclideanTransform random_e3(std::mt19937_64& rng, double translation_scale,
                                        bool improper) {
  std::normal_distribution<double> n01(0.0, 1.0);
  ga::EuclideanTransform g;
  g.rotation = random_rotation(rng);
  g.parity = 1;
  if (improper) {
    Eigen::Vector3d axis;
    do {
      axis = Eigen::Vector3d(n01(rng), n01(rng), n01(rng));
    } while (axis.norm() < 1e-6);
    axis.normalize();
    g.rotation = g.rotation * (Eigen::Matrix3d::Identity() - 2.0 * axis * axis.transpose());
    g.parity = -1;
  }
  g.translation = translation_scale * Eigen::Vector3d(n01(rng), n01(rng), n01(rng));
  return g;
}

/// Rigid/reflective motion of a descriptor set: positions move affinely, the
/// attached unit vectors rotate, and all scalar descriptors are untouched.
inline desc::DescriptorSet move_descriptors(const desc::DescriptorSet& d,
                                            const ga::EuclideanTransform& g) {
  desc::DescriptorSet out = d;
  out.coords = (d.coords * g.rotation.transpose()).rowwise() + g.translation.transpose();
  out.normals = d.normals * g.rotation.transpose();
  out.flow_prior = d.flow_prior * g.rotation.transpose();
  return out;
}

} // namespace detail

// ---------------------------------------------------------------------------
// Equivariance audit

struct EquivarianceReport {
  int transforms = 0;
  double max_violation = 0.0; // worst relative deviation over the transforms
  double min_violation = 0.0; // best case; large for a non-equivariant model
};

/// Relative symmetry violation of a checkpointed model on a probe geometry.
/// For the multivector model the group acts on the embedded inputs and
/// outputs channel-wise (the representation the architecture is built
/// around); for the scalar baseline it acts on the descriptor set and the
/// predicted vectors, which is the only action available to it.  An
/// equivariant model scores ~0; the baseline scores O(1).
inline EquivarianceReport audit_equivariance(const net::ModelCheckpoint& ckpt,
                                             const desc::DescriptorSet& probe, int n_transforms,
                                             std::uint64_t seed) {
  if (n_transforms < 1) throw std::invalid_argument("audit: need at least one transform");
  probe.validate();
  std::mt19937_64 rng(seed * 0x9e3779b97f4a7c15ULL + 0x165667b19e3779f9ULL);
  EquivarianceReport rep;
  rep.transforms = n_transforms;
  rep.min_violation = std::numeric_limits<double>::infinity();

  if (ckpt.kind == net::ModelKind::kGatr) {
    const ga::MvBatch emb = desc::build_embedding(probe, ckpt.stats);
    const net::SampleGraph graph =
        net::build_sample_graph(mesh::PointCloud(probe.coords), ckpt.gatr.rate, ckpt.gatr.k,
                                ckpt.gatr.eps, static_cast<int>(seed));
    net::Tape base;
    const net::Mat out =
        base.val(net::gatr_forward(base, emb.data, graph, ckpt.gatr, ckpt.params).output);
    const double out_norm = out.norm();
    if (!(out_norm > 0.0)) throw std::runtime_error("audit: model output is identically zero");
    for (int i = 0; i < n_transforms; ++i) {
      const auto g = detail::random_e3(rng, 1.0, i % 2 == 1);
      ga::MvBatch moved_in = emb;
      moved_in = ga::apply_transform(g, moved_in);
      net::Tape t;
      const net::Mat moved =
          t.val(net::gatr_forward(t, moved_in.data, graph, ckpt.gatr, ckpt.params).output);
      ga::MvBatch expect;
      expect.data = out;
      expect.channels = ckpt.gatr.timepoints;
      expect = ga::apply_transform(g, expect);
      const double v = (moved - expect.data).norm() / out_norm;
      rep.max_violation = std::max(rep.max_violation, v);
      rep.min_violation = std::min(rep.min_violation, v);
    }
    return rep;
  }

  const hemo::TransientWssField base = train::predict(ckpt, probe, static_cast<int>(seed));
  double base_sq = base.tau.squaredNorm();
  if (!(base_sq > 0.0)) throw std::runtime_error("audit: model output is identically zero");
  for (int i = 0; i < n_transforms; ++i) {
    const auto g = detail::random_e3(rng, 1.0, i % 2 == 1);
    const hemo::TransientWssField moved =
        train::predict(ckpt, detail::move_descriptors(probe, g), static_cast<int>(seed));
    double dev_sq = 0.0;
    for (int p = 0; p < base.n_points(); ++p)
      for (int t = 0; t < base.timepoints; ++t)
        dev_sq += (moved.at(p, t) - g.rotation * base.at(p, t)).squaredNorm();
    const double v = std::sqrt(dev_sq / base_sq);
    rep.max_violation = std::max(rep.max_violation, v);
    rep.min_violation = std::min(rep.min_violation, v);
  }
  return rep;
}

/// Deterministic probe vessel for symmetry and stability audits.
inline desc::DescriptorSet probe_descriptors(std::uint64_t seed, double q_max = 80.0) {
  RecipeConfig rc;
  rc.seed = seed;
  std::mt19937_64 rng(seed * 0x9e3779b97f4a7c15ULL + 0xd1b54a32d192ed03ULL);
  const VesselSpec spec = random_vessel_spec(rng, rc);
  const mesh::SurfaceMesh m = generate_vessel(spec);
  return desc::compute_descriptors(m, desc::scale_waveform(template_waveform(), q_max));
}

// ---------------------------------------------------------------------------
// Inflow sweep audit

struct SweepBin {
  double q_lo = 0.0, q_hi = 0.0;
  int count = 0;
  double mean_mae = 0.0;    // Pa
  double mean_nmae = 0.0;   // unitless
  double mean_cosine = 0.0; // unitless
};

struct InflowSweepReport {
  std::vector<SweepBin> bins;
};

/// Error against the analytic reference, binned by peak inflow.  Geometries
/// are drawn fresh from the corpus recipe (distinct seed stream from any
/// training run), so every bin is an out-of-sample evaluation.
inline InflowSweepReport audit_inflow_sweep(const net::ModelCheckpoint& ckpt,
                                            const RecipeConfig& rc, int n_bins, int per_bin,
                                            std::uint64_t seed) {
  if (n_bins < 1 || per_bin < 1) throw std::invalid_argument("audit: need bins and samples");
  if (!(rc.q_high > rc.q_low)) throw std::invalid_argument("audit: empty flow range");
  std::mt19937_64 rng(seed * 0x9e3779b97f4a7c15ULL + 0x27d4eb2f165667c5ULL);
  const desc::InflowWaveform tpl = template_waveform();

  InflowSweepReport rep;
  const double bin_w = (rc.q_high - rc.q_low) / n_bins;
  for (int b = 0; b < n_bins; ++b) {
    SweepBin bin;
    bin.q_lo = rc.q_low + b * bin_w;
    bin.q_hi = bin.q_lo + bin_w;
    for (int j = 0; j < per_bin; ++j) {
      VesselSpec spec;
      mesh::SurfaceMesh m;
      bool built = false;
      for (int attempt = 0; attempt < 32 && !built; ++attempt) {
        try {
          spec = random_vessel_spec(rng, rc);
          m = generate_vessel(spec);
          built = true;
        } catch (const std::invalid_argument&) {
        }
      }
      if (!built) throw std::runtime_error("audit: could not draw a valid vessel spec");
      // evenly placed flows inside the bin, away from its edges
      const double q = bin.q_lo + bin_w * (j + 0.5) / per_bin;
      const desc::InflowWaveform wave = desc::scale_waveform(tpl, q);
      const hemo::TransientWssField truth = oracle_wss(m, spec, wave, rc.oracle);
      const desc::DescriptorSet d = desc::compute_descriptors(m, wave);
      const hemo::TransientWssField pred = train::predict(ckpt, d, static_cast<int>(seed));
      const hemo::FieldMetrics fm = hemo::field_metrics(pred, truth);
      bin.mean_mae += fm.mae;
      bin.mean_nmae += fm.nmae;
      bin.mean_cosine += fm.cosine;
      ++bin.count;
    }
    bin.mean_mae /= bin.count;
    bin.mean_nmae /= bin.count;
    bin.mean_cosine /= bin.count;
    rep.bins.push_back(bin);
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Remodelling audit

struct RemodelReport {
  std::vector<double> amplitude_mm; // staged bulge amplitudes
  std::vector<double> q1_oracle;    // first-quartile TAWSS of the reference (Pa)
  std::vector<double> q1_model;     // first-quartile TAWSS of the prediction (Pa)
  double trajectory_mae = 0.0;      // mean |model - oracle| over the stages
  double oracle_range = 0.0;        // max - min of the oracle trajectory
};

/// Staged wall remodelling: grow a bulge from zero to max_amplitude_mm in
/// equal steps and track the first-quartile TAWSS of prediction vs reference.
inline RemodelReport audit_remodel(const net::ModelCheckpoint& ckpt, const VesselSpec& base,
                                   double max_amplitude_mm, int steps,
                                   const desc::InflowWaveform& wave, const OracleConfig& oc,
                                   std::uint64_t seed = 0) {
  if (steps < 2) throw std::invalid_argument("audit: need at least two remodelling steps");
  if (!(max_amplitude_mm >= 0.0)) throw std::invalid_argument("audit: negative bulge amplitude");
  RemodelReport rep;
  for (int i = 0; i < steps; ++i) {
    VesselSpec spec = base;
    spec.bulge.amplitude_mm = max_amplitude_mm * i / (steps - 1);
    const mesh::SurfaceMesh m = generate_vessel(spec);
    const hemo::TransientWssField truth = oracle_wss(m, spec, wave, oc);
    const desc::DescriptorSet d = desc::compute_descriptors(m, wave);
    const hemo::TransientWssField pred = train::predict(ckpt, d, static_cast<int>(seed));
    rep.amplitude_mm.push_back(spec.bulge.amplitude_mm);
    rep.q1_oracle.push_back(hemo::quantile(hemo::tawss(truth), 0.25));
    rep.q1_model.push_back(hemo::quantile(hemo::tawss(pred), 0.25));
  }
  double mae = 0.0;
  for (int i = 0; i < steps; ++i) mae += std::abs(rep.q1_model[i] - rep.q1_oracle[i]);
  rep.trajectory_mae = mae / steps;
  const auto [lo, hi] = std::minmax_element(rep.q1_oracle.begin(), rep.q1_oracle.end());
  rep.oracle_range = *hi - *lo;
  return rep;
}

// ---------------------------------------------------------------------------
// Topology-extension audit

struct TopologyReport {
  int matched_points = 0;       // base-region vertices shared by both meshes
  double cosine_base = 0.0;     // region cosine, prediction vs oracle, base vessel
  double cosine_extended = 0.0; // same region after the branch is added
  double degradation = 0.0;     // cosine_base - cosine_extended
};

/// Zero-shot evaluation on a branch-extended vessel.  The extension keeps
/// every base vertex outside the carved collar bit-for-bit, so the audit
/// scores the same physical region before and after the topology change.
inline TopologyReport audit_topology(const net::ModelCheckpoint& ckpt, const VesselSpec& base,
                                     const BranchSpec& extra, const desc::InflowWaveform& wave,
                                     const OracleConfig& oc, std::uint64_t seed = 0) {
  const VesselSpec extended = extend_topology(base, {extra});
  const mesh::SurfaceMesh ma = generate_vessel(base);
  const mesh::SurfaceMesh mb = generate_vessel(extended);
  const VesselModel model = sample_vessel(extended);
  const size_t new_branch = extended.branches.size() - 1;
  const Eigen::Vector3d origin = model.branch_origin.at(new_branch);
  const double collar = 4.0 * extra.radius0_mm + 2.0 * base.target_edge_mm;

  // exact twins: construction preserves base vertices outside the collar
  std::vector<int> idx_a, idx_b;
  for (int i = 0; i < ma.n_vertices(); ++i) {
    const Eigen::Vector3d p = ma.vertices.row(i);
    if ((p - origin).norm() <= collar) continue;
    for (int j = 0; j < mb.n_vertices(); ++j)
      if ((mb.vertices.row(j).transpose() - p).norm() == 0.0) {
        idx_a.push_back(i);
        idx_b.push_back(j);
        break;
      }
  }
  if (idx_a.size() < 8) throw std::runtime_error("audit: too few shared base-region vertices");

  const hemo::TransientWssField truth_a = oracle_wss(ma, base, wave, oc);
  const hemo::TransientWssField truth_b = oracle_wss(mb, extended, wave, oc);
  const hemo::TransientWssField pred_a =
      train::predict(ckpt, desc::compute_descriptors(ma, wave), static_cast<int>(seed));
  const hemo::TransientWssField pred_b =
      train::predict(ckpt, desc::compute_descriptors(mb, wave), static_cast<int>(seed));

  TopologyReport rep;
  rep.matched_points = static_cast<int>(idx_a.size());
  rep.cosine_base = hemo::region_metrics(pred_a, truth_a, idx_a).cosine;
  rep.cosine_extended = hemo::region_metrics(pred_b, truth_b, idx_b).cosine;
  rep.degradation = rep.cosine_base - rep.cosine_extended;
  return rep;
}

// ---------------------------------------------------------------------------
// Mesh-sensitivity audit

struct MeshSensitivityPair {
  double scale_a = 0.0, scale_b = 0.0;
  double nmae = 0.0; // symmetric nearest-vertex NMAE between the predictions
};

struct MeshSensitivityReport {
  std::vector<double> scales;
  std::vector<int> vertex_counts;
  std::vector<MeshSensitivityPair> pairs;
  double max_pairwise_nmae = 0.0;
};

namespace detail {

/// Directed nearest-vertex NMAE of prediction a against reference b.
inline double nearest_vertex_nmae(const mesh::SurfaceMesh& ma, const hemo::TransientWssField& fa,
                                  const mesh::SurfaceMesh& mb, const hemo::TransientWssField& fb) {
  double err = 0.0, peak = 0.0;
  long count = 0;
  for (int p = 0; p < mb.n_vertices(); ++p)
    for (int t = 0; t < fb.timepoints; ++t) peak = std::max(peak, fb.at(p, t).norm());
  if (!(peak > 0.0)) throw std::runtime_error("audit: reference prediction is identically zero");
  for (int i = 0; i < ma.n_vertices(); ++i) {
    const Eigen::Vector3d p = ma.vertices.row(i);
    int best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (int j = 0; j < mb.n_vertices(); ++j) {
      const double d = (mb.vertices.row(j).transpose() - p).squaredNorm();
      if (d < best_d) {
        best_d = d;
        best = j;
      }
    }
    for (int t = 0; t < fa.timepoints; ++t) {
      err += (fa.at(i, t) - fb.at(best, t)).norm();
      ++count;
    }
  }
  return err / static_cast<double>(count) / peak;
}

} // namespace detail

/// Prediction stability across remeshings of one vessel: the base mesh is
/// resampled to scaled edge-length targets and each pair of predictions is
/// compared through nearest-vertex lookup (worst direction of each pair).
inline MeshSensitivityReport audit_mesh_sensitivity(const net::ModelCheckpoint& ckpt,
                                                    const VesselSpec& base,
                                                    const std::vector<double>& scales,
                                                    const desc::InflowWaveform& wave,
                                                    std::uint64_t seed = 0) {
  if (scales.size() < 2) throw std::invalid_argument("audit: need at least two resolutions");
  const mesh::SurfaceMesh src = generate_vessel(base);
  MeshSensitivityReport rep;
  rep.scales = scales;
  std::vector<mesh::SurfaceMesh> meshes;
  std::vector<hemo::TransientWssField> preds;
  for (const double s : scales) {
    if (!(s > 0.0)) throw std::invalid_argument("audit: resolution scale must be > 0");
    mesh::SurfaceMesh m = s == 1.0 ? src : resample_mesh(src, base.target_edge_mm * s);
    preds.push_back(
        train::predict(ckpt, desc::compute_descriptors(m, wave), static_cast<int>(seed)));
    rep.vertex_counts.push_back(m.n_vertices());
    meshes.push_back(std::move(m));
  }
  for (size_t a = 0; a < scales.size(); ++a)
    for (size_t b = a + 1; b < scales.size(); ++b) {
      MeshSensitivityPair pair;
      pair.scale_a = scales[a];
      pair.scale_b = scales[b];
      pair.nmae = std::max(detail::nearest_vertex_nmae(meshes[a], preds[a], meshes[b], preds[b]),
                           detail::nearest_vertex_nmae(meshes[b], preds[b], meshes[a], preds[a]));
      rep.max_pairwise_nmae = std::max(rep.max_pairwise_nmae, pair.nmae);
      rep.pairs.push_back(pair);
    }
  return rep;
}

} // namespace vwss::lab
