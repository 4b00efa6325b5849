#pragma once

// Training dataset handling: sample preparation (embedding / feature matrix,
// tokenisation graph, target matrix, all cached once per run) and
// geometry-level fold assignment for cross-validation.

#include <Eigen/Dense>
#include <algorithm>
#include <set>
#include <stdexcept>
#include <vector>

#include "vwss/descriptors/features.hpp"
#include "vwss/hemo/field.hpp"
#include "vwss/net/checkpoint.hpp" // ModelKind
#include "vwss/net/gatr.hpp"
#include "vwss/net/vatr.hpp"

namespace vwss::train {

/// One simulated case: a featurised geometry and its reference WSS field.
/// Samples sharing geometry_id are the same vessel under different inflows
/// and always travel together through fold splits.
struct TrainingSample {
  int geometry_id = 0;
  int sim_id = 0;
  desc::DescriptorSet descriptors;
  hemo::TransientWssField target;
};

using Dataset = std::vector<TrainingSample>;

/// Forward-ready cache of one sample.
struct PreparedSample {
  Eigen::MatrixXd inputs; // gatr: n x 16*8 embedding; vatr: n x 14 features
  net::SampleGraph graph;
  Eigen::MatrixXd target; // n x 3T
  int n = 0;
};

inline desc::FeatureStats dataset_stats(const Dataset& ds, const std::vector<int>& indices) {
  std::vector<desc::DescriptorSet> subset;
  subset.reserve(indices.size());
  for (const int i : indices) {
    if (i < 0 || i >= static_cast<int>(ds.size()))
      throw std::invalid_argument("dataset: sample index out of range");
    subset.push_back(ds[static_cast<size_t>(i)].descriptors);
  }
  return desc::compute_feature_stats(subset);
}

inline std::vector<int> all_indices(const Dataset& ds) {
  std::vector<int> idx(ds.size());
  for (size_t i = 0; i < ds.size(); ++i) idx[i] = static_cast<int>(i);
  return idx;
}

/// Build the per-sample caches.  The tokenisation graph of sample j is seeded
/// with seed + j so a rerun reproduces it bit for bit.
template <typename Config>
std::vector<PreparedSample> prepare_samples(const Dataset& ds, const std::vector<int>& indices,
                                            const desc::FeatureStats& stats,
                                            net::ModelKind kind, const Config& cfg, int seed) {
  std::vector<PreparedSample> out;
  out.reserve(indices.size());
  for (size_t j = 0; j < indices.size(); ++j) {
    const TrainingSample& s = ds[static_cast<size_t>(indices[j])];
    s.descriptors.validate();
    s.target.validate();
    if (s.target.n_points() != s.descriptors.n_points())
      throw std::invalid_argument("dataset: target and descriptors disagree on vertex count");
    if (s.target.timepoints != cfg.timepoints)
      throw std::invalid_argument("dataset: target timepoint count differs from the model's");
    PreparedSample p;
    p.n = s.descriptors.n_points();
    p.inputs = kind == net::ModelKind::kGatr
                   ? desc::build_embedding(s.descriptors, stats).data
                   : net::vatr_features(s.descriptors, stats);
    p.graph = net::build_sample_graph(mesh::PointCloud(s.descriptors.coords), cfg.rate, cfg.k,
                                      cfg.eps, seed + static_cast<int>(j));
    p.target = s.target.tau;
    out.push_back(std::move(p));
  }
  return out;
}

/// Deterministic geometry-level folds: geometries are sorted by id and dealt
/// round-robin, so every simulation of a geometry lands in the same fold.
inline std::vector<std::vector<int>> make_geometry_folds(const Dataset& ds, int n_folds) {
  if (n_folds < 2) throw std::invalid_argument("folds: need at least 2");
  std::set<int> ids;
  for (const auto& s : ds) ids.insert(s.geometry_id);
  if (static_cast<int>(ids.size()) < n_folds)
    throw std::invalid_argument("folds: fewer geometries than folds");
  std::vector<std::vector<int>> folds(static_cast<size_t>(n_folds));
  int slot = 0;
  for (const int gid : ids) {
    for (size_t i = 0; i < ds.size(); ++i)
      if (ds[i].geometry_id == gid) folds[static_cast<size_t>(slot)].push_back(static_cast<int>(i));
    slot = (slot + 1) % n_folds;
  }
  return folds;
}

} // namespace vwss::train
