#pragma once

// Error metrics between predicted and reference transient WSS fields, plus
// the quantile helper used for regional marker trajectories.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "vwss/hemo/field.hpp"

namespace vwss::hemo {

struct FieldMetrics {
  double mae = 0.0;          // mean |tau_pred - tau_true| over points and times (Pa)
  double nmae = 0.0;         // mae / max_point_time |tau_true|
  double cosine = 0.0;       // mean cos angle over pairs with both norms > 0
  double approx_disp = 0.0;  // sqrt(sum |delta|^2 / sum |tau_true|^2)
  int cosine_pairs = 0;      // pairs that entered the cosine mean
};

struct ScalarMetrics {
  double mae = 0.0;  // mean |pred - true|
  double disp = 0.0; // sqrt(sum (pred - true)^2 / sum true^2)
};

namespace detail {

inline void check_compatible(const TransientWssField& pred, const TransientWssField& truth) {
  if (pred.n_points() != truth.n_points() || pred.timepoints != truth.timepoints)
    throw std::invalid_argument("metrics: prediction and reference shapes differ");
}

inline FieldMetrics metrics_over(const TransientWssField& pred, const TransientWssField& truth,
                                 const std::vector<int>& vertices) {
  FieldMetrics m;
  double err_sum = 0.0, err_sq = 0.0, true_sq = 0.0, cos_sum = 0.0, peak = 0.0;
  constexpr double kEps = 1e-12;
  for (const int p : vertices)
    for (int t = 0; t < truth.timepoints; ++t) {
      const Eigen::Vector3d pr = pred.at(p, t), tr = truth.at(p, t);
      const Eigen::Vector3d d = pr - tr;
      err_sum += d.norm();
      err_sq += d.squaredNorm();
      true_sq += tr.squaredNorm();
      peak = std::max(peak, tr.norm());
      const double pn = pr.norm(), tn = tr.norm();
      if (pn >= kEps && tn >= kEps) {
        cos_sum += pr.dot(tr) / (pn * tn);
        ++m.cosine_pairs;
      }
    }
  const double count = static_cast<double>(vertices.size()) * truth.timepoints;
  m.mae = err_sum / count;
  if (peak < kEps)
    throw std::invalid_argument("metrics: reference field is identically zero");
  m.nmae = m.mae / peak;
  m.approx_disp = std::sqrt(err_sq / true_sq);
  m.cosine = m.cosine_pairs > 0 ? cos_sum / m.cosine_pairs : 0.0;
  return m;
}

} // namespace detail

/// Metrics over the whole surface.
inline FieldMetrics field_metrics(const TransientWssField& pred, const TransientWssField& truth) {
  detail::check_compatible(pred, truth);
  if (truth.n_points() == 0) throw std::invalid_argument("metrics: empty field");
  std::vector<int> all(static_cast<size_t>(truth.n_points()));
  for (int p = 0; p < truth.n_points(); ++p) all[static_cast<size_t>(p)] = p;
  return detail::metrics_over(pred, truth, all);
}

/// Metrics restricted to a vertex subset (anatomical region).
inline FieldMetrics region_metrics(const TransientWssField& pred, const TransientWssField& truth,
                                   const std::vector<int>& vertices) {
  detail::check_compatible(pred, truth);
  if (vertices.empty()) throw std::invalid_argument("metrics: empty region");
  for (const int p : vertices)
    if (p < 0 || p >= truth.n_points())
      throw std::invalid_argument("metrics: region vertex out of range");
  return detail::metrics_over(pred, truth, vertices);
}

/// Error metrics between two per-vertex scalar fields (e.g. TAWSS maps).
inline ScalarMetrics scalar_metrics(const Eigen::VectorXd& pred, const Eigen::VectorXd& truth) {
  if (pred.size() != truth.size() || truth.size() == 0)
    throw std::invalid_argument("metrics: scalar field sizes differ");
  ScalarMetrics m;
  m.mae = (pred - truth).cwiseAbs().mean();
  const double denom = truth.squaredNorm();
  if (denom < 1e-24) throw std::invalid_argument("metrics: reference field is identically zero");
  m.disp = std::sqrt((pred - truth).squaredNorm() / denom);
  return m;
}

/// Linear-interpolation quantile (the convention where the h-th order
/// statistic sits at h = (n - 1) q): Q1 of {0, 1, 2, 3} is 0.75.
inline double quantile(Eigen::VectorXd values, double q) {
  if (values.size() == 0) throw std::invalid_argument("quantile: empty sample");
  if (q < 0.0 || q > 1.0) throw std::invalid_argument("quantile: q outside [0, 1]");
  std::sort(values.data(), values.data() + values.size());
  const double h = (static_cast<double>(values.size()) - 1.0) * q;
  const auto lo = static_cast<Eigen::Index>(std::floor(h));
  if (lo + 1 >= values.size()) return values[values.size() - 1];
  return values[lo] + (h - static_cast<double>(lo)) * (values[lo + 1] - values[lo]);
}

} // namespace vwss::hemo
