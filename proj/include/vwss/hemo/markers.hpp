#pragma once

// Clinical surface markers derived from a transient wall-shear-stress field.

#include <Eigen/Dense>
#include <algorithm>

#include "vwss/hemo/field.hpp"

namespace vwss::hemo {

/// Time-averaged wall shear stress magnitude per vertex (Pa).
inline Eigen::VectorXd tawss(const TransientWssField& f) {
  Eigen::VectorXd out(f.n_points());
  for (int p = 0; p < f.n_points(); ++p) {
    double acc = 0.0;
    for (int t = 0; t < f.timepoints; ++t) acc += f.at(p, t).norm();
    out[p] = acc / f.timepoints;
  }
  return out;
}

/// Oscillatory shear index per vertex:
///   OSI = 1/2 (1 - |mean_t tau| / mean_t |tau|), in [0, 1/2].
/// Vertices whose time-averaged magnitude is below 1e-12 report 0.
inline Eigen::VectorXd osi(const TransientWssField& f) {
  Eigen::VectorXd out(f.n_points());
  for (int p = 0; p < f.n_points(); ++p) {
    Eigen::Vector3d mean = Eigen::Vector3d::Zero();
    double mag = 0.0;
    for (int t = 0; t < f.timepoints; ++t) {
      mean += f.at(p, t);
      mag += f.at(p, t).norm();
    }
    mean /= f.timepoints;
    mag /= f.timepoints;
    if (mag < 1e-12) {
      out[p] = 0.0;
    } else {
      // |mean| <= mean |tau| by the triangle inequality; the clamp only
      // absorbs floating-point round-off
      out[p] = std::clamp(0.5 * (1.0 - mean.norm() / mag), 0.0, 0.5);
    }
  }
  return out;
}

} // namespace vwss::hemo
