#pragma once

// Transient wall-shear-stress vector field: T timepoints x n points x 3
// components (Pa), stored as an n x (3 T) matrix with column t*3 + k.

#include <Eigen/Dense>
#include <stdexcept>

#include "vwss/io/field_file.hpp"

namespace vwss::hemo {

struct TransientWssField {
  Eigen::MatrixXd tau; // n x (3*T)
  int timepoints = 0;

  TransientWssField() = default;
  TransientWssField(int n, int t)
      : tau(Eigen::MatrixXd::Zero(n, static_cast<Eigen::Index>(3) * t)), timepoints(t) {}

  int n_points() const { return static_cast<int>(tau.rows()); }

  Eigen::Vector3d at(int p, int t) const { return tau.row(p).segment<3>(3 * t); }
  void set(int p, int t, const Eigen::Vector3d& v) { tau.row(p).segment<3>(3 * t) = v; }

  void validate() const {
    if (timepoints < 1) throw std::invalid_argument("wss field: T must be >= 1");
    if (tau.cols() != static_cast<Eigen::Index>(3) * timepoints)
      throw std::invalid_argument("wss field: column count inconsistent with T");
    if (!tau.allFinite()) throw std::invalid_argument("wss field: non-finite entry");
  }
};

inline io::FieldFile wss_to_field(const TransientWssField& f) {
  f.validate();
  io::FieldFile out;
  out.n = f.n_points();
  out.t = f.timepoints;
  out.components = 3;
  out.kind = "wss";
  out.units = "Pa";
  out.values = f.tau;
  return out;
}

inline TransientWssField wss_from_field(const io::FieldFile& f) {
  if (f.kind != "wss" || f.components != 3)
    throw std::runtime_error("wss_from_field: not a WSS field file");
  TransientWssField out;
  out.tau = f.values;
  out.timepoints = f.t;
  out.validate();
  return out;
}

} // namespace vwss::hemo
