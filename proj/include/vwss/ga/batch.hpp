#pragma once

#include <Eigen/Dense>
#include <stdexcept>

#include "vwss/ga/multivector.hpp"
#include "vwss/ga/transform.hpp"

namespace vwss::ga {

/// Batch of multivectors: n points x c channels x 16 components, stored as an
/// n x (16 c) column-major matrix; column ch*16+s holds component s of channel
/// ch across all points.
struct MvBatch {
  Eigen::MatrixXd data; // n x (16*channels)
  int channels = 0;

  MvBatch() = default;
  MvBatch(int n, int c) : data(Eigen::MatrixXd::Zero(n, 16 * c)), channels(c) {}

  int points() const { return static_cast<int>(data.rows()); }

  Multivector at(int p, int ch) const {
    Multivector m;
    for (int s = 0; s < 16; ++s) m[s] = data(p, ch * 16 + s);
    return m;
  }
  void set(int p, int ch, const Multivector& m) {
    for (int s = 0; s < 16; ++s) data(p, ch * 16 + s) = m[s];
  }
};

/// 16x16 matrix of the sandwich action of a versor on component vectors.
inline Eigen::Matrix<double, 16, 16> rho_matrix(const Versor& v) {
  Eigen::Matrix<double, 16, 16> R;
  for (int j = 0; j < 16; ++j) {
    const Multivector img = v.apply(basis(j));
    for (int i = 0; i < 16; ++i) R(i, j) = img[i];
  }
  return R;
}

/// Channel-wise sandwich action of g on every multivector of the batch.
/// Reference implementation for all equivariance tests.
inline MvBatch apply_transform(const EuclideanTransform& g, const MvBatch& x) {
  const Eigen::Matrix<double, 16, 16> R = rho_matrix(versor_of(g));
  MvBatch out(x.points(), x.channels);
  for (int ch = 0; ch < x.channels; ++ch)
    out.data.middleCols(ch * 16, 16) = x.data.middleCols(ch * 16, 16) * R.transpose();
  return out;
}

inline MvBatch apply_versor(const Versor& v, const MvBatch& x) {
  const Eigen::Matrix<double, 16, 16> R = rho_matrix(v);
  MvBatch out(x.points(), x.channels);
  for (int ch = 0; ch < x.channels; ++ch)
    out.data.middleCols(ch * 16, 16) = x.data.middleCols(ch * 16, 16) * R.transpose();
  return out;
}

} // namespace vwss::ga
