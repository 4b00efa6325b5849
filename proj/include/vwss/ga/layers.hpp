#pragma once

// Equivariant layer primitives on multivector batches.  Thin wrappers over
// the matrix kernels in kernels.hpp; the training tape wraps the same kernels,
// so reference and differentiable paths share one implementation of the math.

#include <Eigen/Dense>
#include <stdexcept>

#include "vwss/ga/batch.hpp"
#include "vwss/ga/kernels.hpp"

namespace vwss::ga {

/// Channel-mixing linear map built from the 9 equivariant basis maps per
/// channel pair.  Weights: (9*c_in) x c_out, row i*9+b (see kernels.hpp).
inline MvBatch equivariant_linear(const MvBatch& x, const Mat& weights) {
  if (weights.rows() != 9 * x.channels)
    throw std::invalid_argument("equivariant_linear: weight shape mismatch");
  MvBatch out(x.points(), static_cast<int>(weights.cols()));
  out.data = equi_linear_forward(x.data, x.channels, weights);
  return out;
}

/// Weights that reproduce the identity map (grade weights 1, e0 weights 0,
/// identity channel mix); requires c_in == c_out.
inline Mat identity_linear_weights(int c) {
  Mat w = Mat::Zero(9 * c, c);
  for (int i = 0; i < c; ++i)
    for (int g = 0; g < 5; ++g) w(i * 9 + g, i) = 1.0;
  return w;
}

/// Parameter-free normalisation: every point is scaled so the mean channel
/// invariant norm is 1 (epsilon-stabilised, so an all-zero batch is fine).
inline MvBatch equivariant_layernorm(const MvBatch& x) {
  MvBatch out(x.points(), x.channels);
  Vec inv_r;
  out.data = mv_layernorm_forward(x.data, x.channels, inv_r);
  return out;
}

/// Channel-wise geometric product of two equally shaped batches.
inline MvBatch geometric_product(const MvBatch& x, const MvBatch& y) {
  if (x.channels != y.channels || x.points() != y.points())
    throw std::invalid_argument("geometric_product: shape mismatch");
  MvBatch out(x.points(), x.channels);
  out.data = geometric_product_forward(x.data, y.data, x.channels);
  return out;
}

/// Scalar-gated GELU with an explicit gate batch: output channel ch is input
/// channel ch scaled by GELU(scalar slot of gate channel ch).
inline MvBatch scalar_gated_gelu(const MvBatch& x, const MvBatch& gate) {
  if (x.channels != gate.channels || x.points() != gate.points())
    throw std::invalid_argument("scalar_gated_gelu: shape mismatch");
  MvBatch out(x.points(), x.channels);
  out.data = gated_gelu_forward(x.data, gate.data, x.channels);
  return out;
}

/// Scalar-gated GELU whose gate is a learned equivariant linear projection of
/// the input itself; gate_weights: (9*c) x c.
inline MvBatch geometric_nonlinearity(const MvBatch& x, const Mat& gate_weights) {
  return scalar_gated_gelu(x, equivariant_linear(x, gate_weights));
}

/// Geometric product followed by a learned equivariant channel mix;
/// mix_weights: (9*c) x c_out.
inline MvBatch geometric_bilinear(const MvBatch& x, const MvBatch& y, const Mat& mix_weights) {
  return equivariant_linear(geometric_product(x, y), mix_weights);
}

/// Pairwise invariant inner products (e0-free components) between the rows of
/// two batches: out(i, j) = <x_i, y_j> summed over channels.
inline Mat invariant_inner_product(const MvBatch& x, const MvBatch& y) {
  if (x.channels != y.channels)
    throw std::invalid_argument("invariant_inner_product: channel mismatch");
  return mask_e0_columns(x.data, x.channels) * y.data.transpose();
}

} // namespace vwss::ga
