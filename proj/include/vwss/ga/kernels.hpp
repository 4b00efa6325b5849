#pragma once

// Forward and backward kernels for the equivariant layers, operating on raw
// batch matrices (n points x 16*channels, column-major; column ch*16+s holds
// component s of channel ch).  The layer wrappers in layers.hpp and the
// autodiff tape both call these, so there is a single code path for the math.

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>

#include "vwss/ga/algebra.hpp"

namespace vwss::ga {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

// ---------------------------------------------------------------------------
// Equivariant linear map.
//
// The space of linear maps on G(3,0,1) that commute with the sandwich action
// of every Euclidean versor is 9-dimensional: the five grade projections P_g
// (g = 0..4) plus the four maps x -> e0 * P_g(x) (g = 0..3).  A linear layer
// mixing c_in input channels into c_out output channels therefore has
// 9*c_in*c_out scalar weights.  Weights are stored as a (9*c_in) x c_out
// matrix whose row i*9+b is basis map b of input channel i:
//   b = 0..4  : grade-b projection,
//   b = 5..8  : e0 * (grade-(b-5) projection).
// ---------------------------------------------------------------------------

/// Slot s belongs to basis map kGrade[s]; the e0 maps send e0-free slot s to
/// slot s|e0 with sign +1 (prepending e0 needs no swaps).
inline constexpr int e0_lift_slot(int s) { return blade_index(kBladeMask[s] | 1); }

/// Pack n x (16 c) into slot-major (16 n) x c: row s*n+p, one memcpy per
/// (channel, slot) pair.
inline Mat to_slot_major(const Mat& x, int c) {
  const int n = static_cast<int>(x.rows());
  Mat out(16 * n, c);
  for (int ch = 0; ch < c; ++ch)
    for (int s = 0; s < 16; ++s)
      out.col(ch).segment(s * n, n) = x.col(ch * 16 + s);
  return out;
}

inline Mat from_slot_major(const Mat& xsm, int c) {
  const int n = static_cast<int>(xsm.rows()) / 16;
  Mat out(n, 16 * c);
  for (int ch = 0; ch < c; ++ch)
    for (int s = 0; s < 16; ++s)
      out.col(ch * 16 + s) = xsm.col(ch).segment(s * n, n);
  return out;
}

/// Extract basis-map slice b of the weight matrix: (c_in x c_out), entry
/// (i, j) = w(i*9+b, j).
inline Mat weight_slice(const Mat& w, int c_in, int b) {
  const int c_out = static_cast<int>(w.cols());
  Mat slice(c_in, c_out);
  for (int i = 0; i < c_in; ++i) slice.row(i) = w.row(i * 9 + b);
  return slice;
}

inline void add_weight_slice(Mat& dw, int c_in, int b, const Mat& d_slice) {
  for (int i = 0; i < c_in; ++i) dw.row(i * 9 + b) += d_slice.row(i);
}

/// y[p, j*16+t] = sum_{i,b} w[i*9+b, j] * (map_b applied to channel i)[p, t].
/// Grade projections keep slot t from slot t; the e0 maps write slot s|e0
/// from e0-free slot s.  Slots are grade-sorted, so each grade is one
/// contiguous row block of the slot-major layout and the whole map is nine
/// block GEMMs.
inline Mat equi_linear_forward(const Mat& x, int c_in, const Mat& w) {
  const int n = static_cast<int>(x.rows());
  const int c_out = static_cast<int>(w.cols());
  if (x.cols() != 16 * c_in || w.rows() != 9 * c_in)
    throw std::invalid_argument("equi_linear_forward: shape mismatch");
  const Mat xsm = to_slot_major(x, c_in);
  Mat ysm = Mat::Zero(16 * n, c_out);
  // Grade projections: row block of grade g times weight slice g.
  for (int g = 0; g < 5; ++g) {
    const int r0 = kGradeStart[g] * n, rn = kGradeSize[g] * n;
    ysm.middleRows(r0, rn).noalias() = xsm.middleRows(r0, rn) * weight_slice(w, c_in, g);
  }
  // e0 maps: e0-free slots of each grade are contiguous (0; 2..4; 8..10; 14).
  static constexpr int kE0FreeStart[4] = {0, 2, 8, 14};
  static constexpr int kE0FreeSize[4] = {1, 3, 3, 1};
  for (int g = 0; g < 4; ++g) {
    const int s0 = kE0FreeStart[g], cnt = kE0FreeSize[g];
    const Mat part = xsm.middleRows(s0 * n, cnt * n) * weight_slice(w, c_in, 5 + g);
    for (int k = 0; k < cnt; ++k)
      ysm.middleRows(e0_lift_slot(s0 + k) * n, n).noalias() += part.middleRows(k * n, n);
  }
  return from_slot_major(ysm, c_out);
}

/// Adjoint of equi_linear_forward; accumulates nothing, returns fresh grads.
inline void equi_linear_backward(const Mat& x, int c_in, const Mat& w, const Mat& dy,
                                 Mat& dx, Mat& dw) {
  const int n = static_cast<int>(x.rows());
  const int c_out = static_cast<int>(w.cols());
  const Mat xsm = to_slot_major(x, c_in);
  const Mat dysm = to_slot_major(dy, c_out);
  Mat dxsm = Mat::Zero(16 * n, c_in);
  dw = Mat::Zero(9 * c_in, c_out);
  for (int g = 0; g < 5; ++g) {
    const int r0 = kGradeStart[g] * n, rn = kGradeSize[g] * n;
    dxsm.middleRows(r0, rn).noalias() +=
        dysm.middleRows(r0, rn) * weight_slice(w, c_in, g).transpose();
    add_weight_slice(dw, c_in, g,
                     xsm.middleRows(r0, rn).transpose() * dysm.middleRows(r0, rn));
  }
  static constexpr int kE0FreeStart[4] = {0, 2, 8, 14};
  static constexpr int kE0FreeSize[4] = {1, 3, 3, 1};
  for (int g = 0; g < 4; ++g) {
    const int s0 = kE0FreeStart[g], cnt = kE0FreeSize[g];
    Mat dpart(cnt * n, c_out);
    for (int k = 0; k < cnt; ++k)
      dpart.middleRows(k * n, n) = dysm.middleRows(e0_lift_slot(s0 + k) * n, n);
    dxsm.middleRows(s0 * n, cnt * n).noalias() +=
        dpart * weight_slice(w, c_in, 5 + g).transpose();
    add_weight_slice(dw, c_in, 5 + g,
                     xsm.middleRows(s0 * n, cnt * n).transpose() * dpart);
  }
  dx = from_slot_major(dxsm, c_in);
}

// ---------------------------------------------------------------------------
// Equivariant layer normalisation: x / sqrt(mean_ch <x_ch, x_ch> + eps) with
// the invariant inner product (e0-free components only).  Parameter-free.
// ---------------------------------------------------------------------------

inline constexpr double kLayerNormEps = 1e-12;

/// Returns the normalised batch; fills inv_r (n) with the per-point scale.
inline Mat mv_layernorm_forward(const Mat& x, int c, Vec& inv_r) {
  const int n = static_cast<int>(x.rows());
  Vec msq = Vec::Zero(n);
  for (int ch = 0; ch < c; ++ch)
    for (int s = 0; s < 16; ++s)
      if (e0_free(s)) msq += x.col(ch * 16 + s).array().square().matrix();
  msq /= static_cast<double>(c);
  inv_r = (msq.array() + kLayerNormEps).rsqrt().matrix();
  return inv_r.asDiagonal() * x;
}

inline Mat mv_layernorm_backward(const Mat& x, int c, const Vec& inv_r, const Mat& dy) {
  const int n = static_cast<int>(x.rows());
  // s_p = sum_j dy[p,j] x[p,j]; dx = dy*inv_r - s * inv_r^3 * x/c on e0-free
  // slots (the e0 slots only feel the direct dy*inv_r term).
  Vec s = (dy.array() * x.array()).rowwise().sum().matrix();
  Mat dx = inv_r.asDiagonal() * dy;
  Vec coef = (s.array() * inv_r.array().cube() / static_cast<double>(c)).matrix();
  for (int ch = 0; ch < c; ++ch)
    for (int sid = 0; sid < 16; ++sid)
      if (e0_free(sid)) {
        const int j = ch * 16 + sid;
        dx.col(j) -= (coef.array() * x.col(j).array()).matrix();
      }
  (void)n;
  return dx;
}

// ---------------------------------------------------------------------------
// Channel-wise geometric product.
// ---------------------------------------------------------------------------

inline Mat geometric_product_forward(const Mat& x, const Mat& y, int c) {
  if (x.rows() != y.rows() || x.cols() != y.cols() || x.cols() != 16 * c)
    throw std::invalid_argument("geometric_product_forward: shape mismatch");
  Mat z = Mat::Zero(x.rows(), x.cols());
  for (int ch = 0; ch < c; ++ch) {
    const int o = ch * 16;
    for (int a = 0; a < 16; ++a)
      for (int b = 0; b < 16; ++b) {
        const auto& e = kCayley.entry[a][b];
        if (e.sign == 0) continue;
        z.col(o + e.target) +=
            static_cast<double>(e.sign) * (x.col(o + a).array() * y.col(o + b).array()).matrix();
      }
  }
  return z;
}

inline void geometric_product_backward(const Mat& x, const Mat& y, int c, const Mat& dz,
                                       Mat& dx, Mat& dy) {
  dx = Mat::Zero(x.rows(), x.cols());
  dy = Mat::Zero(y.rows(), y.cols());
  for (int ch = 0; ch < c; ++ch) {
    const int o = ch * 16;
    for (int a = 0; a < 16; ++a)
      for (int b = 0; b < 16; ++b) {
        const auto& e = kCayley.entry[a][b];
        if (e.sign == 0) continue;
        const double s = static_cast<double>(e.sign);
        dx.col(o + a) += s * (dz.col(o + e.target).array() * y.col(o + b).array()).matrix();
        dy.col(o + b) += s * (dz.col(o + e.target).array() * x.col(o + a).array()).matrix();
      }
  }
}

// ---------------------------------------------------------------------------
// Scalar-gated GELU: channel ch of the output is channel ch of x scaled by
// gelu(g_ch), where g_ch is the scalar slot of channel ch of the gate batch.
// Exact (erf) GELU so gradients are smooth.
// ---------------------------------------------------------------------------

inline double gelu(double v) { return 0.5 * v * (1.0 + std::erf(v * M_SQRT1_2)); }
inline double gelu_grad(double v) {
  const double cdf = 0.5 * (1.0 + std::erf(v * M_SQRT1_2));
  const double pdf = std::exp(-0.5 * v * v) / std::sqrt(2.0 * M_PI);
  return cdf + v * pdf;
}

inline Mat gated_gelu_forward(const Mat& x, const Mat& gate, int c) {
  if (x.rows() != gate.rows() || x.cols() != gate.cols())
    throw std::invalid_argument("gated_gelu_forward: shape mismatch");
  Mat y(x.rows(), x.cols());
  for (int ch = 0; ch < c; ++ch) {
    const Eigen::ArrayXd g = gate.col(ch * 16 + kSlotScalar).array().unaryExpr(
        [](double v) { return gelu(v); });
    for (int s = 0; s < 16; ++s)
      y.col(ch * 16 + s) = (x.col(ch * 16 + s).array() * g).matrix();
  }
  return y;
}

inline void gated_gelu_backward(const Mat& x, const Mat& gate, int c, const Mat& dy,
                                Mat& dx, Mat& dgate) {
  dx = Mat::Zero(x.rows(), x.cols());
  dgate = Mat::Zero(gate.rows(), gate.cols());
  for (int ch = 0; ch < c; ++ch) {
    const Eigen::ArrayXd gv = gate.col(ch * 16 + kSlotScalar).array();
    const Eigen::ArrayXd g = gv.unaryExpr([](double v) { return gelu(v); });
    const Eigen::ArrayXd gp = gv.unaryExpr([](double v) { return gelu_grad(v); });
    Eigen::ArrayXd acc = Eigen::ArrayXd::Zero(x.rows());
    for (int s = 0; s < 16; ++s) {
      const int j = ch * 16 + s;
      dx.col(j) = (dy.col(j).array() * g).matrix();
      acc += dy.col(j).array() * x.col(j).array();
    }
    dgate.col(ch * 16 + kSlotScalar) = (acc * gp).matrix();
  }
}

// ---------------------------------------------------------------------------
// Invariant inner product of two multivector rows (e0-free components), used
// by attention.  Masking one operand's e0 columns makes a plain row dot
// product equal the invariant product.
// ---------------------------------------------------------------------------

inline Mat mask_e0_columns(const Mat& x, int c) {
  Mat out = x;
  for (int ch = 0; ch < c; ++ch)
    for (int s = 0; s < 16; ++s)
      if (!e0_free(s)) out.col(ch * 16 + s).setZero();
  return out;
}

} // namespace vwss::ga
