#pragma once

// Reverse-mode autodiff tape over batched multivector tensors.  Every
// operation appends a node holding its value and a pull-back closure; calling
// backward() on a scalar node propagates cotangents to all reachable inputs.
// The network layers, attention, interpolation, and the training loss are all
// built from these primitives, so a single backward pass yields exact
// parameter gradients.

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

#include "vwss/ga/kernels.hpp"

namespace vwss::net {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;
using SpMat = Eigen::SparseMatrix<double>;

/// Components of the supervision loss, reported separately for logging.
struct WssLossParts {
  double angle = 0.0;     // 1 - mean cosine over valid pairs
  double magnitude = 0.0; // mean absolute magnitude error
  int angle_pairs = 0;    // pairs that entered the cosine mean
};

class Tape {
 public:
  using Id = int;

  Id input(Mat v) { return push(std::move(v), {}); }

  const Mat& val(Id id) const { return nodes_[static_cast<size_t>(id)].value; }

  /// Gradient of the last backward() root with respect to node `id`; zero
  /// matrix if the node was not reached.
  Mat grad(Id id) const {
    const auto& n = nodes_[static_cast<size_t>(id)];
    if (n.has_grad) return n.grad;
    return Mat::Zero(n.value.rows(), n.value.cols());
  }

  // --- arithmetic -----------------------------------------------------------

  Id add(Id a, Id b) {
    check_same_shape(a, b, "add");
    return push(val(a) + val(b), [a, b](Tape& t, const Mat& g) {
      t.accumulate(a, g);
      t.accumulate(b, g);
    });
  }

  /// a + alpha * b
  Id add_scaled(Id a, Id b, double alpha) {
    check_same_shape(a, b, "add_scaled");
    return push(val(a) + alpha * val(b), [a, b, alpha](Tape& t, const Mat& g) {
      t.accumulate(a, g);
      t.accumulate(b, alpha * g);
    });
  }

  Id scale(Id a, double s) {
    return push(s * val(a), [a, s](Tape& t, const Mat& g) { t.accumulate(a, s * g); });
  }

  /// Elementwise product with a constant matrix (dropout masks, row weights).
  Id mul_const(Id a, Mat mask) {
    if (mask.rows() != val(a).rows() || mask.cols() != val(a).cols())
      throw std::invalid_argument("mul_const: mask shape mismatch");
    Mat v = val(a).cwiseProduct(mask);
    return push(std::move(v), [a, mask = std::move(mask)](Tape& t, const Mat& g) {
      t.accumulate(a, g.cwiseProduct(mask));
    });
  }

  // --- dense / sparse products ----------------------------------------------

  Id matmul(Id a, Id b) {
    if (val(a).cols() != val(b).rows()) throw std::invalid_argument("matmul: inner dims");
    return push(val(a) * val(b), [a, b](Tape& t, const Mat& g) {
      t.accumulate(a, g * t.val(b).transpose());
      t.accumulate(b, t.val(a).transpose() * g);
    });
  }

  /// A * B^T
  Id matmul_nt(Id a, Id b) {
    if (val(a).cols() != val(b).cols()) throw std::invalid_argument("matmul_nt: inner dims");
    return push(val(a) * val(b).transpose(), [a, b](Tape& t, const Mat& g) {
      t.accumulate(a, g * t.val(b));
      t.accumulate(b, g.transpose() * t.val(a));
    });
  }

  /// Constant sparse matrix times node: row selection (tokenisation) and
  /// linear interpolation are both instances.
  Id spmm_const(SpMat w, Id a) {
    if (w.cols() != val(a).rows()) throw std::invalid_argument("spmm_const: inner dims");
    Mat v = w * val(a);
    return push(std::move(v), [w = std::move(w), a](Tape& t, const Mat& g) {
      t.accumulate(a, w.transpose() * g);
    });
  }

  // --- shaping ----------------------------------------------------------------

  Id slice_cols(Id a, int j0, int k) {
    if (j0 < 0 || k <= 0 || j0 + k > val(a).cols())
      throw std::invalid_argument("slice_cols: out of range");
    return push(val(a).middleCols(j0, k), [a, j0, k](Tape& t, const Mat& g) {
      Mat d = Mat::Zero(t.val(a).rows(), t.val(a).cols());
      d.middleCols(j0, k) = g;
      t.accumulate(a, d);
    });
  }

  Id concat_cols(const std::vector<Id>& parts) {
    if (parts.empty()) throw std::invalid_argument("concat_cols: empty");
    const auto rows = val(parts[0]).rows();
    Eigen::Index total = 0;
    for (Id p : parts) {
      if (val(p).rows() != rows) throw std::invalid_argument("concat_cols: row mismatch");
      total += val(p).cols();
    }
    Mat v(rows, total);
    std::vector<int> offsets;
    Eigen::Index at = 0;
    for (Id p : parts) {
      offsets.push_back(static_cast<int>(at));
      v.middleCols(at, val(p).cols()) = val(p);
      at += val(p).cols();
    }
    return push(std::move(v), [parts, offsets](Tape& t, const Mat& g) {
      for (size_t i = 0; i < parts.size(); ++i)
        t.accumulate(parts[i], g.middleCols(offsets[i], t.val(parts[i]).cols()));
    });
  }

  // --- pointwise nonlinearities -----------------------------------------------

  Id gelu(Id a) {
    Mat v = val(a).unaryExpr([](double x) { return ga::gelu(x); });
    return push(std::move(v), [a](Tape& t, const Mat& g) {
      t.accumulate(a, g.cwiseProduct(t.val(a).unaryExpr(
                          [](double x) { return ga::gelu_grad(x); })));
    });
  }

  Id row_softmax(Id a) {
    Mat v = val(a);
    for (Eigen::Index r = 0; r < v.rows(); ++r) {
      const double mx = v.row(r).maxCoeff();
      v.row(r) = (v.row(r).array() - mx).exp();
      v.row(r) /= v.row(r).sum();
    }
    Id out = push(std::move(v), {});
    nodes_.back().pull = [a, out](Tape& t, const Mat& g) {
      const Mat& y = t.val(out);
      Mat d(g.rows(), g.cols());
      for (Eigen::Index r = 0; r < g.rows(); ++r) {
        const double dot = g.row(r).dot(y.row(r));
        d.row(r) = (g.row(r).array() - dot) * y.row(r).array();
      }
      t.accumulate(a, d);
    };
    return out;
  }

  /// Standard per-row layer normalisation (mean 0, variance 1, no affine).
  Id row_layernorm(Id a) {
    const Mat& x = val(a);
    const auto cols = static_cast<double>(x.cols());
    Vec mean = x.rowwise().mean();
    Mat centered = x.colwise() - mean;
    Vec inv_std = (centered.rowwise().squaredNorm() / cols).array() + 1e-12;
    inv_std = inv_std.array().rsqrt();
    Mat v = inv_std.asDiagonal() * centered;
    Id out = push(std::move(v), {});
    nodes_.back().pull = [a, out, inv_std, cols](Tape& t, const Mat& g) {
      const Mat& y = t.val(out);
      Mat d(g.rows(), g.cols());
      for (Eigen::Index r = 0; r < g.rows(); ++r) {
        const double gm = g.row(r).mean();
        const double gy = g.row(r).dot(y.row(r)) / cols;
        d.row(r) = inv_std[r] * (g.row(r).array() - gm - gy * y.row(r).array());
      }
      t.accumulate(a, d);
    };
    return out;
  }

  /// Broadcast-add a 1 x k bias row to every row of a.
  Id add_bias(Id a, Id b) {
    if (val(b).rows() != 1 || val(b).cols() != val(a).cols())
      throw std::invalid_argument("add_bias: bias must be 1 x cols(a)");
    Mat v = val(a).rowwise() + val(b).row(0);
    return push(std::move(v), [a, b](Tape& t, const Mat& g) {
      t.accumulate(a, g);
      t.accumulate(b, g.colwise().sum());
    });
  }

  // --- multivector kernels ------------------------------------------------------

  /// Equivariant linear map: x is n x 16 c_in, w is (9 c_in) x c_out.
  Id equi_linear(Id x, Id w, int c_in) {
    if (val(x).cols() != 16 * c_in) throw std::invalid_argument("equi_linear: x width");
    if (val(w).rows() != 9 * c_in) throw std::invalid_argument("equi_linear: w height");
    Mat v = ga::equi_linear_forward(val(x), c_in, val(w));
    return push(std::move(v), [x, w, c_in](Tape& t, const Mat& g) {
      Mat dx, dw;
      ga::equi_linear_backward(t.val(x), c_in, t.val(w), g, dx, dw);
      t.accumulate(x, dx);
      t.accumulate(w, dw);
    });
  }

  /// Equivariant layer normalisation over c channels.
  Id layernorm_mv(Id x, int c) {
    Vec inv_r;
    Mat v = ga::mv_layernorm_forward(val(x), c, inv_r);
    return push(std::move(v), [x, c, inv_r = std::move(inv_r)](Tape& t, const Mat& g) {
      t.accumulate(x, ga::mv_layernorm_backward(t.val(x), c, inv_r, g));
    });
  }

  /// Channelwise geometric product of two batches with c channels each.
  Id geometric_product(Id x, Id y, int c) {
    check_same_shape(x, y, "geometric_product");
    Mat v = ga::geometric_product_forward(val(x), val(y), c);
    return push(std::move(v), [x, y, c](Tape& t, const Mat& g) {
      Mat dx, dy;
      ga::geometric_product_backward(t.val(x), t.val(y), c, g, dx, dy);
      t.accumulate(x, dx);
      t.accumulate(y, dy);
    });
  }

  /// n x c matrix of the scalar slot of every channel.
  Id scalar_slots(Id x, int c) {
    Mat v(val(x).rows(), c);
    for (int ch = 0; ch < c; ++ch) v.col(ch) = val(x).col(16 * ch);
    return push(std::move(v), [x, c](Tape& t, const Mat& g) {
      Mat d = Mat::Zero(t.val(x).rows(), t.val(x).cols());
      for (int ch = 0; ch < c; ++ch) d.col(16 * ch) = g.col(ch);
      t.accumulate(x, d);
    });
  }

  /// Gated GELU: every slot of channel ch is scaled by gelu of the scalar
  /// slot of the gate batch's channel ch (gate has the same n x 16c shape).
  Id gated_gelu(Id x, Id gate, int c) {
    check_same_shape(x, gate, "gated_gelu");
    Mat v = ga::gated_gelu_forward(val(x), val(gate), c);
    return push(std::move(v), [x, gate, c](Tape& t, const Mat& g) {
      Mat dx, dgate;
      ga::gated_gelu_backward(t.val(x), t.val(gate), c, g, dx, dgate);
      t.accumulate(x, dx);
      t.accumulate(gate, dgate);
    });
  }

  /// Zero the slots containing e0 (used on one attention operand so the
  /// bilinear form is the invariant inner product).
  Id mask_e0(Id x, int c) {
    Mat v = ga::mask_e0_columns(val(x), c);
    return push(std::move(v), [x, c](Tape& t, const Mat& g) {
      t.accumulate(x, ga::mask_e0_columns(g, c));
    });
  }

  // --- reductions -----------------------------------------------------------------

  /// Frobenius inner product with a constant matrix; yields a 1 x 1 node.
  Id dot_const(Id a, Mat c) {
    if (c.rows() != val(a).rows() || c.cols() != val(a).cols())
      throw std::invalid_argument("dot_const: shape mismatch");
    Mat v(1, 1);
    v(0, 0) = (val(a).array() * c.array()).sum();
    return push(std::move(v), [a, c = std::move(c)](Tape& t, const Mat& g) {
      t.accumulate(a, g(0, 0) * c);
    });
  }

  /// Supervision loss on a decoded prediction batch.  `y` is n x 16 T; channel
  /// t carries the magnitude in its scalar slot and the direction in the
  /// (e1, e2, e3) slots.  `target` is n x 3 T with the reference vectors.
  /// loss = (1 - mean cosine over valid pairs) + lambda * mean |mag error|,
  /// where a pair is valid when both the reference and the decoded vector have
  /// norms of at least 1e-12.
  Id wss_loss(Id y, const Mat& target, int t_channels, double lambda,
              WssLossParts* parts = nullptr) {
    return wss_loss_scaled(y, target, t_channels, 1.0, lambda, parts);
  }

  /// Same loss with independent weights on the two terms:
  /// loss = angle_scale * (1 - mean cos) + mag_scale * mean |mag error|.
  /// Batched training uses per-sample weights so that summing sample losses
  /// reproduces the loss of the concatenated batch exactly.
  Id wss_loss_scaled(Id y, const Mat& target, int t_channels, double angle_scale,
                     double mag_scale, WssLossParts* parts = nullptr) {
    const Mat& yv = val(y);
    const auto n = yv.rows();
    if (yv.cols() != 16 * t_channels || target.rows() != n || target.cols() != 3 * t_channels)
      throw std::invalid_argument("wss_loss: shape mismatch");
    constexpr double kEps = 1e-12;
    double cos_sum = 0.0, mag_sum = 0.0;
    int valid = 0;
    for (Eigen::Index v = 0; v < n; ++v)
      for (int tc = 0; tc < t_channels; ++tc) {
        const double m = yv(v, 16 * tc);
        const Eigen::Vector3d d(yv(v, 16 * tc + 2), yv(v, 16 * tc + 3), yv(v, 16 * tc + 4));
        const Eigen::Vector3d tau = target.row(v).segment<3>(3 * tc);
        const double tn = tau.norm(), dl = d.norm();
        mag_sum += std::abs(tn - std::abs(m));
        if (tn >= kEps && dl >= kEps && std::abs(m) >= kEps) {
          cos_sum += (m > 0 ? 1.0 : -1.0) * tau.dot(d) / (tn * dl);
          ++valid;
        }
      }
    const double denom_mag = static_cast<double>(n) * t_channels;
    const double l_mag = mag_sum / denom_mag;
    const double l_angle = valid > 0 ? 1.0 - cos_sum / valid : 0.0;
    if (parts) {
      parts->angle = l_angle;
      parts->magnitude = l_mag;
      parts->angle_pairs = valid;
    }
    Mat v(1, 1);
    v(0, 0) = angle_scale * l_angle + mag_scale * l_mag;
    return push(std::move(v), [y, target, t_channels, angle_scale, mag_scale, valid,
                               denom_mag](Tape& t, const Mat& g) {
                  const Mat& yv = t.val(y);
                  Mat dy = Mat::Zero(yv.rows(), yv.cols());
                  constexpr double kEps = 1e-12;
                  const double gs = g(0, 0);
                  for (Eigen::Index v = 0; v < yv.rows(); ++v)
                    for (int tc = 0; tc < t_channels; ++tc) {
                      const double m = yv(v, 16 * tc);
                      const Eigen::Vector3d d(yv(v, 16 * tc + 2), yv(v, 16 * tc + 3),
                                              yv(v, 16 * tc + 4));
                      const Eigen::Vector3d tau = target.row(v).segment<3>(3 * tc);
                      const double tn = tau.norm(), dl = d.norm();
                      // magnitude term: d/dm |tn - |m|| = sign(|m| - tn) sign(m)
                      if (std::abs(m) >= kEps && std::abs(tn - std::abs(m)) >= kEps)
                        dy(v, 16 * tc) += gs * mag_scale / denom_mag *
                                          (std::abs(m) > tn ? 1.0 : -1.0) * (m > 0 ? 1.0 : -1.0);
                      // angle term on the direction slots
                      if (valid > 0 && tn >= kEps && dl >= kEps && std::abs(m) >= kEps) {
                        const double sgn = m > 0 ? 1.0 : -1.0;
                        const Eigen::Vector3d u = d / dl;
                        const Eigen::Vector3d dcos =
                            sgn / (tn * dl) * (tau - tau.dot(u) * u);
                        const Eigen::Vector3d dd = -gs * angle_scale / valid * dcos;
                        dy(v, 16 * tc + 2) += dd.x();
                        dy(v, 16 * tc + 3) += dd.y();
                        dy(v, 16 * tc + 4) += dd.z();
                      }
                    }
                  t.accumulate(y, dy);
                });
  }

  /// The same angle + magnitude loss for heads that emit raw vectors: `y` is
  /// n x 3 T; magnitude is the vector norm and direction the vector itself.
  Id vec_loss_scaled(Id y, const Mat& target, int t_channels, double angle_scale,
                     double mag_scale, WssLossParts* parts = nullptr) {
    const Mat& yv = val(y);
    const auto n = yv.rows();
    if (yv.cols() != 3 * t_channels || target.rows() != n || target.cols() != 3 * t_channels)
      throw std::invalid_argument("vec_loss: shape mismatch");
    constexpr double kEps = 1e-12;
    double cos_sum = 0.0, mag_sum = 0.0;
    int valid = 0;
    for (Eigen::Index v = 0; v < n; ++v)
      for (int tc = 0; tc < t_channels; ++tc) {
        const Eigen::Vector3d p = yv.row(v).segment<3>(3 * tc);
        const Eigen::Vector3d tau = target.row(v).segment<3>(3 * tc);
        const double tn = tau.norm(), pn = p.norm();
        mag_sum += std::abs(tn - pn);
        if (tn >= kEps && pn >= kEps) {
          cos_sum += tau.dot(p) / (tn * pn);
          ++valid;
        }
      }
    const double denom_mag = static_cast<double>(n) * t_channels;
    const double l_mag = mag_sum / denom_mag;
    const double l_angle = valid > 0 ? 1.0 - cos_sum / valid : 0.0;
    if (parts) {
      parts->angle = l_angle;
      parts->magnitude = l_mag;
      parts->angle_pairs = valid;
    }
    Mat v(1, 1);
    v(0, 0) = angle_scale * l_angle + mag_scale * l_mag;
    return push(std::move(v), [y, target, t_channels, angle_scale, mag_scale, valid,
                               denom_mag](Tape& t, const Mat& g) {
      const Mat& yv = t.val(y);
      Mat dy = Mat::Zero(yv.rows(), yv.cols());
      constexpr double kEps = 1e-12;
      const double gs = g(0, 0);
      for (Eigen::Index v = 0; v < yv.rows(); ++v)
        for (int tc = 0; tc < t_channels; ++tc) {
          const Eigen::Vector3d p = yv.row(v).segment<3>(3 * tc);
          const Eigen::Vector3d tau = target.row(v).segment<3>(3 * tc);
          const double tn = tau.norm(), pn = p.norm();
          Eigen::Vector3d dd = Eigen::Vector3d::Zero();
          // d/dp |tn - |p|| = -sign(tn - |p|) p_hat (subgradient 0 at the kink)
          if (pn >= kEps && std::abs(tn - pn) >= kEps)
            dd += gs * mag_scale / denom_mag * (pn > tn ? 1.0 : -1.0) * (p / pn);
          if (valid > 0 && tn >= kEps && pn >= kEps) {
            const Eigen::Vector3d u = p / pn;
            dd += -gs * angle_scale / valid / (tn * pn) * (tau - tau.dot(u) * u);
          }
          dy.row(v).segment<3>(3 * tc) += dd.transpose();
        }
      t.accumulate(y, dy);
    });
  }

  /// Reverse sweep from a 1 x 1 root node.
  void backward(Id root) {
    auto& r = nodes_[static_cast<size_t>(root)];
    if (r.value.rows() != 1 || r.value.cols() != 1)
      throw std::invalid_argument("backward: root must be a 1 x 1 node");
    for (auto& n : nodes_) {
      n.has_grad = false;
      n.grad.resize(0, 0);
    }
    r.grad = Mat::Ones(1, 1);
    r.has_grad = true;
    for (int id = root; id >= 0; --id) {
      auto& n = nodes_[static_cast<size_t>(id)];
      if (n.has_grad && n.pull) n.pull(*this, n.grad);
    }
  }

  int size() const { return static_cast<int>(nodes_.size()); }

 private:
  struct Node {
    Mat value;
    Mat grad;
    bool has_grad = false;
    std::function<void(Tape&, const Mat&)> pull;
  };

  Id push(Mat v, std::function<void(Tape&, const Mat&)> pull) {
    nodes_.push_back(Node{std::move(v), {}, false, std::move(pull)});
    return static_cast<Id>(nodes_.size()) - 1;
  }

  void accumulate(Id id, const Mat& g) {
    auto& n = nodes_[static_cast<size_t>(id)];
    if (!n.has_grad) {
      n.grad = g;
      n.has_grad = true;
    } else {
      n.grad += g;
    }
  }

  void check_same_shape(Id a, Id b, const char* op) const {
    if (val(a).rows() != val(b).rows() || val(a).cols() != val(b).cols())
      throw std::invalid_argument(std::string(op) + ": shape mismatch");
  }

  std::vector<Node> nodes_;
};

} // namespace vwss::net
