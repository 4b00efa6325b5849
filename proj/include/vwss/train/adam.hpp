#pragma once

// Adam optimizer over named parameter tensors, with global-norm gradient
// clipping.

#include <Eigen/Dense>
#include <cmath>
#include <map>
#include <stdexcept>
#include <string>

#include "vwss/net/params.hpp"

namespace vwss::train {

struct AdamState {
  std::map<std::string, Eigen::MatrixXd> m, v;
  long step = 0;
};

inline double global_grad_norm(const net::ParamSet& grads) {
  double sq = 0.0;
  for (const auto& [name, g] : grads) sq += g.squaredNorm();
  return std::sqrt(sq);
}

/// Rescale all gradients so their joint Euclidean norm is at most max_norm.
/// Returns the scale factor that was applied (1 when no clipping happened).
inline double clip_global_norm(net::ParamSet& grads, double max_norm) {
  if (!(max_norm > 0.0)) throw std::invalid_argument("clip: max_norm must be positive");
  const double norm = global_grad_norm(grads);
  if (norm <= max_norm || norm == 0.0) return 1.0;
  const double scale = max_norm / norm;
  for (auto& [name, g] : grads) g *= scale;
  return scale;
}

/// One bias-corrected Adam update; missing gradient tensors are an error.
inline void adam_update(net::ParamSet& params, const net::ParamSet& grads, AdamState& st,
                        double lr, double beta1 = 0.9, double beta2 = 0.999,
                        double eps = 1e-8) {
  ++st.step;
  const double c1 = 1.0 - std::pow(beta1, static_cast<double>(st.step));
  const double c2 = 1.0 - std::pow(beta2, static_cast<double>(st.step));
  for (auto& [name, theta] : params) {
    const auto git = grads.find(name);
    if (git == grads.end())
      throw std::invalid_argument("optimizer: missing gradient for tensor " + name);
    const Eigen::MatrixXd& g = git->second;
    if (g.rows() != theta.rows() || g.cols() != theta.cols())
      throw std::invalid_argument("optimizer: gradient shape mismatch for tensor " + name);
    Eigen::MatrixXd& m = st.m[name];
    Eigen::MatrixXd& v = st.v[name];
    if (m.size() == 0) {
      m = Eigen::MatrixXd::Zero(theta.rows(), theta.cols());
      v = Eigen::MatrixXd::Zero(theta.rows(), theta.cols());
    }
    m = beta1 * m + (1.0 - beta1) * g;
    v = beta2 * v + (1.0 - beta2) * g.cwiseProduct(g);
    theta.array() -=
        lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
  }
}

} // namespace vwss::train
