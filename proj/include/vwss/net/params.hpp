#pragma once

// Named parameter tensors, their config-determined shapes, and random
// initialisation.  Equivariant linear weights are scaled so the layer output
// variance matches the input variance, measured empirically on unit-variance
// random multivectors at build time.

#include <Eigen/Dense>
#include <map>
#include <random>
#include <string>

#include "vwss/descriptors/features.hpp"
#include "vwss/ga/kernels.hpp"
#include "vwss/net/config.hpp"

namespace vwss::net {

using ParamSet = std::map<std::string, Eigen::MatrixXd>;

struct ParamShape {
  Eigen::Index rows = 0, cols = 0;
};
using ParamShapes = std::map<std::string, ParamShape>;

// --- shape catalogues --------------------------------------------------------

/// Equivariant linear from c_in to c_out multivector channels.
inline ParamShape equi_shape(int c_in, int c_out) {
  return {static_cast<Eigen::Index>(9) * c_in, c_out};
}

inline void add_gatr_mlp_shapes(ParamShapes& s, const std::string& prefix, int c) {
  s[prefix + ".left"] = equi_shape(c, c);
  s[prefix + ".right"] = equi_shape(c, c);
  s[prefix + ".mix"] = equi_shape(c, c);
  s[prefix + ".gate"] = equi_shape(c, c);
  s[prefix + ".out"] = equi_shape(c, c);
}

inline void add_gatr_attn_shapes(ParamShapes& s, const std::string& prefix, int c) {
  s[prefix + ".q"] = equi_shape(c, c);
  s[prefix + ".k"] = equi_shape(c, c);
  s[prefix + ".v"] = equi_shape(c, c);
  s[prefix + ".out"] = equi_shape(c, c);
}

inline ParamShapes gatr_param_shapes(const GatrConfig& cfg) {
  cfg.validate();
  const int c = cfg.channels;
  ParamShapes s;
  s["input"] = equi_shape(desc::kEmbeddingChannels, c);
  add_gatr_attn_shapes(s, "tok.attn", c);
  add_gatr_mlp_shapes(s, "tok.mlp", c);
  for (int b = 1; b < cfg.blocks; ++b) {
    const std::string p = "blk" + std::to_string(b);
    add_gatr_attn_shapes(s, p + ".attn", c);
    add_gatr_mlp_shapes(s, p + ".mlp", c);
  }
  s["psi.pre"] = equi_shape(2 * c, c);
  s["psi.gate"] = equi_shape(c, c);
  s["decode"] = equi_shape(c, cfg.timepoints);
  return s;
}

inline constexpr int kVatrFeatures = 14; // 3 coords + 3 normals + 3 flow + 2 geo + 2 kappa + 1 v_max

inline ParamShapes vatr_param_shapes(const VatrConfig& cfg) {
  cfg.validate();
  const Eigen::Index h = cfg.hidden;
  ParamShapes s;
  s["input.w"] = {kVatrFeatures, h};
  s["input.b"] = {1, h};
  auto add_linear = [&s, h](const std::string& name, Eigen::Index in, Eigen::Index out) {
    s[name + ".w"] = {in, out};
    s[name + ".b"] = {1, out};
  };
  auto add_block = [&](const std::string& p) {
    add_linear(p + ".attn.q", h, h);
    add_linear(p + ".attn.k", h, h);
    add_linear(p + ".attn.v", h, h);
    add_linear(p + ".attn.out", h, h);
    add_linear(p + ".mlp.1", h, 2 * h);
    add_linear(p + ".mlp.2", 2 * h, h);
  };
  add_block("tok");
  for (int b = 1; b < cfg.blocks; ++b) add_block("blk" + std::to_string(b));
  add_linear("psi", 2 * h, h);
  add_linear("head", h, static_cast<Eigen::Index>(3) * cfg.timepoints);
  return s;
}

// --- initialisation --------------------------------------------------------------

/// Empirical output std of an equivariant linear layer on unit-variance random
/// multivectors; the probe batch is fixed so initialisation is deterministic.
inline double equi_output_std(const Eigen::MatrixXd& w, int c_in) {
  std::mt19937_64 probe_rng(0x5eedf00dULL + static_cast<uint64_t>(c_in));
  std::normal_distribution<double> gauss(0.0, 1.0);
  const int n = 256;
  Eigen::MatrixXd x(n, 16 * c_in);
  for (Eigen::Index i = 0; i < x.size(); ++i) x(i / x.cols(), i % x.cols()) = gauss(probe_rng);
  const Eigen::MatrixXd y = ga::equi_linear_forward(x, c_in, w);
  return std::sqrt(y.array().square().mean());
}

/// Gaussian weights rescaled so the empirical output variance is ~1.
inline Eigen::MatrixXd init_equi_linear(std::mt19937_64& rng, int c_in, int c_out) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::MatrixXd w(9 * c_in, c_out);
  for (Eigen::Index i = 0; i < w.rows(); ++i)
    for (Eigen::Index j = 0; j < w.cols(); ++j) w(i, j) = gauss(rng);
  w *= 1.0 / std::sqrt(static_cast<double>(9 * c_in));
  const double s = equi_output_std(w, c_in);
  if (s > 1e-12) w /= s;
  return w;
}

inline ParamSet init_gatr_params(const GatrConfig& cfg, uint64_t seed) {
  const ParamShapes shapes = gatr_param_shapes(cfg);
  std::mt19937_64 rng(seed);
  ParamSet p;
  for (const auto& [name, sh] : shapes)
    p[name] = init_equi_linear(rng, static_cast<int>(sh.rows / 9), static_cast<int>(sh.cols));
  // The decoded direction is scalar-times-unit-vector, so the sign of a
  // timepoint's vector part only reaches the angle term through sign(), whose
  // gradient vanishes: a column whose vector part starts antipodal to the
  // shared direction field can never rotate out of it.  Starting every
  // timepoint from the same map removes those traps; the columns diverge
  // freely afterwards because each receives its own cotangent.
  Eigen::MatrixXd& dec = p["decode"];
  for (Eigen::Index j = 1; j < dec.cols(); ++j) dec.col(j) = dec.col(0);
  return p;
}

inline ParamSet init_vatr_params(const VatrConfig& cfg, uint64_t seed) {
  const ParamShapes shapes = vatr_param_shapes(cfg);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  ParamSet p;
  for (const auto& [name, sh] : shapes) {
    Eigen::MatrixXd w(sh.rows, sh.cols);
    if (name.size() >= 2 && name.compare(name.size() - 2, 2, ".b") == 0) {
      w.setZero();
    } else {
      const double scale = 1.0 / std::sqrt(static_cast<double>(sh.rows));
      for (Eigen::Index i = 0; i < w.rows(); ++i)
        for (Eigen::Index j = 0; j < w.cols(); ++j) w(i, j) = scale * gauss(rng);
    }
    p[name] = std::move(w);
  }
  return p;
}

/// Throws when the parameter set does not exactly match the config's catalogue.
inline void check_param_shapes(const ParamSet& params, const ParamShapes& shapes) {
  for (const auto& [name, sh] : shapes) {
    const auto it = params.find(name);
    if (it == params.end()) throw std::invalid_argument("params: missing tensor " + name);
    if (it->second.rows() != sh.rows || it->second.cols() != sh.cols)
      throw std::invalid_argument("params: tensor " + name + " has wrong shape");
  }
  if (params.size() != shapes.size())
    throw std::invalid_argument("params: unexpected extra tensors");
}

} // namespace vwss::net
