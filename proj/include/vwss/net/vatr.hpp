#pragma once

// Scalar-transformer baseline: identical tokenise / attend / interpolate
// topology to the equivariant path, but every descriptor is treated as a raw
// scalar in one 14-dimensional feature vector and all maps are plain linear
// algebra.  Deliberately not E(3)-equivariant — it is the negative control
// for the equivariance test suite.

#include <Eigen/Dense>
#include <map>
#include <random>
#include <string>

#include "vwss/descriptors/features.hpp"
#include "vwss/hemo/field.hpp"
#include "vwss/net/config.hpp"
#include "vwss/net/gatr.hpp" // SampleGraph, build_sample_graph
#include "vwss/net/params.hpp"
#include "vwss/net/tape.hpp"

namespace vwss::net {

/// The 14 scalar columns: centred coords, normals, flow prior, standardised
/// geodesics, curvatures, and v_max.
inline Mat vatr_features(const desc::DescriptorSet& d, const desc::FeatureStats& stats) {
  d.validate();
  const int n = d.n_points();
  Mat f(n, kVatrFeatures);
  const Eigen::RowVector3d centroid = d.coords.colwise().mean();
  f.middleCols(0, 3) = d.coords.rowwise() - centroid;
  f.middleCols(3, 3) = d.normals;
  f.middleCols(6, 3) = d.flow_prior;
  f.col(9) = (d.geo_inlet.array() - stats.mean[0]) / stats.std[0];
  f.col(10) = (d.geo_outlet.array() - stats.mean[1]) / stats.std[1];
  f.col(11) = (d.kappa1.array() - stats.mean[2]) / stats.std[2];
  f.col(12) = (d.kappa2.array() - stats.mean[3]) / stats.std[3];
  f.col(13).setConstant((d.v_max - stats.mean[4]) / stats.std[4]);
  return f;
}

inline DropoutPlan make_vatr_dropout_plan(const VatrConfig& cfg, int n_fine, int n_tokens,
                                          std::mt19937_64& rng) {
  DropoutPlan plan;
  for (int b = 0; b < cfg.blocks; ++b)
    plan.masks.push_back(channel_dropout_mask(rng, n_tokens, 2 * cfg.hidden, cfg.dropout, 1));
  plan.masks.push_back(channel_dropout_mask(rng, n_fine, cfg.hidden, cfg.dropout, 1));
  return plan;
}

namespace detail {

inline Tape::Id vatr_linear(Tape& t, Tape::Id x, std::map<std::string, Tape::Id>& ids,
                            const ParamSet& params, const std::string& name) {
  return t.add_bias(t.matmul(x, p_id(t, ids, params, name + ".w")),
                    p_id(t, ids, params, name + ".b"));
}

inline Tape::Id vatr_attention(Tape& t, Tape::Id q_src, Tape::Id kv_src, const VatrConfig& cfg,
                               std::map<std::string, Tape::Id>& ids, const ParamSet& params,
                               const std::string& prefix) {
  const int d_head = cfg.hidden / cfg.heads;
  const Tape::Id qn = t.row_layernorm(q_src);
  const Tape::Id kn = t.row_layernorm(kv_src);
  const Tape::Id q = vatr_linear(t, qn, ids, params, prefix + ".q");
  const Tape::Id k = vatr_linear(t, kn, ids, params, prefix + ".k");
  const Tape::Id v = vatr_linear(t, kn, ids, params, prefix + ".v");
  const double temp = 1.0 / std::sqrt(static_cast<double>(d_head));
  std::vector<Tape::Id> heads;
  for (int h = 0; h < cfg.heads; ++h) {
    const int j0 = d_head * h;
    const Tape::Id logits =
        t.scale(t.matmul_nt(t.slice_cols(q, j0, d_head), t.slice_cols(k, j0, d_head)), temp);
    heads.push_back(t.matmul(t.row_softmax(logits), t.slice_cols(v, j0, d_head)));
  }
  const Tape::Id merged = cfg.heads == 1 ? heads[0] : t.concat_cols(heads);
  return vatr_linear(t, merged, ids, params, prefix + ".out");
}

inline Tape::Id vatr_mlp(Tape& t, Tape::Id x, std::map<std::string, Tape::Id>& ids,
                         const ParamSet& params, const std::string& prefix,
                         const Mat* dropout_mask) {
  Tape::Id h = t.gelu(vatr_linear(t, t.row_layernorm(x), ids, params, prefix + ".1"));
  if (dropout_mask != nullptr) h = t.mul_const(h, *dropout_mask);
  return vatr_linear(t, h, ids, params, prefix + ".2");
}

} // namespace detail

inline ForwardGraph vatr_forward(Tape& t, const Mat& features, const SampleGraph& graph,
                                 const VatrConfig& cfg, const ParamSet& params,
                                 const DropoutPlan* dropout = nullptr) {
  cfg.validate();
  check_param_shapes(params, vatr_param_shapes(cfg));
  if (features.cols() != kVatrFeatures)
    throw std::invalid_argument("forward: expected the 14-column scalar features");
  if (dropout != nullptr && dropout->masks.size() != static_cast<size_t>(cfg.blocks) + 1)
    throw std::invalid_argument("forward: dropout plan has wrong number of sites");
  ForwardGraph fg;

  const Tape::Id feats = t.input(features);
  const Tape::Id h0 = detail::vatr_linear(t, feats, fg.params, params, "input");

  const Tape::Id hbar0 = t.spmm_const(graph.select, h0);
  const Tape::Id h_tok = detail::vatr_attention(t, hbar0, h0, cfg, fg.params, params, "tok.attn");
  const Tape::Id a_tok = t.add(hbar0, h_tok);
  Tape::Id x = t.add(a_tok, detail::vatr_mlp(t, a_tok, fg.params, params, "tok.mlp",
                                             dropout ? &dropout->masks[0] : nullptr));

  for (int b = 1; b < cfg.blocks; ++b) {
    const std::string p = "blk" + std::to_string(b);
    const Tape::Id h = detail::vatr_attention(t, x, x, cfg, fg.params, params, p + ".attn");
    const Tape::Id a = t.add(x, h);
    x = t.add(a, detail::vatr_mlp(t, a, fg.params, params, p + ".mlp",
                                  dropout ? &dropout->masks[static_cast<size_t>(b)] : nullptr));
  }

  const Tape::Id fine = t.spmm_const(graph.interp, x);
  const Tape::Id z = t.concat_cols({fine, h0});
  Tape::Id y = t.gelu(detail::vatr_linear(t, t.row_layernorm(z), fg.params, params, "psi"));
  if (dropout != nullptr) y = t.mul_const(y, dropout->masks.back());
  fg.output = detail::vatr_linear(t, y, fg.params, params, "head"); // n x 3T
  return fg;
}

/// The baseline's head emits the 3T vector components directly.
inline hemo::TransientWssField decode_vatr(const Mat& out, int timepoints) {
  if (out.cols() != static_cast<Eigen::Index>(3) * timepoints)
    throw std::invalid_argument("decode_vatr: output width must be 3*T");
  hemo::TransientWssField f(static_cast<int>(out.rows()), timepoints);
  f.tau = out;
  return f;
}

inline hemo::TransientWssField vatr_predict(const desc::DescriptorSet& d,
                                            const desc::FeatureStats& stats,
                                            const VatrConfig& cfg, const ParamSet& params,
                                            int seed) {
  const Mat f = vatr_features(d, stats);
  const SampleGraph graph =
      build_sample_graph(mesh::PointCloud(d.coords), cfg.rate, cfg.k, cfg.eps, seed);
  Tape t;
  const ForwardGraph fg = vatr_forward(t, f, graph, cfg, params, nullptr);
  return decode_vatr(t.val(fg.output), cfg.timepoints);
}

} // namespace vwss::net
