#pragma once

// The equivariant surrogate network: cross-attention tokenisation onto a
// farthest-point-sampled coarse cloud, a trunk of self-attention transformer
// blocks acting on multivector channels, learned inverse-distance
// interpolation back to the full resolution, and the scalar+plane decode into
// a transient WSS field.  The forward pass is built on the autodiff tape, so
// training and inference share one implementation.

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <algorithm>
#include <map>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "vwss/descriptors/features.hpp"
#include "vwss/hemo/field.hpp"
#include "vwss/mesh/queries.hpp"
#include "vwss/net/config.hpp"
#include "vwss/net/params.hpp"
#include "vwss/net/tape.hpp"

namespace vwss::net {

// --- geometry-dependent, parameter-independent support structures -----------------

struct SampleGraph {
  std::vector<int> token_idx; // farthest-point sample, coarse cloud indices
  SpMat select;               // m x n row selection
  SpMat interp;               // n x m inverse-squared-distance interpolation
};

/// Tokenisation / interpolation topology for one point cloud.  Interpolation
/// weights lambda_{p,q} = 1 / (|p - q|^2 + eps) over the k nearest coarse
/// neighbours of each fine point, normalised to sum 1.
inline SampleGraph build_sample_graph(const mesh::PointCloud& cloud, double rate, int k,
                                      double eps, int seed) {
  SampleGraph g;
  g.token_idx = mesh::farthest_point_sample(cloud, rate, seed);
  const int n = cloud.size(), m = static_cast<int>(g.token_idx.size());
  if (k > m) throw std::invalid_argument("interpolate: k exceeds the coarse point count");

  std::vector<Eigen::Triplet<double>> sel;
  sel.reserve(static_cast<size_t>(m));
  Eigen::MatrixXd coarse(m, 3);
  for (int i = 0; i < m; ++i) {
    sel.emplace_back(i, g.token_idx[static_cast<size_t>(i)], 1.0);
    coarse.row(i) = cloud.points.row(g.token_idx[static_cast<size_t>(i)]);
  }
  g.select.resize(m, n);
  g.select.setFromTriplets(sel.begin(), sel.end());

  // nearest coarse points per fine point (the coarse set may be tiny, so the
  // search runs on the raw matrix rather than through the point-cloud type)
  Eigen::MatrixXi nbr(n, k);
  std::vector<std::pair<double, int>> dist(static_cast<size_t>(m));
  for (int p = 0; p < n; ++p) {
    for (int j = 0; j < m; ++j)
      dist[static_cast<size_t>(j)] = {(coarse.row(j) - cloud.points.row(p)).squaredNorm(), j};
    std::partial_sort(dist.begin(), dist.begin() + k, dist.end());
    for (int j = 0; j < k; ++j) nbr(p, j) = dist[static_cast<size_t>(j)].second;
  }
  std::vector<Eigen::Triplet<double>> itp;
  itp.reserve(static_cast<size_t>(n) * k);
  for (int p = 0; p < n; ++p) {
    double total = 0.0;
    for (int j = 0; j < k; ++j) {
      const double d2 = (cloud.points.row(p) - coarse.row(nbr(p, j))).squaredNorm();
      total += 1.0 / (d2 + eps);
    }
    for (int j = 0; j < k; ++j) {
      const double d2 = (cloud.points.row(p) - coarse.row(nbr(p, j))).squaredNorm();
      itp.emplace_back(p, nbr(p, j), 1.0 / (d2 + eps) / total);
    }
  }
  g.interp.resize(n, m);
  g.interp.setFromTriplets(itp.begin(), itp.end());
  return g;
}

// --- dropout ----------------------------------------------------------------------

/// Pre-sampled inverted-dropout masks, one per geometric nonlinear layer
/// (every block's MLP plus the interpolation layer), zeroing whole
/// multivector channels.  Masks are sampled up front so a training step is a
/// deterministic function of (parameters, plan).
struct DropoutPlan {
  std::vector<Mat> masks; // site order: tok.mlp, blk1.mlp .. blk{L-1}.mlp, psi
};

inline Mat channel_dropout_mask(std::mt19937_64& rng, int n, int c, double p, int slot_width) {
  std::bernoulli_distribution drop(p);
  Mat mask = Mat::Ones(n, static_cast<Eigen::Index>(slot_width) * c);
  const double keep_scale = 1.0 / (1.0 - p);
  for (int i = 0; i < n; ++i)
    for (int ch = 0; ch < c; ++ch)
      mask.block(i, slot_width * ch, 1, slot_width).setConstant(drop(rng) ? 0.0 : keep_scale);
  return mask;
}

inline DropoutPlan make_gatr_dropout_plan(const GatrConfig& cfg, int n_fine, int n_tokens,
                                          std::mt19937_64& rng) {
  DropoutPlan plan;
  for (int b = 0; b < cfg.blocks; ++b)
    plan.masks.push_back(channel_dropout_mask(rng, n_tokens, cfg.channels, cfg.dropout, 16));
  plan.masks.push_back(channel_dropout_mask(rng, n_fine, cfg.channels, cfg.dropout, 16));
  return plan;
}

// --- forward graph -----------------------------------------------------------------

struct ForwardGraph {
  Tape::Id output = -1;                   // n x 16 T multivector batch
  std::map<std::string, Tape::Id> params; // name -> tape input id
};

namespace detail {

inline Tape::Id p_id(Tape& t, std::map<std::string, Tape::Id>& ids, const ParamSet& params,
                     const std::string& name) {
  const auto it = params.find(name);
  if (it == params.end()) throw std::invalid_argument("params: missing tensor " + name);
  const auto found = ids.find(name);
  if (found != ids.end()) return found->second;
  const Tape::Id id = t.input(it->second);
  ids.emplace(name, id);
  return id;
}

/// Multi-head attention over multivector channels; logits use the invariant
/// inner product with temperature sqrt(8c).
inline Tape::Id gatr_attention(Tape& t, Tape::Id q_src, Tape::Id kv_src, const GatrConfig& cfg,
                               std::map<std::string, Tape::Id>& ids, const ParamSet& params,
                               const std::string& prefix) {
  const int c = cfg.channels, ch_head = c / cfg.heads;
  const Tape::Id qn = t.layernorm_mv(q_src, c);
  const Tape::Id kn = t.layernorm_mv(kv_src, c);
  const Tape::Id q = t.equi_linear(qn, p_id(t, ids, params, prefix + ".q"), c);
  const Tape::Id k = t.equi_linear(kn, p_id(t, ids, params, prefix + ".k"), c);
  const Tape::Id v = t.equi_linear(kn, p_id(t, ids, params, prefix + ".v"), c);
  const double temp = 1.0 / std::sqrt(8.0 * c);
  std::vector<Tape::Id> heads;
  for (int h = 0; h < cfg.heads; ++h) {
    const int j0 = 16 * ch_head * h, w = 16 * ch_head;
    const Tape::Id qh = t.mask_e0(t.slice_cols(q, j0, w), ch_head);
    const Tape::Id kh = t.slice_cols(k, j0, w);
    const Tape::Id vh = t.slice_cols(v, j0, w);
    const Tape::Id logits = t.scale(t.matmul_nt(qh, kh), temp);
    heads.push_back(t.matmul(t.row_softmax(logits), vh));
  }
  const Tape::Id merged = cfg.heads == 1 ? heads[0] : t.concat_cols(heads);
  return t.equi_linear(merged, p_id(t, ids, params, prefix + ".out"), c);
}

/// Geometric nonlinear MLP: layernorm, geometric-product bilinear, scalar-gated
/// GELU (with channel dropout during training), output projection.
inline Tape::Id gatr_mlp(Tape& t, Tape::Id x, const GatrConfig& cfg,
                         std::map<std::string, Tape::Id>& ids, const ParamSet& params,
                         const std::string& prefix, const Mat* dropout_mask) {
  const int c = cfg.channels;
  const Tape::Id xn = t.layernorm_mv(x, c);
  const Tape::Id left = t.equi_linear(xn, p_id(t, ids, params, prefix + ".left"), c);
  const Tape::Id right = t.equi_linear(xn, p_id(t, ids, params, prefix + ".right"), c);
  const Tape::Id mixed =
      t.equi_linear(t.geometric_product(left, right, c), p_id(t, ids, params, prefix + ".mix"), c);
  const Tape::Id gate = t.equi_linear(mixed, p_id(t, ids, params, prefix + ".gate"), c);
  Tape::Id y = t.gated_gelu(mixed, gate, c);
  if (dropout_mask != nullptr) y = t.mul_const(y, *dropout_mask);
  return t.equi_linear(y, p_id(t, ids, params, prefix + ".out"), c);
}

} // namespace detail

/// Build the full network graph on the tape.  `embedding` is the n x (16*8)
/// input batch; dropout is active only when a plan is supplied.
inline ForwardGraph gatr_forward(Tape& t, const Mat& embedding, const SampleGraph& graph,
                                 const GatrConfig& cfg, const ParamSet& params,
                                 const DropoutPlan* dropout = nullptr) {
  cfg.validate();
  check_param_shapes(params, gatr_param_shapes(cfg));
  if (embedding.cols() != 16 * desc::kEmbeddingChannels)
    throw std::invalid_argument("forward: embedding must have 8 multivector channels");
  if (dropout != nullptr && dropout->masks.size() != static_cast<size_t>(cfg.blocks) + 1)
    throw std::invalid_argument("forward: dropout plan has wrong number of sites");
  const int c = cfg.channels;
  ForwardGraph fg;

  const Tape::Id emb = t.input(embedding);
  const Tape::Id x0 =
      t.equi_linear(emb, detail::p_id(t, fg.params, params, "input"), desc::kEmbeddingChannels);

  // tokenisation block: coarse queries cross-attend to the full-resolution keys
  const Tape::Id xbar0 = t.spmm_const(graph.select, x0);
  const Tape::Id h_tok = detail::gatr_attention(t, xbar0, x0, cfg, fg.params, params, "tok.attn");
  const Tape::Id a_tok = t.add(xbar0, h_tok);
  Tape::Id x = t.add(a_tok, detail::gatr_mlp(t, a_tok, cfg, fg.params, params, "tok.mlp",
                                             dropout ? &dropout->masks[0] : nullptr));

  // self-attention trunk on the coarse cloud
  for (int b = 1; b < cfg.blocks; ++b) {
    const std::string p = "blk" + std::to_string(b);
    const Tape::Id h = detail::gatr_attention(t, x, x, cfg, fg.params, params, p + ".attn");
    const Tape::Id a = t.add(x, h);
    x = t.add(a, detail::gatr_mlp(t, a, cfg, fg.params, params, p + ".mlp",
                                  dropout ? &dropout->masks[static_cast<size_t>(b)] : nullptr));
  }

  // learned interpolation back to the fine cloud with the input skip
  const Tape::Id fine = t.spmm_const(graph.interp, x);
  const Tape::Id z = t.concat_cols({fine, x0});
  const Tape::Id pre = t.equi_linear(t.layernorm_mv(z, 2 * c),
                                     detail::p_id(t, fg.params, params, "psi.pre"), 2 * c);
  const Tape::Id gate = t.equi_linear(pre, detail::p_id(t, fg.params, params, "psi.gate"), c);
  Tape::Id y = t.gated_gelu(pre, gate, c);
  if (dropout != nullptr) y = t.mul_const(y, dropout->masks.back());
  fg.output = t.equi_linear(y, detail::p_id(t, fg.params, params, "decode"), c);
  return fg;
}

// --- decode ------------------------------------------------------------------------

/// Per point and timepoint: magnitude from the scalar slot, direction from the
/// plane-normal (e1, e2, e3) slots normalised to unit length; directions of
/// norm below 1e-12 decode to the zero vector.
inline hemo::TransientWssField decode_wss(const Mat& out, int timepoints) {
  if (out.cols() != static_cast<Eigen::Index>(16) * timepoints)
    throw std::invalid_argument("decode_wss: output channel count must equal T");
  hemo::TransientWssField f(static_cast<int>(out.rows()), timepoints);
  for (int p = 0; p < f.n_points(); ++p)
    for (int tc = 0; tc < timepoints; ++tc) {
      const double mag = out(p, 16 * tc + ga::kSlotScalar);
      const Eigen::Vector3d dir(out(p, 16 * tc + ga::kSlotE1), out(p, 16 * tc + ga::kSlotE2),
                                out(p, 16 * tc + ga::kSlotE3));
      const double len = dir.norm();
      if (len >= 1e-12) f.set(p, tc, mag / len * dir);
    }
  return f;
}

/// Inference entry point: featurised mesh to predicted field (dropout off).
inline hemo::TransientWssField gatr_predict(const desc::DescriptorSet& d,
                                            const desc::FeatureStats& stats,
                                            const GatrConfig& cfg, const ParamSet& params,
                                            int seed) {
  const ga::MvBatch x = desc::build_embedding(d, stats);
  const SampleGraph graph =
      build_sample_graph(mesh::PointCloud(d.coords), cfg.rate, cfg.k, cfg.eps, seed);
  Tape t;
  const ForwardGraph fg = gatr_forward(t, x.data, graph, cfg, params, nullptr);
  return decode_wss(t.val(fg.output), cfg.timepoints);
}

} // namespace vwss::net
