#include <gtest/gtest.h>

#include <cstdio>
#include <fstream>
#include <functional>
#include <random>

#include "support/test_util.hpp"
#include "vwss/descriptors/features.hpp"
#include "vwss/net/checkpoint.hpp"
#include "vwss/net/gatr.hpp"
#include "vwss/net/vatr.hpp"

namespace tt = vwss::testing;
using vwss::net::Mat;
using vwss::net::Tape;

namespace {

Eigen::MatrixXd random_cloud(tt::Rng& rng, int n, double scale = 10.0) {
  return tt::random_matrix(rng, n, 3, scale);
}

/// Channel-wise sandwich action on a raw n x 16c batch matrix.
Mat apply_rho(const vwss::ga::EuclideanTransform& g, const Mat& data, int channels) {
  vwss::ga::MvBatch b;
  b.data = data;
  b.channels = channels;
  return vwss::ga::apply_transform(g, b).data;
}

double rel_deviation(const Mat& a, const Mat& b) { return (a - b).norm() / b.norm(); }

vwss::net::GatrConfig tiny_gatr(int timepoints = 2) {
  vwss::net::GatrConfig cfg;
  cfg.blocks = 2;
  cfg.heads = 2;
  cfg.channels = 4;
  cfg.rate = 0.5;
  cfg.k = 2;
  cfg.timepoints = timepoints;
  cfg.dropout = 0.0;
  return cfg;
}

vwss::net::VatrConfig tiny_vatr(int timepoints = 2) {
  vwss::net::VatrConfig cfg;
  cfg.blocks = 2;
  cfg.heads = 2;
  cfg.hidden = 8;
  cfg.rate = 0.5;
  cfg.k = 2;
  cfg.timepoints = timepoints;
  cfg.dropout = 0.0;
  return cfg;
}

vwss::desc::DescriptorSet random_descriptors(tt::Rng& rng, int n) {
  vwss::desc::DescriptorSet d;
  d.coords = random_cloud(rng, n);
  d.normals = tt::random_matrix(rng, n, 3);
  d.flow_prior = tt::random_matrix(rng, n, 3);
  for (int i = 0; i < n; ++i) {
    d.normals.row(i).normalize();
    d.flow_prior.row(i).normalize();
  }
  d.geo_inlet = tt::random_matrix(rng, n, 1).cwiseAbs();
  d.geo_outlet = tt::random_matrix(rng, n, 1).cwiseAbs();
  d.kappa1 = tt::random_matrix(rng, n, 1);
  d.kappa2 = tt::random_matrix(rng, n, 1);
  d.v_max = 50.0 + tt::runif(rng, 0.0, 10.0);
  return d;
}

/// Central finite differences on sampled coordinates of x against an analytic
/// gradient; returns the worst error |fd - an| / max(1, |fd|, |an|).
double fd_worst_error(const std::function<double(const Mat&)>& f, const Mat& x,
                      const Mat& analytic, tt::Rng& rng, int max_coords = 30,
                      double step = 1e-4) {
  std::vector<std::pair<int, int>> coords;
  const int total = static_cast<int>(x.size());
  if (total <= max_coords) {
    for (int r = 0; r < x.rows(); ++r)
      for (int c = 0; c < x.cols(); ++c) coords.emplace_back(r, c);
  } else {
    std::uniform_int_distribution<int> rr(0, static_cast<int>(x.rows()) - 1);
    std::uniform_int_distribution<int> rc(0, static_cast<int>(x.cols()) - 1);
    for (int s = 0; s < max_coords; ++s) coords.emplace_back(rr(rng), rc(rng));
  }
  double worst = 0.0;
  for (const auto& [r, c] : coords) {
    Mat xp = x, xm = x;
    xp(r, c) += step;
    xm(r, c) -= step;
    const double fd = (f(xp) - f(xm)) / (2.0 * step);
    const double an = analytic(r, c);
    worst = std::max(worst, std::abs(fd - an) / std::max({1.0, std::abs(fd), std::abs(an)}));
  }
  return worst;
}

} // namespace

// ---------------------------------------------------------------------------------
// tokenisation / interpolation graph
// ---------------------------------------------------------------------------------

TEST(SampleGraph, SelectionAndInterpolationWeights) {
  tt::Rng rng(71);
  const Eigen::MatrixXd pts = random_cloud(rng, 40);
  const auto g = vwss::net::build_sample_graph(vwss::mesh::PointCloud(pts), 0.25, 3, 1e-8, 7);

  ASSERT_EQ(g.token_idx.size(), 10u);
  EXPECT_EQ(g.select.rows(), 10);
  EXPECT_EQ(g.select.cols(), 40);
  EXPECT_EQ(g.interp.rows(), 40);
  EXPECT_EQ(g.interp.cols(), 10);

  // every selection row is a single unit entry on its token index
  for (int i = 0; i < g.select.rows(); ++i) {
    Eigen::RowVectorXd row = g.select.row(i);
    EXPECT_NEAR(row.sum(), 1.0, 0.0);
    EXPECT_DOUBLE_EQ(row[g.token_idx[static_cast<size_t>(i)]], 1.0);
  }
  // interpolation rows are convex weights
  for (int p = 0; p < g.interp.rows(); ++p) {
    Eigen::RowVectorXd row = g.interp.row(p);
    EXPECT_NEAR(row.sum(), 1.0, 1e-12);
    EXPECT_GE(row.minCoeff(), 0.0);
  }
}

TEST(SampleGraph, CoincidentPointTakesDominantWeight) {
  tt::Rng rng(72);
  const Eigen::MatrixXd pts = random_cloud(rng, 30);
  const auto g = vwss::net::build_sample_graph(vwss::mesh::PointCloud(pts), 0.3, 2, 1e-8, 3);
  // every sampled point is itself a fine point at distance zero
  for (size_t t = 0; t < g.token_idx.size(); ++t) {
    const int p = g.token_idx[t];
    EXPECT_GT(g.interp.coeff(p, static_cast<int>(t)), 0.999);
  }
}

TEST(SampleGraph, RejectsMoreNeighboursThanTokens) {
  tt::Rng rng(73);
  const Eigen::MatrixXd pts = random_cloud(rng, 10);
  EXPECT_THROW(vwss::net::build_sample_graph(vwss::mesh::PointCloud(pts), 0.2, 5, 1e-8, 0),
               std::invalid_argument);
}

// ---------------------------------------------------------------------------------
// layer-level equivariance (sandwich action applied channel-wise to the batch)
// ---------------------------------------------------------------------------------

TEST(Equivariance, LinearLayerCommutesWithTheGroupAction) {
  tt::Rng rng(81);
  const int n = 12, c_in = 3, c_out = 5;
  const Mat x = tt::random_matrix(rng, n, 16 * c_in);
  const Mat w = tt::random_matrix(rng, 9 * c_in, c_out, 0.3);
  for (int trial = 0; trial < 8; ++trial) {
    const auto g = tt::random_transform(rng, 1.0, true);
    Tape t;
    const auto yx = t.val(t.equi_linear(t.input(apply_rho(g, x, c_in)), t.input(w), c_in));
    const auto xy = apply_rho(g, t.val(t.equi_linear(t.input(x), t.input(w), c_in)), c_out);
    EXPECT_LT(rel_deviation(yx, xy), 1e-10);
  }
}

TEST(Equivariance, MultivectorLayerNormCommutes) {
  tt::Rng rng(82);
  const int n = 10, c = 4;
  const Mat x = tt::random_matrix(rng, n, 16 * c);
  for (int trial = 0; trial < 8; ++trial) {
    const auto g = tt::random_transform(rng, 1.0, true);
    Tape t;
    const auto a = t.val(t.layernorm_mv(t.input(apply_rho(g, x, c)), c));
    const auto b = apply_rho(g, t.val(t.layernorm_mv(t.input(x), c)), c);
    EXPECT_LT(rel_deviation(a, b), 1e-10);
  }
}

TEST(Equivariance, GeometricProductLayerCommutes) {
  tt::Rng rng(83);
  const int n = 10, c = 3;
  const Mat x = tt::random_matrix(rng, n, 16 * c);
  const Mat y = tt::random_matrix(rng, n, 16 * c);
  for (int trial = 0; trial < 8; ++trial) {
    const auto g = tt::random_transform(rng, 1.0, true);
    Tape t;
    const auto a = t.val(
        t.geometric_product(t.input(apply_rho(g, x, c)), t.input(apply_rho(g, y, c)), c));
    const auto b = apply_rho(g, t.val(t.geometric_product(t.input(x), t.input(y), c)), c);
    EXPECT_LT(rel_deviation(a, b), 1e-10);
  }
}

TEST(Equivariance, AttentionBlockCommutes) {
  tt::Rng rng(84);
  const auto cfg = tiny_gatr();
  const auto params = vwss::net::init_gatr_params(cfg, 11);
  const int n = 9, c = cfg.channels;
  const Mat x = tt::random_matrix(rng, n, 16 * c);
  for (int trial = 0; trial < 8; ++trial) {
    const auto g = tt::random_transform(rng, 1.0, true);
    std::map<std::string, Tape::Id> ids_a, ids_b;
    Tape ta, tb;
    const Tape::Id xa = ta.input(apply_rho(g, x, c));
    const auto a =
        ta.val(vwss::net::detail::gatr_attention(ta, xa, xa, cfg, ids_a, params, "tok.attn"));
    const Tape::Id xb = tb.input(x);
    const auto b = apply_rho(
        g, tb.val(vwss::net::detail::gatr_attention(tb, xb, xb, cfg, ids_b, params, "tok.attn")),
        c);
    EXPECT_LT(rel_deviation(a, b), 1e-9);
  }
}

TEST(Equivariance, GatedMlpBlockCommutes) {
  tt::Rng rng(85);
  const auto cfg = tiny_gatr();
  const auto params = vwss::net::init_gatr_params(cfg, 12);
  const int n = 9, c = cfg.channels;
  const Mat x = tt::random_matrix(rng, n, 16 * c);
  for (int trial = 0; trial < 8; ++trial) {
    const auto g = tt::random_transform(rng, 1.0, true);
    std::map<std::string, Tape::Id> ids_a, ids_b;
    Tape ta, tb;
    const auto a = ta.val(vwss::net::detail::gatr_mlp(ta, ta.input(apply_rho(g, x, c)), cfg,
                                                      ids_a, params, "tok.mlp", nullptr));
    const auto b = apply_rho(
        g,
        tb.val(vwss::net::detail::gatr_mlp(tb, tb.input(x), cfg, ids_b, params, "tok.mlp",
                                           nullptr)),
        c);
    EXPECT_LT(rel_deviation(a, b), 1e-9);
  }
}

TEST(Equivariance, FullForwardCommutesForFiftyTransforms) {
  tt::Rng rng(86);
  const auto cfg = tiny_gatr();
  const auto params = vwss::net::init_gatr_params(cfg, 13);
  const int n = 18;
  const Eigen::MatrixXd pts = random_cloud(rng, n);
  const auto graph = vwss::net::build_sample_graph(vwss::mesh::PointCloud(pts), cfg.rate, cfg.k,
                                                   cfg.eps, 17);
  const Mat emb = tt::random_matrix(rng, n, 16 * vwss::desc::kEmbeddingChannels);

  Tape base;
  const Mat out = base.val(vwss::net::gatr_forward(base, emb, graph, cfg, params).output);
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const auto g = tt::random_transform(rng, 1.0, true);
    Tape t;
    const Mat out_g = t.val(
        vwss::net::gatr_forward(t, apply_rho(g, emb, vwss::desc::kEmbeddingChannels), graph, cfg,
                                params)
            .output);
    worst = std::max(worst, rel_deviation(out_g, apply_rho(g, out, cfg.timepoints)));
  }
  EXPECT_LT(worst, 1e-8);
}

TEST(Equivariance, DropoutForwardStillCommutes) {
  tt::Rng rng(87);
  auto cfg = tiny_gatr();
  cfg.dropout = 0.3;
  const auto params = vwss::net::init_gatr_params(cfg, 14);
  const int n = 14;
  const Eigen::MatrixXd pts = random_cloud(rng, n);
  const auto graph = vwss::net::build_sample_graph(vwss::mesh::PointCloud(pts), cfg.rate, cfg.k,
                                                   cfg.eps, 3);
  tt::Rng drop_rng(99);
  const auto plan = vwss::net::make_gatr_dropout_plan(
      cfg, n, static_cast<int>(graph.token_idx.size()), drop_rng);
  const Mat emb = tt::random_matrix(rng, n, 16 * vwss::desc::kEmbeddingChannels);

  Tape base;
  const Mat out = base.val(vwss::net::gatr_forward(base, emb, graph, cfg, params, &plan).output);
  for (int trial = 0; trial < 5; ++trial) {
    const auto g = tt::random_transform(rng, 1.0, true);
    Tape t;
    const Mat out_g = t.val(
        vwss::net::gatr_forward(t, apply_rho(g, emb, vwss::desc::kEmbeddingChannels), graph, cfg,
                                params, &plan)
            .output);
    EXPECT_LT(rel_deviation(out_g, apply_rho(g, out, cfg.timepoints)), 1e-8);
  }
}

TEST(Equivariance, PredictionRotatesWithTheGeometry) {
  tt::Rng rng(88);
  const auto cfg = tiny_gatr();
  const auto params = vwss::net::init_gatr_params(cfg, 15);
  const auto d = random_descriptors(rng, 24);
  const vwss::desc::FeatureStats stats;

  const auto base = vwss::net::gatr_predict(d, stats, cfg, params, 5);

  const Eigen::Matrix3d r = tt::random_rotation(rng);
  const Eigen::RowVector3d shift(4.0, -2.0, 7.5);
  vwss::desc::DescriptorSet dr = d;
  dr.coords = (d.coords * r.transpose()).rowwise() + shift;
  dr.normals = d.normals * r.transpose();
  dr.flow_prior = d.flow_prior * r.transpose();
  const auto moved = vwss::net::gatr_predict(dr, stats, cfg, params, 5);

  double worst = 0.0;
  for (int p = 0; p < base.n_points(); ++p)
    for (int tc = 0; tc < cfg.timepoints; ++tc)
      worst = std::max(worst, (moved.at(p, tc) - r * base.at(p, tc)).norm());
  EXPECT_LT(worst, 1e-9);
}

TEST(Equivariance, ScalarBaselineViolatesEquivariance) {
  tt::Rng rng(89);
  const auto cfg = tiny_vatr();
  const auto params = vwss::net::init_vatr_params(cfg, 21);
  const auto d = random_descriptors(rng, 24);
  const vwss::desc::FeatureStats stats;

  const auto base = vwss::net::vatr_predict(d, stats, cfg, params, 5);

  double worst_violation = 1e9;
  for (int trial = 0; trial < 5; ++trial) {
    const Eigen::Matrix3d r = tt::random_rotation(rng);
    vwss::desc::DescriptorSet dr = d;
    dr.coords = d.coords * r.transpose();
    dr.normals = d.normals * r.transpose();
    dr.flow_prior = d.flow_prior * r.transpose();
    const auto moved = vwss::net::vatr_predict(dr, stats, cfg, params, 5);

    double dev = 0.0, mag = 0.0;
    for (int p = 0; p < base.n_points(); ++p)
      for (int tc = 0; tc < cfg.timepoints; ++tc) {
        dev += (moved.at(p, tc) - r * base.at(p, tc)).squaredNorm();
        mag += base.at(p, tc).squaredNorm();
      }
    worst_violation = std::min(worst_violation, std::sqrt(dev / mag));
  }
  EXPECT_GT(worst_violation, 1e-2);
}

TEST(Equivariance, PermutingThePointsPermutesTheOutput) {
  tt::Rng rng(90);
  const auto cfg = tiny_gatr();
  const auto params = vwss::net::init_gatr_params(cfg, 16);
  const int n = 16;
  const Eigen::MatrixXd pts = random_cloud(rng, n);
  const auto graph = vwss::net::build_sample_graph(vwss::mesh::PointCloud(pts), cfg.rate, cfg.k,
                                                   cfg.eps, 29);
  const Mat emb = tt::random_matrix(rng, n, 16 * vwss::desc::kEmbeddingChannels);

  std::vector<int> src(n);
  for (int i = 0; i < n; ++i) src[static_cast<size_t>(i)] = i;
  std::shuffle(src.begin(), src.end(), rng);
  Eigen::SparseMatrix<double> perm(n, n);
  std::vector<Eigen::Triplet<double>> trips;
  for (int i = 0; i < n; ++i) trips.emplace_back(i, src[static_cast<size_t>(i)], 1.0);
  perm.setFromTriplets(trips.begin(), trips.end());

  vwss::net::SampleGraph pg = graph;
  pg.select = (graph.select * perm.transpose()).pruned();
  pg.interp = (perm * graph.interp).pruned();
  Mat pemb(n, emb.cols());
  for (int i = 0; i < n; ++i) pemb.row(i) = emb.row(src[static_cast<size_t>(i)]);

  Tape ta, tb;
  const Mat out = ta.val(vwss::net::gatr_forward(ta, emb, graph, cfg, params).output);
  const Mat pout = tb.val(vwss::net::gatr_forward(tb, pemb, pg, cfg, params).output);
  for (int i = 0; i < n; ++i)
    EXPECT_LT((pout.row(i) - out.row(src[static_cast<size_t>(i)])).norm(), 1e-12);
}

// ---------------------------------------------------------------------------------
// decode
// ---------------------------------------------------------------------------------

TEST(Decode, ScalarMagnitudeTimesUnitPlaneNormal) {
  Mat out = Mat::Zero(1, 16);
  out(0, vwss::ga::kSlotScalar) = 2.0;
  out(0, vwss::ga::kSlotE3) = 5.0;
  const auto f = vwss::net::decode_wss(out, 1);
  EXPECT_EQ(f.at(0, 0), Eigen::Vector3d(0.0, 0.0, 2.0));

  out(0, vwss::ga::kSlotScalar) = 0.0;
  EXPECT_EQ(vwss::net::decode_wss(out, 1).at(0, 0), Eigen::Vector3d::Zero());

  out(0, vwss::ga::kSlotScalar) = 3.0;
  out(0, vwss::ga::kSlotE3) = 0.0;
  EXPECT_EQ(vwss::net::decode_wss(out, 1).at(0, 0), Eigen::Vector3d::Zero());

  out(0, vwss::ga::kSlotScalar) = -2.0;
  out(0, vwss::ga::kSlotE3) = 5.0;
  EXPECT_EQ(vwss::net::decode_wss(out, 1).at(0, 0), Eigen::Vector3d(0.0, 0.0, -2.0));
}

TEST(Decode, CovariantUnderRigidMotion) {
  tt::Rng rng(91);
  const int n = 6, timepoints = 3;
  const Mat out = tt::random_matrix(rng, n, 16 * timepoints);
  const auto base = vwss::net::decode_wss(out, timepoints);
  for (int trial = 0; trial < 5; ++trial) {
    const auto g = tt::random_transform(rng, 2.0, false); // proper rigid motion
    const auto moved = vwss::net::decode_wss(apply_rho(g, out, timepoints), timepoints);
    for (int p = 0; p < n; ++p)
      for (int tc = 0; tc < timepoints; ++tc)
        EXPECT_LT((moved.at(p, tc) - g.rotation * base.at(p, tc)).norm(), 1e-10);
  }
}

// ---------------------------------------------------------------------------------
// gradients against central finite differences
// ---------------------------------------------------------------------------------

TEST(Gradients, QuadraticFormIsExact) {
  tt::Rng rng(101);
  const Mat x = tt::random_matrix(rng, 1, 3);
  const Mat w = tt::random_matrix(rng, 3, 3);
  const Mat c = tt::random_matrix(rng, 1, 3);
  Tape t;
  const Tape::Id xi = t.input(x), wi = t.input(w);
  const Tape::Id loss = t.dot_const(t.matmul(xi, wi), c);
  t.backward(loss);
  EXPECT_LT((t.grad(xi) - c * w.transpose()).norm(), 1e-14);
  EXPECT_LT((t.grad(wi) - x.transpose() * c).norm(), 1e-14);
}

TEST(Gradients, EquivariantLinearMatchesFiniteDifferences) {
  tt::Rng rng(102);
  const int n = 4, c_in = 2, c_out = 3;
  const Mat x = tt::random_matrix(rng, n, 16 * c_in);
  const Mat w = tt::random_matrix(rng, 9 * c_in, c_out, 0.5);
  const Mat probe = tt::random_matrix(rng, n, 16 * c_out);

  Tape t;
  const Tape::Id xi = t.input(x), wi = t.input(w);
  t.backward(t.dot_const(t.equi_linear(xi, wi, c_in), probe));
  const Mat dx = t.grad(xi), dw = t.grad(wi);

  auto loss_x = [&](const Mat& v) {
    Tape s;
    return s.val(s.dot_const(s.equi_linear(s.input(v), s.input(w), c_in), probe))(0, 0);
  };
  auto loss_w = [&](const Mat& v) {
    Tape s;
    return s.val(s.dot_const(s.equi_linear(s.input(x), s.input(v), c_in), probe))(0, 0);
  };
  EXPECT_LT(fd_worst_error(loss_x, x, dx, rng), 1e-5);
  EXPECT_LT(fd_worst_error(loss_w, w, dw, rng), 1e-5);
}

TEST(Gradients, LayerNormMatchesFiniteDifferences) {
  tt::Rng rng(103);
  const int n = 4, c = 3;
  const Mat x = tt::random_matrix(rng, n, 16 * c);
  const Mat probe = tt::random_matrix(rng, n, 16 * c);
  Tape t;
  const Tape::Id xi = t.input(x);
  t.backward(t.dot_const(t.layernorm_mv(xi, c), probe));
  auto loss = [&](const Mat& v) {
    Tape s;
    return s.val(s.dot_const(s.layernorm_mv(s.input(v), c), probe))(0, 0);
  };
  EXPECT_LT(fd_worst_error(loss, x, t.grad(xi), rng), 1e-5);
}

TEST(Gradients, GeometricProductMatchesFiniteDifferences) {
  tt::Rng rng(104);
  const int n = 3, c = 2;
  const Mat x = tt::random_matrix(rng, n, 16 * c);
  const Mat y = tt::random_matrix(rng, n, 16 * c);
  const Mat probe = tt::random_matrix(rng, n, 16 * c);
  Tape t;
  const Tape::Id xi = t.input(x), yi = t.input(y);
  t.backward(t.dot_const(t.geometric_product(xi, yi, c), probe));
  auto loss_x = [&](const Mat& v) {
    Tape s;
    return s.val(s.dot_const(s.geometric_product(s.input(v), s.input(y), c), probe))(0, 0);
  };
  auto loss_y = [&](const Mat& v) {
    Tape s;
    return s.val(s.dot_const(s.geometric_product(s.input(x), s.input(v), c), probe))(0, 0);
  };
  EXPECT_LT(fd_worst_error(loss_x, x, t.grad(xi), rng), 1e-5);
  EXPECT_LT(fd_worst_error(loss_y, y, t.grad(yi), rng), 1e-5);
}

TEST(Gradients, GatedGeluAndScalarSlotsMatchFiniteDifferences) {
  tt::Rng rng(105);
  const int n = 4, c = 3;
  const Mat x = tt::random_matrix(rng, n, 16 * c);
  const Mat probe = tt::random_matrix(rng, n, 16 * c);
  const Mat w = tt::random_matrix(rng, c, c);
  const Mat probe_s = tt::random_matrix(rng, n, c);
  // gate aliased to the batch itself so both pull-backs accumulate into x;
  // the scalar-slot gather feeds a plain matmul
  auto build = [&](Tape& s, Tape::Id xi) {
    const Tape::Id a = s.dot_const(s.gated_gelu(xi, xi, c), probe);
    const Tape::Id b = s.dot_const(s.matmul(s.scalar_slots(xi, c), s.input(w)), probe_s);
    return s.add(a, b);
  };
  Tape t;
  const Tape::Id xi = t.input(x);
  t.backward(build(t, xi));
  auto loss = [&](const Mat& v) {
    Tape s;
    const Tape::Id vi = s.input(v);
    return s.val(build(s, vi))(0, 0);
  };
  EXPECT_LT(fd_worst_error(loss, x, t.grad(xi), rng), 1e-5);
}

TEST(Gradients, SoftmaxAttentionStackMatchesFiniteDifferences) {
  tt::Rng rng(106);
  const int n = 5, m = 3, d = 4;
  const Mat q = tt::random_matrix(rng, m, d);
  const Mat k = tt::random_matrix(rng, n, d);
  const Mat v = tt::random_matrix(rng, n, d);
  const Mat probe = tt::random_matrix(rng, m, d);
  auto build = [&](Tape& s, Tape::Id qi, Tape::Id ki, Tape::Id vi) {
    return s.dot_const(s.matmul(s.row_softmax(s.scale(s.matmul_nt(qi, ki), 0.5)), vi), probe);
  };
  Tape t;
  const Tape::Id qi = t.input(q), ki = t.input(k), vi = t.input(v);
  t.backward(build(t, qi, ki, vi));
  auto loss_q = [&](const Mat& u) {
    Tape s;
    return s.val(build(s, s.input(u), s.input(k), s.input(v)))(0, 0);
  };
  auto loss_k = [&](const Mat& u) {
    Tape s;
    return s.val(build(s, s.input(q), s.input(u), s.input(v)))(0, 0);
  };
  auto loss_v = [&](const Mat& u) {
    Tape s;
    return s.val(build(s, s.input(q), s.input(k), s.input(u)))(0, 0);
  };
  EXPECT_LT(fd_worst_error(loss_q, q, t.grad(qi), rng), 1e-5);
  EXPECT_LT(fd_worst_error(loss_k, k, t.grad(ki), rng), 1e-5);
  EXPECT_LT(fd_worst_error(loss_v, v, t.grad(vi), rng), 1e-5);
}

TEST(Gradients, ScalarStackMatchesFiniteDifferences) {
  tt::Rng rng(107);
  const int n = 5, d = 6;
  const Mat x = tt::random_matrix(rng, n, d);
  const Mat b = tt::random_matrix(rng, 1, d);
  const Mat probe = tt::random_matrix(rng, n, d);
  tt::Rng mask_rng(3);
  const Mat mask = vwss::net::channel_dropout_mask(mask_rng, n, d, 0.3, 1);
  auto build = [&](Tape& s, Tape::Id xi, Tape::Id bi) {
    return s.dot_const(s.mul_const(s.gelu(s.row_layernorm(s.add_bias(xi, bi))), mask), probe);
  };
  Tape t;
  const Tape::Id xi = t.input(x), bi = t.input(b);
  t.backward(build(t, xi, bi));
  auto loss_x = [&](const Mat& u) {
    Tape s;
    return s.val(build(s, s.input(u), s.input(b)))(0, 0);
  };
  auto loss_b = [&](const Mat& u) {
    Tape s;
    return s.val(build(s, s.input(x), s.input(u)))(0, 0);
  };
  EXPECT_LT(fd_worst_error(loss_x, x, t.grad(xi), rng), 1e-5);
  EXPECT_LT(fd_worst_error(loss_b, b, t.grad(bi), rng), 1e-5);
}

TEST(Gradients, ShapingAndSparseOpsMatchFiniteDifferences) {
  tt::Rng rng(108);
  const int n = 6, d = 8;
  const Mat x = tt::random_matrix(rng, n, d);
  Eigen::SparseMatrix<double> w(4, n);
  std::vector<Eigen::Triplet<double>> trips;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 3; ++j) trips.emplace_back(i, (i + j * 2) % n, tt::rnorm(rng));
  w.setFromTriplets(trips.begin(), trips.end());
  const Mat probe = tt::random_matrix(rng, 4, d);
  auto build = [&](Tape& s, Tape::Id xi) {
    const Tape::Id left = s.slice_cols(xi, 0, d / 2);
    const Tape::Id right = s.slice_cols(xi, d / 2, d / 2);
    return s.dot_const(s.spmm_const(w, s.concat_cols({right, left})), probe);
  };
  Tape t;
  const Tape::Id xi = t.input(x);
  t.backward(build(t, xi));
  auto loss = [&](const Mat& u) {
    Tape s;
    return s.val(build(s, s.input(u)))(0, 0);
  };
  EXPECT_LT(fd_worst_error(loss, x, t.grad(xi), rng), 1e-5);
}

TEST(Gradients, SupervisionLossMatchesFiniteDifferences) {
  tt::Rng rng(109);
  const int n = 5, timepoints = 2;
  const Mat y = tt::random_matrix(rng, n, 16 * timepoints);
  const Mat target = tt::random_matrix(rng, n, 3 * timepoints);
  Tape t;
  const Tape::Id yi = t.input(y);
  t.backward(t.wss_loss(yi, target, timepoints, 0.1));
  auto loss = [&](const Mat& u) {
    Tape s;
    return s.val(s.wss_loss(s.input(u), target, timepoints, 0.1))(0, 0);
  };
  EXPECT_LT(fd_worst_error(loss, y, t.grad(yi), rng, 60), 1e-5);
}

TEST(Gradients, FullModelParametersMatchFiniteDifferences) {
  tt::Rng rng(110);
  auto cfg = tiny_gatr(1);
  const auto params = vwss::net::init_gatr_params(cfg, 77);
  const int n = 12;
  const Eigen::MatrixXd pts = random_cloud(rng, n);
  const auto graph =
      vwss::net::build_sample_graph(vwss::mesh::PointCloud(pts), cfg.rate, cfg.k, cfg.eps, 5);
  const Mat emb = tt::random_matrix(rng, n, 16 * vwss::desc::kEmbeddingChannels);
  const Mat target = tt::random_matrix(rng, n, 3);

  auto loss_with = [&](const vwss::net::ParamSet& p, Mat* grad_of = nullptr,
                       const std::string& which = "") {
    Tape t;
    const auto fg = vwss::net::gatr_forward(t, emb, graph, cfg, p);
    const Tape::Id loss = t.wss_loss(fg.output, target, cfg.timepoints, 0.1);
    if (grad_of != nullptr) {
      t.backward(loss);
      *grad_of = t.grad(fg.params.at(which));
    }
    return t.val(loss)(0, 0);
  };

  for (const std::string name : {"input", "tok.attn.q", "tok.mlp.left", "blk1.attn.out",
                                 "blk1.mlp.gate", "psi.pre", "decode"}) {
    Mat analytic;
    loss_with(params, &analytic, name);
    auto loss_of = [&](const Mat& v) {
      vwss::net::ParamSet p = params;
      p[name] = v;
      return loss_with(p);
    };
    // smaller step: the supervision loss at the end of the chain has curvature
    // of order 1/|direction|, so truncation at 1e-4 is not negligible
    EXPECT_LT(fd_worst_error(loss_of, params.at(name), analytic, rng, 8, 2e-5), 1e-5)
        << "tensor " << name;
  }
}

TEST(Gradients, ScalarBaselineParametersMatchFiniteDifferences) {
  tt::Rng rng(111);
  auto cfg = tiny_vatr(1);
  const auto params = vwss::net::init_vatr_params(cfg, 78);
  const auto d = random_descriptors(rng, 12);
  const vwss::desc::FeatureStats stats;
  const Mat feats = vwss::net::vatr_features(d, stats);
  const auto graph =
      vwss::net::build_sample_graph(vwss::mesh::PointCloud(d.coords), cfg.rate, cfg.k, cfg.eps, 5);
  const Mat probe = tt::random_matrix(rng, 12, 3);

  auto loss_with = [&](const vwss::net::ParamSet& p, Mat* grad_of = nullptr,
                       const std::string& which = "") {
    Tape t;
    const auto fg = vwss::net::vatr_forward(t, feats, graph, cfg, p);
    const Tape::Id loss = t.dot_const(fg.output, probe);
    if (grad_of != nullptr) {
      t.backward(loss);
      *grad_of = t.grad(fg.params.at(which));
    }
    return t.val(loss)(0, 0);
  };

  for (const std::string name : {"input.w", "tok.attn.q.w", "blk1.mlp.1.b", "head.w"}) {
    Mat analytic;
    loss_with(params, &analytic, name);
    auto loss_of = [&](const Mat& v) {
      vwss::net::ParamSet p = params;
      p[name] = v;
      return loss_with(p);
    };
    EXPECT_LT(fd_worst_error(loss_of, params.at(name), analytic, rng, 8), 1e-5)
        << "tensor " << name;
  }
}

// ---------------------------------------------------------------------------------
// supervision loss semantics
// ---------------------------------------------------------------------------------

TEST(Loss, PerfectPredictionHasZeroLossAndZeroGradient) {
  tt::Rng rng(120);
  const int n = 6, timepoints = 2;
  const Mat target = tt::random_matrix(rng, n, 3 * timepoints);
  Mat y = Mat::Zero(n, 16 * timepoints);
  for (int p = 0; p < n; ++p)
    for (int tc = 0; tc < timepoints; ++tc) {
      const Eigen::Vector3d tau = target.row(p).segment<3>(3 * tc);
      y(p, 16 * tc + vwss::ga::kSlotScalar) = tau.norm();
      y(p, 16 * tc + vwss::ga::kSlotE1) = tau.x();
      y(p, 16 * tc + vwss::ga::kSlotE2) = tau.y();
      y(p, 16 * tc + vwss::ga::kSlotE3) = tau.z();
    }
  Tape t;
  const Tape::Id yi = t.input(y);
  vwss::net::WssLossParts parts;
  const Tape::Id loss = t.wss_loss(yi, target, timepoints, 0.1, &parts);
  EXPECT_LT(t.val(loss)(0, 0), 1e-12);
  EXPECT_EQ(parts.angle_pairs, n * timepoints);
  t.backward(loss);
  EXPECT_LT(t.grad(yi).norm(), 1e-12);
}

TEST(Loss, AntiparallelPredictionScoresTwo) {
  const int n = 4;
  Mat target(n, 3);
  Mat y = Mat::Zero(n, 16);
  for (int p = 0; p < n; ++p) {
    target.row(p) << 1.0, 2.0, 2.0;
    y(p, vwss::ga::kSlotScalar) = 3.0; // magnitudes agree, directions opposite
    y(p, vwss::ga::kSlotE1) = -1.0;
    y(p, vwss::ga::kSlotE2) = -2.0;
    y(p, vwss::ga::kSlotE3) = -2.0;
  }
  Tape t;
  vwss::net::WssLossParts parts;
  const Tape::Id loss = t.wss_loss(t.input(y), target, 1, 0.1, &parts);
  EXPECT_NEAR(t.val(loss)(0, 0), 2.0, 1e-14);
  EXPECT_NEAR(parts.angle, 2.0, 1e-14);
  EXPECT_NEAR(parts.magnitude, 0.0, 1e-14);
}

TEST(Loss, InvariantUnderSimultaneousRotation) {
  tt::Rng rng(121);
  const int n = 7, timepoints = 2;
  const Mat y = tt::random_matrix(rng, n, 16 * timepoints);
  const Mat target = tt::random_matrix(rng, n, 3 * timepoints);
  Tape ta;
  const double base = ta.val(ta.wss_loss(ta.input(y), target, timepoints, 0.1))(0, 0);
  for (int trial = 0; trial < 5; ++trial) {
    const Eigen::Matrix3d r = tt::random_rotation(rng);
    Mat yr = y;
    Mat tr = target;
    for (int p = 0; p < n; ++p)
      for (int tc = 0; tc < timepoints; ++tc) {
        const Eigen::Vector3d dir(y(p, 16 * tc + 2), y(p, 16 * tc + 3), y(p, 16 * tc + 4));
        yr.row(p).segment<3>(16 * tc + 2) = (r * dir).transpose();
        tr.row(p).segment<3>(3 * tc) =
            (r * Eigen::Vector3d(target.row(p).segment<3>(3 * tc).transpose())).transpose();
      }
    Tape tb;
    EXPECT_NEAR(tb.val(tb.wss_loss(tb.input(yr), tr, timepoints, 0.1))(0, 0), base, 1e-12);
  }
}

TEST(Loss, ZeroTargetsAreExcludedFromTheAngleTerm) {
  Mat target = Mat::Zero(2, 3);
  target.row(0) << 0.0, 0.0, 2.0;
  Mat y = Mat::Zero(2, 16);
  y(0, vwss::ga::kSlotScalar) = 2.0;
  y(0, vwss::ga::kSlotE3) = 1.0;
  y(1, vwss::ga::kSlotScalar) = 0.5; // target zero: magnitude error 0.5, no angle pair
  y(1, vwss::ga::kSlotE1) = 1.0;
  Tape t;
  vwss::net::WssLossParts parts;
  const Tape::Id loss = t.wss_loss(t.input(y), target, 1, 0.1, &parts);
  EXPECT_EQ(parts.angle_pairs, 1);
  EXPECT_NEAR(parts.angle, 0.0, 1e-14);
  EXPECT_NEAR(parts.magnitude, 0.25, 1e-14);
  EXPECT_NEAR(t.val(loss)(0, 0), 0.025, 1e-14);
}

// ---------------------------------------------------------------------------------
// dropout plans
// ---------------------------------------------------------------------------------

TEST(Dropout, MasksZeroWholeChannelsWithInvertedScaling) {
  tt::Rng rng(130);
  const double p = 0.25;
  const Mat mask = vwss::net::channel_dropout_mask(rng, 50, 4, p, 16);
  ASSERT_EQ(mask.rows(), 50);
  ASSERT_EQ(mask.cols(), 64);
  const double keep = 1.0 / (1.0 - p);
  int dropped = 0;
  for (int i = 0; i < mask.rows(); ++i)
    for (int ch = 0; ch < 4; ++ch) {
      const double v = mask(i, 16 * ch);
      EXPECT_TRUE(v == 0.0 || std::abs(v - keep) < 1e-15);
      for (int s = 1; s < 16; ++s) EXPECT_EQ(mask(i, 16 * ch + s), v);
      if (v == 0.0) ++dropped;
    }
  EXPECT_NEAR(static_cast<double>(dropped) / 200.0, p, 0.1);
}

TEST(Dropout, PlanIsDeterministicInTheSeed) {
  auto cfg = tiny_gatr();
  cfg.dropout = 0.4;
  tt::Rng a(7), b(7), c(8);
  const auto pa = vwss::net::make_gatr_dropout_plan(cfg, 20, 10, a);
  const auto pb = vwss::net::make_gatr_dropout_plan(cfg, 20, 10, b);
  const auto pc = vwss::net::make_gatr_dropout_plan(cfg, 20, 10, c);
  ASSERT_EQ(pa.masks.size(), static_cast<size_t>(cfg.blocks) + 1);
  for (size_t i = 0; i < pa.masks.size(); ++i) {
    EXPECT_EQ(pa.masks[i], pb.masks[i]);
  }
  EXPECT_NE(pa.masks[0], pc.masks[0]);
}

// ---------------------------------------------------------------------------------
// initialisation and determinism
// ---------------------------------------------------------------------------------

TEST(Params, InitialisationIsDeterministicAndVariancePreserving) {
  const auto cfg = tiny_gatr();
  const auto a = vwss::net::init_gatr_params(cfg, 42);
  const auto b = vwss::net::init_gatr_params(cfg, 42);
  const auto c = vwss::net::init_gatr_params(cfg, 43);
  ASSERT_EQ(a.size(), b.size());
  for (const auto& [name, m] : a) {
    EXPECT_EQ(m, b.at(name)) << name;
  }
  EXPECT_NE(a.at("input"), c.at("input"));

  // the rescaled map keeps unit-variance inputs at unit output scale
  const double s = vwss::net::equi_output_std(a.at("tok.attn.q"), cfg.channels);
  EXPECT_NEAR(s, 1.0, 1e-9);
}

TEST(Params, ShapeCheckNamesTheProblem) {
  const auto cfg = tiny_gatr();
  auto params = vwss::net::init_gatr_params(cfg, 1);
  const auto shapes = vwss::net::gatr_param_shapes(cfg);

  auto broken = params;
  broken.erase("decode");
  EXPECT_THROW(vwss::net::check_param_shapes(broken, shapes), std::invalid_argument);

  broken = params;
  broken["decode"] = Mat::Zero(3, 3);
  EXPECT_THROW(vwss::net::check_param_shapes(broken, shapes), std::invalid_argument);

  broken = params;
  broken["extra"] = Mat::Zero(1, 1);
  EXPECT_THROW(vwss::net::check_param_shapes(broken, shapes), std::invalid_argument);
}

TEST(Params, ForwardIsDeterministic) {
  tt::Rng rng(140);
  const auto cfg = tiny_gatr();
  const auto params = vwss::net::init_gatr_params(cfg, 9);
  const auto d = random_descriptors(rng, 20);
  const vwss::desc::FeatureStats stats;
  const auto a = vwss::net::gatr_predict(d, stats, cfg, params, 3);
  const auto b = vwss::net::gatr_predict(d, stats, cfg, params, 3);
  EXPECT_EQ(a.tau, b.tau);
}

TEST(Params, SingleTokenGraphStillRuns) {
  tt::Rng rng(141);
  auto cfg = tiny_gatr();
  cfg.rate = 0.125;
  cfg.k = 1;
  cfg.heads = 1;
  cfg.channels = 4;
  const auto params = vwss::net::init_gatr_params(cfg, 10);
  const Eigen::MatrixXd pts = random_cloud(rng, 8);
  const auto graph =
      vwss::net::build_sample_graph(vwss::mesh::PointCloud(pts), cfg.rate, cfg.k, cfg.eps, 1);
  ASSERT_EQ(graph.token_idx.size(), 1u);
  const Mat emb = tt::random_matrix(rng, 8, 16 * vwss::desc::kEmbeddingChannels);
  Tape t;
  const auto fg = vwss::net::gatr_forward(t, emb, graph, cfg, params);
  EXPECT_TRUE(t.val(fg.output).allFinite());
}

TEST(Params, ConfigValidationRejectsBadValues) {
  vwss::net::GatrConfig cfg;
  cfg.heads = 3; // does not divide channels = 8
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg = {};
  cfg.rate = 0.0;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg = {};
  cfg.dropout = 1.0;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  vwss::net::VatrConfig vc;
  vc.hidden = 130; // not divisible by 4 heads
  EXPECT_THROW(vc.validate(), std::invalid_argument);
}

// ---------------------------------------------------------------------------------
// scalar baseline plumbing
// ---------------------------------------------------------------------------------

TEST(Vatr, ForwardShapesAndDecode) {
  tt::Rng rng(150);
  const auto cfg = tiny_vatr(3);
  const auto params = vwss::net::init_vatr_params(cfg, 2);
  const auto d = random_descriptors(rng, 15);
  const vwss::desc::FeatureStats stats;
  const auto f = vwss::net::vatr_predict(d, stats, cfg, params, 1);
  EXPECT_EQ(f.n_points(), 15);
  EXPECT_EQ(f.timepoints, 3);
  EXPECT_TRUE(f.tau.allFinite());
}

TEST(Vatr, FeatureMatrixLayout) {
  tt::Rng rng(151);
  const auto d = random_descriptors(rng, 9);
  vwss::desc::FeatureStats stats;
  stats.mean << 1.0, 2.0, 0.0, 0.0, 40.0;
  stats.std << 2.0, 4.0, 1.0, 1.0, 10.0;
  const Mat f = vwss::net::vatr_features(d, stats);
  ASSERT_EQ(f.cols(), 14);
  const Eigen::RowVector3d centroid = d.coords.colwise().mean();
  EXPECT_LT((f.middleCols(0, 3) - (d.coords.rowwise() - centroid)).norm(), 1e-14);
  EXPECT_LT((f.middleCols(3, 3) - d.normals).norm(), 1e-14);
  EXPECT_NEAR(f(4, 9), (d.geo_inlet[4] - 1.0) / 2.0, 1e-14);
  EXPECT_NEAR(f(7, 13), (d.v_max - 40.0) / 10.0, 1e-14);
}

// ---------------------------------------------------------------------------------
// checkpoints
// ---------------------------------------------------------------------------------

TEST(Checkpoint, DoublePrecisionRoundTripIsExact) {
  const auto cfg = tiny_gatr();
  vwss::net::ModelCheckpoint ckpt;
  ckpt.kind = vwss::net::ModelKind::kGatr;
  ckpt.gatr = cfg;
  ckpt.stats.mean << 1.0, 2.0, 3.0, 4.0, 5.0;
  ckpt.stats.std << 0.5, 1.5, 2.5, 3.5, 4.5;
  ckpt.params = vwss::net::init_gatr_params(cfg, 31);

  const std::string path = ::testing::TempDir() + "/model_f64.ckpt";
  vwss::net::save_checkpoint(path, ckpt, vwss::io::Precision::kF64);
  const auto loaded = vwss::net::load_checkpoint(path);

  EXPECT_EQ(loaded.kind, vwss::net::ModelKind::kGatr);
  EXPECT_EQ(loaded.gatr.blocks, cfg.blocks);
  EXPECT_EQ(loaded.gatr.channels, cfg.channels);
  EXPECT_EQ(loaded.gatr.timepoints, cfg.timepoints);
  EXPECT_EQ(loaded.stats.mean, ckpt.stats.mean);
  EXPECT_EQ(loaded.stats.std, ckpt.stats.std);
  ASSERT_EQ(loaded.params.size(), ckpt.params.size());
  for (const auto& [name, m] : ckpt.params) EXPECT_EQ(loaded.params.at(name), m) << name;
}

TEST(Checkpoint, ResaveIsByteIdentical) {
  const auto cfg = tiny_gatr();
  vwss::net::ModelCheckpoint ckpt;
  ckpt.gatr = cfg;
  ckpt.params = vwss::net::init_gatr_params(cfg, 32);

  const std::string p1 = ::testing::TempDir() + "/model_a.ckpt";
  const std::string p2 = ::testing::TempDir() + "/model_b.ckpt";
  vwss::net::save_checkpoint(p1, ckpt, vwss::io::Precision::kF64);
  vwss::net::save_checkpoint(p2, vwss::net::load_checkpoint(p1), vwss::io::Precision::kF64);

  std::ifstream a(p1, std::ios::binary), b(p2, std::ios::binary);
  const std::string sa((std::istreambuf_iterator<char>(a)), std::istreambuf_iterator<char>());
  const std::string sb((std::istreambuf_iterator<char>(b)), std::istreambuf_iterator<char>());
  EXPECT_EQ(sa, sb);
}

TEST(Checkpoint, SinglePrecisionKeepsSixDigits) {
  const auto cfg = tiny_vatr();
  vwss::net::ModelCheckpoint ckpt;
  ckpt.kind = vwss::net::ModelKind::kVatr;
  ckpt.vatr = cfg;
  ckpt.params = vwss::net::init_vatr_params(cfg, 33);

  const std::string path = ::testing::TempDir() + "/model_f32.ckpt";
  vwss::net::save_checkpoint(path, ckpt, vwss::io::Precision::kF32);
  const auto loaded = vwss::net::load_checkpoint(path);
  EXPECT_EQ(loaded.kind, vwss::net::ModelKind::kVatr);
  for (const auto& [name, m] : ckpt.params) {
    const Mat& l = loaded.params.at(name);
    const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
    EXPECT_LT((l - m).cwiseAbs().maxCoeff() / scale, 1e-6) << name;
  }
}

TEST(Checkpoint, RejectsDamagedFiles) {
  EXPECT_THROW(vwss::net::load_checkpoint(::testing::TempDir() + "/does_not_exist.ckpt"),
               std::runtime_error);

  const std::string garbage = ::testing::TempDir() + "/garbage.ckpt";
  {
    std::ofstream out(garbage, std::ios::binary);
    out << "not a checkpoint at all";
  }
  EXPECT_THROW(vwss::net::load_checkpoint(garbage), std::runtime_error);

  // valid file truncated mid-tensor
  const auto cfg = tiny_gatr();
  vwss::net::ModelCheckpoint ckpt;
  ckpt.gatr = cfg;
  ckpt.params = vwss::net::init_gatr_params(cfg, 34);
  const std::string full = ::testing::TempDir() + "/full.ckpt";
  vwss::net::save_checkpoint(full, ckpt);
  std::ifstream in(full, std::ios::binary);
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  in.close();
  const std::string cut = ::testing::TempDir() + "/cut.ckpt";
  {
    std::ofstream out(cut, std::ios::binary);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size() - 64));
  }
  EXPECT_THROW(vwss::net::load_checkpoint(cut), std::runtime_error);
}
