#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "json.hpp"
#include "support/test_util.hpp"
#include "vwss/train/adam.hpp"
#include "vwss/train/dataset.hpp"
#include "vwss/train/trainer.hpp"

namespace tt = vwss::testing;
using vwss::net::Mat;
using vwss::net::Tape;

namespace {

vwss::net::GatrConfig tiny_gatr(int timepoints = 1) {
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

vwss::desc::DescriptorSet random_descriptors(tt::Rng& rng, int n) {
  vwss::desc::DescriptorSet d;
  d.coords = tt::random_matrix(rng, n, 3, 10.0);
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

/// Smooth synthetic target: circulation around a fixed axis through the
/// centroid, magnitude growing with radius.
vwss::hemo::TransientWssField smooth_target(const vwss::desc::DescriptorSet& d, int timepoints) {
  const Eigen::RowVector3d centroid = d.coords.colwise().mean();
  const Eigen::Vector3d axis = Eigen::Vector3d(0.3, -0.5, 0.8).normalized();
  vwss::hemo::TransientWssField f(d.n_points(), timepoints);
  for (int p = 0; p < d.n_points(); ++p) {
    const Eigen::Vector3d r = (d.coords.row(p) - centroid).transpose();
    Eigen::Vector3d dir = axis.cross(r);
    if (dir.norm() < 1e-9) dir = axis.unitOrthogonal();
    dir.normalize();
    for (int t = 0; t < timepoints; ++t)
      f.set(p, t, (1.0 + 0.05 * r.norm()) * (1.0 + 0.2 * t) * dir);
  }
  return f;
}

vwss::train::TrainingSample make_sample(tt::Rng& rng, int geometry_id, int sim_id, int n,
                                        int timepoints) {
  vwss::train::TrainingSample s;
  s.geometry_id = geometry_id;
  s.sim_id = sim_id;
  s.descriptors = random_descriptors(rng, n);
  s.target = smooth_target(s.descriptors, timepoints);
  s.target.tau *= (1.0 + 0.1 * sim_id);
  return s;
}

} // namespace

// --- optimizer ---------------------------------------------------------------------

TEST(Optimizer, LearningRateScheduleMatchesClosedForm) {
  vwss::train::TrainerConfig tc;
  EXPECT_DOUBLE_EQ(vwss::train::lr_at_epoch(tc, 0), 3e-4);
  EXPECT_DOUBLE_EQ(vwss::train::lr_at_epoch(tc, 100), 3e-4 * std::pow(0.9989, 100));
  EXPECT_NEAR(vwss::train::lr_at_epoch(tc, 100), 2.686e-4, 1e-6);
}

TEST(Optimizer, ClipRescalesTheJointNormToOne) {
  vwss::net::ParamSet g;
  g["a"] = Mat::Constant(2, 2, 3.0); // norm 6
  g["b"] = Mat::Constant(4, 4, 2.0); // norm 8 -> joint norm 10
  EXPECT_DOUBLE_EQ(vwss::train::global_grad_norm(g), 10.0);
  const double scale = vwss::train::clip_global_norm(g, 1.0);
  EXPECT_DOUBLE_EQ(scale, 0.1);
  EXPECT_NEAR(vwss::train::global_grad_norm(g), 1.0, 1e-15);

  vwss::net::ParamSet small;
  small["a"] = Mat::Constant(1, 1, 0.5);
  EXPECT_DOUBLE_EQ(vwss::train::clip_global_norm(small, 1.0), 1.0);
  EXPECT_DOUBLE_EQ(small["a"](0, 0), 0.5);
}

TEST(Optimizer, AdamStepsMatchHandComputation) {
  vwss::net::ParamSet params;
  params["w"] = Mat::Zero(1, 1);
  vwss::net::ParamSet grads;
  grads["w"] = Mat::Constant(1, 1, 1.0);
  vwss::train::AdamState st;
  const double lr = 0.1, b1 = 0.9, b2 = 0.999, eps = 1e-8;

  vwss::train::adam_update(params, grads, st, lr, b1, b2, eps);
  // m = 0.1, v = 0.001; bias-corrected both exactly 1
  const double step1 = lr * 1.0 / (1.0 + eps);
  EXPECT_NEAR(params["w"](0, 0), -step1, 1e-16);

  vwss::train::adam_update(params, grads, st, lr, b1, b2, eps);
  const double m2 = (0.9 * 0.1 + 0.1) / (1.0 - 0.81);
  const double v2 = (0.999 * 0.001 + 0.001) / (1.0 - 0.999 * 0.999);
  EXPECT_NEAR(params["w"](0, 0), -step1 - lr * m2 / (std::sqrt(v2) + eps), 1e-15);

  grads.erase("w");
  grads["typo"] = Mat::Zero(1, 1);
  EXPECT_THROW(vwss::train::adam_update(params, grads, st, lr), std::invalid_argument);
}

// --- batching ----------------------------------------------------------------------

TEST(Batching, AccumulationReproducesTheConcatenatedBatch) {
  tt::Rng rng(51);
  const auto cfg = tiny_gatr(1);
  const auto params = vwss::net::init_gatr_params(cfg, 3);
  vwss::train::TrainerConfig tc;
  tc.lambda_mag = 0.1;

  vwss::train::Dataset ds;
  ds.push_back(make_sample(rng, 0, 0, 10, 1));
  ds.push_back(make_sample(rng, 1, 0, 14, 1));
  const auto stats = vwss::train::dataset_stats(ds, {0, 1});
  const auto prepared = vwss::train::prepare_samples(ds, {0, 1}, stats,
                                                     vwss::net::ModelKind::kGatr, cfg, 7);

  // reference: loss of the row-concatenated outputs and targets
  auto concat_loss = [&](const vwss::net::ParamSet& p) {
    Mat ystack(24, 16), tstack(24, 3);
    int row = 0;
    for (const auto& ps : prepared) {
      Tape t;
      const auto fg = vwss::net::gatr_forward(t, ps.inputs, ps.graph, cfg, p);
      ystack.middleRows(row, ps.n) = t.val(fg.output);
      tstack.middleRows(row, ps.n) = ps.target;
      row += ps.n;
    }
    Tape t;
    return t.val(t.wss_loss(t.input(ystack), tstack, 1, tc.lambda_mag))(0, 0);
  };

  std::mt19937_64 run_rng(0);
  vwss::net::ParamSet grads;
  vwss::train::detail::LossAccumulator acc;
  const std::vector<const vwss::train::PreparedSample*> batch = {&prepared[0], &prepared[1]};
  ASSERT_TRUE(vwss::train::detail::batch_gradients(batch, cfg, params, tc, run_rng, grads, acc));

  const double batched = acc.l_angle() + tc.lambda_mag * acc.l_magnitude();
  EXPECT_NEAR(batched, concat_loss(params), 1e-13);

  // the accumulated gradient is the gradient of the concatenated loss
  for (const std::string name : {"tok.attn.v", "decode"}) {
    const Mat& g = grads.at(name);
    tt::Rng pick(3);
    for (int probe = 0; probe < 3; ++probe) {
      const int r = static_cast<int>(tt::runif(pick, 0.0, static_cast<double>(g.rows())));
      const int c = static_cast<int>(tt::runif(pick, 0.0, static_cast<double>(g.cols())));
      const double h = 2e-5;
      vwss::net::ParamSet pp = params, pm = params;
      pp[name](r, c) += h;
      pm[name](r, c) -= h;
      const double fd = (concat_loss(pp) - concat_loss(pm)) / (2.0 * h);
      EXPECT_NEAR(fd, g(r, c), 1e-5 * std::max(1.0, std::abs(fd))) << name;
    }
  }
}

// --- training ----------------------------------------------------------------------

TEST(Training, OverfitsOneSample) {
  tt::Rng rng(52);
  const auto cfg = tiny_gatr(1);
  vwss::train::Dataset ds;
  ds.push_back(make_sample(rng, 0, 0, 16, 1));

  vwss::train::TrainerConfig tc;
  tc.epochs = 2000;
  tc.batch_size = 16;
  tc.lr0 = 2e-3;
  tc.lr_decay = 0.999;
  tc.seed = 4;
  const auto result = vwss::train::train(ds, cfg, tc);

  ASSERT_FALSE(result.aborted);
  ASSERT_EQ(result.completed_epochs, 2000);
  EXPECT_LT(result.history.back().l_total, 0.05);
  // the loss actually went down substantially
  EXPECT_LT(result.history.back().l_total, 0.25 * result.history.front().l_total);
}

TEST(Training, RetrainingWithTheSameSeedIsBitIdentical) {
  tt::Rng rng(53);
  auto cfg = tiny_gatr(2);
  cfg.dropout = 0.2; // exercise the stochastic path too
  vwss::train::Dataset ds;
  ds.push_back(make_sample(rng, 0, 0, 10, 2));
  ds.push_back(make_sample(rng, 1, 0, 12, 2));

  vwss::train::TrainerConfig tc;
  tc.epochs = 30;
  tc.batch_size = 2;
  tc.seed = 11;

  const auto a = vwss::train::train(ds, cfg, tc);
  const auto b = vwss::train::train(ds, cfg, tc);
  ASSERT_EQ(a.history.size(), b.history.size());
  for (size_t e = 0; e < a.history.size(); ++e)
    EXPECT_EQ(a.history[e].l_total, b.history[e].l_total);
  for (const auto& [name, m] : a.checkpoint.params)
    EXPECT_EQ(m, b.checkpoint.params.at(name)) << name;

  vwss::train::TrainerConfig other = tc;
  other.seed = 12;
  const auto c = vwss::train::train(ds, cfg, other);
  EXPECT_NE(a.checkpoint.params.at("decode"), c.checkpoint.params.at("decode"));
}

TEST(Training, LossHistoryIsInvariantUnderDatasetRotation) {
  tt::Rng rng(54);
  const auto cfg = tiny_gatr(1);
  vwss::train::Dataset ds;
  ds.push_back(make_sample(rng, 0, 0, 12, 1));

  vwss::train::Dataset rotated = ds;
  const Eigen::Matrix3d r = tt::random_rotation(rng);
  auto& d = rotated[0].descriptors;
  d.coords = d.coords * r.transpose();
  d.normals = d.normals * r.transpose();
  d.flow_prior = d.flow_prior * r.transpose();
  auto& f = rotated[0].target;
  for (int p = 0; p < f.n_points(); ++p) f.set(p, 0, r * ds[0].target.at(p, 0));

  vwss::train::TrainerConfig tc;
  tc.epochs = 3;
  tc.seed = 21;
  const auto a = vwss::train::train(ds, cfg, tc);
  const auto b = vwss::train::train(rotated, cfg, tc);
  ASSERT_EQ(a.history.size(), b.history.size());
  for (size_t e = 0; e < a.history.size(); ++e)
    EXPECT_NEAR(a.history[e].l_total, b.history[e].l_total, 1e-9);
}

TEST(Training, NonFiniteLossAbortsAndRollsBack) {
  tt::Rng rng(55);
  const auto cfg = tiny_gatr(1);
  vwss::train::Dataset ds;
  ds.push_back(make_sample(rng, 0, 0, 10, 1));

  vwss::train::TrainerConfig tc;
  tc.epochs = 10;
  // A step this large drives the parameters to the edge of double range on the
  // first update; momentum pushes them over within a few more epochs.
  tc.lr0 = 1e308;
  tc.seed = 1;
  const auto result = vwss::train::train(ds, cfg, tc);
  EXPECT_TRUE(result.aborted);
  EXPECT_GE(result.completed_epochs, 1);
  EXPECT_LT(result.completed_epochs, 10);
  EXPECT_EQ(result.history.size(), static_cast<size_t>(result.completed_epochs));
  for (const auto& [name, m] : result.checkpoint.params) EXPECT_TRUE(m.allFinite()) << name;
}

TEST(Training, ZeroEpochsReturnsTheInitialParameters) {
  tt::Rng rng(56);
  const auto cfg = tiny_gatr(1);
  vwss::train::Dataset ds;
  ds.push_back(make_sample(rng, 0, 0, 10, 1));

  vwss::train::TrainerConfig tc;
  tc.epochs = 0;
  tc.seed = 33;
  tc.out_dir = ::testing::TempDir() + "/run_zero";
  const auto result = vwss::train::train(ds, cfg, tc);
  EXPECT_FALSE(result.aborted);
  EXPECT_TRUE(result.history.empty());
  const auto init = vwss::net::init_gatr_params(cfg, tc.seed);
  for (const auto& [name, m] : init) EXPECT_EQ(m, result.checkpoint.params.at(name)) << name;
  // the checkpoint is still written so downstream tooling has an artifact
  const auto loaded = vwss::net::load_checkpoint(tc.out_dir + "/model.ckpt");
  EXPECT_EQ(loaded.params.at("decode").rows(), init.at("decode").rows());
}

TEST(Training, RunDirectoryHoldsConfigCurveAndCheckpoint) {
  tt::Rng rng(57);
  const auto cfg = tiny_gatr(1);
  vwss::train::Dataset ds;
  ds.push_back(make_sample(rng, 0, 0, 10, 1));

  vwss::train::TrainerConfig tc;
  tc.epochs = 3;
  tc.seed = 5;
  tc.out_dir = ::testing::TempDir() + "/run_artifacts";
  const auto result = vwss::train::train(ds, cfg, tc);

  std::ifstream cfg_in(tc.out_dir + "/config.json");
  ASSERT_TRUE(cfg_in.good());
  nlohmann::json snapshot;
  cfg_in >> snapshot;
  EXPECT_EQ(snapshot.at("model").at("kind"), "gatr");
  EXPECT_EQ(snapshot.at("trainer").at("epochs").get<int>(), 3);

  std::ifstream csv(tc.out_dir + "/loss.csv");
  ASSERT_TRUE(csv.good());
  std::string line;
  std::getline(csv, line);
  EXPECT_EQ(line, "epoch,l_angle,l_magnitude,l_total,lr");
  int rows = 0;
  while (std::getline(csv, line))
    if (!line.empty()) ++rows;
  EXPECT_EQ(rows, 3);

  const auto loaded = vwss::net::load_checkpoint(tc.out_dir + "/model.ckpt");
  for (const auto& [name, m] : result.checkpoint.params)
    EXPECT_LT((loaded.params.at(name) - m).cwiseAbs().maxCoeff(), 1e-6) << name;
}

// --- folds, ensembles --------------------------------------------------------------

TEST(Folds, GeometriesNeverStraddleFolds) {
  tt::Rng rng(58);
  vwss::train::Dataset ds;
  for (int g = 0; g < 4; ++g)
    for (int sim = 0; sim < 2; ++sim) ds.push_back(make_sample(rng, g, sim, 8, 1));

  const auto folds = vwss::train::make_geometry_folds(ds, 2);
  ASSERT_EQ(folds.size(), 2u);
  EXPECT_EQ(folds[0].size() + folds[1].size(), ds.size());
  for (const auto& fold : folds)
    for (const int i : fold) {
      const int gid = ds[static_cast<size_t>(i)].geometry_id;
      // every sample of this geometry is in the same fold
      for (size_t j = 0; j < ds.size(); ++j)
        if (ds[j].geometry_id == gid)
          EXPECT_NE(std::find(fold.begin(), fold.end(), static_cast<int>(j)), fold.end());
    }
  // deterministic
  const auto again = vwss::train::make_geometry_folds(ds, 2);
  EXPECT_EQ(folds, again);
  EXPECT_THROW(vwss::train::make_geometry_folds(ds, 5), std::invalid_argument);
}

TEST(Folds, CrossValidationEvaluatesEveryHeldOutSample) {
  tt::Rng rng(59);
  const auto cfg = tiny_gatr(1);
  vwss::train::Dataset ds;
  for (int g = 0; g < 4; ++g) ds.push_back(make_sample(rng, g, 0, 8, 1));

  vwss::train::TrainerConfig tc;
  tc.epochs = 2;
  tc.seed = 9;
  const auto reports = vwss::train::cross_validate(ds, cfg, tc, 2);
  ASSERT_EQ(reports.size(), 2u);
  std::set<int> seen;
  for (const auto& r : reports) {
    EXPECT_EQ(r.per_sample.size(), r.test_indices.size());
    EXPECT_FALSE(r.result.aborted);
    for (const int i : r.test_indices) seen.insert(i);
    EXPECT_GE(r.mean_cosine, -1.0);
    EXPECT_LE(r.mean_cosine, 1.0);
    EXPECT_GE(r.mean_nmae, 0.0);
  }
  EXPECT_EQ(seen.size(), ds.size());
}

TEST(Ensemble, PointwiseMeanOfMemberPredictions) {
  tt::Rng rng(60);
  const auto cfg = tiny_gatr(2);
  const auto d = random_descriptors(rng, 12);
  vwss::desc::FeatureStats stats;

  vwss::net::ModelCheckpoint a, b;
  a.gatr = b.gatr = cfg;
  a.stats = b.stats = stats;
  a.params = vwss::net::init_gatr_params(cfg, 1);
  b.params = vwss::net::init_gatr_params(cfg, 2);

  const auto fa = vwss::train::predict(a, d, 0);
  const auto fb = vwss::train::predict(b, d, 0);
  const auto mean = vwss::train::ensemble_predict({a, b}, d, 0);
  EXPECT_LT((mean.tau - 0.5 * (fa.tau + fb.tau)).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_THROW(vwss::train::ensemble_predict({}, d, 0), std::invalid_argument);
}
