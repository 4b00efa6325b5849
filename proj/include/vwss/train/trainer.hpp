#pragma once

// Training loop: Adam with per-epoch exponential learning-rate decay and
// global-norm clipping, mini-batches assembled by weighted per-sample
// gradient accumulation (exactly equivalent to concatenating the samples into
// one batch and masking), pre-sampled channel dropout, non-finite-loss abort
// with rollback to the last fully finite epoch, and on-disk run artifacts
// (config snapshot, loss curve, checkpoints).

#include <Eigen/Dense>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <random>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <vector>

#include "json.hpp"
#include "vwss/hemo/metrics.hpp"
#include "vwss/net/checkpoint.hpp"
#include "vwss/net/gatr.hpp"
#include "vwss/net/vatr.hpp"
#include "vwss/train/adam.hpp"
#include "vwss/train/dataset.hpp"

namespace vwss::train {

struct TrainerConfig {
  int epochs = 5000;
  int batch_size = 16;
  double lr0 = 3e-4;
  double lr_decay = 0.9989; // per-epoch multiplier
  double clip_norm = 1.0;
  double lambda_mag = 0.1; // weight of the magnitude term
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 0;
  std::string out_dir;          // empty: keep everything in memory
  int checkpoint_every = 0;     // also snapshot every k epochs when > 0
  std::string precision = "f64"; // checkpoint storage width: "f32" | "f64"

  void validate() const {
    if (epochs < 0) throw std::invalid_argument("trainer: epochs must be >= 0");
    if (batch_size < 1) throw std::invalid_argument("trainer: batch_size must be >= 1");
    if (!(lr0 > 0.0)) throw std::invalid_argument("trainer: lr0 must be > 0");
    if (!(lr_decay > 0.0) || lr_decay > 1.0)
      throw std::invalid_argument("trainer: lr_decay must be in (0, 1]");
    if (!(clip_norm > 0.0)) throw std::invalid_argument("trainer: clip_norm must be > 0");
    if (lambda_mag < 0.0) throw std::invalid_argument("trainer: lambda_mag must be >= 0");
    if (checkpoint_every < 0)
      throw std::invalid_argument("trainer: checkpoint_every must be >= 0");
    if (precision != "f32" && precision != "f64")
      throw std::invalid_argument("trainer: precision must be 'f32' or 'f64'");
  }

  io::Precision storage_precision() const {
    return precision == "f32" ? io::Precision::kF32 : io::Precision::kF64;
  }
};

inline double lr_at_epoch(const TrainerConfig& tc, int epoch) {
  return tc.lr0 * std::pow(tc.lr_decay, static_cast<double>(epoch));
}

struct EpochStats {
  int epoch = 0;
  double l_angle = 0.0;
  double l_magnitude = 0.0;
  double l_total = 0.0;
  double lr = 0.0;
};

struct TrainResult {
  net::ModelCheckpoint checkpoint; // config, feature stats, final parameters
  std::vector<EpochStats> history; // one row per completed epoch
  bool aborted = false;            // stopped on a non-finite loss, gradient, or update
  int completed_epochs = 0;
};

namespace detail {

constexpr double kEps = 1e-12;

/// Valid angle pairs of a decoded multivector output (scalar slot magnitude,
/// e1..e3 direction) against the reference, mirroring the loss definition.
inline int count_valid_mv(const Eigen::MatrixXd& yv, const Eigen::MatrixXd& target, int T) {
  int valid = 0;
  for (Eigen::Index v = 0; v < yv.rows(); ++v)
    for (int tc = 0; tc < T; ++tc) {
      const double m = yv(v, 16 * tc);
      const Eigen::Vector3d d(yv(v, 16 * tc + 2), yv(v, 16 * tc + 3), yv(v, 16 * tc + 4));
      const Eigen::Vector3d tau = target.row(v).segment<3>(3 * tc);
      if (tau.norm() >= kEps && d.norm() >= kEps && std::abs(m) >= kEps) ++valid;
    }
  return valid;
}

inline int count_valid_vec(const Eigen::MatrixXd& yv, const Eigen::MatrixXd& target, int T) {
  int valid = 0;
  for (Eigen::Index v = 0; v < yv.rows(); ++v)
    for (int tc = 0; tc < T; ++tc) {
      const Eigen::Vector3d p = yv.row(v).segment<3>(3 * tc);
      const Eigen::Vector3d tau = target.row(v).segment<3>(3 * tc);
      if (tau.norm() >= kEps && p.norm() >= kEps) ++valid;
    }
  return valid;
}

template <typename Config>
constexpr net::ModelKind kind_of() {
  return std::is_same_v<Config, net::GatrConfig> ? net::ModelKind::kGatr : net::ModelKind::kVatr;
}

template <typename Config>
net::ForwardGraph forward_any(net::Tape& t, const PreparedSample& s, const Config& cfg,
                              const net::ParamSet& params, const net::DropoutPlan* plan) {
  if constexpr (std::is_same_v<Config, net::GatrConfig>)
    return net::gatr_forward(t, s.inputs, s.graph, cfg, params, plan);
  else
    return net::vatr_forward(t, s.inputs, s.graph, cfg, params, plan);
}

/// Epoch-level loss aggregates in concatenated-batch semantics.
struct LossAccumulator {
  double cos_sum = 0.0;
  long valid = 0;
  double mag_sum = 0.0;
  double mag_count = 0.0;

  void add(const net::WssLossParts& parts, double sample_mag_count) {
    cos_sum += (1.0 - parts.angle) * parts.angle_pairs;
    valid += parts.angle_pairs;
    mag_sum += parts.magnitude * sample_mag_count;
    mag_count += sample_mag_count;
  }
  double l_angle() const { return valid > 0 ? 1.0 - cos_sum / static_cast<double>(valid) : 0.0; }
  double l_magnitude() const { return mag_count > 0.0 ? mag_sum / mag_count : 0.0; }
};

/// Forward + backward over one mini-batch; gradient weights reproduce the
/// loss of the concatenated batch exactly.  Returns false when any loss or
/// gradient came out non-finite (the accumulated grads must then be ignored).
template <typename Config>
bool batch_gradients(const std::vector<const PreparedSample*>& batch, const Config& cfg,
                     const net::ParamSet& params, const TrainerConfig& tc, std::mt19937_64& rng,
                     net::ParamSet& grads, LossAccumulator& epoch_acc) {
  const int T = cfg.timepoints;
  struct Live {
    net::Tape tape;
    net::ForwardGraph fg;
    net::DropoutPlan plan;
    int valid = 0;
    double mag_count = 0.0;
  };
  std::vector<Live> live(batch.size());

  long total_valid = 0;
  double total_mag = 0.0;
  for (size_t s = 0; s < batch.size(); ++s) {
    const PreparedSample& ps = *batch[s];
    const net::DropoutPlan* plan_ptr = nullptr;
    if (cfg.dropout > 0.0) {
      const int n_tokens = static_cast<int>(ps.graph.token_idx.size());
      if constexpr (std::is_same_v<Config, net::GatrConfig>)
        live[s].plan = net::make_gatr_dropout_plan(cfg, ps.n, n_tokens, rng);
      else
        live[s].plan = net::make_vatr_dropout_plan(cfg, ps.n, n_tokens, rng);
      plan_ptr = &live[s].plan;
    }
    live[s].fg = forward_any(live[s].tape, ps, cfg, params, plan_ptr);
    const Eigen::MatrixXd& yv = live[s].tape.val(live[s].fg.output);
    if constexpr (std::is_same_v<Config, net::GatrConfig>)
      live[s].valid = count_valid_mv(yv, ps.target, T);
    else
      live[s].valid = count_valid_vec(yv, ps.target, T);
    live[s].mag_count = static_cast<double>(ps.n) * T;
    total_valid += live[s].valid;
    total_mag += live[s].mag_count;
  }

  bool finite = true;
  for (size_t s = 0; s < batch.size(); ++s) {
    const PreparedSample& ps = *batch[s];
    net::Tape& t = live[s].tape;
    const double angle_w =
        total_valid > 0 ? static_cast<double>(live[s].valid) / static_cast<double>(total_valid)
                        : 0.0;
    const double mag_w = tc.lambda_mag * live[s].mag_count / total_mag;
    net::WssLossParts parts;
    net::Tape::Id loss;
    if constexpr (std::is_same_v<Config, net::GatrConfig>)
      loss = t.wss_loss_scaled(live[s].fg.output, ps.target, T, angle_w, mag_w, &parts);
    else
      loss = t.vec_loss_scaled(live[s].fg.output, ps.target, T, angle_w, mag_w, &parts);
    if (!std::isfinite(t.val(loss)(0, 0))) finite = false;
    epoch_acc.add(parts, live[s].mag_count);
    t.backward(loss);
    for (const auto& [name, node] : live[s].fg.params) {
      const Eigen::MatrixXd g = t.grad(node);
      if (!g.allFinite()) finite = false;
      auto it = grads.find(name);
      if (it == grads.end())
        grads.emplace(name, g);
      else
        it->second += g;
    }
  }
  return finite;
}

inline void write_loss_csv(const std::string& path, const std::vector<EpochStats>& history) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("trainer: cannot write " + path);
  out << "epoch,l_angle,l_magnitude,l_total,lr\n" << std::setprecision(17);
  for (const auto& e : history)
    out << e.epoch << ',' << e.l_angle << ',' << e.l_magnitude << ',' << e.l_total << ',' << e.lr
        << '\n';
}

template <typename Config>
void write_config_snapshot(const std::string& path, const Config& cfg, const TrainerConfig& tc) {
  nlohmann::json j;
  j["model"]["kind"] = to_string(kind_of<Config>());
  if constexpr (std::is_same_v<Config, net::GatrConfig>)
    j["model"]["config"] = net::detail::gatr_config_json(cfg);
  else
    j["model"]["config"] = net::detail::vatr_config_json(cfg);
  j["trainer"] = {{"epochs", tc.epochs},
                  {"batch_size", tc.batch_size},
                  {"lr0", tc.lr0},
                  {"lr_decay", tc.lr_decay},
                  {"clip_norm", tc.clip_norm},
                  {"lambda_mag", tc.lambda_mag},
                  {"beta1", tc.beta1},
                  {"beta2", tc.beta2},
                  {"adam_eps", tc.adam_eps},
                  {"seed", tc.seed},
                  {"precision", tc.precision}};
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("trainer: cannot write " + path);
  out << j.dump(2) << '\n';
}

} // namespace detail

/// Train a model from scratch on the full dataset.  Deterministic: the same
/// dataset, config, and seed reproduce the parameters bit for bit.
template <typename Config>
TrainResult train(const Dataset& ds, const Config& cfg, const TrainerConfig& tc) {
  cfg.validate();
  tc.validate();
  if (ds.empty()) throw std::invalid_argument("trainer: empty dataset");
  constexpr net::ModelKind kind = detail::kind_of<Config>();

  const std::vector<int> indices = all_indices(ds);
  const desc::FeatureStats stats = dataset_stats(ds, indices);
  const std::vector<PreparedSample> prepared =
      prepare_samples(ds, indices, stats, kind, cfg, static_cast<int>(tc.seed));

  TrainResult result;
  result.checkpoint.kind = kind;
  if constexpr (std::is_same_v<Config, net::GatrConfig>) {
    result.checkpoint.gatr = cfg;
    result.checkpoint.params = net::init_gatr_params(cfg, tc.seed);
  } else {
    result.checkpoint.vatr = cfg;
    result.checkpoint.params = net::init_vatr_params(cfg, tc.seed);
  }
  result.checkpoint.stats = stats;

  const bool persist = !tc.out_dir.empty();
  if (persist) {
    std::filesystem::create_directories(tc.out_dir);
    detail::write_config_snapshot(tc.out_dir + "/config.json", cfg, tc);
  }

  std::mt19937_64 rng(tc.seed * 6364136223846793005ULL + 1442695040888963407ULL);
  AdamState opt;
  net::ParamSet last_good = result.checkpoint.params;
  std::vector<int> order = indices;

  for (int epoch = 0; epoch < tc.epochs && !result.aborted; ++epoch) {
    const double lr = lr_at_epoch(tc, epoch);
    std::shuffle(order.begin(), order.end(), rng);
    detail::LossAccumulator acc;

    for (size_t at = 0; at < order.size() && !result.aborted; at += tc.batch_size) {
      std::vector<const PreparedSample*> batch;
      for (size_t j = at; j < std::min(order.size(), at + tc.batch_size); ++j)
        batch.push_back(&prepared[static_cast<size_t>(order[j])]);
      net::ParamSet grads;
      const bool finite = detail::batch_gradients(batch, cfg, result.checkpoint.params, tc, rng,
                                                  grads, acc);
      if (!finite || !std::isfinite(global_grad_norm(grads))) {
        result.aborted = true;
        result.checkpoint.params = last_good;
        break;
      }
      clip_global_norm(grads, tc.clip_norm);
      adam_update(result.checkpoint.params, grads, opt, lr, tc.beta1, tc.beta2, tc.adam_eps);
    }
    if (result.aborted) break;

    // An epoch only counts as good if the updated parameters themselves are
    // still in range; an overflowing update would poison every later epoch.
    bool params_finite = true;
    for (const auto& [name, m] : result.checkpoint.params)
      if (!m.allFinite()) {
        params_finite = false;
        break;
      }
    if (!params_finite) {
      result.aborted = true;
      result.checkpoint.params = last_good;
      break;
    }

    EpochStats es;
    es.epoch = epoch;
    es.l_angle = acc.l_angle();
    es.l_magnitude = acc.l_magnitude();
    es.l_total = es.l_angle + tc.lambda_mag * es.l_magnitude;
    es.lr = lr;
    result.history.push_back(es);
    result.completed_epochs = epoch + 1;
    last_good = result.checkpoint.params;

    if (persist && tc.checkpoint_every > 0 && (epoch + 1) % tc.checkpoint_every == 0)
      net::save_checkpoint(tc.out_dir + "/model_epoch" + std::to_string(epoch + 1) + ".ckpt",
                           result.checkpoint, tc.storage_precision());
  }

  if (persist) {
    detail::write_loss_csv(tc.out_dir + "/loss.csv", result.history);
    net::save_checkpoint(tc.out_dir + "/model.ckpt", result.checkpoint, tc.storage_precision());
  }
  return result;
}

/// Predict with a trained checkpoint.
inline hemo::TransientWssField predict(const net::ModelCheckpoint& ckpt,
                                       const desc::DescriptorSet& d, int seed = 0) {
  if (ckpt.kind == net::ModelKind::kGatr)
    return net::gatr_predict(d, ckpt.stats, ckpt.gatr, ckpt.params, seed);
  return net::vatr_predict(d, ckpt.stats, ckpt.vatr, ckpt.params, seed);
}

/// Pointwise mean of the member predictions.
inline hemo::TransientWssField ensemble_predict(const std::vector<net::ModelCheckpoint>& models,
                                                const desc::DescriptorSet& d, int seed = 0) {
  if (models.empty()) throw std::invalid_argument("ensemble: no members");
  hemo::TransientWssField mean = predict(models[0], d, seed);
  for (size_t i = 1; i < models.size(); ++i) {
    const hemo::TransientWssField f = predict(models[i], d, seed);
    if (f.n_points() != mean.n_points() || f.timepoints != mean.timepoints)
      throw std::invalid_argument("ensemble: member output shapes differ");
    mean.tau += f.tau;
  }
  mean.tau /= static_cast<double>(models.size());
  return mean;
}

struct FoldReport {
  int fold = 0;
  std::vector<int> test_indices;
  std::vector<hemo::FieldMetrics> per_sample;
  double mean_nmae = 0.0;
  double mean_cosine = 0.0;
  TrainResult result;
};

/// Leave-one-fold-out cross-validation over geometry-level folds; feature
/// statistics are recomputed from each training split so no information leaks
/// from the held-out geometries.
template <typename Config>
std::vector<FoldReport> cross_validate(const Dataset& ds, const Config& cfg,
                                       const TrainerConfig& tc, int n_folds) {
  const auto folds = make_geometry_folds(ds, n_folds);
  std::vector<FoldReport> reports;
  for (int f = 0; f < n_folds; ++f) {
    Dataset train_split;
    for (int g = 0; g < n_folds; ++g)
      if (g != f)
        for (const int i : folds[static_cast<size_t>(g)])
          train_split.push_back(ds[static_cast<size_t>(i)]);

    TrainerConfig fold_tc = tc;
    if (!tc.out_dir.empty()) fold_tc.out_dir = tc.out_dir + "/fold" + std::to_string(f);

    FoldReport report;
    report.fold = f;
    report.test_indices = folds[static_cast<size_t>(f)];
    report.result = train(train_split, cfg, fold_tc);

    double nmae = 0.0, cosine = 0.0;
    for (const int i : report.test_indices) {
      const TrainingSample& s = ds[static_cast<size_t>(i)];
      const auto pred = predict(report.result.checkpoint, s.descriptors,
                                static_cast<int>(tc.seed));
      const auto m = hemo::field_metrics(pred, s.target);
      report.per_sample.push_back(m);
      nmae += m.nmae;
      cosine += m.cosine;
    }
    report.mean_nmae = nmae / static_cast<double>(report.per_sample.size());
    report.mean_cosine = cosine / static_cast<double>(report.per_sample.size());
    reports.push_back(std::move(report));
  }
  return reports;
}

} // namespace vwss::train
