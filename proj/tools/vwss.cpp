// vwss — batch command-line front end for the wall-shear-stress surrogate.
//
// Subcommands
//   generate          build a synthetic vessel corpus with analytic reference fields
//   featurize         compute geometric descriptor files for labelled wall meshes
//   train             fit a surrogate on a corpus directory, writing a run directory
//   predict           run a checkpoint on one mesh, writing a transient WSS field file
//   evaluate          compare a predicted field file against a reference one
//   audit <suite>     equivariance | inflow-sweep | remodel | topology | mesh-sensitivity
//
// Every command is deterministic under a fixed --seed; reports embed the
// effective configuration, its hash, and the tool version, and carry no
// timestamps, so identical inputs reproduce identical bytes.
//
// Exit codes: 0 success, 2 configuration error, 3 data error, 4 numeric
// failure.  Errors print a one-line JSON report to stderr.
//
// The VWSS_THREADS environment variable caps the linear-algebra thread count;
// --deterministic forces one thread.

#include <Eigen/Core>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "vwss/descriptors/features.hpp"
#include "vwss/descriptors/waveform.hpp"
#include "vwss/hemo/markers.hpp"
#include "vwss/hemo/metrics.hpp"
#include "vwss/io/field_file.hpp"
#include "vwss/io/mesh_io.hpp"
#include "vwss/lab/audits.hpp"
#include "vwss/lab/recipe.hpp"
#include "vwss/net/checkpoint.hpp"
#include "vwss/train/trainer.hpp"
#include "vwss/version.hpp"

namespace {

using nlohmann::json;

constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitNumeric = 4;

struct CliError : std::runtime_error {
  int code;
  CliError(int c, const std::string& msg) : std::runtime_error(msg), code(c) {}
};

/// Run a step, mapping any library exception to the given exit class.
template <typename F>
auto step(int code, F&& f) {
  try {
    return f();
  } catch (const CliError&) {
    throw;
  } catch (const std::exception& e) {
    throw CliError(code, e.what());
  }
}

/// FNV-1a hash of the canonical dump, hex-encoded; identifies a configuration.
std::string config_hash(const json& j) {
  const std::string s = j.dump();
  std::uint64_t h = 1469598103934665603ULL;
  for (const unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void reject_unknown_keys(const json& j, const std::set<std::string>& allowed,
                         const std::string& context) {
  if (!j.is_object()) throw CliError(kExitConfig, "config: " + context + " must be an object");
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!allowed.count(it.key()))
      throw CliError(kExitConfig, "config: unknown key '" + context + it.key() + "'");
}

json load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw CliError(kExitConfig, "config: cannot open " + path);
  try {
    json j;
    in >> j;
    return j;
  } catch (const json::exception& e) {
    throw CliError(kExitConfig, std::string("config: ") + path + ": " + e.what());
  }
}

/// Attach provenance and write the report (stdout when no path given).
void emit_report(const std::string& out_path, json report, const json& effective_config) {
  report["version"] = vwss::kVersion;
  report["config"] = effective_config;
  report["config_hash"] = config_hash(effective_config);
  const std::string text = report.dump(2) + "\n";
  if (out_path.empty()) {
    std::cout << text;
    return;
  }
  const auto parent = std::filesystem::path(out_path).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
  std::ofstream out(out_path, std::ios::trunc);
  if (!out) throw CliError(kExitData, "report: cannot write " + out_path);
  out << text;
}

/// Inflow for featurize/predict: an explicit waveform CSV wins over --q-max.
vwss::desc::InflowWaveform resolve_waveform(const std::string& waveform_path, double q_max) {
  if (!waveform_path.empty())
    return step(kExitData, [&] { return vwss::desc::load_waveform(waveform_path); });
  return step(kExitConfig, [&] {
    return vwss::desc::scale_waveform(vwss::lab::template_waveform(), q_max);
  });
}

// ---------------------------------------------------------------------------
// generate

vwss::lab::RecipeConfig recipe_from_json(const json& j) {
  reject_unknown_keys(j, {"n_geometries", "random_sims", "include_reference", "q_low", "q_high",
                          "q_reference", "target_edge_mm", "bulge_probability", "branch_count",
                          "seed", "oracle"},
                      "");
  vwss::lab::RecipeConfig rc;
  rc.n_geometries = j.value("n_geometries", rc.n_geometries);
  rc.random_sims = j.value("random_sims", rc.random_sims);
  rc.include_reference = j.value("include_reference", rc.include_reference);
  rc.q_low = j.value("q_low", rc.q_low);
  rc.q_high = j.value("q_high", rc.q_high);
  rc.q_reference = j.value("q_reference", rc.q_reference);
  rc.target_edge_mm = j.value("target_edge_mm", rc.target_edge_mm);
  rc.bulge_probability = j.value("bulge_probability", rc.bulge_probability);
  rc.branch_count = j.value("branch_count", rc.branch_count);
  rc.seed = j.value("seed", rc.seed);
  if (j.contains("oracle")) {
    const json& o = j["oracle"];
    reject_unknown_keys(
        o, {"viscosity_poise", "min_radius_mm", "t_samples", "direction_jitter_rad"}, "oracle.");
    rc.oracle.viscosity_poise = o.value("viscosity_poise", rc.oracle.viscosity_poise);
    rc.oracle.min_radius_mm = o.value("min_radius_mm", rc.oracle.min_radius_mm);
    rc.oracle.t_samples = o.value("t_samples", rc.oracle.t_samples);
    rc.oracle.direction_jitter_rad =
        o.value("direction_jitter_rad", rc.oracle.direction_jitter_rad);
  }
  return rc;
}

json recipe_to_json(const vwss::lab::RecipeConfig& rc) {
  return {{"n_geometries", rc.n_geometries},
          {"random_sims", rc.random_sims},
          {"include_reference", rc.include_reference},
          {"q_low", rc.q_low},
          {"q_high", rc.q_high},
          {"q_reference", rc.q_reference},
          {"target_edge_mm", rc.target_edge_mm},
          {"bulge_probability", rc.bulge_probability},
          {"branch_count", rc.branch_count},
          {"seed", rc.seed},
          {"oracle",
           {{"viscosity_poise", rc.oracle.viscosity_poise},
            {"min_radius_mm", rc.oracle.min_radius_mm},
            {"t_samples", rc.oracle.t_samples},
            {"direction_jitter_rad", rc.oracle.direction_jitter_rad}}}};
}

int cmd_generate(const std::string& config_path, const std::string& out_dir,
                 const std::int64_t* seed_override) {
  json cfg = config_path.empty() ? json::object() : load_config_file(config_path);
  vwss::lab::RecipeConfig rc = recipe_from_json(cfg);
  if (seed_override) rc.seed = static_cast<std::uint64_t>(*seed_override);
  const json effective = recipe_to_json(rc);

  const vwss::lab::LabDataset ds = step(kExitNumeric, [&] {
    return vwss::lab::build_lab_dataset(rc);
  });
  step(kExitData, [&] {
    vwss::lab::save_lab_dataset(ds, out_dir);
    return 0;
  });

  int samples = 0;
  for (const auto& g : ds.geometries) samples += static_cast<int>(g.sims.size());
  json report{{"command", "generate"},
              {"out_dir", out_dir},
              {"geometries", ds.geometries.size()},
              {"samples", samples}};
  emit_report((std::filesystem::path(out_dir) / "generate_report.json").string(), report,
              effective);
  return 0;
}

// ---------------------------------------------------------------------------
// featurize

json descriptor_json(const vwss::desc::DescriptorSet& d) {
  auto matrix_rows = [](const Eigen::MatrixXd& m) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      json row = json::array();
      for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
      rows.push_back(row);
    }
    return rows;
  };
  auto vector_values = [](const Eigen::VectorXd& v) {
    return json(std::vector<double>(v.data(), v.data() + v.size()));
  };
  return {{"n", d.n_points()},
          {"coords_mm", matrix_rows(d.coords)},
          {"normals", matrix_rows(d.normals)},
          {"flow_prior", matrix_rows(d.flow_prior)},
          {"geo_inlet_mm", vector_values(d.geo_inlet)},
          {"geo_outlet_mm", vector_values(d.geo_outlet)},
          {"kappa1_per_mm", vector_values(d.kappa1)},
          {"kappa2_per_mm", vector_values(d.kappa2)},
          {"v_max_cm_s", d.v_max}};
}

int cmd_featurize(const std::vector<std::string>& mesh_paths, const std::string& out_dir,
                  const std::string& waveform_path, double q_max) {
  const vwss::desc::InflowWaveform wave = resolve_waveform(waveform_path, q_max);
  std::filesystem::create_directories(out_dir.empty() ? "." : out_dir);
  const json effective{{"meshes", mesh_paths}, {"q_max", vwss::desc::q_max(wave)}};
  json written = json::array();
  for (const std::string& path : mesh_paths) {
    if (!std::filesystem::exists(path)) throw CliError(kExitData, "featurize: missing " + path);
    const vwss::mesh::SurfaceMesh m = step(kExitData, [&] { return vwss::io::load_mesh(path); });
    const vwss::desc::DescriptorSet d = step(kExitNumeric, [&] {
      return vwss::desc::compute_descriptors(m, wave);
    });
    const auto out_path = std::filesystem::path(out_dir.empty() ? "." : out_dir) /
                          (std::filesystem::path(path).stem().string() + ".desc.json");
    std::ofstream out(out_path, std::ios::trunc);
    if (!out) throw CliError(kExitData, "featurize: cannot write " + out_path.string());
    json file{{"version", vwss::kVersion}, {"descriptors", descriptor_json(d)}};
    out << file.dump() << "\n";
    written.push_back(out_path.string());
  }
  emit_report("", json{{"command", "featurize"}, {"written", written}}, effective);
  return 0;
}

// ---------------------------------------------------------------------------
// train

struct TrainSetup {
  std::string dataset_dir;
  std::string model_kind = "gatr";
  vwss::net::GatrConfig gatr;
  vwss::net::VatrConfig vatr;
  vwss::train::TrainerConfig trainer;
  int eval_folds = 0;   // 0: train on everything, no held-out evaluation
  int eval_holdout = 0; // fold index kept out of training
};

TrainSetup train_setup_from_json(const json& j) {
  reject_unknown_keys(j, {"dataset", "model", "trainer", "out_dir", "eval"}, "");
  TrainSetup s;
  if (!j.contains("dataset")) throw CliError(kExitConfig, "config: missing key 'dataset'");
  s.dataset_dir = j.at("dataset").get<std::string>();
  if (!std::filesystem::exists(std::filesystem::path(s.dataset_dir) / "manifest.json"))
    throw CliError(kExitConfig, "config: dataset directory " + s.dataset_dir + " has no manifest");

  if (j.contains("model")) {
    const json& m = j["model"];
    reject_unknown_keys(m, {"kind", "blocks", "heads", "channels", "hidden", "rate", "k", "eps",
                            "timepoints", "dropout"},
                        "model.");
    s.model_kind = m.value("kind", s.model_kind);
    if (s.model_kind != "gatr" && s.model_kind != "vatr")
      throw CliError(kExitConfig, "config: model.kind must be 'gatr' or 'vatr'");
    if (s.model_kind == "gatr" && m.contains("hidden"))
      throw CliError(kExitConfig, "config: model.hidden only applies to the scalar baseline");
    if (s.model_kind == "vatr" && m.contains("channels"))
      throw CliError(kExitConfig, "config: model.channels only applies to the multivector model");
    auto fill = [&m](auto& cfg) {
      cfg.blocks = m.value("blocks", cfg.blocks);
      cfg.heads = m.value("heads", cfg.heads);
      cfg.rate = m.value("rate", cfg.rate);
      cfg.k = m.value("k", cfg.k);
      cfg.eps = m.value("eps", cfg.eps);
      cfg.timepoints = m.value("timepoints", cfg.timepoints);
      cfg.dropout = m.value("dropout", cfg.dropout);
    };
    fill(s.gatr);
    fill(s.vatr);
    s.gatr.channels = m.value("channels", s.gatr.channels);
    s.vatr.hidden = m.value("hidden", s.vatr.hidden);
  }

  if (j.contains("trainer")) {
    const json& t = j["trainer"];
    reject_unknown_keys(t, {"epochs", "batch_size", "lr0", "lr_decay", "clip_norm", "lambda_mag",
                            "beta1", "beta2", "adam_eps", "seed", "checkpoint_every",
                            "precision"},
                        "trainer.");
    auto& tc = s.trainer;
    tc.epochs = t.value("epochs", tc.epochs);
    tc.batch_size = t.value("batch_size", tc.batch_size);
    tc.lr0 = t.value("lr0", tc.lr0);
    tc.lr_decay = t.value("lr_decay", tc.lr_decay);
    tc.clip_norm = t.value("clip_norm", tc.clip_norm);
    tc.lambda_mag = t.value("lambda_mag", tc.lambda_mag);
    tc.beta1 = t.value("beta1", tc.beta1);
    tc.beta2 = t.value("beta2", tc.beta2);
    tc.adam_eps = t.value("adam_eps", tc.adam_eps);
    tc.seed = t.value("seed", tc.seed);
    tc.checkpoint_every = t.value("checkpoint_every", tc.checkpoint_every);
    tc.precision = t.value("precision", tc.precision);
  }
  s.trainer.out_dir = j.value("out_dir", std::string());

  if (j.contains("eval")) {
    const json& e = j["eval"];
    reject_unknown_keys(e, {"folds", "holdout"}, "eval.");
    s.eval_folds = e.value("folds", 5);
    s.eval_holdout = e.value("holdout", 0);
    if (s.eval_folds < 2) throw CliError(kExitConfig, "config: eval.folds must be >= 2");
    if (s.eval_holdout < 0 || s.eval_holdout >= s.eval_folds)
      throw CliError(kExitConfig, "config: eval.holdout outside [0, folds)");
  }
  return s;
}

json train_setup_to_json(const TrainSetup& s) {
  json model{{"kind", s.model_kind}};
  if (s.model_kind == "gatr") {
    model["blocks"] = s.gatr.blocks;
    model["heads"] = s.gatr.heads;
    model["channels"] = s.gatr.channels;
    model["rate"] = s.gatr.rate;
    model["k"] = s.gatr.k;
    model["eps"] = s.gatr.eps;
    model["timepoints"] = s.gatr.timepoints;
    model["dropout"] = s.gatr.dropout;
  } else {
    model["blocks"] = s.vatr.blocks;
    model["heads"] = s.vatr.heads;
    model["hidden"] = s.vatr.hidden;
    model["rate"] = s.vatr.rate;
    model["k"] = s.vatr.k;
    model["eps"] = s.vatr.eps;
    model["timepoints"] = s.vatr.timepoints;
    model["dropout"] = s.vatr.dropout;
  }
  json out{{"dataset", s.dataset_dir},
           {"model", model},
           {"trainer",
            {{"epochs", s.trainer.epochs},
             {"batch_size", s.trainer.batch_size},
             {"lr0", s.trainer.lr0},
             {"lr_decay", s.trainer.lr_decay},
             {"clip_norm", s.trainer.clip_norm},
             {"lambda_mag", s.trainer.lambda_mag},
             {"seed", s.trainer.seed},
             {"precision", s.trainer.precision}}},
           {"out_dir", s.trainer.out_dir}};
  if (s.eval_folds > 0) out["eval"] = {{"folds", s.eval_folds}, {"holdout", s.eval_holdout}};
  return out;
}

int cmd_train(const std::string& config_path, const std::string& out_override,
              const std::int64_t* seed_override, const std::string* precision_override) {
  TrainSetup s = train_setup_from_json(load_config_file(config_path));
  if (!out_override.empty()) s.trainer.out_dir = out_override;
  if (seed_override) s.trainer.seed = static_cast<std::uint64_t>(*seed_override);
  if (precision_override) s.trainer.precision = *precision_override;
  if (s.trainer.out_dir.empty())
    throw CliError(kExitConfig, "config: no output directory (set out_dir or pass --out)");
  step(kExitConfig, [&] {
    s.trainer.validate();
    if (s.model_kind == "gatr")
      s.gatr.validate();
    else
      s.vatr.validate();
    return 0;
  });
  const json effective = train_setup_to_json(s);

  const vwss::lab::LabDataset lab = step(kExitData, [&] {
    return vwss::lab::load_lab_dataset(s.dataset_dir);
  });
  const vwss::train::Dataset full = step(kExitData, [&] {
    return vwss::lab::to_training_dataset(lab);
  });
  step(kExitData, [&] {
    const int t_model = s.model_kind == "gatr" ? s.gatr.timepoints : s.vatr.timepoints;
    for (const auto& sample : full) {
      sample.descriptors.validate();
      sample.target.validate();
      if (sample.target.timepoints != t_model)
        throw std::invalid_argument("dataset: field timepoints differ from the model's");
    }
    return 0;
  });

  vwss::train::Dataset train_split = full;
  std::vector<int> holdout;
  if (s.eval_folds > 0) {
    const auto folds = step(kExitConfig, [&] {
      return vwss::train::make_geometry_folds(full, s.eval_folds);
    });
    holdout = folds[static_cast<size_t>(s.eval_holdout)];
    const std::set<int> held(holdout.begin(), holdout.end());
    train_split.clear();
    for (size_t i = 0; i < full.size(); ++i)
      if (!held.count(static_cast<int>(i))) train_split.push_back(full[i]);
  }

  const vwss::train::TrainResult result = step(kExitNumeric, [&] {
    return s.model_kind == "gatr" ? vwss::train::train(train_split, s.gatr, s.trainer)
                                  : vwss::train::train(train_split, s.vatr, s.trainer);
  });
  if (result.aborted)
    throw CliError(kExitNumeric, "train: aborted on a non-finite loss, gradient, or update; the "
                                 "run directory holds the last finite parameters");

  json report{{"command", "train"},
              {"run_dir", s.trainer.out_dir},
              {"checkpoint", "model.ckpt"},
              {"epochs_completed", result.completed_epochs},
              {"train_samples", train_split.size()}};
  if (!result.history.empty()) {
    const auto& last = result.history.back();
    report["final"] = {{"l_angle", last.l_angle},
                       {"l_magnitude", last.l_magnitude},
                       {"l_total", last.l_total},
                       {"lr", last.lr}};
  }
  if (!holdout.empty()) {
    double nmae_sum = 0.0, cos_sum = 0.0;
    json rows = json::array();
    for (const int i : holdout) {
      const auto& sample = full[static_cast<size_t>(i)];
      const auto pred = step(kExitNumeric, [&] {
        return vwss::train::predict(result.checkpoint, sample.descriptors,
                                    static_cast<int>(s.trainer.seed));
      });
      const auto fm = vwss::hemo::field_metrics(pred, sample.target);
      nmae_sum += fm.nmae;
      cos_sum += fm.cosine;
      rows.push_back({{"geometry_id", sample.geometry_id},
                      {"sim_id", sample.sim_id},
                      {"mae_pa", fm.mae},
                      {"nmae", fm.nmae},
                      {"cosine", fm.cosine}});
    }
    report["eval"] = {{"held_out_samples", holdout.size()},
                      {"mean_nmae", nmae_sum / static_cast<double>(holdout.size())},
                      {"mean_cosine", cos_sum / static_cast<double>(holdout.size())},
                      {"per_sample", rows}};
  }
  emit_report(s.trainer.out_dir + "/report.json", report, effective);
  return 0;
}

// ---------------------------------------------------------------------------
// predict

int cmd_predict(const std::string& ckpt_path, const std::string& mesh_path,
                const std::string& out_path, const std::string& waveform_path, double q_max,
                const std::int64_t* seed_override, const std::string& precision) {
  const std::int64_t seed = seed_override ? *seed_override : 0;
  const vwss::net::ModelCheckpoint ckpt = step(kExitData, [&] {
    return vwss::net::load_checkpoint(ckpt_path);
  });
  const vwss::mesh::SurfaceMesh m = step(kExitData, [&] {
    return vwss::io::load_mesh(mesh_path);
  });
  const vwss::desc::InflowWaveform wave = resolve_waveform(waveform_path, q_max);
  const vwss::desc::DescriptorSet d = step(kExitNumeric, [&] {
    return vwss::desc::compute_descriptors(m, wave);
  });
  const vwss::hemo::TransientWssField field = step(kExitNumeric, [&] {
    return vwss::train::predict(ckpt, d, static_cast<int>(seed));
  });
  if (!field.tau.allFinite()) throw CliError(kExitNumeric, "predict: non-finite output field");
  step(kExitData, [&] {
    const auto parent = std::filesystem::path(out_path).parent_path();
    if (!parent.empty()) std::filesystem::create_directories(parent);
    vwss::io::save_field(out_path, vwss::hemo::wss_to_field(field),
                         precision == "f64" ? vwss::io::Precision::kF64
                                            : vwss::io::Precision::kF32);
    return 0;
  });
  const json effective{{"checkpoint", ckpt_path}, {"mesh", mesh_path},
                       {"q_max", vwss::desc::q_max(wave)}, {"seed", seed},
                       {"precision", precision}};
  emit_report("", json{{"command", "predict"}, {"out", out_path},
                       {"points", field.n_points()}, {"timepoints", field.timepoints}},
              effective);
  return 0;
}

// ---------------------------------------------------------------------------
// evaluate

int cmd_evaluate(const std::string& pred_path, const std::string& truth_path,
                 const std::string& out_path) {
  auto load = [](const std::string& p) {
    return vwss::hemo::wss_from_field(vwss::io::load_field(p));
  };
  const vwss::hemo::TransientWssField pred = step(kExitData, [&] { return load(pred_path); });
  const vwss::hemo::TransientWssField truth = step(kExitData, [&] { return load(truth_path); });
  const vwss::hemo::FieldMetrics fm = step(kExitNumeric, [&] {
    return vwss::hemo::field_metrics(pred, truth);
  });
  const double tawss_mae =
      (vwss::hemo::tawss(pred) - vwss::hemo::tawss(truth)).cwiseAbs().mean();
  const double osi_mae = (vwss::hemo::osi(pred) - vwss::hemo::osi(truth)).cwiseAbs().mean();

  const json effective{{"pred", pred_path}, {"truth", truth_path}};
  emit_report(out_path,
              json{{"command", "evaluate"},
                   {"points", truth.n_points()},
                   {"timepoints", truth.timepoints},
                   {"mae_pa", fm.mae},
                   {"nmae", fm.nmae},
                   {"cosine", fm.cosine},
                   {"approx_disp", fm.approx_disp},
                   {"cosine_pairs", fm.cosine_pairs},
                   {"tawss_mae_pa", tawss_mae},
                   {"osi_mae", osi_mae}},
              effective);
  return 0;
}

// ---------------------------------------------------------------------------
// audit

/// Fixed evaluation vessel for the remodel/topology/mesh-sensitivity suites.
vwss::lab::VesselSpec audit_vessel(std::uint64_t seed) {
  vwss::lab::VesselSpec spec;
  spec.control_points.resize(4, 3);
  spec.control_points << 0.0, 0.0, 0.0, 2.0, -3.0, 30.0, -2.0, 2.0, 60.0, 0.0, 0.0, 90.0;
  spec.radius0_mm = 10.0;
  spec.radius1_mm = 8.5;
  spec.target_edge_mm = 5.5;
  spec.noise_mm = 0.3;
  spec.seed = seed;
  return spec;
}

int cmd_audit(const std::string& suite, const std::string& ckpt_path,
              const std::string& config_path, const std::string& out_path,
              const std::int64_t* seed_override) {
  const vwss::net::ModelCheckpoint ckpt = step(kExitData, [&] {
    return vwss::net::load_checkpoint(ckpt_path);
  });
  const json cfg = config_path.empty() ? json::object() : load_config_file(config_path);
  const std::uint64_t seed =
      seed_override ? static_cast<std::uint64_t>(*seed_override) : cfg.value("seed", 101);

  json report{{"command", "audit"}, {"suite", suite}, {"checkpoint", ckpt_path}};
  json effective{{"suite", suite}, {"seed", seed}};

  if (suite == "equivariance") {
    reject_unknown_keys(cfg, {"seed", "transforms", "probe_seed"}, "");
    const int transforms = cfg.value("transforms", 50);
    const std::uint64_t probe_seed = cfg.value("probe_seed", 7);
    effective["transforms"] = transforms;
    effective["probe_seed"] = probe_seed;
    const auto rep = step(kExitNumeric, [&] {
      return vwss::lab::audit_equivariance(ckpt, vwss::lab::probe_descriptors(probe_seed),
                                           transforms, seed);
    });
    report["transforms"] = rep.transforms;
    report["max_violation"] = rep.max_violation;
    report["min_violation"] = rep.min_violation;
    report["model_kind"] = vwss::net::to_string(ckpt.kind);
  } else if (suite == "inflow-sweep") {
    reject_unknown_keys(cfg, {"seed", "bins", "per_bin", "q_low", "q_high", "target_edge_mm",
                              "bulge_probability", "branch_count"},
                        "");
    vwss::lab::RecipeConfig rc;
    rc.q_low = cfg.value("q_low", rc.q_low);
    rc.q_high = cfg.value("q_high", rc.q_high);
    rc.target_edge_mm = cfg.value("target_edge_mm", rc.target_edge_mm);
    rc.bulge_probability = cfg.value("bulge_probability", rc.bulge_probability);
    rc.branch_count = cfg.value("branch_count", rc.branch_count);
    const int bins = cfg.value("bins", 4);
    const int per_bin = cfg.value("per_bin", 3);
    effective["bins"] = bins;
    effective["per_bin"] = per_bin;
    effective["q_low"] = rc.q_low;
    effective["q_high"] = rc.q_high;
    const auto rep = step(kExitNumeric, [&] {
      return vwss::lab::audit_inflow_sweep(ckpt, rc, bins, per_bin, seed);
    });
    json rows = json::array();
    for (const auto& b : rep.bins)
      rows.push_back({{"q_lo", b.q_lo},
                      {"q_hi", b.q_hi},
                      {"count", b.count},
                      {"mean_mae_pa", b.mean_mae},
                      {"mean_nmae", b.mean_nmae},
                      {"mean_cosine", b.mean_cosine}});
    report["bins"] = rows;
  } else if (suite == "remodel") {
    reject_unknown_keys(cfg, {"seed", "steps", "max_amplitude_mm", "q_max", "vessel_seed"}, "");
    const int steps = cfg.value("steps", 5);
    const double max_amp = cfg.value("max_amplitude_mm", 5.0);
    const double q = cfg.value("q_max", 80.0);
    const std::uint64_t vessel_seed = cfg.value("vessel_seed", 2024);
    effective["steps"] = steps;
    effective["max_amplitude_mm"] = max_amp;
    effective["q_max"] = q;
    effective["vessel_seed"] = vessel_seed;
    const auto rep = step(kExitNumeric, [&] {
      return vwss::lab::audit_remodel(
          ckpt, audit_vessel(vessel_seed), max_amp, steps,
          vwss::desc::scale_waveform(vwss::lab::template_waveform(), q),
          vwss::lab::OracleConfig{}, seed);
    });
    report["amplitude_mm"] = rep.amplitude_mm;
    report["q1_tawss_oracle_pa"] = rep.q1_oracle;
    report["q1_tawss_model_pa"] = rep.q1_model;
    report["trajectory_mae_pa"] = rep.trajectory_mae;
    report["oracle_range_pa"] = rep.oracle_range;
  } else if (suite == "topology") {
    reject_unknown_keys(cfg, {"seed", "q_max", "vessel_seed"}, "");
    const double q = cfg.value("q_max", 80.0);
    const std::uint64_t vessel_seed = cfg.value("vessel_seed", 2024);
    effective["q_max"] = q;
    effective["vessel_seed"] = vessel_seed;
    vwss::lab::BranchSpec extra;
    extra.attach_s = 0.55;
    extra.azimuth_rad = 1.0;
    extra.takeoff_rad = 1.2;
    extra.length_mm = 30.0;
    extra.radius0_mm = 4.0;
    extra.radius1_mm = 3.5;
    const auto rep = step(kExitNumeric, [&] {
      return vwss::lab::audit_topology(
          ckpt, audit_vessel(vessel_seed), extra,
          vwss::desc::scale_waveform(vwss::lab::template_waveform(), q),
          vwss::lab::OracleConfig{}, seed);
    });
    report["matched_points"] = rep.matched_points;
    report["cosine_base"] = rep.cosine_base;
    report["cosine_extended"] = rep.cosine_extended;
    report["degradation"] = rep.degradation;
  } else if (suite == "mesh-sensitivity") {
    reject_unknown_keys(cfg, {"seed", "scales", "q_max", "vessel_seed"}, "");
    const std::vector<double> scales =
        cfg.value("scales", std::vector<double>{0.8, 1.0, 1.2});
    const double q = cfg.value("q_max", 80.0);
    const std::uint64_t vessel_seed = cfg.value("vessel_seed", 2024);
    effective["scales"] = scales;
    effective["q_max"] = q;
    effective["vessel_seed"] = vessel_seed;
    const auto rep = step(kExitNumeric, [&] {
      return vwss::lab::audit_mesh_sensitivity(
          ckpt, audit_vessel(vessel_seed), scales,
          vwss::desc::scale_waveform(vwss::lab::template_waveform(), q), seed);
    });
    json pairs = json::array();
    for (const auto& p : rep.pairs)
      pairs.push_back({{"scale_a", p.scale_a}, {"scale_b", p.scale_b}, {"nmae", p.nmae}});
    report["scales"] = rep.scales;
    report["vertex_counts"] = rep.vertex_counts;
    report["pairs"] = pairs;
    report["max_pairwise_nmae"] = rep.max_pairwise_nmae;
  } else {
    throw CliError(kExitConfig, "audit: unknown suite '" + suite + "'");
  }
  emit_report(out_path, report, effective);
  return 0;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Transient wall-shear-stress surrogate toolkit"};
  app.require_subcommand(1);

  // shared option storage; each subcommand binds the flags it supports
  std::string config_path, out_path, waveform_path, precision = "f32";
  std::string ckpt_path, mesh_path, pred_path, truth_path, suite;
  std::vector<std::string> mesh_paths;
  std::int64_t seed_value = 0;
  bool deterministic = false;
  double q_max = 80.0;

  auto add_common = [&](CLI::App* sub, bool with_precision = false) {
    sub->add_option("--seed", seed_value, "override every seed in the configuration");
    sub->add_flag("--deterministic", deterministic,
                  "force single-threaded linear algebra for bit-stable reruns");
    if (with_precision)
      sub->add_option("--precision", precision, "field file storage precision")
          ->check(CLI::IsMember({"f32", "f64"}));
  };

  CLI::App* generate = app.add_subcommand("generate", "build a synthetic vessel corpus");
  generate->add_option("--config", config_path, "recipe JSON")->check(CLI::ExistingFile);
  generate->add_option("--out", out_path, "corpus output directory")->required();
  add_common(generate);

  CLI::App* featurize = app.add_subcommand("featurize", "compute descriptor files for meshes");
  featurize->add_option("meshes", mesh_paths, "labelled OBJ meshes")->required();
  featurize->add_option("--out", out_path, "output directory (default: current)");
  featurize->add_option("--waveform", waveform_path, "inflow waveform CSV")
      ->check(CLI::ExistingFile);
  featurize->add_option("--q-max", q_max, "peak inflow (ml/s) for the built-in waveform");
  add_common(featurize);

  CLI::App* train = app.add_subcommand("train", "fit a surrogate on a corpus");
  train->add_option("--config", config_path, "training JSON")->required()
      ->check(CLI::ExistingFile);
  train->add_option("--out", out_path, "run directory (overrides config out_dir)");
  add_common(train, true);

  CLI::App* predict = app.add_subcommand("predict", "run a checkpoint on one mesh");
  predict->add_option("--checkpoint", ckpt_path, "model checkpoint")->required()
      ->check(CLI::ExistingFile);
  predict->add_option("--mesh", mesh_path, "labelled OBJ mesh")->required()
      ->check(CLI::ExistingFile);
  predict->add_option("--out", out_path, "output field file")->required();
  predict->add_option("--waveform", waveform_path, "inflow waveform CSV")
      ->check(CLI::ExistingFile);
  predict->add_option("--q-max", q_max, "peak inflow (ml/s) for the built-in waveform");
  add_common(predict, true);

  CLI::App* evaluate = app.add_subcommand("evaluate", "compare two field files");
  evaluate->add_option("--pred", pred_path, "predicted field file")->required()
      ->check(CLI::ExistingFile);
  evaluate->add_option("--truth", truth_path, "reference field file")->required()
      ->check(CLI::ExistingFile);
  evaluate->add_option("--out", out_path, "report path (default: stdout)");

  CLI::App* audit = app.add_subcommand("audit", "generalisation audit suites");
  audit->add_option("suite", suite, "equivariance | inflow-sweep | remodel | topology | "
                                    "mesh-sensitivity")
      ->required();
  audit->add_option("--checkpoint", ckpt_path, "model checkpoint")->required()
      ->check(CLI::ExistingFile);
  audit->add_option("--config", config_path, "suite configuration JSON")
      ->check(CLI::ExistingFile);
  audit->add_option("--out", out_path, "report path (default: stdout)");
  add_common(audit);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  if (const char* tv = std::getenv("VWSS_THREADS")) {
    const int n = std::atoi(tv);
    if (n > 0) Eigen::setNbThreads(n);
  }
  if (deterministic) Eigen::setNbThreads(1);

  bool seed_given = false;
  for (const CLI::App* sub : app.get_subcommands())
    if (const CLI::Option* o = sub->get_option_no_throw("--seed"); o && o->count() > 0)
      seed_given = true;
  const std::int64_t* seed = seed_given ? &seed_value : nullptr;
  const std::string* train_precision =
      train->get_option("--precision")->count() > 0 ? &precision : nullptr;

  try {
    if (generate->parsed()) return cmd_generate(config_path, out_path, seed);
    if (featurize->parsed()) return cmd_featurize(mesh_paths, out_path, waveform_path, q_max);
    if (train->parsed()) return cmd_train(config_path, out_path, seed, train_precision);
    if (predict->parsed())
      return cmd_predict(ckpt_path, mesh_path, out_path, waveform_path, q_max, seed, precision);
    if (evaluate->parsed()) return cmd_evaluate(pred_path, truth_path, out_path);
    if (audit->parsed()) return cmd_audit(suite, ckpt_path, config_path, out_path, seed);
  } catch (const CliError& e) {
    std::cerr << nlohmann::json{{"error", e.what()}, {"code", e.code}}.dump() << "\n";
    return e.code;
  } catch (const std::exception& e) {
    std::cerr << nlohmann::json{{"error", e.what()}, {"code", kExitNumeric}}.dump() << "\n";
    return kExitNumeric;
  }
  return 0;
}
