#pragma once

// Dataset recipe: deterministic families of synthetic vessels, each simulated
// under several inflow waveforms with the analytic oracle.  Per geometry the
// recipe draws a number of peak flows uniformly from [60, 140] ml/s and adds
// one reference run at 80 ml/s, mirroring the convention that every geometry
// is seen under a shared baseline inflow plus randomised ones.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <stdexcept>
#include <vector>

#include "json.hpp"
#include "vwss/descriptors/features.hpp"
#include "vwss/descriptors/waveform.hpp"
#include "vwss/io/field_file.hpp"
#include "vwss/io/mesh_io.hpp"
#include "vwss/lab/oracle.hpp"
#include "vwss/lab/vessel.hpp"
#include "vwss/train/dataset.hpp"

namespace vwss::lab {

/// Synthetic pulsatile inflow template with unit peak flow: a squared-sine
/// systolic burst over the first 35% of the cycle on a diastolic baseline.
inline desc::InflowWaveform template_waveform(int samples = 40) {
  if (samples < 2) throw std::invalid_argument("template_waveform: need at least 2 samples");
  desc::InflowWaveform w;
  w.time_s.resize(samples);
  w.flow_ml_s.resize(samples);
  const double t_sys = 0.35;
  for (int i = 0; i < samples; ++i) {
    const double t = static_cast<double>(i) / (samples - 1);
    w.time_s[i] = t;
    const double pulse = t < t_sys ? std::pow(std::sin(M_PI * t / t_sys), 2.0) : 0.0;
    w.flow_ml_s[i] = 0.15 + 0.85 * pulse;
  }
  return w;
}

struct RecipeConfig {
  int n_geometries = 32;
  int random_sims = 3;            // peak flows drawn from U(60, 140) ml/s
  bool include_reference = true;  // plus one run at exactly 80 ml/s
  double q_low = 60.0, q_high = 140.0, q_reference = 80.0;
  double target_edge_mm = 5.5;
  double bulge_probability = 0.5;
  int branch_count = 0; // side branches per geometry
  std::uint64_t seed = 0;
  OracleConfig oracle;
};

/// One random vessel spec.  Throws std::invalid_argument only with pathological
/// parameter ranges; the caller retries with fresh draws.
inline VesselSpec random_vessel_spec(std::mt19937_64& rng, const RecipeConfig& rc) {
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  VesselSpec spec;
  const double length = 70.0 + 40.0 * u01(rng);
  spec.control_points.resize(4, 3);
  spec.control_points.row(0) << 0.0, 0.0, 0.0;
  for (int i = 1; i < 4; ++i) {
    const double sway = i == 3 ? 0.05 : 0.15;
    spec.control_points.row(i) << sway * length * (2.0 * u01(rng) - 1.0),
        sway * length * (2.0 * u01(rng) - 1.0), length * i / 3.0;
  }
  spec.radius0_mm = 8.0 + 4.0 * u01(rng);
  spec.radius1_mm = spec.radius0_mm * (0.75 + 0.25 * u01(rng));
  if (u01(rng) < rc.bulge_probability) {
    spec.bulge.amplitude_mm = (0.2 + 0.4 * u01(rng)) * spec.radius0_mm;
    spec.bulge.center_s = 0.35 + 0.35 * u01(rng);
    spec.bulge.width_s = 0.08 + 0.07 * u01(rng);
  }
  for (int b = 0; b < rc.branch_count; ++b) {
    BranchSpec br;
    br.attach_s = 0.3 + 0.4 * u01(rng);
    br.azimuth_rad = 2.0 * M_PI * u01(rng);
    br.takeoff_rad = 1.0 + 0.5 * u01(rng);
    br.length_mm = 25.0 + 15.0 * u01(rng);
    br.radius0_mm = 3.5 + 1.5 * u01(rng);
    br.radius1_mm = br.radius0_mm * (0.8 + 0.2 * u01(rng));
    spec.branches.push_back(br);
  }
  spec.target_edge_mm = rc.target_edge_mm;
  spec.noise_mm = 0.3;
  spec.seed = rng();
  return spec;
}

struct LabSim {
  double q_max = 0.0;
  desc::InflowWaveform waveform;
  hemo::TransientWssField field;
};

struct LabGeometry {
  int id = 0;
  VesselSpec spec;
  mesh::SurfaceMesh mesh;
  std::vector<LabSim> sims;
};

struct LabDataset {
  std::vector<LabGeometry> geometries;
};

/// Generate the full synthetic corpus.  Specs that fail the clearance checks
/// are redrawn (bounded retries), so the result is deterministic in the seed.
inline LabDataset build_lab_dataset(const RecipeConfig& rc) {
  if (rc.n_geometries < 1) throw std::invalid_argument("recipe: need at least one geometry");
  std::mt19937_64 rng(rc.seed * 0x9e3779b97f4a7c15ULL + 0xd1b54a32d192ed03ULL);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  const desc::InflowWaveform tpl = template_waveform();

  LabDataset ds;
  for (int g = 0; g < rc.n_geometries; ++g) {
    LabGeometry geo;
    geo.id = g;
    bool built = false;
    for (int attempt = 0; attempt < 32 && !built; ++attempt) {
      try {
        geo.spec = random_vessel_spec(rng, rc);
        geo.mesh = generate_vessel(geo.spec);
        built = true;
      } catch (const std::invalid_argument&) {
        // clearance check rejected the draw; try again with fresh randomness
      }
    }
    if (!built) throw std::runtime_error("recipe: could not draw a valid vessel spec");

    std::vector<double> peaks;
    for (int s = 0; s < rc.random_sims; ++s)
      peaks.push_back(rc.q_low + (rc.q_high - rc.q_low) * u01(rng));
    if (rc.include_reference) peaks.push_back(rc.q_reference);
    for (const double q : peaks) {
      LabSim sim;
      sim.q_max = q;
      sim.waveform = desc::scale_waveform(tpl, q);
      sim.field = oracle_wss(geo.mesh, geo.spec, sim.waveform, rc.oracle);
      geo.sims.push_back(std::move(sim));
    }
    ds.geometries.push_back(std::move(geo));
  }
  return ds;
}

/// Featurize every (geometry, inflow) pair into a training set.
inline train::Dataset to_training_dataset(const LabDataset& lab) {
  train::Dataset out;
  for (const auto& g : lab.geometries)
    for (size_t s = 0; s < g.sims.size(); ++s) {
      train::TrainingSample ts;
      ts.geometry_id = g.id;
      ts.sim_id = static_cast<int>(s);
      ts.descriptors = desc::compute_descriptors(g.mesh, g.sims[s].waveform);
      ts.target = g.sims[s].field;
      out.push_back(std::move(ts));
    }
  return out;
}

/// Persist a dataset: meshes as OBJ (+ cap sidecars), waveforms as CSV, fields
/// as field files, and a manifest.json tying them together.
inline void save_lab_dataset(const LabDataset& ds, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  nlohmann::json manifest;
  manifest["geometries"] = nlohmann::json::array();
  for (const auto& g : ds.geometries) {
    const std::string mesh_name = "geom" + std::to_string(g.id) + ".obj";
    io::save_mesh(g.mesh, dir / mesh_name);
    nlohmann::json jg;
    jg["id"] = g.id;
    jg["mesh"] = mesh_name;
    jg["sims"] = nlohmann::json::array();
    for (size_t s = 0; s < g.sims.size(); ++s) {
      const std::string stem = "geom" + std::to_string(g.id) + "_sim" + std::to_string(s);
      {
        std::ofstream wf(dir / (stem + ".csv"));
        wf << "time_s,flow_ml_s\n";
        for (int i = 0; i < g.sims[s].waveform.n_samples(); ++i)
          wf << g.sims[s].waveform.time_s[i] << "," << g.sims[s].waveform.flow_ml_s[i] << "\n";
      }
      io::save_field((dir / (stem + ".fld")).string(), hemo::wss_to_field(g.sims[s].field),
                     io::Precision::kF64);
      nlohmann::json js;
      js["q_max"] = g.sims[s].q_max;
      js["waveform"] = stem + ".csv";
      js["field"] = stem + ".fld";
      js["split"] = "train";
      jg["sims"].push_back(js);
    }
    manifest["geometries"].push_back(jg);
  }
  std::ofstream mf(dir / "manifest.json");
  mf << manifest.dump(2) << "\n";
}

/// Load a dataset previously written by save_lab_dataset.  Specs are not
/// persisted, so oracle re-evaluation is unavailable on a loaded set; the
/// stored fields carry the ground truth.
inline LabDataset load_lab_dataset(const std::filesystem::path& dir) {
  std::ifstream mf(dir / "manifest.json");
  if (!mf) throw std::runtime_error("recipe: cannot open manifest in " + dir.string());
  nlohmann::json manifest;
  mf >> manifest;
  LabDataset ds;
  for (const auto& jg : manifest.at("geometries")) {
    LabGeometry g;
    g.id = jg.at("id").get<int>();
    g.mesh = io::load_mesh(dir / jg.at("mesh").get<std::string>());
    for (const auto& js : jg.at("sims")) {
      LabSim sim;
      sim.q_max = js.at("q_max").get<double>();
      sim.waveform = desc::load_waveform((dir / js.at("waveform").get<std::string>()).string());
      sim.field = hemo::wss_from_field(io::load_field((dir / js.at("field").get<std::string>()).string()));
      g.sims.push_back(std::move(sim));
    }
    ds.geometries.push_back(std::move(g));
  }
  return ds;
}

} // namespace vwss::lab
