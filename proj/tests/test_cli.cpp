#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "json.hpp"
#include "vwss/hemo/field.hpp"
#include "vwss/io/field_file.hpp"
#include "vwss/net/checkpoint.hpp"
#include "vwss/net/params.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const fs::path kWork = fs::temp_directory_path() / "vwss_cli_test";

int run_cli(const std::string& args, std::string* output = nullptr) {
  const fs::path log = kWork / "last_output.txt";
  const std::string cmd =
      std::string(VWSS_CLI_PATH) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  if (output) {
    std::ifstream in(log);
    std::stringstream ss;
    ss << in.rdbuf();
    *output = ss.str();
  }
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

json read_json(const fs::path& p) {
  std::ifstream in(p);
  json j;
  in >> j;
  return j;
}

/// Tiny corpus + zero-epoch run shared by the tests; built once via the CLI
/// itself so generation and training paths are both exercised.
void ensure_fixture() {
  static bool ready = false;
  if (ready) return;
  fs::remove_all(kWork);
  fs::create_directories(kWork);

  std::ofstream gen(kWork / "gen.json");
  gen << R"({"n_geometries": 2, "random_sims": 0, "include_reference": true,
             "target_edge_mm": 6.5, "bulge_probability": 0.0, "seed": 11})";
  gen.close();
  ASSERT_EQ(0, run_cli("generate --config " + (kWork / "gen.json").string() + " --out " +
                       (kWork / "corpus").string()));

  std::ofstream tr(kWork / "train0.json");
  tr << R"({"dataset": ")" << (kWork / "corpus").string() << R"(",
            "model": {"kind": "gatr", "blocks": 2, "heads": 2, "channels": 4,
                      "rate": 0.5, "k": 2, "dropout": 0.0},
            "trainer": {"epochs": 0, "seed": 3}})";
  tr.close();
  ASSERT_EQ(0, run_cli("train --config " + (kWork / "train0.json").string() + " --out " +
                       (kWork / "run0").string()));
  ready = true;
}

} // namespace

TEST(Cli, EvaluateOfIdenticalFieldsIsPerfect) {
  ensure_fixture();
  vwss::hemo::TransientWssField f(5, 3);
  for (int p = 0; p < 5; ++p)
    for (int t = 0; t < 3; ++t)
      f.set(p, t, Eigen::Vector3d(1.0 + p, 0.5 * t, -2.0));
  vwss::io::save_field((kWork / "f.fld").string(), vwss::hemo::wss_to_field(f),
                       vwss::io::Precision::kF64);

  const fs::path report = kWork / "selfeval.json";
  ASSERT_EQ(0, run_cli("evaluate --pred " + (kWork / "f.fld").string() + " --truth " +
                       (kWork / "f.fld").string() + " --out " + report.string()));
  const json r = read_json(report);
  EXPECT_EQ(0.0, r.at("mae_pa").get<double>());
  EXPECT_EQ(0.0, r.at("nmae").get<double>());
  EXPECT_EQ(1.0, r.at("cosine").get<double>());
  EXPECT_EQ(0.0, r.at("approx_disp").get<double>());
}

TEST(Cli, ReportsEmbedVersionAndConfigHash) {
  ensure_fixture();
  const json r = read_json(kWork / "run0" / "report.json");
  EXPECT_FALSE(r.at("version").get<std::string>().empty());
  EXPECT_EQ(16u, r.at("config_hash").get<std::string>().size());
  EXPECT_TRUE(r.contains("config"));
}

TEST(Cli, ZeroEpochTrainingWritesTheInitialCheckpoint) {
  ensure_fixture();
  const auto ckpt = vwss::net::load_checkpoint((kWork / "run0" / "model.ckpt").string());
  ASSERT_EQ(vwss::net::ModelKind::kGatr, ckpt.kind);
  const auto init = vwss::net::init_gatr_params(ckpt.gatr, 3);
  ASSERT_EQ(init.size(), ckpt.params.size());
  for (const auto& [name, value] : init) {
    ASSERT_TRUE(ckpt.params.count(name)) << name;
    EXPECT_EQ(0.0, (ckpt.params.at(name) - value).cwiseAbs().maxCoeff()) << name;
  }
}

TEST(Cli, EquivarianceAuditReportsATinyViolation) {
  ensure_fixture();
  std::ofstream cfg(kWork / "eq.json");
  cfg << R"({"transforms": 6, "probe_seed": 7})";
  cfg.close();
  const fs::path report = kWork / "eq_report.json";
  ASSERT_EQ(0, run_cli("audit equivariance --checkpoint " +
                       (kWork / "run0" / "model.ckpt").string() + " --config " +
                       (kWork / "eq.json").string() + " --out " + report.string()));
  const json r = read_json(report);
  EXPECT_EQ(6, r.at("transforms").get<int>());
  EXPECT_LT(r.at("max_violation").get<double>(), 1e-4);
}

TEST(Cli, UnknownConfigKeyIsAConfigError) {
  ensure_fixture();
  std::ofstream bad(kWork / "bad.json");
  bad << R"({"dataset": ")" << (kWork / "corpus").string() << R"(", "modell": {}})";
  bad.close();
  std::string output;
  EXPECT_EQ(2, run_cli("train --config " + (kWork / "bad.json").string() + " --out " +
                       (kWork / "runx").string(), &output));
  EXPECT_NE(std::string::npos, output.find("unknown key"));
}

TEST(Cli, CorruptCheckpointIsADataError) {
  ensure_fixture();
  std::ofstream bad(kWork / "bad.ckpt");
  bad << "not a checkpoint";
  bad.close();
  std::string output;
  EXPECT_EQ(3, run_cli("predict --checkpoint " + (kWork / "bad.ckpt").string() + " --mesh " +
                       (kWork / "corpus" / "geom0.obj").string() + " --out " +
                       (kWork / "x.fld").string(), &output));
  const json err = json::parse(output);
  EXPECT_EQ(3, err.at("code").get<int>());
}

TEST(Cli, PredictWritesAFieldTheEvaluatorAccepts) {
  ensure_fixture();
  const fs::path field = kWork / "pred.fld";
  ASSERT_EQ(0, run_cli("predict --checkpoint " + (kWork / "run0" / "model.ckpt").string() +
                       " --mesh " + (kWork / "corpus" / "geom0.obj").string() +
                       " --q-max 80 --precision f64 --out " + field.string()));
  const fs::path report = kWork / "pred_eval.json";
  ASSERT_EQ(0, run_cli("evaluate --pred " + field.string() + " --truth " +
                       (kWork / "corpus" / "geom0_sim0.fld").string() + " --out " +
                       report.string()));
  const json r = read_json(report);
  EXPECT_TRUE(std::isfinite(r.at("nmae").get<double>()));
  EXPECT_EQ(21, r.at("timepoints").get<int>());
}
