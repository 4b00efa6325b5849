#pragma once

// Model checkpoint serialization.  Layout:
//   8-byte magic "VWSSCKPT"
//   u32 little-endian header length
//   JSON header {format_version, kind, config, feature_stats, dtype, tensors:[{name,rows,cols}]}
//   tensor payloads in header order, row-major little-endian f32 or f64.
// Shapes are fully determined by the config, so loading validates them.

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "vwss/descriptors/features.hpp"
#include "vwss/io/field_file.hpp"
#include "vwss/net/config.hpp"
#include "vwss/net/params.hpp"

namespace vwss::net {

inline constexpr char kCheckpointMagic[8] = {'V', 'W', 'S', 'S', 'C', 'K', 'P', 'T'};
inline constexpr int kCheckpointVersion = 1;

enum class ModelKind { kGatr, kVatr };

inline std::string to_string(ModelKind k) { return k == ModelKind::kGatr ? "gatr" : "vatr"; }
inline ModelKind model_kind_from_string(const std::string& s) {
  if (s == "gatr") return ModelKind::kGatr;
  if (s == "vatr") return ModelKind::kVatr;
  throw std::invalid_argument("checkpoint: unknown model kind '" + s + "'");
}

struct ModelCheckpoint {
  ModelKind kind = ModelKind::kGatr;
  GatrConfig gatr;
  VatrConfig vatr;
  desc::FeatureStats stats;
  ParamSet params;

  ParamShapes expected_shapes() const {
    return kind == ModelKind::kGatr ? gatr_param_shapes(gatr) : vatr_param_shapes(vatr);
  }
  int timepoints() const { return kind == ModelKind::kGatr ? gatr.timepoints : vatr.timepoints; }
};

namespace detail {

inline nlohmann::json gatr_config_json(const GatrConfig& c) {
  return {{"blocks", c.blocks},         {"heads", c.heads},   {"channels", c.channels},
          {"rate", c.rate},             {"k", c.k},           {"eps", c.eps},
          {"timepoints", c.timepoints}, {"dropout", c.dropout}};
}

inline nlohmann::json vatr_config_json(const VatrConfig& c) {
  return {{"blocks", c.blocks},         {"heads", c.heads},   {"hidden", c.hidden},
          {"rate", c.rate},             {"k", c.k},           {"eps", c.eps},
          {"timepoints", c.timepoints}, {"dropout", c.dropout}};
}

inline GatrConfig gatr_config_from_json(const nlohmann::json& j) {
  GatrConfig c;
  c.blocks = j.at("blocks").get<int>();
  c.heads = j.at("heads").get<int>();
  c.channels = j.at("channels").get<int>();
  c.rate = j.at("rate").get<double>();
  c.k = j.at("k").get<int>();
  c.eps = j.at("eps").get<double>();
  c.timepoints = j.at("timepoints").get<int>();
  c.dropout = j.at("dropout").get<double>();
  return c;
}

inline VatrConfig vatr_config_from_json(const nlohmann::json& j) {
  VatrConfig c;
  c.blocks = j.at("blocks").get<int>();
  c.heads = j.at("heads").get<int>();
  c.hidden = j.at("hidden").get<int>();
  c.rate = j.at("rate").get<double>();
  c.k = j.at("k").get<int>();
  c.eps = j.at("eps").get<double>();
  c.timepoints = j.at("timepoints").get<int>();
  c.dropout = j.at("dropout").get<double>();
  return c;
}

} // namespace detail

inline void save_checkpoint(const std::string& path, const ModelCheckpoint& ckpt,
                            io::Precision precision = io::Precision::kF32) {
  check_param_shapes(ckpt.params, ckpt.expected_shapes());
  if (!ckpt.stats.mean.allFinite() || !ckpt.stats.std.allFinite() ||
      (ckpt.stats.std.array() <= 0.0).any())
    throw std::invalid_argument("checkpoint: feature statistics must be finite with positive std");

  nlohmann::json header;
  header["format_version"] = kCheckpointVersion;
  header["kind"] = to_string(ckpt.kind);
  header["config"] = ckpt.kind == ModelKind::kGatr ? detail::gatr_config_json(ckpt.gatr)
                                                   : detail::vatr_config_json(ckpt.vatr);
  header["feature_stats"] = {
      {"mean", std::vector<double>(ckpt.stats.mean.data(), ckpt.stats.mean.data() + 5)},
      {"std", std::vector<double>(ckpt.stats.std.data(), ckpt.stats.std.data() + 5)}};
  header["dtype"] = precision == io::Precision::kF32 ? "f32" : "f64";
  header["tensors"] = nlohmann::json::array();
  for (const auto& [name, m] : ckpt.params)
    header["tensors"].push_back({{"name", name},
                                 {"rows", static_cast<std::int64_t>(m.rows())},
                                 {"cols", static_cast<std::int64_t>(m.cols())}});

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("checkpoint: cannot open '" + path + "' for writing");
  out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
  const std::string hs = header.dump();
  const std::uint32_t len = static_cast<std::uint32_t>(hs.size());
  char lenb[4];
  std::memcpy(lenb, &len, 4);
  out.write(lenb, 4);
  out.write(hs.data(), static_cast<std::streamsize>(hs.size()));

  for (const auto& [name, m] : ckpt.params) {
    if (precision == io::Precision::kF32) {
      std::vector<float> buf(static_cast<size_t>(m.size()));
      size_t idx = 0;
      for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) buf[idx++] = static_cast<float>(m(r, c));
      out.write(reinterpret_cast<const char*>(buf.data()),
                static_cast<std::streamsize>(buf.size() * sizeof(float)));
    } else {
      std::vector<double> buf(static_cast<size_t>(m.size()));
      size_t idx = 0;
      for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) buf[idx++] = m(r, c);
      out.write(reinterpret_cast<const char*>(buf.data()),
                static_cast<std::streamsize>(buf.size() * sizeof(double)));
    }
  }
  if (!out) throw std::runtime_error("checkpoint: write to '" + path + "' failed");
}

inline ModelCheckpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("checkpoint: cannot open '" + path + "'");
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kCheckpointMagic, 8) != 0)
    throw std::runtime_error("checkpoint: '" + path + "' is not a model checkpoint");
  char lenb[4];
  in.read(lenb, 4);
  std::uint32_t len = 0;
  std::memcpy(&len, lenb, 4);
  if (!in || len == 0 || len > (1u << 20))
    throw std::runtime_error("checkpoint: corrupt header length");
  std::string hs(len, '\0');
  in.read(hs.data(), static_cast<std::streamsize>(len));
  if (!in) throw std::runtime_error("checkpoint: truncated header");

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(hs);
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(std::string("checkpoint: invalid header JSON: ") + e.what());
  }
  if (header.at("format_version").get<int>() != kCheckpointVersion)
    throw std::runtime_error("checkpoint: unsupported format version");

  ModelCheckpoint ckpt;
  ckpt.kind = model_kind_from_string(header.at("kind").get<std::string>());
  if (ckpt.kind == ModelKind::kGatr)
    ckpt.gatr = detail::gatr_config_from_json(header.at("config"));
  else
    ckpt.vatr = detail::vatr_config_from_json(header.at("config"));

  const auto mean = header.at("feature_stats").at("mean").get<std::vector<double>>();
  const auto stddev = header.at("feature_stats").at("std").get<std::vector<double>>();
  if (mean.size() != 5 || stddev.size() != 5)
    throw std::runtime_error("checkpoint: feature stats must have 5 entries");
  for (int i = 0; i < 5; ++i) {
    ckpt.stats.mean[i] = mean[static_cast<size_t>(i)];
    ckpt.stats.std[i] = stddev[static_cast<size_t>(i)];
  }

  const std::string dtype = header.at("dtype").get<std::string>();
  if (dtype != "f32" && dtype != "f64")
    throw std::runtime_error("checkpoint: unknown dtype '" + dtype + "'");
  const bool f32 = dtype == "f32";

  for (const auto& tj : header.at("tensors")) {
    const std::string name = tj.at("name").get<std::string>();
    const auto rows = tj.at("rows").get<std::int64_t>();
    const auto cols = tj.at("cols").get<std::int64_t>();
    if (rows <= 0 || cols <= 0 || rows * cols > (std::int64_t(1) << 30))
      throw std::runtime_error("checkpoint: implausible tensor shape for '" + name + "'");
    Eigen::MatrixXd m(rows, cols);
    const size_t count = static_cast<size_t>(rows * cols);
    if (f32) {
      std::vector<float> buf(count);
      in.read(reinterpret_cast<char*>(buf.data()),
              static_cast<std::streamsize>(count * sizeof(float)));
      if (!in) throw std::runtime_error("checkpoint: truncated tensor '" + name + "'");
      size_t idx = 0;
      for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = static_cast<double>(buf[idx++]);
    } else {
      std::vector<double> buf(count);
      in.read(reinterpret_cast<char*>(buf.data()),
              static_cast<std::streamsize>(count * sizeof(double)));
      if (!in) throw std::runtime_error("checkpoint: truncated tensor '" + name + "'");
      size_t idx = 0;
      for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = buf[idx++];
    }
    ckpt.params[name] = std::move(m);
  }
  check_param_shapes(ckpt.params, ckpt.expected_shapes());
  return ckpt;
}

} // namespace vwss::net
