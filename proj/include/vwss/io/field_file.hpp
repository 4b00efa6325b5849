#pragma once

// Per-vertex field file: 8-byte magic "VWSSFLD\n", little-endian u32 header
// length, JSON header {n, T, components, kind, units, dtype}, then the sample
// blob as little-endian f32 or f64.  Values are point-major: entry
// (p, t, comp) sits at index (p*T + t)*components + comp, matching an
// n x (T*components) row layout with column t*components + comp.

#include <Eigen/Dense>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

namespace vwss::io {

struct FieldFile {
  int n = 0;
  int t = 1;
  int components = 1;
  std::string kind;
  std::string units;
  Eigen::MatrixXd values; // n x (t*components), column = t*components + comp
};

enum class Precision { kF32, kF64 };

inline constexpr char kFieldMagic[8] = {'V', 'W', 'S', 'S', 'F', 'L', 'D', '\n'};

inline void save_field(const std::string& path, const FieldFile& f,
                       Precision prec = Precision::kF32) {
  if (f.values.rows() != f.n || f.values.cols() != static_cast<Eigen::Index>(f.t) * f.components)
    throw std::invalid_argument("save_field: values shape inconsistent with header");
  nlohmann::json h;
  h["n"] = f.n;
  h["T"] = f.t;
  h["components"] = f.components;
  h["kind"] = f.kind;
  h["units"] = f.units;
  h["dtype"] = prec == Precision::kF32 ? "f32" : "f64";
  const std::string header = h.dump();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("save_field: cannot open " + path);
  out.write(kFieldMagic, 8);
  const auto len = static_cast<uint32_t>(header.size());
  char len_le[4] = {static_cast<char>(len & 0xff), static_cast<char>((len >> 8) & 0xff),
                    static_cast<char>((len >> 16) & 0xff), static_cast<char>((len >> 24) & 0xff)};
  out.write(len_le, 4);
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  for (int p = 0; p < f.n; ++p)
    for (Eigen::Index j = 0; j < f.values.cols(); ++j) {
      if (prec == Precision::kF32) {
        const float v = static_cast<float>(f.values(p, j));
        out.write(reinterpret_cast<const char*>(&v), 4);
      } else {
        const double v = f.values(p, j);
        out.write(reinterpret_cast<const char*>(&v), 8);
      }
    }
  if (!out) throw std::runtime_error("save_field: write failed for " + path);
}

inline FieldFile load_field(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_field: cannot open " + path);
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kFieldMagic, 8) != 0)
    throw std::runtime_error("load_field: " + path + " is not a field file");
  unsigned char len_le[4];
  in.read(reinterpret_cast<char*>(len_le), 4);
  const uint32_t len = static_cast<uint32_t>(len_le[0]) | (static_cast<uint32_t>(len_le[1]) << 8) |
                       (static_cast<uint32_t>(len_le[2]) << 16) |
                       (static_cast<uint32_t>(len_le[3]) << 24);
  if (!in || len > (1u << 20)) throw std::runtime_error("load_field: corrupt header length");
  std::string header(len, '\0');
  in.read(header.data(), len);
  nlohmann::json h = nlohmann::json::parse(header, nullptr, false);
  if (h.is_discarded()) throw std::runtime_error("load_field: corrupt JSON header");
  FieldFile f;
  f.n = h.at("n").get<int>();
  f.t = h.at("T").get<int>();
  f.components = h.at("components").get<int>();
  f.kind = h.at("kind").get<std::string>();
  f.units = h.at("units").get<std::string>();
  const std::string dtype = h.at("dtype").get<std::string>();
  if (f.n < 0 || f.t < 1 || f.components < 1)
    throw std::runtime_error("load_field: invalid header dimensions");
  f.values.resize(f.n, static_cast<Eigen::Index>(f.t) * f.components);
  for (int p = 0; p < f.n; ++p)
    for (Eigen::Index j = 0; j < f.values.cols(); ++j) {
      if (dtype == "f32") {
        float v;
        in.read(reinterpret_cast<char*>(&v), 4);
        f.values(p, j) = v;
      } else if (dtype == "f64") {
        double v;
        in.read(reinterpret_cast<char*>(&v), 8);
        f.values(p, j) = v;
      } else {
        throw std::runtime_error("load_field: unknown dtype " + dtype);
      }
    }
  if (!in) throw std::runtime_error("load_field: truncated blob in " + path);
  return f;
}

} // namespace vwss::io
