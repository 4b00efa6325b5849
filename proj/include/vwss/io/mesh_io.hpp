#pragma once

// Mesh serialisation: ASCII OBJ for geometry plus a JSON sidecar for the cap
// labels and inflow metadata.  The sidecar of  foo.obj  lives at  foo.json.

#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "json.hpp"
#include "vwss/mesh/surface_mesh.hpp"

namespace vwss::io {

inline std::filesystem::path sidecar_path(const std::filesystem::path& obj_path) {
  std::filesystem::path p = obj_path;
  return p.replace_extension(".json");
}

inline void save_mesh(const mesh::SurfaceMesh& m, const std::filesystem::path& obj_path) {
  std::ofstream obj(obj_path);
  if (!obj) throw std::runtime_error("save_mesh: cannot open " + obj_path.string());
  obj.precision(17);
  for (int v = 0; v < m.n_vertices(); ++v)
    obj << "v " << m.vertices(v, 0) << ' ' << m.vertices(v, 1) << ' ' << m.vertices(v, 2)
        << '\n';
  for (int f = 0; f < m.n_faces(); ++f)
    obj << "f " << m.faces(f, 0) + 1 << ' ' << m.faces(f, 1) + 1 << ' ' << m.faces(f, 2) + 1
        << '\n';
  obj.close();

  nlohmann::json side;
  side["inlet"] = m.inlet;
  side["outlets"] = m.outlets;
  side["inlet_area"] = m.inlet_area;
  side["inlet_normal"] = {m.inlet_normal.x(), m.inlet_normal.y(), m.inlet_normal.z()};
  side["units"] = "mm";
  std::ofstream js(sidecar_path(obj_path));
  if (!js) throw std::runtime_error("save_mesh: cannot open sidecar for " + obj_path.string());
  js << side.dump(2) << '\n';
}

/// Loads an OBJ mesh; the sidecar is required unless allow_missing_sidecar.
inline mesh::SurfaceMesh load_mesh(const std::filesystem::path& obj_path,
                                   bool allow_missing_sidecar = false) {
  std::ifstream obj(obj_path);
  if (!obj) throw std::runtime_error("load_mesh: cannot open " + obj_path.string());
  std::vector<std::array<double, 3>> verts;
  std::vector<std::array<int, 3>> faces;
  std::string line;
  int lineno = 0;
  while (std::getline(obj, line)) {
    ++lineno;
    std::istringstream ss(line);
    std::string tag;
    ss >> tag;
    if (tag == "v") {
      std::array<double, 3> v{};
      if (!(ss >> v[0] >> v[1] >> v[2]))
        throw std::runtime_error("load_mesh: bad vertex at line " + std::to_string(lineno));
      verts.push_back(v);
    } else if (tag == "f") {
      std::array<int, 3> f{};
      for (int e = 0; e < 3; ++e) {
        std::string tok;
        if (!(ss >> tok))
          throw std::runtime_error("load_mesh: bad face at line " + std::to_string(lineno));
        f[e] = std::stoi(tok.substr(0, tok.find('/'))) - 1; // 1-based, strip attributes
      }
      faces.push_back(f);
    } // comments, groups etc. ignored
  }
  mesh::SurfaceMesh m;
  m.vertices.resize(static_cast<int>(verts.size()), 3);
  for (size_t i = 0; i < verts.size(); ++i)
    m.vertices.row(static_cast<int>(i)) << verts[i][0], verts[i][1], verts[i][2];
  m.faces.resize(static_cast<int>(faces.size()), 3);
  for (size_t i = 0; i < faces.size(); ++i)
    m.faces.row(static_cast<int>(i)) << faces[i][0], faces[i][1], faces[i][2];

  const auto side_path = sidecar_path(obj_path);
  std::ifstream js(side_path);
  if (!js) {
    if (allow_missing_sidecar) return m;
    throw std::runtime_error("load_mesh: missing sidecar " + side_path.string());
  }
  nlohmann::json side;
  try {
    js >> side;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("load_mesh: bad sidecar " + side_path.string() + ": " + e.what());
  }
  m.inlet = side.at("inlet").get<std::vector<int>>();
  m.outlets = side.at("outlets").get<std::vector<std::vector<int>>>();
  m.inlet_area = side.at("inlet_area").get<double>();
  const auto n = side.at("inlet_normal");
  m.inlet_normal = Eigen::Vector3d(n.at(0).get<double>(), n.at(1).get<double>(),
                                   n.at(2).get<double>());
  if (side.at("units").get<std::string>() != "mm")
    throw std::runtime_error("load_mesh: unsupported units in " + side_path.string());
  return m;
}

} // namespace vwss::io
