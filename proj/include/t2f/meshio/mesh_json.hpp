#pragma once

#include <nlohmann/json.hpp>

#include <string>

#include "t2f/common/format.hpp"
#include "t2f/mm/decoder.hpp"
#include "t2f/mm/types.hpp"

// JSON mesh form: {"vertices":[[x,y,z],...], "faces":[[a,b,c],...],
// "normals":[[x,y,z],...], "uvs":[[u,v],...] (per face corner, optional),
// "texture": "..." (optional)}. Also the detail-map JSON:
// {"width", "height", "scale", "samples":[...]}.

namespace t2f::meshio {

namespace mesh_json_detail {

inline void rows(std::string& out, const mm::Vertices& m) {
  out += '[';
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    out += i ? ",[" : "[";
    for (int c = 0; c < 3; ++c) {
      if (c) out += ',';
      fmt::append_exact(out, m(i, c));
    }
    out += ']';
  }
  out += ']';
}

inline mm::Vertices read_rows(const nlohmann::json& a, const char* field) {
  if (!a.is_array()) throw FormatError(std::string("mesh JSON: '") + field + "' must be an array");
  mm::Vertices m(static_cast<Eigen::Index>(a.size()), 3);
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!a[i].is_array() || a[i].size() != 3) throw FormatError(std::string("mesh JSON: '") + field + "' rows need 3 numbers");
    for (int c = 0; c < 3; ++c) m(static_cast<Eigen::Index>(i), c) = a[i][static_cast<std::size_t>(c)].get<double>();
  }
  return m;
}

}  // namespace mesh_json_detail

inline std::string mesh_json_text(const mm::Mesh& mesh) {
  std::string out = "{\"vertices\":";
  mesh_json_detail::rows(out, mesh.vertices);
  out += ",\"faces\":[";
  for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
    if (f) out += ',';
    out += '[' + std::to_string(mesh.faces[f][0]) + ',' + std::to_string(mesh.faces[f][1]) + ',' +
           std::to_string(mesh.faces[f][2]) + ']';
  }
  out += "],\"normals\":";
  mesh_json_detail::rows(out, mesh.vertex_normals);
  if (mesh.has_uvs()) {
    out += ",\"uvs\":[";
    for (std::size_t i = 0; i < mesh.uv_coords.size(); ++i) {
      out += i ? ",[" : "[";
      fmt::append_exact(out, mesh.uv_coords[i].x());
      out += ',';
      fmt::append_exact(out, mesh.uv_coords[i].y());
      out += ']';
    }
    out += ']';
  }
  if (mesh.texture_ref) out += ",\"texture\":" + nlohmann::json(*mesh.texture_ref).dump();
  out += "}\n";
  return out;
}

inline mm::Mesh mesh_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("vertices") || !j.contains("faces"))
    throw FormatError("mesh JSON needs 'vertices' and 'faces'");
  mm::Mesh mesh;
  mesh.vertices = mesh_json_detail::read_rows(j["vertices"], "vertices");
  for (const auto& f : j["faces"]) {
    if (!f.is_array() || f.size() != 3) throw FormatError("mesh JSON: faces must be triangles");
    mm::Face face{};
    for (std::size_t k = 0; k < 3; ++k) {
      const auto idx = f[k].get<long long>();
      if (idx < 0 || idx >= mesh.vertices.rows()) throw FormatError("mesh JSON: face index out of range");
      face[k] = static_cast<std::uint32_t>(idx);
    }
    mesh.faces.push_back(face);
  }
  if (j.contains("uvs")) {
    for (const auto& uv : j["uvs"]) {
      if (!uv.is_array() || uv.size() != 2) throw FormatError("mesh JSON: uvs rows need 2 numbers");
      mesh.uv_coords.emplace_back(uv[0].get<double>(), uv[1].get<double>());
    }
    if (mesh.uv_coords.size() != 3 * mesh.faces.size()) throw FormatError("mesh JSON: need one uv per face corner");
  }
  if (j.contains("normals")) {
    mesh.vertex_normals = mesh_json_detail::read_rows(j["normals"], "normals");
    if (mesh.vertex_normals.rows() != mesh.vertices.rows()) throw FormatError("mesh JSON: normals/vertices count differ");
  } else {
    mesh.vertex_normals = mm::compute_vertex_normals(mesh.vertices, mesh.faces);
  }
  if (j.contains("texture") && j["texture"].is_string()) mesh.texture_ref = j["texture"].get<std::string>();
  return mesh;
}

inline mm::DetailMap detail_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw FormatError("detail map JSON must be an object");
  mm::DetailMap d;
  d.width = j.at("width").get<std::uint32_t>();
  d.height = j.at("height").get<std::uint32_t>();
  d.scale = j.value("scale", 1.0);
  d.samples = j.at("samples").get<std::vector<double>>();
  d.validate();
  return d;
}

}  // namespace t2f::meshio
