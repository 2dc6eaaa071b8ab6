#pragma once

#include <charconv>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "t2f/common/binary_io.hpp"
#include "t2f/common/error.hpp"
#include "t2f/common/format.hpp"
#include "t2f/mm/decoder.hpp"
#include "t2f/mm/types.hpp"

namespace t2f::meshio {

inline constexpr const char* kMaterialName = "face";

namespace obj_detail {

inline void vec_line(std::string& out, const char* tag, std::initializer_list<double> values) {
  out += tag;
  for (double v : values) {
    out += ' ';
    fmt::append_fixed(out, v, 6);
  }
  out += '\n';
}

}  // namespace obj_detail

// OBJ text: "v" per vertex, "vt" per face corner (when UVs exist), "vn" per
// vertex, then triangles as v//vn or v/vt/vn. Coordinates use fixed
// six-decimal formatting, so output is byte-stable.
inline std::string obj_text(const mm::Mesh& mesh, const std::optional<std::string>& mtllib = std::nullopt) {
  if (mesh.has_uvs() && mesh.uv_coords.size() != 3 * mesh.faces.size())
    throw DimensionError("mesh UV count must be 3 per face");
  std::string out;
  out.reserve(static_cast<std::size_t>(mesh.vertices.rows()) * 80 + mesh.faces.size() * 40);
  out += "# t2f mesh: " + std::to_string(mesh.vertices.rows()) + " vertices, " +
         std::to_string(mesh.faces.size()) + " faces\n";
  if (mtllib) out += "mtllib " + *mtllib + "\n";
  for (Eigen::Index i = 0; i < mesh.vertices.rows(); ++i)
    obj_detail::vec_line(out, "v", {mesh.vertices(i, 0), mesh.vertices(i, 1), mesh.vertices(i, 2)});
  for (const auto& uv : mesh.uv_coords) obj_detail::vec_line(out, "vt", {uv.x(), uv.y()});
  for (Eigen::Index i = 0; i < mesh.vertex_normals.rows(); ++i)
    obj_detail::vec_line(out, "vn",
                         {mesh.vertex_normals(i, 0), mesh.vertex_normals(i, 1), mesh.vertex_normals(i, 2)});
  if (mtllib) out += std::string("usemtl ") + kMaterialName + "\n";
  for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
    out += 'f';
    for (std::size_t k = 0; k < 3; ++k) {
      const std::string v = std::to_string(mesh.faces[f][k] + 1);
      out += ' ';
      out += v;
      out += mesh.has_uvs() ? "/" + std::to_string(3 * f + k + 1) + "/" : "//";
      out += v;
    }
    out += '\n';
  }
  return out;
}

inline std::string mtl_text(const std::string& texture_file) {
  std::string out;
  out += std::string("newmtl ") + kMaterialName + "\n";
  out += "Ka 1.000000 1.000000 1.000000\n";
  out += "Kd 1.000000 1.000000 1.000000\n";
  out += "Ks 0.000000 0.000000 0.000000\n";
  out += "d 1.000000\n";
  out += "illum 1\n";
  out += "map_Kd " + texture_file + "\n";
  return out;
}

struct ExportedFiles {
  std::filesystem::path obj;
  std::optional<std::filesystem::path> mtl;
  std::optional<std::filesystem::path> texture;
};

// Writes the OBJ and, with a texture, an MTL next to it (same stem) whose
// map_Kd names the texture. The texture is copied beside the OBJ unless it
// already lives there.
inline ExportedFiles export_obj(const mm::Mesh& mesh, const std::filesystem::path& path,
                                const std::optional<std::filesystem::path>& texture = std::nullopt) {
  namespace fs = std::filesystem;
  ExportedFiles files{path, std::nullopt, std::nullopt};
  std::optional<std::string> mtllib;
  if (texture) {
    if (!fs::exists(*texture)) throw Error("texture image not found: " + texture->string());
    const fs::path dir = path.has_parent_path() ? path.parent_path() : fs::path(".");
    const fs::path target = dir / texture->filename();
    if (!fs::exists(target) || !fs::equivalent(*texture, target))
      fs::copy_file(*texture, target, fs::copy_options::overwrite_existing);
    auto mtl = path;
    mtl.replace_extension(".mtl");
    io::write_text(mtl, mtl_text(texture->filename().string()));
    mtllib = mtl.filename().string();
    files.mtl = mtl;
    files.texture = target;
  }
  io::write_text(path, obj_text(mesh, mtllib));
  return files;
}

namespace obj_detail {

inline std::vector<std::string_view> tokens(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    const std::size_t start = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t' && line[i] != '\r') ++i;
    if (i > start) out.push_back(line.substr(start, i - start));
  }
  return out;
}

[[noreturn]] inline void fail(std::size_t lineno, const std::string& msg) {
  throw FormatError("OBJ line " + std::to_string(lineno) + ": " + msg);
}

inline double number(std::string_view s, std::size_t lineno) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) fail(lineno, "invalid number '" + std::string(s) + "'");
  return v;
}

// Resolves a 1-based (or negative, relative) OBJ index against `count`.
inline std::size_t resolve(std::string_view s, std::size_t count, std::size_t lineno, const char* what) {
  long long v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc{} || ptr != s.data() + s.size())
    fail(lineno, std::string("malformed ") + what + " index '" + std::string(s) + "'");
  if (v == 0) fail(lineno, std::string(what) + " index 0 is invalid (OBJ indices are 1-based)");
  const long long resolved = v > 0 ? v - 1 : static_cast<long long>(count) + v;
  if (resolved < 0 || resolved >= static_cast<long long>(count))
    fail(lineno, std::string(what) + " index " + std::string(s) + " out of range");
  return static_cast<std::size_t>(resolved);
}

struct Corner {
  std::size_t v;
  std::optional<std::size_t> vt;
  std::optional<std::size_t> vn;
};

}  // namespace obj_detail

// Reads triangle/polygon OBJ (polygons fan-triangulated). Vertex normals
// come from the first "vn" referenced per vertex, otherwise are computed.
inline mm::Mesh parse_obj_text(std::string_view text, const std::filesystem::path& base_dir = {}) {
  using namespace obj_detail;
  std::vector<Eigen::Vector3d> positions;
  std::vector<mm::Uv> texcoords;
  std::vector<Eigen::Vector3d> normals;
  std::vector<std::array<Corner, 3>> triangles;
  std::optional<std::string> mtllib;

  std::size_t lineno = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto end = std::min(text.find('\n', pos), text.size());
    const std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++lineno;
    const auto tok = tokens(line);
    if (tok.empty() || tok[0].front() == '#') continue;
    const auto& kind = tok[0];
    if (kind == "v") {
      if (tok.size() < 4) fail(lineno, "vertex needs 3 coordinates");
      positions.emplace_back(number(tok[1], lineno), number(tok[2], lineno), number(tok[3], lineno));
    } else if (kind == "vt") {
      if (tok.size() < 3) fail(lineno, "texture coordinate needs 2 values");
      texcoords.emplace_back(number(tok[1], lineno), number(tok[2], lineno));
    } else if (kind == "vn") {
      if (tok.size() < 4) fail(lineno, "normal needs 3 values");
      normals.emplace_back(number(tok[1], lineno), number(tok[2], lineno), number(tok[3], lineno));
    } else if (kind == "f") {
      if (tok.size() < 4) fail(lineno, "face needs at least 3 corners");
      std::vector<Corner> corners;
      for (std::size_t i = 1; i < tok.size(); ++i) {
        const auto t = tok[i];
        const auto s1 = t.find('/');
        Corner c{resolve(t.substr(0, s1), positions.size(), lineno, "vertex"), {}, {}};
        if (s1 != std::string_view::npos) {
          const auto rest = t.substr(s1 + 1);
          const auto s2 = rest.find('/');
          const auto vt = rest.substr(0, s2);
          if (!vt.empty()) c.vt = resolve(vt, texcoords.size(), lineno, "texture");
          if (s2 != std::string_view::npos) {
            const auto vn = rest.substr(s2 + 1);
            if (!vn.empty()) c.vn = resolve(vn, normals.size(), lineno, "normal");
          }
        }
        corners.push_back(c);
      }
      for (std::size_t i = 1; i + 1 < corners.size(); ++i) triangles.push_back({corners[0], corners[i], corners[i + 1]});
    } else if (kind == "mtllib") {
      if (tok.size() < 2) fail(lineno, "mtllib needs a file name");
      mtllib = std::string(tok[1]);
    }
    // Other statements (o, g, s, usemtl, ...) carry nothing the mesh keeps.
  }

  mm::Mesh mesh;
  mesh.vertices.resize(static_cast<Eigen::Index>(positions.size()), 3);
  for (std::size_t i = 0; i < positions.size(); ++i) mesh.vertices.row(static_cast<Eigen::Index>(i)) = positions[i].transpose();
  bool any_vt = false;
  bool all_vt = true;
  for (const auto& tri : triangles) {
    mesh.faces.push_back({static_cast<std::uint32_t>(tri[0].v), static_cast<std::uint32_t>(tri[1].v),
                          static_cast<std::uint32_t>(tri[2].v)});
    for (const auto& c : tri) {
      any_vt = any_vt || c.vt.has_value();
      all_vt = all_vt && c.vt.has_value();
    }
  }
  if (any_vt && !all_vt) throw FormatError("OBJ mixes faces with and without texture coordinates");
  if (any_vt)
    for (const auto& tri : triangles)
      for (const auto& c : tri) mesh.uv_coords.push_back(texcoords[*c.vt]);

  mesh.vertex_normals = mm::compute_vertex_normals(mesh.vertices, mesh.faces);
  std::vector<bool> assigned(positions.size(), false);
  for (const auto& tri : triangles)
    for (const auto& c : tri)
      if (c.vn && !assigned[c.v]) {
        assigned[c.v] = true;
        const Eigen::Vector3d n = normals[*c.vn];
        const double len = n.norm();
        mesh.vertex_normals.row(static_cast<Eigen::Index>(c.v)) =
            len > 0.0 ? (n / len).transpose() : Eigen::RowVector3d(0.0, 0.0, 1.0);
      }

  if (mtllib) {
    const auto mtl_path = base_dir / *mtllib;
    if (std::filesystem::exists(mtl_path)) {
      std::istringstream mtl(io::read_text(mtl_path));
      std::string line;
      while (std::getline(mtl, line)) {
        const auto tok = tokens(line);
        if (tok.size() >= 2 && tok[0] == "map_Kd") {
          mesh.texture_ref = (base_dir / std::string(tok.back())).string();
          break;
        }
      }
    }
  }
  return mesh;
}

inline mm::Mesh parse_obj(const std::filesystem::path& path) {
  return parse_obj_text(io::read_text(path), path.parent_path());
}

}  // namespace t2f::meshio
