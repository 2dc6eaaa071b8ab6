#pragma once

#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdio>
#include <optional>
#include <string>

#include "t2f/common/binary_io.hpp"
#include "t2f/common/rng.hpp"
#include "t2f/meshio/mesh_json.hpp"
#include "t2f/meshio/obj.hpp"
#include "t2f/meshio/params_json.hpp"
#include "t2f/mm/decoder.hpp"
#include "t2f/regressor/regress.hpp"
#include "t2f/regressor/weights_io.hpp"

// Inference steps shared by the CLI and the HTTP service, so both produce
// the same bytes for the same inputs.

namespace t2f::pipeline {

enum class MeshFormat { obj, json };

inline MeshFormat parse_mesh_format(const std::string& s) {
  if (s == "obj") return MeshFormat::obj;
  if (s == "json") return MeshFormat::json;
  throw DataError("unknown mesh format '" + s + "' (expected obj or json)");
}

// Accepts a bare array or {"embedding": [...]}.
inline Eigen::VectorXd embedding_from_json(const nlohmann::json& j) {
  const nlohmann::json* arr = &j;
  if (j.is_object()) {
    if (!j.contains("embedding")) throw DataError("missing 'embedding'");
    arr = &j["embedding"];
  }
  if (!arr->is_array() || arr->empty()) throw DataError("embedding must be a non-empty array of numbers");
  Eigen::VectorXd x(static_cast<Eigen::Index>(arr->size()));
  for (std::size_t i = 0; i < arr->size(); ++i) {
    const auto& v = (*arr)[i];
    if (!v.is_number() || !std::isfinite(v.get<double>()))
      throw DataError("embedding entry " + std::to_string(i) + " is not a finite number");
    x[static_cast<Eigen::Index>(i)] = v.get<double>();
  }
  return x;
}

inline mm::ParamVector infer(const reg::Regressor& r, const Eigen::VectorXd& embedding) {
  if (embedding.size() != static_cast<Eigen::Index>(r.weights.input_dim()))
    throw DimensionError("embedding has length " + std::to_string(embedding.size()) + ", weights expect " +
                         std::to_string(r.weights.input_dim()));
  return reg::regress_params(r.weights, embedding, r.weights.profile(), r.stats ? &*r.stats : nullptr);
}

inline std::string infer_text(const reg::Regressor& r, const Eigen::VectorXd& embedding) {
  return meshio::params_json_text(infer(r, embedding));
}

inline mm::Mesh decode(const mm::MorphableModel& model, const mm::ParamVector& params,
                       const std::vector<std::uint32_t>& pose_joints = {},
                       const std::optional<mm::DetailMap>& detail = std::nullopt) {
  return mm::decode(model, mm::fit_pose_to_model(model, params, pose_joints), detail);
}

inline std::string mesh_text(const mm::Mesh& mesh, MeshFormat format) {
  return format == MeshFormat::obj ? meshio::obj_text(mesh) : meshio::mesh_json_text(mesh);
}

// Content fingerprint of a file. (CRC32 would not do: over a file that ends
// in its own CRC32 it is the same constant for every file.)
inline std::string checksum_hex(std::span<const std::uint8_t> bytes) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(
                    keyed_hash(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()), 0)));
  return buf;
}

inline std::vector<std::uint32_t> parse_joint_list(const std::string& s) {
  std::vector<std::uint32_t> out;
  std::size_t pos = 0;
  while (pos < s.size()) {
    const auto comma = s.find(',', pos);
    const auto item = s.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
    try {
      std::size_t used = 0;
      const long v = std::stol(item, &used);
      if (used != item.size() || v < 0) throw std::invalid_argument(item);
      out.push_back(static_cast<std::uint32_t>(v));
    } catch (const std::logic_error&) {
      throw DataError("invalid joint list '" + s + "'");
    }
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  return out;
}

}  // namespace t2f::pipeline
