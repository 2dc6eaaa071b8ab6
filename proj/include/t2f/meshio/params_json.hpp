#pragma once

#include <nlohmann/json.hpp>

#include <filesystem>
#include <optional>
#include <string>

#include "t2f/common/binary_io.hpp"
#include "t2f/common/format.hpp"
#include "t2f/mm/types.hpp"

namespace t2f::meshio {

namespace json_detail {

inline void append_array(std::string& out, const Eigen::Ref<const Eigen::VectorXd>& v) {
  out += '[';
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (i) out += ", ";
    fmt::append_exact(out, v[i]);
  }
  out += ']';
}

inline Eigen::VectorXd read_vector(const nlohmann::json& j, const std::string& field) {
  if (!j.contains(field) || !j[field].is_array()) throw FormatError("params JSON: missing array '" + field + "'");
  const auto& a = j[field];
  Eigen::VectorXd v(static_cast<Eigen::Index>(a.size()));
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!a[i].is_number()) throw FormatError("params JSON: '" + field + "' must contain numbers");
    v[static_cast<Eigen::Index>(i)] = a[i].get<double>();
  }
  return v;
}

}  // namespace json_detail

// {"beta":[...],"psi":[...],"theta":[...],"delta":[...]} with 17 significant
// digits per value.
inline std::string params_json_text(const mm::ParamVector& p) {
  std::string out = "{\n";
  const Eigen::VectorXd* groups[] = {&p.beta, &p.psi, &p.theta, &p.delta};
  for (std::size_t g = 0; g < 4; ++g) {
    out += "  \"";
    out += mm::kGroupNames[g];
    out += "\": ";
    json_detail::append_array(out, *groups[g]);
    out += g + 1 < 4 ? ",\n" : "\n";
  }
  out += "}\n";
  return out;
}

inline mm::ParamVector params_from_json(const nlohmann::json& j,
                                        const std::optional<mm::DimsProfile>& expected = std::nullopt) {
  if (!j.is_object()) throw FormatError("params JSON must be an object");
  mm::ParamVector p{json_detail::read_vector(j, "beta"), json_detail::read_vector(j, "psi"),
                    json_detail::read_vector(j, "theta"), json_detail::read_vector(j, "delta")};
  if (expected && !expected->matches(p))
    throw DimensionError("params JSON group lengths (" + std::to_string(p.beta.size()) + ", " +
                         std::to_string(p.psi.size()) + ", " + std::to_string(p.theta.size()) + ", " +
                         std::to_string(p.delta.size()) + ") do not match the expected profile");
  return p;
}

inline void write_params_json(const mm::ParamVector& p, const std::filesystem::path& path) {
  io::write_text(path, params_json_text(p));
}

inline mm::ParamVector read_params_json(const std::filesystem::path& path,
                                        const std::optional<mm::DimsProfile>& expected = std::nullopt) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(io::read_text(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError("params JSON: " + std::string(e.what()));
  }
  return params_from_json(j, expected);
}

}  // namespace t2f::meshio
