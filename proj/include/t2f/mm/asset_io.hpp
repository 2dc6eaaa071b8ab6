#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "t2f/common/binary_io.hpp"
#include "t2f/common/error.hpp"
#include "t2f/mm/types.hpp"

// Model-asset file ("MFA1"): little-endian, header of eight u32
// (N, F, S, Ex, J, P, uv_count, flags), then in order
//   template      f32 N*3
//   faces         u32 F*3
//   shape basis   f32 S*N*3   (component-major)
//   expression    f32 Ex*N*3
//   pose corr.    f32 P*N*3
//   joint regr.   f32 J*N
//   skinning      f32 N*J
//   parents       i32 J       (root = -1)
//   uvs           f32 uv_count*2  (per face corner)
// A `.mfa.json` sidecar mirrors the header.

namespace t2f::mm {

inline constexpr char kAssetMagic[4] = {'M', 'F', 'A', '1'};
inline constexpr double kRowSumTolerance = 1e-4;

namespace asset_detail {

inline Eigen::MatrixXd read_basis(io::Reader& in, std::uint32_t components, std::uint32_t n) {
  Eigen::MatrixXd basis(3 * Eigen::Index{n}, components);
  std::vector<float> buf(3 * std::size_t{n});
  for (std::uint32_t c = 0; c < components; ++c) {
    in.get_all(std::span<float>(buf));
    for (std::size_t i = 0; i < buf.size(); ++i) basis(static_cast<Eigen::Index>(i), c) = buf[i];
  }
  return basis;
}

inline void write_basis(io::Writer& out, const Eigen::MatrixXd& basis) {
  for (Eigen::Index c = 0; c < basis.cols(); ++c)
    for (Eigen::Index i = 0; i < basis.rows(); ++i) out.put(static_cast<float>(basis(i, c)));
}

inline void check_rows(Eigen::MatrixXd& m, const char* section, bool nonnegative) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    if (!m.row(r).allFinite()) throw FormatError(std::string(section) + " row " + std::to_string(r) + " is not finite");
    if (nonnegative && (m.row(r).array() < 0.0).any())
      throw FormatError(std::string(section) + " row " + std::to_string(r) + " has negative weights");
    const double sum = m.row(r).sum();
    if (std::abs(sum - 1.0) > kRowSumTolerance)
      throw FormatError(std::string(section) + " row not normalized (row " + std::to_string(r) +
                        " sums to " + std::to_string(sum) + ")");
    m.row(r) /= sum;
  }
}

}  // namespace asset_detail

// Checks every structural invariant and renormalizes weight rows (stored as
// f32, so sums are only within ~1e-7 of one until renormalized).
inline void validate_model(MorphableModel& m) {
  const auto n = m.template_vertices.rows();
  const auto j = static_cast<Eigen::Index>(m.kinematic_parents.size());
  auto mismatch = [](const std::string& what) { throw FormatError("dimension mismatch: " + what); };
  if (j < 1) mismatch("model needs at least one joint");
  if (m.shape_basis.rows() != 3 * n) mismatch("shape_basis vertex count");
  if (m.expression_basis.rows() != 3 * n) mismatch("expression_basis vertex count");
  if (m.pose_corrective_basis.rows() != 3 * n && m.pose_corrective_basis.cols() != 0)
    mismatch("pose_corrective_basis vertex count");
  if (m.pose_corrective_basis.cols() != 0 && m.pose_corrective_basis.cols() != 9 * (j - 1))
    mismatch("pose_corrective_basis must have 0 or 9*(J-1) components");
  if (m.joint_regressor.rows() != j || m.joint_regressor.cols() != n) mismatch("joint_regressor shape");
  if (m.skinning_weights.rows() != n || m.skinning_weights.cols() != j) mismatch("skinning_weights shape");
  if (!m.uv_coords.empty() && m.uv_coords.size() != 3 * m.faces.size())
    mismatch("uv_coords must be empty or 3 per face");
  if (!m.template_vertices.allFinite()) throw FormatError("template_vertices contain non-finite values");
  for (std::size_t f = 0; f < m.faces.size(); ++f)
    for (auto idx : m.faces[f])
      if (idx >= static_cast<std::uint64_t>(n))
        throw FormatError("faces: face " + std::to_string(f) + " references vertex " +
                          std::to_string(idx) + " >= " + std::to_string(n));
  if (m.kinematic_parents[0] != -1) throw FormatError("kinematic_parents: joint 0 must be the root (-1)");
  for (Eigen::Index k = 1; k < j; ++k) {
    const auto p = m.kinematic_parents[static_cast<std::size_t>(k)];
    if (p < 0 || p >= k)
      throw FormatError("kinematic_parents: joint " + std::to_string(k) + " has invalid parent " +
                        std::to_string(p));
  }
  asset_detail::check_rows(m.joint_regressor, "joint_regressor", false);
  asset_detail::check_rows(m.skinning_weights, "skinning_weights", true);
  if (m.pose_corrective_basis.rows() != 3 * n) m.pose_corrective_basis.resize(3 * n, 0);
}

inline MorphableModel parse_model_asset(std::span<const std::uint8_t> bytes) {
  io::Reader in(bytes, "asset");
  if (in.get_bytes(4) != std::string_view(kAssetMagic, 4))
    throw FormatError("malformed header: bad magic (expected MFA1)");
  ModelDims d;
  d.vertices = in.get<std::uint32_t>();
  d.faces = in.get<std::uint32_t>();
  d.shape = in.get<std::uint32_t>();
  d.expression = in.get<std::uint32_t>();
  d.joints = in.get<std::uint32_t>();
  d.pose_correctives = in.get<std::uint32_t>();
  d.uv_count = in.get<std::uint32_t>();
  const auto flags = in.get<std::uint32_t>();
  if (d.vertices == 0) throw FormatError("malformed header: zero vertices");
  if (d.joints == 0) throw FormatError("malformed header: zero joints");
  if (d.pose_correctives != 0 && d.pose_correctives != 9 * (d.joints - 1))
    throw FormatError("dimension mismatch: P=" + std::to_string(d.pose_correctives) +
                      " but 9*(J-1)=" + std::to_string(9 * (d.joints - 1)));
  if (d.uv_count != 0 && d.uv_count != 3 * d.faces)
    throw FormatError("dimension mismatch: uv_count=" + std::to_string(d.uv_count) + " but 3*F=" +
                      std::to_string(3 * d.faces));
  // Reject headers whose sections could not possibly fit before allocating.
  const std::uint64_t n = d.vertices;
  const std::uint64_t expected =
      4 * (n * 3 + std::uint64_t{d.faces} * 3 +
           (std::uint64_t{d.shape} + d.expression + d.pose_correctives) * n * 3 +
           2 * std::uint64_t{d.joints} * n + d.joints + std::uint64_t{d.uv_count} * 2);
  if (expected > in.remaining()) throw FormatError("unexpected end of asset");
  if (expected < in.remaining()) throw FormatError("malformed asset: trailing bytes after UV section");

  MorphableModel m;
  m.flags = flags;
  std::vector<float> buf(3 * n);
  in.get_all(std::span<float>(buf));
  m.template_vertices.resize(d.vertices, 3);
  for (std::size_t i = 0; i < buf.size(); ++i) m.template_vertices.data()[i] = buf[i];

  m.faces.resize(d.faces);
  for (auto& f : m.faces) in.get_all(std::span<std::uint32_t>(f));

  m.shape_basis = asset_detail::read_basis(in, d.shape, d.vertices);
  m.expression_basis = asset_detail::read_basis(in, d.expression, d.vertices);
  m.pose_corrective_basis = asset_detail::read_basis(in, d.pose_correctives, d.vertices);

  m.joint_regressor.resize(d.joints, d.vertices);
  buf.resize(std::size_t{d.joints} * n);
  in.get_all(std::span<float>(buf));
  for (std::uint32_t r = 0; r < d.joints; ++r)
    for (std::uint32_t c = 0; c < d.vertices; ++c) m.joint_regressor(r, c) = buf[r * n + c];

  m.skinning_weights.resize(d.vertices, d.joints);
  in.get_all(std::span<float>(buf));
  for (std::uint32_t r = 0; r < d.vertices; ++r)
    for (std::uint32_t c = 0; c < d.joints; ++c) m.skinning_weights(r, c) = buf[std::size_t{r} * d.joints + c];

  m.kinematic_parents.resize(d.joints);
  in.get_all(std::span<std::int32_t>(m.kinematic_parents));

  m.uv_coords.resize(d.uv_count);
  for (auto& uv : m.uv_coords) {
    uv.x() = in.get<float>();
    uv.y() = in.get<float>();
  }
  validate_model(m);
  return m;
}

inline MorphableModel load_model_asset(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw Error("model asset not found: " + path.string());
  const auto bytes = io::read_file(path);
  return parse_model_asset(bytes);
}

inline nlohmann::ordered_json asset_header_json(const ModelDims& d, std::uint32_t flags) {
  nlohmann::ordered_json j;
  j["format"] = "MFA1";
  j["N"] = d.vertices;
  j["F"] = d.faces;
  j["S"] = d.shape;
  j["Ex"] = d.expression;
  j["J"] = d.joints;
  j["P"] = d.pose_correctives;
  j["uv_count"] = d.uv_count;
  j["flags"] = flags;
  return j;
}

inline std::vector<std::uint8_t> serialize_model_asset(const MorphableModel& m) {
  const ModelDims d = m.dims();
  io::Writer out;
  out.put_bytes(std::string_view(kAssetMagic, 4));
  for (auto v : {d.vertices, d.faces, d.shape, d.expression, d.joints, d.pose_correctives, d.uv_count, m.flags})
    out.put(v);
  for (Eigen::Index i = 0; i < m.template_vertices.size(); ++i)
    out.put(static_cast<float>(m.template_vertices.data()[i]));
  for (const auto& f : m.faces) out.put_all(std::span<const std::uint32_t>(f));
  asset_detail::write_basis(out, m.shape_basis);
  asset_detail::write_basis(out, m.expression_basis);
  asset_detail::write_basis(out, m.pose_corrective_basis);
  for (Eigen::Index r = 0; r < m.joint_regressor.rows(); ++r)
    for (Eigen::Index c = 0; c < m.joint_regressor.cols(); ++c)
      out.put(static_cast<float>(m.joint_regressor(r, c)));
  for (Eigen::Index r = 0; r < m.skinning_weights.rows(); ++r)
    for (Eigen::Index c = 0; c < m.skinning_weights.cols(); ++c)
      out.put(static_cast<float>(m.skinning_weights(r, c)));
  out.put_all(std::span<const std::int32_t>(m.kinematic_parents));
  for (const auto& uv : m.uv_coords) {
    out.put(static_cast<float>(uv.x()));
    out.put(static_cast<float>(uv.y()));
  }
  return std::move(out.bytes());
}

// Writes `path` and its `.json` sidecar (e.g. head.mfa + head.mfa.json).
inline void save_model_asset(const MorphableModel& m, const std::filesystem::path& path) {
  io::write_file(path, serialize_model_asset(m));
  auto sidecar = path;
  sidecar += ".json";
  io::write_text(sidecar, asset_header_json(m.dims(), m.flags).dump(2) + "\n");
}

}  // namespace t2f::mm
