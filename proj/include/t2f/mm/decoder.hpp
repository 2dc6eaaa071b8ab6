#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "t2f/common/error.hpp"
#include "t2f/mm/rotation.hpp"
#include "t2f/mm/types.hpp"

namespace t2f::mm {

using Transforms = std::vector<Eigen::Isometry3d, Eigen::aligned_allocator<Eigen::Isometry3d>>;

namespace detail {

inline void require(bool ok, const std::string& what) {
  if (!ok) throw DimensionError(what);
}

inline std::string size_msg(const char* name, Eigen::Index got, std::size_t want) {
  return std::string(name) + " has length " + std::to_string(got) + ", model expects " +
         std::to_string(want);
}

}  // namespace detail

// template + shape_basis·beta + expression_basis·psi
inline Vertices blend_shapes(const MorphableModel& model, const Eigen::VectorXd& beta,
                             const Eigen::VectorXd& psi) {
  detail::require(beta.size() == model.shape_basis.cols(),
                  detail::size_msg("beta", beta.size(), model.shape_basis.cols()));
  detail::require(psi.size() == model.expression_basis.cols(),
                  detail::size_msg("psi", psi.size(), model.expression_basis.cols()));
  Vertices out = model.template_vertices;
  auto v = flat(out);
  if (beta.size() > 0) v.noalias() += model.shape_basis * beta;
  if (psi.size() > 0) v.noalias() += model.expression_basis * psi;
  return out;
}

inline Vertices regress_joints(const MorphableModel& model, const Vertices& shaped_vertices) {
  detail::require(shaped_vertices.rows() == model.joint_regressor.cols(),
                  detail::size_msg("shaped_vertices", shaped_vertices.rows(),
                                   model.joint_regressor.cols()));
  Vertices joints = model.joint_regressor * shaped_vertices;
  return joints;
}

// Concatenated (R(theta_j) - I), row-major, for joints 1..J-1.
inline Eigen::VectorXd pose_feature(const Eigen::VectorXd& theta, std::size_t num_joints) {
  Eigen::VectorXd feature(9 * (num_joints > 0 ? num_joints - 1 : 0));
  for (std::size_t j = 1; j < num_joints; ++j) {
    const Eigen::Matrix3d d =
        axis_angle_to_matrix(theta.segment<3>(static_cast<Eigen::Index>(3 * j))) -
        Eigen::Matrix3d::Identity();
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) feature[static_cast<Eigen::Index>(9 * (j - 1) + 3 * r + c)] = d(r, c);
  }
  return feature;
}

inline Vertices pose_correctives(const MorphableModel& model, const Eigen::VectorXd& theta) {
  const auto joints = model.num_joints();
  detail::require(theta.size() == static_cast<Eigen::Index>(3 * joints),
                  detail::size_msg("theta", theta.size(), 3 * joints));
  Vertices out = Vertices::Zero(static_cast<Eigen::Index>(model.num_vertices()), 3);
  if (model.pose_corrective_basis.cols() == 0) return out;
  flat(out).noalias() = model.pose_corrective_basis * pose_feature(theta, joints);
  return out;
}

// Per-joint skinning transforms: posed world transform composed with the
// inverse rest transform, so G_j maps rest-space points to posed space.
inline Transforms skinning_transforms(const MorphableModel& model, const Vertices& joints,
                                      const Eigen::VectorXd& theta) {
  const auto count = model.num_joints();
  detail::require(joints.rows() == static_cast<Eigen::Index>(count),
                  detail::size_msg("joints", joints.rows(), count));
  detail::require(theta.size() == static_cast<Eigen::Index>(3 * count),
                  detail::size_msg("theta", theta.size(), 3 * count));
  Transforms world(count);
  for (std::size_t j = 0; j < count; ++j) {
    const auto row = static_cast<Eigen::Index>(j);
    Eigen::Isometry3d local = Eigen::Isometry3d::Identity();
    local.linear() = axis_angle_to_matrix(theta.segment<3>(3 * row));
    const std::int32_t parent = model.kinematic_parents[j];
    if (parent < 0) {
      local.translation() = joints.row(row).transpose();
      world[j] = local;
    } else {
      local.translation() = (joints.row(row) - joints.row(parent)).transpose();
      world[j] = world[static_cast<std::size_t>(parent)] * local;
    }
  }
  for (std::size_t j = 0; j < count; ++j) {
    const Eigen::Vector3d rest = joints.row(static_cast<Eigen::Index>(j)).transpose();
    world[j].translation() -= world[j].linear() * rest;
  }
  return world;
}

// v' = sum_j w[v][j] * (G_j v)
inline Vertices skin_vertices(const Eigen::MatrixXd& skinning_weights, const Transforms& transforms,
                              const Vertices& vertices) {
  detail::require(skinning_weights.rows() == vertices.rows(), "skinning weights/vertex count mismatch");
  detail::require(skinning_weights.cols() == static_cast<Eigen::Index>(transforms.size()),
                  "skinning weights/joint count mismatch");
  Vertices out(vertices.rows(), 3);
  for (Eigen::Index v = 0; v < vertices.rows(); ++v) {
    Eigen::Matrix<double, 3, 4> blended = Eigen::Matrix<double, 3, 4>::Zero();
    for (Eigen::Index j = 0; j < skinning_weights.cols(); ++j) {
      const double w = skinning_weights(v, j);
      if (w != 0.0) blended.noalias() += w * transforms[static_cast<std::size_t>(j)].matrix().topRows<3>();
    }
    out.row(v) = (blended.leftCols<3>() * vertices.row(v).transpose() + blended.col(3)).transpose();
  }
  return out;
}

inline Vertices linear_blend_skin(const MorphableModel& model, const Vertices& shaped_vertices,
                                  const Vertices& joints, const Eigen::VectorXd& theta) {
  return skin_vertices(model.skinning_weights, skinning_transforms(model, joints, theta),
                       shaped_vertices);
}

// Area-weighted vertex normals. A vertex whose accumulated normal vanishes
// (isolated, or cancelling faces) gets +z.
inline Vertices compute_vertex_normals(const Vertices& vertices, const std::vector<Face>& faces) {
  Vertices acc = Vertices::Zero(vertices.rows(), 3);
  Eigen::VectorXd magnitude = Eigen::VectorXd::Zero(vertices.rows());
  for (const Face& f : faces) {
    const Eigen::Vector3d a = vertices.row(f[0]).transpose();
    const Eigen::Vector3d b = vertices.row(f[1]).transpose();
    const Eigen::Vector3d c = vertices.row(f[2]).transpose();
    const Eigen::Vector3d n = (b - a).cross(c - a);  // |n| = 2 * area
    const double len = n.norm();
    for (auto idx : f) {
      acc.row(idx) += n.transpose();
      magnitude[idx] += len;
    }
  }
  for (Eigen::Index v = 0; v < acc.rows(); ++v) {
    const double len = acc.row(v).norm();
    if (!(len > 1e-12 * magnitude[v]) || !std::isfinite(len) || len == 0.0)
      acc.row(v) = Eigen::RowVector3d(0.0, 0.0, 1.0);
    else
      acc.row(v) /= len;
  }
  return acc;
}

// Bilinear lookup at texel centres with clamp-to-edge; v = 1 is row 0.
inline double bilinear_sample(const DetailMap& map, const Uv& uv) {
  const double x = std::clamp(uv.x() * map.width - 0.5, 0.0, double(map.width - 1));
  const double y = std::clamp((1.0 - uv.y()) * map.height - 0.5, 0.0, double(map.height - 1));
  const auto x0 = static_cast<std::uint32_t>(std::floor(x));
  const auto y0 = static_cast<std::uint32_t>(std::floor(y));
  const std::uint32_t x1 = std::min(x0 + 1, map.width - 1);
  const std::uint32_t y1 = std::min(y0 + 1, map.height - 1);
  const double fx = x - x0;
  const double fy = y - y0;
  const double top = (1.0 - fx) * map.at(x0, y0) + fx * map.at(x1, y0);
  const double bottom = (1.0 - fx) * map.at(x0, y1) + fx * map.at(x1, y1);
  return (1.0 - fy) * top + fy * bottom;
}

// First face-corner UV per vertex in face order; nullopt for unreferenced vertices.
inline std::vector<std::optional<Uv>> per_vertex_uvs(std::size_t num_vertices,
                                                     const std::vector<Face>& faces,
                                                     const std::vector<Uv>& corner_uvs) {
  std::vector<std::optional<Uv>> out(num_vertices);
  for (std::size_t f = 0; f < faces.size(); ++f)
    for (std::size_t k = 0; k < 3; ++k) {
      auto& slot = out[faces[f][k]];
      if (!slot) slot = corner_uvs[3 * f + k];
    }
  return out;
}

inline Mesh apply_displacement(const Mesh& mesh, const DetailMap& detail) {
  if (!mesh.has_uvs()) throw DataError("displacement requires UV coordinates");
  if (mesh.uv_coords.size() != 3 * mesh.faces.size())
    throw DimensionError("mesh UV count must be 3 per face");
  detail.validate();
  Mesh out = mesh;
  const auto uvs = per_vertex_uvs(static_cast<std::size_t>(mesh.vertices.rows()), mesh.faces,
                                  mesh.uv_coords);
  for (Eigen::Index v = 0; v < mesh.vertices.rows(); ++v) {
    const auto& uv = uvs[static_cast<std::size_t>(v)];
    if (!uv) continue;
    out.vertices.row(v) += detail.scale * bilinear_sample(detail, *uv) * mesh.vertex_normals.row(v);
  }
  out.vertex_normals = compute_vertex_normals(out.vertices, out.faces);
  return out;
}

// Expands a reduced pose (one axis-angle triple per entry of `joint_indices`)
// to the model's full 3J layout, other joints at rest.
inline Eigen::VectorXd expand_pose(const Eigen::VectorXd& reduced,
                                   const std::vector<std::uint32_t>& joint_indices,
                                   std::size_t num_joints) {
  detail::require(reduced.size() == static_cast<Eigen::Index>(3 * joint_indices.size()),
                  "reduced pose length does not match the joint map");
  Eigen::VectorXd full = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(3 * num_joints));
  for (std::size_t i = 0; i < joint_indices.size(); ++i) {
    detail::require(joint_indices[i] < num_joints, "pose joint index out of range");
    full.segment<3>(3 * joint_indices[i]) = reduced.segment<3>(static_cast<Eigen::Index>(3 * i));
  }
  return full;
}

// Fits a regressed pose to the model: theta of length 3J passes through, a
// shorter theta of 3k entries is spread over `pose_joints` (default: joints
// 0..k-1). Shape and expression lengths must already match.
inline ParamVector fit_pose_to_model(const MorphableModel& model, ParamVector params,
                                     const std::vector<std::uint32_t>& pose_joints = {}) {
  const auto j = static_cast<Eigen::Index>(model.num_joints());
  if (params.theta.size() == 3 * j && pose_joints.empty()) return params;
  detail::require(params.theta.size() % 3 == 0, "pose length must be a multiple of 3");
  std::vector<std::uint32_t> map = pose_joints;
  if (map.empty())
    for (Eigen::Index k = 0; k < params.theta.size() / 3; ++k) map.push_back(static_cast<std::uint32_t>(k));
  params.theta = expand_pose(params.theta, map, model.num_joints());
  return params;
}

inline Mesh decode(const MorphableModel& model, const ParamVector& params,
                   const std::optional<DetailMap>& detail = std::nullopt) {
  if (!params.all_finite()) throw DataError("parameters contain non-finite values");
  const Vertices shaped = blend_shapes(model, params.beta, params.psi);
  // Joints come from the identity/expression shape; correctives only move vertices.
  const Vertices joints = regress_joints(model, shaped);
  const Vertices corrected = shaped + pose_correctives(model, params.theta);
  Mesh mesh;
  mesh.vertices = linear_blend_skin(model, corrected, joints, params.theta);
  mesh.faces = model.faces;
  mesh.uv_coords = model.uv_coords;
  mesh.vertex_normals = compute_vertex_normals(mesh.vertices, mesh.faces);
  if (detail) mesh = apply_displacement(mesh, *detail);
  return mesh;
}

}  // namespace t2f::mm
