#pragma once

#include <Eigen/Core>

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "t2f/common/error.hpp"

namespace t2f::mm {

// N×3 vertex block, row-major so that it maps onto a flat 3N vector
// (x0 y0 z0 x1 ...), the layout blendshape bases use.
using Vertices = Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor>;
using Face = std::array<std::uint32_t, 3>;
using Uv = Eigen::Vector2d;

inline Eigen::Map<Eigen::VectorXd> flat(Vertices& v) { return {v.data(), v.size()}; }
inline Eigen::Map<const Eigen::VectorXd> flat(const Vertices& v) { return {v.data(), v.size()}; }

struct ModelDims {
  std::uint32_t vertices = 0;   // N
  std::uint32_t faces = 0;      // F
  std::uint32_t shape = 0;      // S
  std::uint32_t expression = 0; // Ex
  std::uint32_t joints = 0;     // J
  std::uint32_t pose_correctives = 0;  // P, 0 or 9(J-1)
  std::uint32_t uv_count = 0;   // 0 or 3F

  friend bool operator==(const ModelDims&, const ModelDims&) = default;
};

// Statistical head model. Immutable once loaded; every decoder op is a pure
// function of it.
struct MorphableModel {
  Vertices template_vertices;
  std::vector<Face> faces;
  // Columns are components over the flat 3N layout.
  Eigen::MatrixXd shape_basis;
  Eigen::MatrixXd expression_basis;
  Eigen::MatrixXd pose_corrective_basis;  // 3N × P, P may be 0
  Eigen::MatrixXd joint_regressor;        // J × N
  Eigen::MatrixXd skinning_weights;       // N × J
  std::vector<std::int32_t> kinematic_parents;  // parents[0] == -1
  std::vector<Uv> uv_coords;              // per face corner, empty or 3F
  std::uint32_t flags = 0;

  std::size_t num_vertices() const { return static_cast<std::size_t>(template_vertices.rows()); }
  std::size_t num_joints() const { return kinematic_parents.size(); }

  ModelDims dims() const {
    return {static_cast<std::uint32_t>(template_vertices.rows()),
            static_cast<std::uint32_t>(faces.size()),
            static_cast<std::uint32_t>(shape_basis.cols()),
            static_cast<std::uint32_t>(expression_basis.cols()),
            static_cast<std::uint32_t>(kinematic_parents.size()),
            static_cast<std::uint32_t>(pose_corrective_basis.cols()),
            static_cast<std::uint32_t>(uv_coords.size())};
  }
};

// One face: identity, expression, per-joint axis-angle pose, detail code.
struct ParamVector {
  Eigen::VectorXd beta;
  Eigen::VectorXd psi;
  Eigen::VectorXd theta;
  Eigen::VectorXd delta;

  bool all_finite() const {
    return beta.allFinite() && psi.allFinite() && theta.allFinite() && delta.allFinite();
  }

  Eigen::Index total() const { return beta.size() + psi.size() + theta.size() + delta.size(); }

  friend bool operator==(const ParamVector& a, const ParamVector& b) {
    return a.beta == b.beta && a.psi == b.psi && a.theta == b.theta && a.delta == b.delta;
  }
};

// Group sizes of the regressed parameter vector, in (beta, psi, theta, delta)
// order. Defaults: 100 identity, 50 expression, 6 pose (root + jaw), 128 detail.
struct DimsProfile {
  std::uint32_t shape = 100;
  std::uint32_t expression = 50;
  std::uint32_t pose = 6;
  std::uint32_t detail = 128;

  std::uint32_t total() const { return shape + expression + pose + detail; }
  std::array<std::uint32_t, 4> groups() const { return {shape, expression, pose, detail}; }

  ParamVector zeros() const {
    return {Eigen::VectorXd::Zero(shape), Eigen::VectorXd::Zero(expression),
            Eigen::VectorXd::Zero(pose), Eigen::VectorXd::Zero(detail)};
  }

  bool matches(const ParamVector& p) const {
    return p.beta.size() == shape && p.psi.size() == expression && p.theta.size() == pose &&
           p.delta.size() == detail;
  }

  friend bool operator==(const DimsProfile&, const DimsProfile&) = default;
};

inline constexpr std::array<const char*, 4> kGroupNames = {"beta", "psi", "theta", "delta"};

struct Mesh {
  Vertices vertices;
  std::vector<Face> faces;
  Vertices vertex_normals;
  std::vector<Uv> uv_coords;  // per face corner; empty when absent
  std::optional<std::string> texture_ref;

  bool has_uvs() const { return !uv_coords.empty(); }
};

// Scalar displacement image. Samples are row-major with row 0 at the top of
// the image (v = 1); displacement = scale * sample.
struct DetailMap {
  std::uint32_t width = 1;
  std::uint32_t height = 1;
  std::vector<double> samples;
  double scale = 1.0;

  double at(std::uint32_t x, std::uint32_t y) const { return samples[std::size_t{y} * width + x]; }

  void validate() const {
    if (width < 1 || height < 1) throw DimensionError("detail map must be at least 1x1");
    if (samples.size() != std::size_t{width} * height)
      throw DimensionError("detail map sample count does not match width*height");
    for (double s : samples)
      if (!std::isfinite(s)) throw DataError("detail map contains non-finite samples");
    if (!std::isfinite(scale)) throw DataError("detail map scale is not finite");
  }
};

}  // namespace t2f::mm
