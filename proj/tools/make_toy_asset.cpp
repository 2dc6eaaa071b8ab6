// Writes the bundled 12-vertex toy head asset (an icosahedral "head" with a
// root/neck joint and a jaw joint).
//
//   make_toy_asset <out.mfa>

#include <cmath>
#include <iostream>
#include <numbers>

#include "t2f/mm/asset_io.hpp"

namespace {

constexpr double kPhi = 1.618034;
constexpr double kScale = 0.1;

t2f::mm::MorphableModel toy_model() {
  using namespace t2f::mm;
  MorphableModel m;
  const double p = kPhi;
  const double raw[12][3] = {
      {-1, p, 0}, {1, p, 0}, {-1, -p, 0}, {1, -p, 0},
      {0, -1, p}, {0, 1, p}, {0, -1, -p}, {0, 1, -p},
      {p, 0, -1}, {p, 0, 1}, {-p, 0, -1}, {-p, 0, 1},
  };
  m.template_vertices.resize(12, 3);
  for (int v = 0; v < 12; ++v)
    for (int c = 0; c < 3; ++c) m.template_vertices(v, c) = kScale * raw[v][c];

  m.faces = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
             {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
             {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
             {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1}};

  // Identity: head width (x) and head height (y), each proportional to the
  // template coordinate.
  m.shape_basis = Eigen::MatrixXd::Zero(36, 2);
  for (int v = 0; v < 12; ++v) {
    m.shape_basis(3 * v + 0, 0) = m.template_vertices(v, 0);
    m.shape_basis(3 * v + 1, 1) = m.template_vertices(v, 1);
  }

  // Expression: mouth open, the chin drops and the lower sides follow.
  m.expression_basis = Eigen::MatrixXd::Zero(36, 1);
  m.expression_basis(3 * 4 + 1, 0) = -0.05;
  m.expression_basis(3 * 2 + 1, 0) = -0.025;
  m.expression_basis(3 * 3 + 1, 0) = -0.025;

  m.pose_corrective_basis.resize(36, 0);

  // Root sits between the two bottom vertices, jaw between chin and nape.
  m.joint_regressor = Eigen::MatrixXd::Zero(2, 12);
  m.joint_regressor(0, 2) = 0.5;
  m.joint_regressor(0, 3) = 0.5;
  m.joint_regressor(1, 4) = 0.5;
  m.joint_regressor(1, 6) = 0.5;

  m.skinning_weights = Eigen::MatrixXd::Zero(12, 2);
  m.skinning_weights.col(0).setOnes();
  m.skinning_weights.row(2) << 0.5, 0.5;
  m.skinning_weights.row(3) << 0.5, 0.5;
  m.skinning_weights.row(4) << 0.25, 0.75;

  m.kinematic_parents = {-1, 0};

  // Spherical projection per face corner.
  for (const auto& f : m.faces)
    for (auto idx : f) {
      const Eigen::Vector3d q = m.template_vertices.row(idx).transpose().normalized();
      const double u = 0.5 + std::atan2(q.x(), q.z()) / (2.0 * std::numbers::pi);
      const double v = 0.5 + std::asin(q.y()) / std::numbers::pi;
      m.uv_coords.emplace_back(u, v);
    }
  return m;
}

}  // namespace

int main(int argc, char** argv) {
  if (argc != 2) {
    std::cerr << "usage: make_toy_asset <out.mfa>\n";
    return 1;
  }
  try {
    auto model = toy_model();
    t2f::mm::validate_model(model);
    t2f::mm::save_model_asset(model, argv[1]);
  } catch (const std::exception& e) {
    std::cerr << "make_toy_asset: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
