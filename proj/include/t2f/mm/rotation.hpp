#pragma once

#include <Eigen/Core>

#include <cmath>

namespace t2f::mm {

// Rodrigues' formula. Rotation vectors shorter than 1e-8 map to identity.
inline Eigen::Matrix3d axis_angle_to_matrix(const Eigen::Vector3d& rotvec) {
  const double angle = rotvec.norm();
  if (angle < 1e-8) return Eigen::Matrix3d::Identity();
  const Eigen::Vector3d k = rotvec / angle;
  Eigen::Matrix3d K;
  K << 0.0, -k.z(), k.y(),
       k.z(), 0.0, -k.x(),
       -k.y(), k.x(), 0.0;
  return Eigen::Matrix3d::Identity() + std::sin(angle) * K + (1.0 - std::cos(angle)) * (K * K);
}

}  // namespace t2f::mm
