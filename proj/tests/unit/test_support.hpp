#pragma once

#include <unistd.h>

#include <filesystem>
#include <random>
#include <string>

#include "t2f/common/rng.hpp"
#include "t2f/mm/asset_io.hpp"
#include "t2f/mm/types.hpp"

namespace t2f::test {

inline std::filesystem::path toy_asset_path() { return T2F_TOY_ASSET; }

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("t2f_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline Eigen::VectorXd random_vector(Rng& rng, Eigen::Index n, double scale = 1.0) {
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = scale * rng.uniform(-1.0, 1.0);
  return v;
}

// A random but structurally valid model, with pose correctives when J > 1.
inline mm::MorphableModel random_model(std::uint64_t seed, std::uint32_t n = 40, std::uint32_t s = 6,
                                       std::uint32_t ex = 4, std::uint32_t j = 4, bool correctives = true) {
  Rng rng(seed);
  mm::MorphableModel m;
  m.template_vertices.resize(n, 3);
  for (Eigen::Index i = 0; i < m.template_vertices.size(); ++i) m.template_vertices.data()[i] = rng.uniform(-1, 1);
  for (std::uint32_t f = 0; f < 2 * n; ++f) {
    mm::Face face{};
    do {
      face = {static_cast<std::uint32_t>(rng.below(n)), static_cast<std::uint32_t>(rng.below(n)),
              static_cast<std::uint32_t>(rng.below(n))};
    } while (face[0] == face[1] || face[1] == face[2] || face[0] == face[2]);
    m.faces.push_back(face);
  }
  auto basis = [&](std::uint32_t k, double scale) {
    Eigen::MatrixXd b(3 * Eigen::Index{n}, k);
    for (Eigen::Index i = 0; i < b.size(); ++i) b.data()[i] = scale * rng.uniform(-1, 1);
    return b;
  };
  m.shape_basis = basis(s, 0.05);
  m.expression_basis = basis(ex, 0.05);
  m.pose_corrective_basis = correctives && j > 1 ? basis(9 * (j - 1), 0.01) : Eigen::MatrixXd(3 * Eigen::Index{n}, 0);
  m.joint_regressor.resize(j, n);
  m.skinning_weights.resize(n, j);
  for (Eigen::Index i = 0; i < m.joint_regressor.size(); ++i) m.joint_regressor.data()[i] = rng.uniform();
  for (Eigen::Index i = 0; i < m.skinning_weights.size(); ++i) m.skinning_weights.data()[i] = rng.uniform();
  for (Eigen::Index r = 0; r < m.joint_regressor.rows(); ++r) m.joint_regressor.row(r) /= m.joint_regressor.row(r).sum();
  for (Eigen::Index r = 0; r < m.skinning_weights.rows(); ++r) m.skinning_weights.row(r) /= m.skinning_weights.row(r).sum();
  m.kinematic_parents.push_back(-1);
  for (std::uint32_t k = 1; k < j; ++k) m.kinematic_parents.push_back(static_cast<std::int32_t>(rng.below(k)));
  for (std::size_t c = 0; c < 3 * m.faces.size(); ++c) m.uv_coords.emplace_back(rng.uniform(), rng.uniform());
  mm::validate_model(m);
  return m;
}

inline mm::ParamVector random_params(Rng& rng, const mm::MorphableModel& m, double pose_scale = 0.5,
                                     std::uint32_t detail = 3) {
  return {random_vector(rng, m.shape_basis.cols(), 2.0), random_vector(rng, m.expression_basis.cols(), 2.0),
          random_vector(rng, static_cast<Eigen::Index>(3 * m.num_joints()), pose_scale),
          random_vector(rng, detail)};
}

inline mm::ParamVector zero_params(const mm::MorphableModel& m, std::uint32_t detail = 0) {
  return {Eigen::VectorXd::Zero(m.shape_basis.cols()), Eigen::VectorXd::Zero(m.expression_basis.cols()),
          Eigen::VectorXd::Zero(static_cast<Eigen::Index>(3 * m.num_joints())), Eigen::VectorXd::Zero(detail)};
}

}  // namespace t2f::test
