#pragma once

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <vector>

namespace t2f::data {

inline constexpr double kMinStd = 1e-8;

// L2-normalizes in place; the zero vector is left untouched.
inline void l2_normalize(Eigen::Ref<Eigen::VectorXd> x) {
  const double n = x.norm();
  if (n > 0.0) x /= n;
}

// Per-dimension target statistics over the train split (population std,
// 1/N). Dimensions with std < 1e-8 are clamped to std = 1 and flagged.
// input_mean/input_std, when present, standardize the (normalized)
// embedding the same way; unit-norm embeddings have components of order
// 1/sqrt(E), far below the per-step reach of Adam.
struct NormStats {
  std::vector<double> mean;
  std::vector<double> std;
  std::vector<std::uint8_t> clamped;
  bool normalize_embeddings = true;
  std::vector<double> input_mean;
  std::vector<double> input_std;

  std::size_t dim() const { return mean.size(); }
  bool standardizes_inputs() const { return !input_mean.empty(); }

  // Raw embedding to network input.
  void prepare_input(Eigen::Ref<Eigen::VectorXd> x) const {
    if (normalize_embeddings) l2_normalize(x);
    for (std::size_t i = 0; i < input_mean.size(); ++i) {
      const auto k = static_cast<Eigen::Index>(i);
      x[k] = (x[k] - input_mean[i]) / input_std[i];
    }
  }

  Eigen::VectorXd standardize(const Eigen::VectorXd& y) const {
    Eigen::VectorXd out(y.size());
    for (Eigen::Index i = 0; i < y.size(); ++i) out[i] = (y[i] - mean[i]) / std[i];
    return out;
  }

  Eigen::VectorXd unstandardize(const Eigen::VectorXd& z) const {
    Eigen::VectorXd out(z.size());
    for (Eigen::Index i = 0; i < z.size(); ++i) out[i] = z[i] * std[i] + mean[i];
    return out;
  }

  friend bool operator==(const NormStats&, const NormStats&) = default;
};

// Identity statistics (mean 0, std 1) of a given width.
inline NormStats identity_stats(std::size_t dim, bool normalize_embeddings) {
  NormStats s;
  s.mean.assign(dim, 0.0);
  s.std.assign(dim, 1.0);
  s.clamped.assign(dim, 0);
  s.normalize_embeddings = normalize_embeddings;
  return s;
}

}  // namespace t2f::data
