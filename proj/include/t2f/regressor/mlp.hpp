#pragma once

#include <Eigen/Core>

#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "t2f/common/error.hpp"
#include "t2f/common/rng.hpp"
#include "t2f/mm/types.hpp"

namespace t2f::reg {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class Activation : std::uint8_t { linear = 0, leaky_relu = 1 };

inline constexpr double kLeakySlope = 0.01;

struct LayerShape {
  std::uint32_t in = 0;
  std::uint32_t out = 0;
  Activation activation = Activation::linear;

  friend bool operator==(const LayerShape&, const LayerShape&) = default;
};

// Parses "768-1024-1024-512-284" into layer widths.
inline std::vector<std::uint32_t> parse_architecture(std::string_view arch) {
  std::vector<std::uint32_t> widths;
  std::size_t start = 0;
  while (start <= arch.size()) {
    const auto end = std::min(arch.find('-', start), arch.size());
    std::uint32_t value = 0;
    const auto piece = arch.substr(start, end - start);
    auto [ptr, ec] = std::from_chars(piece.data(), piece.data() + piece.size(), value);
    if (piece.empty() || ec != std::errc{} || ptr != piece.data() + piece.size() || value == 0)
      throw DimensionError("invalid architecture string '" + std::string(arch) + "'");
    widths.push_back(value);
    start = end + 1;
  }
  if (widths.size() < 2) throw DimensionError("architecture needs at least input and output widths");
  return widths;
}

inline std::string profile_tag(const mm::DimsProfile& p) {
  return "S" + std::to_string(p.shape) + "-E" + std::to_string(p.expression) + "-P" +
         std::to_string(p.pose) + "-D" + std::to_string(p.detail);
}

// Layer matrices and biases of the regressor, flattened into one parameter
// vector. Layer l occupies [W_l (out×in, row-major), b_l (out)] in order.
class MlpWeights {
 public:
  MlpWeights() = default;

  MlpWeights(std::vector<LayerShape> layers, mm::DimsProfile profile)
      : layers_(std::move(layers)), profile_(profile) {
    if (layers_.empty()) throw DimensionError("MLP needs at least one layer");
    std::size_t total = 0;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      if (l > 0 && layers_[l].in != layers_[l - 1].out)
        throw DimensionError("layer " + std::to_string(l) + " input width does not chain");
      offsets_.push_back(total);
      total += std::size_t{layers_[l].out} * (std::size_t{layers_[l].in} + 1);
    }
    if (layers_.back().activation != Activation::linear)
      throw DimensionError("final layer must be linear");
    if (layers_.back().out != profile_.total())
      throw DimensionError("output width " + std::to_string(layers_.back().out) +
                           " does not match dims profile total " + std::to_string(profile_.total()));
    params_.assign(total, 0.0);
  }

  // Hidden layers leaky-rectified, head linear.
  static MlpWeights from_architecture(std::string_view arch, const mm::DimsProfile& profile) {
    const auto widths = parse_architecture(arch);
    std::vector<LayerShape> layers;
    for (std::size_t i = 0; i + 1 < widths.size(); ++i)
      layers.push_back({widths[i], widths[i + 1],
                        i + 2 == widths.size() ? Activation::linear : Activation::leaky_relu});
    return {std::move(layers), profile};
  }

  // Uniform ±sqrt(6/(fan_in+fan_out)) weights, zero biases.
  void init_glorot(std::uint64_t seed) {
    Rng rng(seed);
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      const double limit = std::sqrt(6.0 / (layers_[l].in + layers_[l].out));
      auto w = weight(l);
      for (Eigen::Index r = 0; r < w.rows(); ++r)
        for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = rng.uniform(-limit, limit);
      bias(l).setZero();
    }
  }

  const std::vector<LayerShape>& layers() const { return layers_; }
  const mm::DimsProfile& profile() const { return profile_; }
  std::uint32_t input_dim() const { return layers_.front().in; }
  std::uint32_t output_dim() const { return layers_.back().out; }

  std::span<double> params() { return params_; }
  std::span<const double> params() const { return params_; }
  std::size_t param_count() const { return params_.size(); }

  std::size_t weight_offset(std::size_t l) const { return offsets_[l]; }
  std::size_t bias_offset(std::size_t l) const {
    return offsets_[l] + std::size_t{layers_[l].out} * layers_[l].in;
  }

  Eigen::Map<RowMatrix> weight(std::size_t l) {
    return {params_.data() + weight_offset(l), layers_[l].out, layers_[l].in};
  }
  Eigen::Map<const RowMatrix> weight(std::size_t l) const {
    return {params_.data() + weight_offset(l), layers_[l].out, layers_[l].in};
  }
  Eigen::Map<Eigen::VectorXd> bias(std::size_t l) { return {params_.data() + bias_offset(l), layers_[l].out}; }
  Eigen::Map<const Eigen::VectorXd> bias(std::size_t l) const {
    return {params_.data() + bias_offset(l), layers_[l].out};
  }

  std::string architecture() const {
    std::string s = std::to_string(layers_.front().in);
    for (const auto& l : layers_) s += "-" + std::to_string(l.out);
    return s;
  }

  // Architecture, activations and dims profile, e.g.
  // "768-1024-1024-512-284|LLLN|S100-E50-P6-D128" (L = leaky, N = linear).
  std::string signature() const {
    std::string acts;
    for (const auto& l : layers_) acts += l.activation == Activation::leaky_relu ? 'L' : 'N';
    return architecture() + "|" + acts + "|" + profile_tag(profile_);
  }

  friend bool operator==(const MlpWeights& a, const MlpWeights& b) {
    return a.layers_ == b.layers_ && a.profile_ == b.profile_ && a.params_ == b.params_;
  }

 private:
  std::vector<LayerShape> layers_;
  std::vector<std::size_t> offsets_;
  std::vector<double> params_;
  mm::DimsProfile profile_;
};

// Flat gradient, laid out like MlpWeights::params().
using Gradient = std::vector<double>;

inline void activate(Eigen::Ref<Eigen::MatrixXd> z, Activation a) {
  if (a == Activation::leaky_relu) z = z.array().max(kLeakySlope * z.array());
}

// Columns of `inputs` are samples.
inline Eigen::MatrixXd forward_batch(const MlpWeights& w, const Eigen::MatrixXd& inputs) {
  if (inputs.rows() != w.input_dim())
    throw DimensionError("embedding has dimension " + std::to_string(inputs.rows()) + ", network expects " +
                         std::to_string(w.input_dim()));
  Eigen::MatrixXd a = inputs;
  for (std::size_t l = 0; l < w.layers().size(); ++l) {
    Eigen::MatrixXd z = w.weight(l) * a;
    z.colwise() += w.bias(l);
    activate(z, w.layers()[l].activation);
    a = std::move(z);
  }
  return a;
}

inline Eigen::VectorXd forward(const MlpWeights& w, const Eigen::VectorXd& x) {
  return forward_batch(w, x);
}

// Loss weight per parameter group (beta, psi, theta, delta).
using GroupWeights = std::array<double, 4>;

// Sum over groups of weight * mean squared error on that group's slice.
inline double loss(const Eigen::VectorXd& pred, const Eigen::VectorXd& target,
                   const mm::DimsProfile& profile, const GroupWeights& weights = {1, 1, 1, 1}) {
  if (pred.size() != target.size() || pred.size() != profile.total())
    throw DimensionError("loss: prediction/target/profile lengths disagree");
  double total = 0.0;
  Eigen::Index start = 0;
  const auto groups = profile.groups();
  for (std::size_t g = 0; g < groups.size(); ++g) {
    const Eigen::Index n = groups[g];
    if (n > 0) total += weights[g] * (pred.segment(start, n) - target.segment(start, n)).squaredNorm() / double(n);
    start += n;
  }
  return total;
}

// Per-element d(loss)/d(pred) scale: 2 w_g / |g|.
inline Eigen::VectorXd loss_scale(const mm::DimsProfile& profile, const GroupWeights& weights) {
  Eigen::VectorXd scale(profile.total());
  Eigen::Index start = 0;
  const auto groups = profile.groups();
  for (std::size_t g = 0; g < groups.size(); ++g) {
    if (groups[g] > 0) scale.segment(start, groups[g]).setConstant(2.0 * weights[g] / groups[g]);
    start += groups[g];
  }
  return scale;
}

// Mean per-sample loss over the columns of `preds`/`targets`.
inline double batch_loss(const Eigen::MatrixXd& preds, const Eigen::MatrixXd& targets,
                         const mm::DimsProfile& profile, const GroupWeights& weights) {
  const Eigen::VectorXd half_scale = 0.5 * loss_scale(profile, weights);
  const double sum = ((preds - targets).array().square().colwise() * half_scale.array()).sum();
  return sum / double(preds.cols());
}

// Gradient of the mean per-sample loss over a batch (columns), and the loss.
inline double backward_batch(const MlpWeights& w, const Eigen::MatrixXd& inputs,
                             const Eigen::MatrixXd& targets, const GroupWeights& group_weights,
                             Gradient& grad) {
  const std::size_t depth = w.layers().size();
  std::vector<Eigen::MatrixXd> pre(depth);
  std::vector<Eigen::MatrixXd> act(depth + 1);
  act[0] = inputs;
  for (std::size_t l = 0; l < depth; ++l) {
    pre[l] = w.weight(l) * act[l];
    pre[l].colwise() += w.bias(l);
    act[l + 1] = pre[l];
    activate(act[l + 1], w.layers()[l].activation);
  }
  if (targets.rows() != act[depth].rows() || targets.cols() != inputs.cols())
    throw DimensionError("target batch shape does not match network output");

  const double count = double(inputs.cols());
  const Eigen::VectorXd scale = loss_scale(w.profile(), group_weights);
  const Eigen::MatrixXd diff = act[depth] - targets;
  const double value = 0.5 * (diff.array().square().colwise() * scale.array()).sum() / count;

  grad.assign(w.param_count(), 0.0);
  Eigen::MatrixXd delta = (diff.array().colwise() * scale.array()).matrix() / count;
  for (std::size_t l = depth; l-- > 0;) {
    if (w.layers()[l].activation == Activation::leaky_relu)
      delta = (pre[l].array() > 0.0).select(delta, kLeakySlope * delta);
    Eigen::Map<RowMatrix> gw(grad.data() + w.weight_offset(l), w.layers()[l].out, w.layers()[l].in);
    Eigen::Map<Eigen::VectorXd> gb(grad.data() + w.bias_offset(l), w.layers()[l].out);
    gw.noalias() = delta * act[l].transpose();
    gb = delta.rowwise().sum();
    if (l > 0) delta = w.weight(l).transpose() * delta;
  }
  return value;
}

// Single-sample gradient of loss(forward(w, x), target).
inline Gradient backward(const MlpWeights& w, const Eigen::VectorXd& x, const Eigen::VectorXd& target,
                         const GroupWeights& group_weights = {1, 1, 1, 1}) {
  Gradient grad;
  backward_batch(w, x, target, group_weights, grad);
  return grad;
}

}  // namespace t2f::reg
