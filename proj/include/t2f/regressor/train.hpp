#pragma once

#include <Eigen/Core>

#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "t2f/common/error.hpp"
#include "t2f/common/rng.hpp"
#include "t2f/regressor/adam.hpp"
#include "t2f/regressor/mlp.hpp"

namespace t2f::reg {

struct TrainConfig {
  double learning_rate = 1e-3;
  std::size_t batch_size = 64;
  std::size_t max_epochs = 100;
  std::size_t patience = 10;  // 0 disables early stopping
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t seed = 42;
  double validation_fraction = 0.1;
  GroupWeights group_weights = {1.0, 1.0, 1.0, 1.0};
  bool normalize_embeddings = true;
  bool standardize_inputs = true;
  bool standardize_targets = true;

  AdamConfig adam() const { return {learning_rate, beta1, beta2, epsilon}; }

  void validate() const {
    if (!(learning_rate > 0.0)) throw DataError("learning_rate must be positive");
    if (batch_size == 0) throw DataError("batch_size must be positive");
    if (max_epochs == 0) throw DataError("max_epochs must be positive");
    if (!(validation_fraction > 0.0 && validation_fraction < 1.0))
      throw DataError("validation_fraction must lie in (0, 1)");
    for (double w : group_weights)
      if (!(w >= 0.0) || !std::isfinite(w)) throw DataError("group loss weights must be finite and >= 0");
  }
};

struct TrainReport {
  std::vector<double> train_loss;
  std::vector<double> val_loss;
  std::size_t best_epoch = 0;
  std::size_t stopped_epoch = 0;
  bool early_stopped = false;
  double wall_seconds = 0.0;
  // Unweighted MSE per group on the validation split, at the restored weights.
  std::array<double, 4> group_val_mse{};

  // Everything except wall time; used for determinism checks.
  bool same_trajectory(const TrainReport& o) const {
    return train_loss == o.train_loss && val_loss == o.val_loss && best_epoch == o.best_epoch &&
           stopped_epoch == o.stopped_epoch && early_stopped == o.early_stopped &&
           group_val_mse == o.group_val_mse;
  }
};

// Prepared training pairs: columns are samples, already normalized.
struct Samples {
  Eigen::MatrixXd inputs;
  Eigen::MatrixXd targets;

  Eigen::Index size() const { return inputs.cols(); }
};

struct TrainHooks {
  // Replaces the validation-loss evaluation. Receives the weights at the end
  // of each epoch.
  std::function<double(const MlpWeights&, std::size_t epoch)> validation_loss;
  std::function<void(std::size_t epoch, double train_loss, double val_loss)> on_epoch;
};

struct TrainResult {
  MlpWeights weights;
  TrainReport report;
};

inline double evaluate_loss(const MlpWeights& w, const Samples& s, const GroupWeights& gw) {
  return batch_loss(forward_batch(w, s.inputs), s.targets, w.profile(), gw);
}

inline std::array<double, 4> group_mse(const MlpWeights& w, const Samples& s) {
  const Eigen::MatrixXd diff = forward_batch(w, s.inputs) - s.targets;
  std::array<double, 4> out{};
  Eigen::Index start = 0;
  const auto groups = w.profile().groups();
  for (std::size_t g = 0; g < 4; ++g) {
    if (groups[g] > 0)
      out[g] = diff.middleRows(start, groups[g]).squaredNorm() / double(groups[g] * diff.cols());
    start += groups[g];
  }
  return out;
}

// Mini-batch Adam with patience-based early stopping. Returns the weights of
// the epoch with the lowest validation loss. Deterministic for a fixed
// `config.seed` and initial weights.
inline TrainResult fit(MlpWeights weights, const Samples& train, const Samples& val,
                       const TrainConfig& config, const TrainHooks& hooks = {}) {
  config.validate();
  if (train.size() == 0) throw DataError("train split is empty");
  if (val.size() == 0) throw DataError("validation split is empty");
  if (train.inputs.rows() != weights.input_dim() || val.inputs.rows() != weights.input_dim())
    throw DimensionError("sample width does not match network input");
  if (train.targets.rows() != weights.output_dim() || val.targets.rows() != weights.output_dim())
    throw DimensionError("target width does not match network output");

  const auto started = std::chrono::steady_clock::now();
  Rng rng(splitmix64(config.seed ^ 0x5348554646ULL));
  AdamState adam(weights.param_count());
  const AdamConfig adam_cfg = config.adam();
  TrainReport report;
  std::vector<Eigen::Index> order(static_cast<std::size_t>(train.size()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});

  std::vector<double> best_params(weights.params().begin(), weights.params().end());
  double best_val = std::numeric_limits<double>::infinity();
  Gradient grad;
  Eigen::MatrixXd batch_in;
  Eigen::MatrixXd batch_out;

  for (std::size_t epoch = 0; epoch < config.max_epochs; ++epoch) {
    rng.shuffle(std::span<Eigen::Index>(order));
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t count = std::min(config.batch_size, order.size() - start);
      batch_in.resize(train.inputs.rows(), static_cast<Eigen::Index>(count));
      batch_out.resize(train.targets.rows(), static_cast<Eigen::Index>(count));
      for (std::size_t k = 0; k < count; ++k) {
        batch_in.col(static_cast<Eigen::Index>(k)) = train.inputs.col(order[start + k]);
        batch_out.col(static_cast<Eigen::Index>(k)) = train.targets.col(order[start + k]);
      }
      const double batch_value = backward_batch(weights, batch_in, batch_out, config.group_weights, grad);
      if (!std::isfinite(batch_value))
        throw DataError("training diverged: non-finite loss at epoch " + std::to_string(epoch));
      loss_sum += batch_value * double(count);
      adam_step(weights.params(), adam, grad, adam_cfg);
    }
    const double train_loss = loss_sum / double(order.size());
    const double val_loss = hooks.validation_loss ? hooks.validation_loss(weights, epoch)
                                                  : evaluate_loss(weights, val, config.group_weights);
    if (!std::isfinite(val_loss))
      throw DataError("training diverged: non-finite validation loss at epoch " + std::to_string(epoch));
    report.train_loss.push_back(train_loss);
    report.val_loss.push_back(val_loss);
    if (hooks.on_epoch) hooks.on_epoch(epoch, train_loss, val_loss);
    report.stopped_epoch = epoch;
    if (val_loss < best_val) {
      best_val = val_loss;
      report.best_epoch = epoch;
      best_params.assign(weights.params().begin(), weights.params().end());
    } else if (config.patience > 0 && epoch - report.best_epoch >= config.patience) {
      report.early_stopped = true;
      break;
    }
  }
  std::copy(best_params.begin(), best_params.end(), weights.params().begin());
  report.group_val_mse = group_mse(weights, val);
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return {std::move(weights), std::move(report)};
}

}  // namespace t2f::reg
