#pragma once

#include <optional>
#include <string>

#include "t2f/dataset/analysis.hpp"
#include "t2f/dataset/dataset_file.hpp"
#include "t2f/dataset/split.hpp"
#include "t2f/regressor/regress.hpp"
#include "t2f/regressor/train.hpp"
#include "t2f/regressor/weights_io.hpp"

// Dataset-level training and evaluation on top of fit().

namespace t2f::reg {

inline std::string default_architecture(std::uint32_t embedding_dim, const mm::DimsProfile& p) {
  return std::to_string(embedding_dim) + "-1024-1024-512-" + std::to_string(p.total());
}

// Network-space samples: embeddings prepared per the stats, targets standardized.
inline Samples to_samples(const data::Dataset& ds, const std::vector<std::size_t>& rows,
                          const data::NormStats& stats) {
  Samples s;
  s.inputs.resize(ds.header.embedding_dim, static_cast<Eigen::Index>(rows.size()));
  s.targets.resize(ds.header.params_dim, static_cast<Eigen::Index>(rows.size()));
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const auto& r = ds.records.at(rows[k]);
    const auto col = static_cast<Eigen::Index>(k);
    for (std::size_t d = 0; d < r.embedding.size(); ++d) s.inputs(static_cast<Eigen::Index>(d), col) = r.embedding[d];
    stats.prepare_input(s.inputs.col(col));
    for (std::size_t d = 0; d < r.params.size(); ++d)
      s.targets(static_cast<Eigen::Index>(d), col) = (r.params[d] - stats.mean[d]) / stats.std[d];
  }
  return s;
}

// Per-group MSE in raw parameter units over `rows`.
inline std::array<double, 4> evaluate_group_mse(const Regressor& r, const data::Dataset& ds,
                                                const std::vector<std::size_t>& rows) {
  if (rows.empty()) throw DataError("evaluation split is empty");
  if (ds.header.embedding_dim != r.weights.input_dim() || !(ds.header.profile == r.weights.profile()))
    throw DimensionError("dataset dimensions do not match the weights");
  std::array<double, 4> sums{};
  const auto groups = ds.header.profile.groups();
  for (auto row : rows) {
    const auto& rec = ds.records.at(row);
    Eigen::VectorXd x(rec.embedding.size());
    for (std::size_t d = 0; d < rec.embedding.size(); ++d) x[static_cast<Eigen::Index>(d)] = rec.embedding[d];
    const Eigen::VectorXd pred =
        concat_params(regress_params(r.weights, x, r.weights.profile(), r.stats ? &*r.stats : nullptr));
    std::size_t start = 0;
    for (std::size_t g = 0; g < 4; ++g) {
      for (std::size_t d = start; d < start + groups[g]; ++d) {
        const double e = pred[static_cast<Eigen::Index>(d)] - rec.params[d];
        sums[g] += e * e;
      }
      start += groups[g];
    }
  }
  for (std::size_t g = 0; g < 4; ++g)
    sums[g] = groups[g] > 0 ? sums[g] / double(groups[g] * rows.size()) : 0.0;
  return sums;
}

struct TrainedRegressor {
  Regressor regressor;
  TrainReport report;
};

// `init` continues from existing weights (same signature); otherwise the
// network is initialized from `config.seed`.
inline TrainedRegressor train_regressor(const data::Dataset& ds, const data::Split& split,
                                        const std::string& architecture, const TrainConfig& config,
                                        const std::optional<MlpWeights>& init = std::nullopt,
                                        const TrainHooks& hooks = {}) {
  if (split.train.empty()) throw DataError("train split is empty");
  if (split.val.empty()) throw DataError("validation split is empty");
  auto weights = MlpWeights::from_architecture(architecture, ds.header.profile);
  if (weights.input_dim() != ds.header.embedding_dim)
    throw DimensionError("architecture input width " + std::to_string(weights.input_dim()) +
                         " does not match dataset embedding dim " + std::to_string(ds.header.embedding_dim));
  if (init) {
    if (init->signature() != weights.signature())
      throw FormatError("architecture signature mismatch: initial weights are '" + init->signature() +
                        "', expected '" + weights.signature() + "'");
    weights = *init;
  } else {
    weights.init_glorot(splitmix64(config.seed));
  }
  data::NormStats stats =
      data::compute_stats(ds, split.train, config.normalize_embeddings, config.standardize_inputs);
  if (!config.standardize_targets) {
    auto identity = data::identity_stats(ds.header.params_dim, config.normalize_embeddings);
    stats.mean = identity.mean;
    stats.std = identity.std;
    stats.clamped = identity.clamped;
  }
  const Samples train = to_samples(ds, split.train, stats);
  const Samples val = to_samples(ds, split.val, stats);
  auto result = fit(std::move(weights), train, val, config, hooks);
  TrainedRegressor out{{std::move(result.weights), stats}, std::move(result.report)};
  out.report.group_val_mse = evaluate_group_mse(out.regressor, ds, split.val);
  return out;
}

}  // namespace t2f::reg
