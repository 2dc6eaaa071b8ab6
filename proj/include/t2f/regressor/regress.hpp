#pragma once

#include "t2f/dataset/stats.hpp"
#include "t2f/mm/types.hpp"
#include "t2f/regressor/mlp.hpp"

namespace t2f::reg {

// Splits a flat (beta, psi, theta, delta) vector by profile.
inline mm::ParamVector slice_params(const Eigen::VectorXd& flat_params, const mm::DimsProfile& p) {
  if (flat_params.size() != p.total())
    throw DimensionError("parameter vector has length " + std::to_string(flat_params.size()) +
                         ", profile expects " + std::to_string(p.total()));
  mm::ParamVector out;
  Eigen::Index at = 0;
  out.beta = flat_params.segment(at, p.shape);
  at += p.shape;
  out.psi = flat_params.segment(at, p.expression);
  at += p.expression;
  out.theta = flat_params.segment(at, p.pose);
  at += p.pose;
  out.delta = flat_params.segment(at, p.detail);
  return out;
}

inline Eigen::VectorXd concat_params(const mm::ParamVector& p) {
  Eigen::VectorXd out(p.total());
  out << p.beta, p.psi, p.theta, p.delta;
  return out;
}

// Embedding in, parameters out. With stats attached the embedding is
// prepared as in training (L2 normalization, input standardization) and the
// output is mapped back from standardized to raw parameter units.
inline mm::ParamVector regress_params(const MlpWeights& w, const Eigen::VectorXd& embedding,
                                      const mm::DimsProfile& profile,
                                      const data::NormStats* stats = nullptr) {
  if (!(profile == w.profile()))
    throw DimensionError("dims profile " + profile_tag(profile) + " does not match weights profile " +
                         profile_tag(w.profile()));
  Eigen::VectorXd x = embedding;
  if (stats) stats->prepare_input(x);
  Eigen::VectorXd y = forward(w, x);
  if (stats) y = stats->unstandardize(y);
  return slice_params(y, profile);
}

}  // namespace t2f::reg
