#pragma once

#include <nlohmann/json.hpp>

#include "t2f/mm/types.hpp"
#include "t2f/regressor/train.hpp"

namespace t2f::reg {

// Wall time is left out so that reports of identical runs are identical files.
inline nlohmann::ordered_json report_json(const TrainReport& r) {
  nlohmann::ordered_json j;
  j["epochs_run"] = r.val_loss.size();
  j["best_epoch"] = r.best_epoch;
  j["stopped_epoch"] = r.stopped_epoch;
  j["early_stopped"] = r.early_stopped;
  j["best_val_loss"] = r.val_loss.empty() ? nlohmann::ordered_json(nullptr) : nlohmann::ordered_json(r.val_loss[r.best_epoch]);
  j["group_val_mse"] = nlohmann::ordered_json::object();
  for (std::size_t g = 0; g < 4; ++g) j["group_val_mse"][mm::kGroupNames[g]] = r.group_val_mse[g];
  j["train_loss"] = r.train_loss;
  j["val_loss"] = r.val_loss;
  return j;
}

inline TrainReport report_from_json(const nlohmann::json& j) {
  TrainReport r;
  r.best_epoch = j.at("best_epoch").get<std::size_t>();
  r.stopped_epoch = j.at("stopped_epoch").get<std::size_t>();
  r.early_stopped = j.at("early_stopped").get<bool>();
  for (std::size_t g = 0; g < 4; ++g) r.group_val_mse[g] = j.at("group_val_mse").at(mm::kGroupNames[g]).get<double>();
  r.train_loss = j.at("train_loss").get<std::vector<double>>();
  r.val_loss = j.at("val_loss").get<std::vector<double>>();
  return r;
}

}  // namespace t2f::reg
