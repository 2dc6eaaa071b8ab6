#pragma once

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <sstream>
#include <string>

#include "t2f/dataset/dataset_file.hpp"
#include "t2f/dataset/stats.hpp"

namespace t2f::data {

namespace detail {

inline void finish_std(std::vector<double>& sq, double n, std::vector<std::uint8_t>* clamped) {
  for (std::size_t d = 0; d < sq.size(); ++d) {
    sq[d] = std::sqrt(sq[d] / n);
    if (sq[d] < kMinStd) {
      sq[d] = 1.0;
      if (clamped) (*clamped)[d] = 1;
    }
  }
}

}  // namespace detail

// Target mean/std (and optionally input mean/std, after L2 normalization)
// over the given (train) rows only.
inline NormStats compute_stats(const Dataset& ds, const std::vector<std::size_t>& train_rows,
                               bool normalize_embeddings = true, bool standardize_inputs = false) {
  if (train_rows.empty()) throw DataError("cannot compute statistics over an empty split");
  const std::size_t dim = ds.header.params_dim;
  NormStats s;
  s.mean.assign(dim, 0.0);
  s.std.assign(dim, 0.0);
  s.clamped.assign(dim, 0);
  s.normalize_embeddings = normalize_embeddings;
  const double n = double(train_rows.size());
  for (auto row : train_rows) {
    const auto& p = ds.records.at(row).params;
    for (std::size_t d = 0; d < dim; ++d) s.mean[d] += p[d];
  }
  for (auto& m : s.mean) m /= n;
  for (auto row : train_rows) {
    const auto& p = ds.records.at(row).params;
    for (std::size_t d = 0; d < dim; ++d) {
      const double diff = p[d] - s.mean[d];
      s.std[d] += diff * diff;
    }
  }
  detail::finish_std(s.std, n, &s.clamped);
  if (!standardize_inputs) return s;

  const std::size_t e = ds.header.embedding_dim;
  Eigen::MatrixXd x(static_cast<Eigen::Index>(e), static_cast<Eigen::Index>(train_rows.size()));
  for (std::size_t k = 0; k < train_rows.size(); ++k) {
    const auto& emb = ds.records.at(train_rows[k]).embedding;
    for (std::size_t d = 0; d < e; ++d) x(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(k)) = emb[d];
    if (normalize_embeddings) l2_normalize(x.col(static_cast<Eigen::Index>(k)));
  }
  s.input_mean.assign(e, 0.0);
  s.input_std.assign(e, 0.0);
  for (std::size_t d = 0; d < e; ++d) {
    const auto row = x.row(static_cast<Eigen::Index>(d));
    for (Eigen::Index k = 0; k < row.size(); ++k) s.input_mean[d] += row[k];
    s.input_mean[d] /= n;
    for (Eigen::Index k = 0; k < row.size(); ++k) s.input_std[d] += (row[k] - s.input_mean[d]) * (row[k] - s.input_mean[d]);
  }
  detail::finish_std(s.input_std, n, nullptr);
  return s;
}

inline std::string age_bin(double age) {
  const auto lo = static_cast<long long>(std::floor(age / 10.0)) * 10;
  return std::to_string(lo) + "-" + std::to_string(lo + 9);
}

// Counts, sources, age histogram (decade bins) and per-group target ranges.
inline nlohmann::ordered_json summarize(const Dataset& ds) {
  using nlohmann::ordered_json;
  const auto& h = ds.header;
  ordered_json j;
  j["count"] = ds.size();
  j["embedding_dim"] = h.embedding_dim;
  j["params_dim"] = h.params_dim;
  j["profile"] = {{"beta", h.profile.shape}, {"psi", h.profile.expression}, {"theta", h.profile.pose},
                  {"delta", h.profile.detail}};
  j["min_age"] = h.min_age;

  std::map<Source, std::size_t> sources{{Source::image, 0}, {Source::text, 0}, {Source::other, 0}};
  std::map<long long, std::size_t> bins;
  double age_min = std::numeric_limits<double>::infinity();
  double age_max = -age_min;
  double age_sum = 0.0;
  for (const auto& r : ds.records) {
    ++sources[r.source];
    const double a = r.estimated_age;
    age_min = std::min(age_min, a);
    age_max = std::max(age_max, a);
    age_sum += a;
    ++bins[static_cast<long long>(std::floor(a / 10.0))];
  }
  for (const auto& [src, n] : sources) j["sources"][std::string(source_name(src))] = n;

  ordered_json age;
  if (ds.size() > 0) {
    age["min"] = age_min;
    age["max"] = age_max;
    age["mean"] = age_sum / double(ds.size());
  } else {
    age["min"] = nullptr;
    age["max"] = nullptr;
    age["mean"] = nullptr;
  }
  age["histogram"] = ordered_json::object();
  for (const auto& [bin, n] : bins) age["histogram"][age_bin(double(bin) * 10.0)] = n;
  j["age"] = std::move(age);

  std::size_t start = 0;
  const auto groups = h.profile.groups();
  for (std::size_t g = 0; g < groups.size(); ++g) {
    ordered_json range;
    if (groups[g] == 0 || ds.size() == 0) {
      range = nullptr;
    } else {
      double lo = std::numeric_limits<double>::infinity();
      double hi = -lo;
      for (const auto& r : ds.records)
        for (std::size_t d = start; d < start + groups[g]; ++d) {
          lo = std::min<double>(lo, r.params[d]);
          hi = std::max<double>(hi, r.params[d]);
        }
      range = {{"min", lo}, {"max", hi}};
    }
    j["groups"][mm::kGroupNames[g]] = std::move(range);
    start += groups[g];
  }
  return j;
}

inline std::string summary_text(const nlohmann::ordered_json& s) {
  std::ostringstream out;
  out << "records: " << s["count"] << "  (E=" << s["embedding_dim"] << ", params=" << s["params_dim"] << ")\n";
  out << "sources:";
  for (const auto& [k, v] : s["sources"].items()) out << " " << k << "=" << v;
  out << "\nage: min " << s["age"]["min"] << ", max " << s["age"]["max"] << ", mean " << s["age"]["mean"] << "\n";
  for (const auto& [k, v] : s["age"]["histogram"].items()) out << "  " << k << ": " << v << "\n";
  for (const auto& [k, v] : s["groups"].items()) {
    if (v.is_null()) out << k << ": (empty)\n";
    else out << k << ": [" << v["min"] << ", " << v["max"] << "]\n";
  }
  return out.str();
}

}  // namespace t2f::data
