#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "t2f/common/error.hpp"
#include "t2f/common/rng.hpp"
#include "t2f/dataset/dataset_file.hpp"

namespace t2f::data {

struct Split {
  std::vector<std::size_t> train;  // record indices
  std::vector<std::size_t> val;
};

inline std::size_t validation_count(std::size_t count, double fraction) {
  if (!(fraction > 0.0 && fraction < 1.0)) throw DataError("validation fraction must lie in (0, 1)");
  if (count < 2) throw DataError("splitting needs at least 2 records");
  const auto n = static_cast<std::size_t>(std::llround(fraction * double(count)));
  return std::clamp<std::size_t>(n, 1, count - 1);
}

// Orders records by a seeded hash of their id, so the split depends only on
// the set of ids and the seed, never on ingestion order. The first
// count - n_val records in that order form the train split.
inline Split split(const std::vector<std::string>& ids, double fraction, std::uint64_t seed) {
  const std::size_t n_val = validation_count(ids.size(), fraction);
  std::vector<std::pair<std::uint64_t, std::size_t>> keyed(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) keyed[i] = {keyed_hash(ids[i], seed), i};
  std::sort(keyed.begin(), keyed.end(), [&](const auto& a, const auto& b) {
    return a.first != b.first ? a.first < b.first : ids[a.second] < ids[b.second];
  });
  Split out;
  const std::size_t n_train = ids.size() - n_val;
  for (std::size_t k = 0; k < keyed.size(); ++k) (k < n_train ? out.train : out.val).push_back(keyed[k].second);
  return out;
}

inline Split split(const Dataset& ds, double fraction, std::uint64_t seed) {
  std::vector<std::string> ids;
  ids.reserve(ds.size());
  for (const auto& r : ds.records) ids.push_back(r.id);
  return split(ids, fraction, seed);
}

}  // namespace t2f::data
