#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "t2f/common/error.hpp"

namespace t2f::data {

enum class Source : std::uint8_t { image = 0, text = 1, other = 2 };

inline std::string_view source_name(Source s) {
  switch (s) {
    case Source::image: return "image";
    case Source::text: return "text";
    default: return "other";
  }
}

inline Source parse_source(std::string_view s) {
  if (s == "image") return Source::image;
  if (s == "text") return Source::text;
  return Source::other;
}

// One (embedding, parameters) training pair from an upstream producer.
struct Record {
  std::string id;
  std::vector<float> embedding;
  std::vector<float> params;  // flattened (beta, psi, theta, delta)
  float estimated_age = 0.0f;
  Source source = Source::image;

  bool all_finite() const {
    if (!std::isfinite(estimated_age)) return false;
    for (float v : embedding)
      if (!std::isfinite(v)) return false;
    for (float v : params)
      if (!std::isfinite(v)) return false;
    return true;
  }

  friend bool operator==(const Record&, const Record&) = default;
};

}  // namespace t2f::data
