#pragma once

#include <nlohmann/json.hpp>

#include <istream>
#include <limits>
#include <set>
#include <string>
#include <vector>

#include "t2f/dataset/dataset_file.hpp"
#include "t2f/dataset/record.hpp"

namespace t2f::data {

struct IngestOptions {
  double min_age = 18.0;  // kept when estimated_age >= min_age
  mm::DimsProfile profile;
};

struct IngestResult {
  Dataset dataset;
  std::size_t below_min_age = 0;
  std::vector<std::string> rejected;  // one diagnostic per rejected record
};

// Filters by age and finiteness and assembles a dataset. All records must
// share the embedding width of the first one and match the profile width.
inline IngestResult ingest(const std::vector<Record>& records, const IngestOptions& opt) {
  if (records.empty()) throw DataError("no records");
  IngestResult result;
  auto& header = result.dataset.header;
  header.embedding_dim = static_cast<std::uint32_t>(records.front().embedding.size());
  header.params_dim = opt.profile.total();
  header.profile = opt.profile;
  header.min_age = opt.min_age;
  if (header.embedding_dim == 0) throw DataError("record '" + records.front().id + "' has an empty embedding");
  std::set<std::string> seen;
  for (const auto& r : records) {
    if (r.embedding.size() != header.embedding_dim)
      throw DataError("record '" + r.id + "' has embedding length " + std::to_string(r.embedding.size()) +
                      ", expected " + std::to_string(header.embedding_dim));
    if (r.params.size() != header.params_dim)
      throw DataError("record '" + r.id + "' has params length " + std::to_string(r.params.size()) +
                      ", expected " + std::to_string(header.params_dim));
    if (!seen.insert(r.id).second) throw DataError("duplicate record id '" + r.id + "'");
    if (!r.all_finite()) {
      result.rejected.push_back("record '" + r.id + "' rejected: non-finite values");
      continue;
    }
    if (!(r.estimated_age >= opt.min_age)) {
      ++result.below_min_age;
      continue;
    }
    result.dataset.records.push_back(r);
  }
  if (result.dataset.records.empty()) throw DataError("no records survived filtering");
  header.count = result.dataset.records.size();
  return result;
}

namespace jsonl_detail {

// Python's json module writes NaN/Infinity literals; map them to null
// (read back as NaN) outside of strings.
inline std::string sanitize_nonfinite(const std::string& line) {
  std::string out;
  out.reserve(line.size());
  bool in_string = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (in_string) {
      out += c;
      if (c == '\\' && i + 1 < line.size()) out += line[++i];
      else if (c == '"') in_string = false;
      continue;
    }
    if (c == '"') {
      in_string = true;
      out += c;
    } else if (line.compare(i, 3, "NaN") == 0) {
      out += "null";
      i += 2;
    } else if (line.compare(i, 9, "-Infinity") == 0) {
      out += "null";
      i += 8;
    } else if (line.compare(i, 8, "Infinity") == 0) {
      out += "null";
      i += 7;
    } else {
      out += c;
    }
  }
  return out;
}

inline std::vector<float> numbers(const nlohmann::json& j, const char* field, std::size_t line) {
  if (!j.is_array()) throw FormatError("line " + std::to_string(line) + ": '" + field + "' must be an array");
  std::vector<float> out;
  out.reserve(j.size());
  for (const auto& v : j) {
    if (v.is_null()) out.push_back(std::numeric_limits<float>::quiet_NaN());
    else if (v.is_number()) out.push_back(v.get<float>());
    else throw FormatError("line " + std::to_string(line) + ": '" + field + "' must contain numbers");
  }
  return out;
}

}  // namespace jsonl_detail

// JSON-lines interchange: {"id", "embedding":[...], "params":[...], "age", "source"}
// per line; blank lines are skipped.
inline std::vector<Record> read_jsonl(std::istream& in) {
  std::vector<Record> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(jsonl_detail::sanitize_nonfinite(line));
    } catch (const nlohmann::json::exception& e) {
      throw FormatError("line " + std::to_string(lineno) + ": invalid JSON (" + e.what() + ")");
    }
    if (!j.is_object() || !j.contains("id") || !j.contains("embedding") || !j.contains("params") ||
        !j.contains("age"))
      throw FormatError("line " + std::to_string(lineno) + ": record needs id, embedding, params and age");
    Record r;
    r.id = j["id"].is_string() ? j["id"].get<std::string>() : j["id"].dump();
    r.embedding = jsonl_detail::numbers(j["embedding"], "embedding", lineno);
    r.params = jsonl_detail::numbers(j["params"], "params", lineno);
    r.estimated_age = j["age"].is_number() ? j["age"].get<float>() : std::numeric_limits<float>::quiet_NaN();
    r.source = parse_source(j.value("source", std::string("image")));
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace t2f::data
