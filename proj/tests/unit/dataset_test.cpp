#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "t2f/dataset/analysis.hpp"
#include "t2f/dataset/dataset_file.hpp"
#include "t2f/dataset/ingest.hpp"
#include "t2f/dataset/split.hpp"
#include "test_support.hpp"

namespace t2f::data {
namespace {

using mm::DimsProfile;

Record make_record(std::string id, float age, std::vector<float> params, std::vector<float> embedding = {0.f, 1.f},
                   Source source = Source::image) {
  Record r;
  r.id = std::move(id);
  r.estimated_age = age;
  r.params = std::move(params);
  r.embedding = std::move(embedding);
  r.source = source;
  return r;
}

Dataset random_dataset(std::uint64_t seed, std::size_t n, std::uint32_t e = 5, DimsProfile p = {2, 1, 3, 1}) {
  Rng rng(seed);
  Dataset ds;
  ds.header.embedding_dim = e;
  ds.header.profile = p;
  ds.header.params_dim = p.total();
  for (std::size_t i = 0; i < n; ++i) {
    Record r;
    r.id = "rec-" + std::to_string(i);
    r.estimated_age = float(rng.uniform(18.0, 80.0));
    r.source = static_cast<Source>(rng.below(3));
    for (std::uint32_t d = 0; d < e; ++d) r.embedding.push_back(float(rng.normal()));
    for (std::uint32_t d = 0; d < p.total(); ++d) r.params.push_back(float(rng.normal()));
    ds.records.push_back(std::move(r));
  }
  ds.header.count = n;
  return ds;
}

TEST(Ingest, AgeBoundaryKeepsEighteen) {
  const DimsProfile p{1, 0, 0, 0};
  const auto result = ingest({make_record("a", 17.9f, {0}), make_record("b", 18.0f, {0}), make_record("c", 44.2f, {0})},
                             {18.0, p});
  ASSERT_EQ(result.dataset.size(), 2u);
  EXPECT_EQ(result.dataset.records[0].id, "b");
  EXPECT_EQ(result.dataset.records[1].id, "c");
  EXPECT_EQ(result.below_min_age, 1u);
  EXPECT_EQ(result.dataset.header.count, 2u);
  EXPECT_EQ(result.dataset.header.min_age, 18.0);
}

TEST(Ingest, NonFiniteRecordsAreRejectedWithDiagnostics) {
  const DimsProfile p{2, 0, 0, 0};
  const float nan = std::numeric_limits<float>::quiet_NaN();
  const float inf = std::numeric_limits<float>::infinity();
  const auto result = ingest({make_record("ok", 30, {1, 2}), make_record("bad-param", 30, {nan, 2}),
                              make_record("bad-emb", 30, {1, 2}, {inf, 0}), make_record("bad-age", nan, {1, 2})},
                             {18.0, p});
  ASSERT_EQ(result.dataset.size(), 1u);
  ASSERT_EQ(result.rejected.size(), 3u);
  EXPECT_NE(result.rejected[0].find("bad-param"), std::string::npos);
}

TEST(Ingest, StructuralErrors) {
  const DimsProfile p{2, 0, 0, 0};
  EXPECT_THROW(ingest({}, {18.0, p}), DataError);
  EXPECT_THROW(ingest({make_record("young", 10, {1, 2})}, {18.0, p}), DataError);
  try {
    ingest({make_record("a", 30, {1, 2}), make_record("short", 30, {1})}, {18.0, p});
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("short"), std::string::npos);
  }
  EXPECT_THROW(ingest({make_record("a", 30, {1, 2}), make_record("w", 30, {1, 2}, {1, 2, 3})}, {18.0, p}), DataError);
  EXPECT_THROW(ingest({make_record("a", 30, {1, 2}), make_record("a", 31, {1, 2})}, {18.0, p}), DataError);
}

TEST(Jsonl, ParsesRecordsAndNonFiniteTokens) {
  std::istringstream in(
      R"({"id":"x","embedding":[1,2],"params":[0.5],"age":20,"source":"text"})"
      "\n\n"
      R"({"id":7,"embedding":[NaN,2],"params":[Infinity],"age":30})"
      "\n");
  const auto records = read_jsonl(in);
  ASSERT_EQ(records.size(), 2u);
  EXPECT_EQ(records[0].id, "x");
  EXPECT_EQ(records[0].source, Source::text);
  EXPECT_EQ(records[0].params, std::vector<float>{0.5f});
  EXPECT_EQ(records[1].id, "7");
  EXPECT_EQ(records[1].source, Source::image);
  EXPECT_TRUE(std::isnan(records[1].embedding[0]));
  EXPECT_FALSE(records[1].all_finite());
  const auto result = ingest(records, {18.0, {1, 0, 0, 0}});
  EXPECT_EQ(result.dataset.size(), 1u);
  EXPECT_EQ(result.rejected.size(), 1u);
}

TEST(Jsonl, ErrorsCarryLineNumbers) {
  std::istringstream missing(R"({"id":"x","embedding":[1],"params":[1],"age":20})"
                             "\n"
                             R"({"id":"y","embedding":[1],"age":20})");
  try {
    read_jsonl(missing);
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
  }
  std::istringstream garbage("{not json");
  EXPECT_THROW(read_jsonl(garbage), FormatError);
}

TEST(Split, SmallAndLargeCounts) {
  std::vector<std::string> ids;
  for (int i = 0; i < 10; ++i) ids.push_back("id" + std::to_string(i));
  const auto s = split(ids, 0.1, 42);
  EXPECT_EQ(s.train.size(), 9u);
  EXPECT_EQ(s.val.size(), 1u);

  ids.clear();
  for (int i = 0; i < 50000; ++i) ids.push_back("face-" + std::to_string(i));
  const auto big = split(ids, 0.1, 42);
  EXPECT_EQ(big.train.size(), 45000u);
  EXPECT_EQ(big.val.size(), 5000u);
  std::vector<std::size_t> all = big.train;
  all.insert(all.end(), big.val.begin(), big.val.end());
  std::sort(all.begin(), all.end());
  for (std::size_t i = 0; i < all.size(); ++i) ASSERT_EQ(all[i], i);
}

TEST(Split, ValidationCountEdges) {
  EXPECT_EQ(validation_count(2, 0.1), 1u);
  EXPECT_EQ(validation_count(2, 0.9), 1u);
  EXPECT_EQ(validation_count(1000, 0.0001), 1u);
  EXPECT_EQ(validation_count(15, 0.1), 2u);
  EXPECT_THROW(validation_count(1, 0.5), DataError);
  EXPECT_THROW(validation_count(10, 0.0), DataError);
  EXPECT_THROW(validation_count(10, 1.0), DataError);
}

std::set<std::string> val_ids(const std::vector<std::string>& ids, const Split& s) {
  std::set<std::string> out;
  for (auto i : s.val) out.insert(ids[i]);
  return out;
}

TEST(Split, DeterministicAndOrderIndependent) {
  std::vector<std::string> ids;
  for (int i = 0; i < 200; ++i) ids.push_back("r" + std::to_string(i * 7));
  const auto a = split(ids, 0.1, 42);
  EXPECT_EQ(a.train, split(ids, 0.1, 42).train);
  EXPECT_EQ(a.val, split(ids, 0.1, 42).val);

  auto shuffled = ids;
  Rng rng(3);
  rng.shuffle(std::span<std::string>(shuffled));
  EXPECT_EQ(val_ids(ids, a), val_ids(shuffled, split(shuffled, 0.1, 42)));
  EXPECT_NE(val_ids(ids, a), val_ids(ids, split(ids, 0.1, 43)));
}

TEST(Split, DatasetOverloadUsesIds) {
  const auto ds = random_dataset(1, 30);
  std::vector<std::string> ids;
  for (const auto& r : ds.records) ids.push_back(r.id);
  EXPECT_EQ(split(ds, 0.2, 9).val, split(ids, 0.2, 9).val);
}

TEST(Stats, TwoValueOracle) {
  Dataset ds;
  ds.header.params_dim = 1;
  ds.header.embedding_dim = 2;
  ds.header.profile = {1, 0, 0, 0};
  ds.records = {make_record("a", 30, {0}), make_record("b", 30, {2})};
  const auto s = compute_stats(ds, {0, 1});
  EXPECT_EQ(s.mean, std::vector<double>{1.0});
  EXPECT_EQ(s.std, std::vector<double>{1.0});
  EXPECT_EQ(s.clamped, std::vector<std::uint8_t>{0});
}

TEST(Stats, ConstantDimensionIsClampedAndFlagged) {
  Dataset ds;
  ds.header.params_dim = 2;
  ds.header.embedding_dim = 2;
  ds.header.profile = {2, 0, 0, 0};
  ds.records = {make_record("a", 30, {5, 1}), make_record("b", 30, {5, 3}), make_record("c", 30, {5, 5})};
  const auto s = compute_stats(ds, {0, 1, 2});
  EXPECT_EQ(s.mean[0], 5.0);
  EXPECT_EQ(s.std[0], 1.0);
  EXPECT_EQ(s.clamped[0], 1);
  EXPECT_EQ(s.clamped[1], 0);
  EXPECT_NEAR(s.std[1], std::sqrt(8.0 / 3.0), 1e-15);
}

TEST(Stats, DependOnTrainRowsOnly) {
  auto ds = random_dataset(2, 50);
  const auto sp = split(ds, 0.2, 42);
  const auto before = compute_stats(ds, sp.train, true, true);
  for (auto v : sp.val) {
    for (auto& x : ds.records[v].params) x *= 100.0f;
    for (auto& x : ds.records[v].embedding) x = -x;
  }
  EXPECT_EQ(compute_stats(ds, sp.train, true, true), before);
}

TEST(Stats, InputStatisticsMatchDirectComputation) {
  const auto ds = random_dataset(3, 40);
  std::vector<std::size_t> rows{0, 3, 5, 7, 11, 13, 17, 19};
  const auto s = compute_stats(ds, rows, true, true);
  ASSERT_TRUE(s.standardizes_inputs());
  for (std::size_t d = 0; d < ds.header.embedding_dim; ++d) {
    std::vector<double> vals;
    for (auto r : rows) {
      double norm = 0;
      for (float v : ds.records[r].embedding) norm += double(v) * v;
      vals.push_back(ds.records[r].embedding[d] / std::sqrt(norm));
    }
    double m = 0;
    for (double v : vals) m += v / vals.size();
    double var = 0;
    for (double v : vals) var += (v - m) * (v - m) / vals.size();
    EXPECT_NEAR(s.input_mean[d], m, 1e-14);
    EXPECT_NEAR(s.input_std[d], std::sqrt(var), 1e-14);
  }
  EXPECT_FALSE(compute_stats(ds, rows).standardizes_inputs());
  EXPECT_THROW(compute_stats(ds, {}), DataError);
}

TEST(DatasetFile, RoundTripIsLossless) {
  auto ds = random_dataset(4, 25);
  ds.header.min_age = 21.5;
  test::TempDir dir("dsfile");
  write_dataset(ds, dir / "d.t2f");
  const auto back = read_dataset(dir / "d.t2f");
  EXPECT_EQ(back.header, ds.header);
  ASSERT_EQ(back.size(), ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    EXPECT_EQ(back.records[i].id, ds.records[i].id);
    EXPECT_EQ(back.records[i].embedding, ds.records[i].embedding);
    EXPECT_EQ(back.records[i].params, ds.records[i].params);
    EXPECT_EQ(back.records[i].estimated_age, ds.records[i].estimated_age);
    EXPECT_EQ(back.records[i].source, ds.records[i].source);
  }
  EXPECT_EQ(serialize_dataset(back), serialize_dataset(ds));
}

TEST(DatasetFile, IndexedAccessMatchesSequentialScan) {
  const auto ds = random_dataset(5, 60);
  const auto reader = DatasetReader(serialize_dataset(ds));
  // Scan oracle: walk records back to back from the start of the record area.
  io::Reader scan(reader.payload().first(reader.records_end()), "scan");
  scan.seek(reader.records_begin());
  std::vector<std::string> scanned;
  while (scan.pos() < reader.records_end()) scanned.push_back(reader.decode_record(scan).id);
  ASSERT_EQ(scanned.size(), ds.size());
  Rng rng(6);
  for (int k = 0; k < 100; ++k) {
    const auto i = rng.below(ds.size());
    EXPECT_EQ(reader.record(i).id, scanned[i]);
    EXPECT_EQ(reader.record(i).params, ds.records[i].params);
  }
  try {
    reader.record(60);
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("record index 60 out of range"), std::string::npos);
  }
}

TEST(DatasetFile, CorruptionAndTruncationAreDetected) {
  const auto bytes = serialize_dataset(random_dataset(7, 10));
  for (std::size_t pos : {std::size_t{10}, bytes.size() / 2, bytes.size() - 10}) {
    auto bad = bytes;
    bad[pos] ^= 0x01;
    try {
      DatasetReader r(bad);
      FAIL() << pos;
    } catch (const FormatError& e) {
      EXPECT_NE(std::string(e.what()).find("checksum"), std::string::npos);
    }
  }
  auto cut = bytes;
  cut.resize(3);
  EXPECT_THROW(DatasetReader{cut}, FormatError);
  auto wrong = bytes;
  wrong[0] = 'X';
  EXPECT_THROW(DatasetReader{wrong}, FormatError);
}

std::string fixture(const std::string& name) { return io::read_text(std::filesystem::path(T2F_FIXTURES) / name); }

TEST(Summary, GoldenMixed) {
  Dataset ds;
  ds.header = {3, 2, 3, {1, 1, 0, 1}, 18.0, kFlagPopulationStd};
  ds.records = {make_record("a", 20.0f, {1, -2, 0.5}), make_record("b", 35.5f, {3, 0, -1}, {0, 1}, Source::text),
                make_record("c", 39.0f, {-1, 4, 2})};
  EXPECT_EQ(summarize(ds).dump(2) + "\n", fixture("summary/mixed.json"));
}

TEST(Summary, GoldenSingle) {
  Dataset ds;
  ds.header = {1, 4, 3, {0, 0, 3, 0}, 18.0, kFlagPopulationStd};
  ds.records = {make_record("only", 18.0f, {0.25, 0.25, 0.25}, {1, 2, 3, 4}, Source::other)};
  EXPECT_EQ(summarize(ds).dump(2) + "\n", fixture("summary/single.json"));
}

TEST(Summary, GoldenEmpty) {
  Dataset ds;
  ds.header = {0, 8, 2, {2, 0, 0, 0}, 21.0, kFlagPopulationStd};
  EXPECT_EQ(summarize(ds).dump(2) + "\n", fixture("summary/empty.json"));
  EXPECT_NE(summary_text(summarize(ds)).find("beta: (empty)"), std::string::npos);
}

}  // namespace
}  // namespace t2f::data
