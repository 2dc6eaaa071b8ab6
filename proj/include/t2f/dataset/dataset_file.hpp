#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "t2f/common/binary_io.hpp"
#include "t2f/dataset/record.hpp"
#include "t2f/mm/types.hpp"

// Dataset file ("T2F1"), little-endian:
//   magic "T2F1", u16 version, u16 flags (bit 0: stats use population std)
//   u64 count, u32 E, u32 params_dim, u32 x4 dims profile, f64 min_age
//   record block, per record:
//     u32 id length, id bytes, u8 source, f32 age, f32 embedding[E], f32 params[params_dim]
//   index block: u64 absolute offset of each record
//   u64 offset of the index block
//   u32 CRC32 of everything above

namespace t2f::data {

inline constexpr char kDatasetMagic[4] = {'T', '2', 'F', '1'};
inline constexpr std::uint16_t kDatasetVersion = 1;
inline constexpr std::uint16_t kFlagPopulationStd = 1;

struct DatasetHeader {
  std::uint64_t count = 0;
  std::uint32_t embedding_dim = 0;
  std::uint32_t params_dim = 0;
  mm::DimsProfile profile;
  double min_age = 18.0;
  std::uint16_t flags = kFlagPopulationStd;

  friend bool operator==(const DatasetHeader&, const DatasetHeader&) = default;
};

struct Dataset {
  DatasetHeader header;
  std::vector<Record> records;

  std::size_t size() const { return records.size(); }
};

inline std::vector<std::uint8_t> serialize_dataset(const Dataset& ds) {
  const auto& h = ds.header;
  if (h.count != ds.records.size()) throw DataError("dataset header count does not match records");
  io::Writer out;
  out.put_bytes(std::string_view(kDatasetMagic, 4));
  out.put(kDatasetVersion);
  out.put(h.flags);
  out.put(h.count);
  out.put(h.embedding_dim);
  out.put(h.params_dim);
  for (auto g : h.profile.groups()) out.put(g);
  out.put(h.min_age);
  std::vector<std::uint64_t> offsets;
  offsets.reserve(ds.records.size());
  for (const auto& r : ds.records) {
    if (r.embedding.size() != h.embedding_dim || r.params.size() != h.params_dim)
      throw DataError("record '" + r.id + "' does not match the declared dimensions");
    offsets.push_back(out.size());
    out.put_string(r.id);
    out.put(static_cast<std::uint8_t>(r.source));
    out.put(r.estimated_age);
    out.put_all(std::span<const float>(r.embedding));
    out.put_all(std::span<const float>(r.params));
  }
  const std::uint64_t index_offset = out.size();
  out.put_all(std::span<const std::uint64_t>(offsets));
  out.put(index_offset);
  out.append_crc();
  return std::move(out.bytes());
}

inline void write_dataset(const Dataset& ds, const std::filesystem::path& path) {
  io::write_file(path, serialize_dataset(ds));
}

// Random access over a dataset file held in memory. Construction checks the
// CRC and reads the header and index; record(i) decodes one record in O(1).
class DatasetReader {
 public:
  explicit DatasetReader(std::vector<std::uint8_t> bytes) : bytes_(std::move(bytes)) {
    const std::string what = "dataset file";
    if (bytes_.size() < 4 || std::string_view(reinterpret_cast<const char*>(bytes_.data()), 4) !=
                                 std::string_view(kDatasetMagic, 4))
      throw FormatError("dataset file: bad magic (expected T2F1)");
    payload_ = io::verified_payload(bytes_, what);
    io::Reader in(payload_, what);
    in.seek(4);
    const auto version = in.get<std::uint16_t>();
    if (version != kDatasetVersion)
      throw FormatError("dataset file: unsupported version " + std::to_string(version));
    header_.flags = in.get<std::uint16_t>();
    header_.count = in.get<std::uint64_t>();
    header_.embedding_dim = in.get<std::uint32_t>();
    header_.params_dim = in.get<std::uint32_t>();
    header_.profile.shape = in.get<std::uint32_t>();
    header_.profile.expression = in.get<std::uint32_t>();
    header_.profile.pose = in.get<std::uint32_t>();
    header_.profile.detail = in.get<std::uint32_t>();
    header_.min_age = in.get<double>();
    records_start_ = in.pos();
    if (header_.profile.total() != header_.params_dim)
      throw FormatError("dataset file: params_dim does not match dims profile");

    if (payload_.size() < records_start_ + 8) throw FormatError("unexpected end of dataset file");
    in.seek(payload_.size() - 8);
    index_offset_ = in.get<std::uint64_t>();
    if (index_offset_ < records_start_ || index_offset_ + 8 * header_.count + 8 != payload_.size())
      throw FormatError("dataset file: index block does not match record count");
    offsets_.resize(header_.count);
    in.seek(index_offset_);
    in.get_all(std::span<std::uint64_t>(offsets_));
    for (auto off : offsets_)
      if (off < records_start_ || off >= index_offset_) throw FormatError("dataset file: index offset out of range");
  }

  DatasetReader(const DatasetReader&) = delete;
  DatasetReader& operator=(const DatasetReader&) = delete;
  // Moving a vector keeps its buffer, so payload_ stays valid.
  DatasetReader(DatasetReader&&) = default;
  DatasetReader& operator=(DatasetReader&&) = default;

  static DatasetReader open(const std::filesystem::path& path) { return DatasetReader(io::read_file(path)); }

  const DatasetHeader& header() const { return header_; }
  std::size_t size() const { return offsets_.size(); }
  const std::vector<std::uint64_t>& offsets() const { return offsets_; }
  std::uint64_t records_begin() const { return records_start_; }
  std::uint64_t records_end() const { return index_offset_; }

  Record record(std::size_t i) const {
    if (i >= offsets_.size())
      throw DataError("record index " + std::to_string(i) + " out of range (count " +
                      std::to_string(offsets_.size()) + ")");
    io::Reader in(payload_.first(index_offset_), "dataset file");
    in.seek(offsets_[i]);
    return decode_record(in);
  }

  // Decodes the record starting at the reader's position.
  Record decode_record(io::Reader& in) const {
    Record r;
    r.id = in.get_string();
    const auto src = in.get<std::uint8_t>();
    if (src > 2) throw FormatError("dataset file: unknown source tag");
    r.source = static_cast<Source>(src);
    r.estimated_age = in.get<float>();
    r.embedding.resize(header_.embedding_dim);
    r.params.resize(header_.params_dim);
    in.get_all(std::span<float>(r.embedding));
    in.get_all(std::span<float>(r.params));
    return r;
  }

  Dataset read_all() const {
    Dataset ds{header_, {}};
    ds.records.reserve(size());
    for (std::size_t i = 0; i < size(); ++i) ds.records.push_back(record(i));
    return ds;
  }

  std::span<const std::uint8_t> payload() const { return payload_; }

 private:
  std::vector<std::uint8_t> bytes_;
  std::span<const std::uint8_t> payload_;
  DatasetHeader header_;
  std::uint64_t records_start_ = 0;
  std::uint64_t index_offset_ = 0;
  std::vector<std::uint64_t> offsets_;
};

inline Dataset read_dataset(const std::filesystem::path& path) { return DatasetReader::open(path).read_all(); }

}  // namespace t2f::data
