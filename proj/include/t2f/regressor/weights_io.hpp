#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "t2f/common/binary_io.hpp"
#include "t2f/dataset/stats.hpp"
#include "t2f/regressor/mlp.hpp"

// Weights file ("T2FW"), little-endian:
//   magic "T2FW", u16 version, u16 reserved
//   str  signature                  (u32 length + bytes)
//   u32  layer count, then per layer u32 in, u32 out, u8 activation
//   u32 x4 dims profile (S, Ex, pose, D)
//   u8   has_stats; if set: u8 normalize_embeddings, u32 dim,
//        f64 mean[dim], f64 std[dim], u8 clamped[dim],
//        u32 input_dim (0 = inputs not standardized), f64 input_mean, f64 input_std
//   u64  parameter count, f64 parameters
//   u32  CRC32 of everything above

namespace t2f::reg {

inline constexpr char kWeightsMagic[4] = {'T', '2', 'F', 'W'};
inline constexpr std::uint16_t kWeightsVersion = 1;

struct Regressor {
  MlpWeights weights;
  std::optional<data::NormStats> stats;
};

inline std::vector<std::uint8_t> serialize_weights(const MlpWeights& w, const std::optional<data::NormStats>& stats) {
  io::Writer out;
  out.put_bytes(std::string_view(kWeightsMagic, 4));
  out.put(kWeightsVersion);
  out.put(std::uint16_t{0});
  out.put_string(w.signature());
  out.put(static_cast<std::uint32_t>(w.layers().size()));
  for (const auto& l : w.layers()) {
    out.put(l.in);
    out.put(l.out);
    out.put(static_cast<std::uint8_t>(l.activation));
  }
  for (auto g : w.profile().groups()) out.put(g);
  out.put(static_cast<std::uint8_t>(stats.has_value()));
  if (stats) {
    if (stats->dim() != w.output_dim()) throw DimensionError("stats width does not match network output");
    out.put(static_cast<std::uint8_t>(stats->normalize_embeddings));
    out.put(static_cast<std::uint32_t>(stats->dim()));
    out.put_all(std::span<const double>(stats->mean));
    out.put_all(std::span<const double>(stats->std));
    out.put_all(std::span<const std::uint8_t>(stats->clamped));
    if (stats->standardizes_inputs() && stats->input_mean.size() != w.input_dim())
      throw DimensionError("input stats width does not match network input");
    out.put(static_cast<std::uint32_t>(stats->input_mean.size()));
    out.put_all(std::span<const double>(stats->input_mean));
    out.put_all(std::span<const double>(stats->input_std));
  }
  out.put(static_cast<std::uint64_t>(w.param_count()));
  out.put_all(w.params());
  out.append_crc();
  return std::move(out.bytes());
}

inline Regressor parse_weights(std::span<const std::uint8_t> bytes) {
  const std::string what = "weights file";
  if (bytes.size() < 8 || std::string_view(reinterpret_cast<const char*>(bytes.data()), 4) !=
                              std::string_view(kWeightsMagic, 4))
    throw FormatError("weights file: bad magic (expected T2FW)");
  io::Reader in(io::verified_payload(bytes, what), what);
  in.seek(4);
  const auto version = in.get<std::uint16_t>();
  if (version != kWeightsVersion)
    throw FormatError("weights file: unsupported version " + std::to_string(version) + " (expected " +
                      std::to_string(kWeightsVersion) + ")");
  in.get<std::uint16_t>();
  const std::string signature = in.get_string();
  const auto layer_count = in.get<std::uint32_t>();
  if (layer_count == 0 || layer_count > 4096) throw FormatError("weights file: bad layer count");
  std::vector<LayerShape> layers(layer_count);
  for (auto& l : layers) {
    l.in = in.get<std::uint32_t>();
    l.out = in.get<std::uint32_t>();
    const auto act = in.get<std::uint8_t>();
    if (act > 1) throw FormatError("weights file: unknown activation tag");
    l.activation = static_cast<Activation>(act);
  }
  mm::DimsProfile profile;
  profile.shape = in.get<std::uint32_t>();
  profile.expression = in.get<std::uint32_t>();
  profile.pose = in.get<std::uint32_t>();
  profile.detail = in.get<std::uint32_t>();
  MlpWeights w(std::move(layers), profile);
  if (w.signature() != signature)
    throw FormatError("weights file: stored signature '" + signature + "' does not match layer table");
  std::optional<data::NormStats> stats;
  if (in.get<std::uint8_t>() != 0) {
    data::NormStats s;
    s.normalize_embeddings = in.get<std::uint8_t>() != 0;
    const auto dim = in.get<std::uint32_t>();
    if (dim != w.output_dim()) throw FormatError("weights file: stats width does not match network output");
    s.mean.resize(dim);
    s.std.resize(dim);
    s.clamped.resize(dim);
    in.get_all(std::span<double>(s.mean));
    in.get_all(std::span<double>(s.std));
    in.get_all(std::span<std::uint8_t>(s.clamped));
    const auto input_dim = in.get<std::uint32_t>();
    if (input_dim != 0 && input_dim != w.input_dim())
      throw FormatError("weights file: input stats width does not match network input");
    s.input_mean.resize(input_dim);
    s.input_std.resize(input_dim);
    in.get_all(std::span<double>(s.input_mean));
    in.get_all(std::span<double>(s.input_std));
    stats = std::move(s);
  }
  const auto count = in.get<std::uint64_t>();
  if (count != w.param_count()) throw FormatError("weights file: parameter count does not match architecture");
  in.get_all(w.params());
  if (in.remaining() != 0) throw FormatError("weights file: trailing bytes before checksum");
  return {std::move(w), std::move(stats)};
}

inline void save_weights(const MlpWeights& w, const std::optional<data::NormStats>& stats,
                         const std::filesystem::path& path) {
  io::write_file(path, serialize_weights(w, stats));
}

inline Regressor load_weights(const std::filesystem::path& path) {
  return parse_weights(io::read_file(path));
}

// Loads weights to continue training a network of a known architecture.
inline Regressor load_weights_for_finetune(const std::filesystem::path& path,
                                           const std::string& expected_signature) {
  auto r = load_weights(path);
  if (r.weights.signature() != expected_signature)
    throw FormatError("architecture signature mismatch: file has '" + r.weights.signature() +
                      "', expected '" + expected_signature + "'");
  return r;
}

}  // namespace t2f::reg
