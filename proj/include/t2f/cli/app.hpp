#pragma once

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <chrono>
#include <fstream>
#include <iostream>
#include <map>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "t2f/dataset/analysis.hpp"
#include "t2f/dataset/ingest.hpp"
#include "t2f/dataset/split.hpp"
#include "t2f/mm/asset_io.hpp"
#include "t2f/pipeline/inference.hpp"
#include "t2f/regressor/pipeline.hpp"
#include "t2f/regressor/report_json.hpp"
#include "t2f/service/server.hpp"

// `t2f <subcommand> [--flags]`. Exit codes: 0 success, 1 usage, 2 data error.

namespace t2f::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;

namespace detail {

using ojson = nlohmann::ordered_json;

inline nlohmann::json read_json_file(const std::string& path) {
  try {
    return nlohmann::json::parse(io::read_text(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(path + ": invalid JSON (" + e.what() + ")");
  }
}

inline void write_or_print(const std::optional<std::string>& path, const std::string& text, std::ostream& out) {
  if (path) io::write_text(*path, text);
  else out << text;
}

inline void emit(std::ostream& out, const ojson& j) { out << j.dump(2) << "\n"; }

inline ojson split_json(const data::Dataset& ds, const data::Split& s, double fraction, std::uint64_t seed) {
  ojson j;
  j["seed"] = seed;
  j["val_fraction"] = fraction;
  j["train"] = ojson::array();
  j["val"] = ojson::array();
  for (auto i : s.train) j["train"].push_back(ds.records[i].id);
  for (auto i : s.val) j["val"].push_back(ds.records[i].id);
  return j;
}

inline data::Split split_from_json(const data::Dataset& ds, const nlohmann::json& j) {
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < ds.size(); ++i) index[ds.records[i].id] = i;
  data::Split s;
  for (const auto& [key, rows] : {std::pair{"train", &s.train}, std::pair{"val", &s.val}}) {
    if (!j.contains(key) || !j[key].is_array()) throw FormatError(std::string("split file needs a '") + key + "' list");
    for (const auto& id : j[key]) {
      const auto it = index.find(id.get<std::string>());
      if (it == index.end()) throw DataError("split file names unknown record '" + id.get<std::string>() + "'");
      rows->push_back(it->second);
    }
  }
  return s;
}

inline data::Split resolve_split(const data::Dataset& ds, const std::optional<std::string>& split_file,
                                 double fraction, std::uint64_t seed) {
  return split_file ? split_from_json(ds, read_json_file(*split_file)) : data::split(ds, fraction, seed);
}

inline reg::GroupWeights parse_group_weights(const std::string& s) {
  reg::GroupWeights gw{};
  std::stringstream in(s);
  std::string item;
  std::size_t k = 0;
  while (std::getline(in, item, ',')) {
    if (k >= 4) throw DataError("--group-weights takes 4 comma-separated numbers");
    try {
      gw[k++] = std::stod(item);
    } catch (const std::logic_error&) {
      throw DataError("--group-weights: '" + item + "' is not a number");
    }
  }
  if (k != 4) throw DataError("--group-weights takes 4 comma-separated numbers");
  return gw;
}

inline ojson group_json(const std::array<double, 4>& v) {
  ojson j;
  for (std::size_t g = 0; g < 4; ++g) j[mm::kGroupNames[g]] = v[g];
  return j;
}

// CLI11 reads config files at the top level only; accept `--config` anywhere.
inline std::vector<std::string> hoist_config(int argc, const char* const* argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  std::vector<std::string> front, rest;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) {
      front.push_back(args[i]);
      front.push_back(args[++i]);
    } else if (args[i].rfind("--config=", 0) == 0) {
      front.push_back(args[i]);
    } else {
      rest.push_back(args[i]);
    }
  }
  front.insert(front.end(), rest.begin(), rest.end());
  std::reverse(front.begin(), front.end());  // CLI11 consumes a reversed vector
  return front;
}

}  // namespace detail

inline int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  using detail::ojson;
  CLI::App app("t2f: text/image embedding to 3D face parameters and meshes", "t2f");
  app.require_subcommand(1);
  app.set_config("--config", "", "TOML file; keys under [subcommand] sections, flags override it");
  app.allow_config_extras(CLI::config_extras_mode::error);
  app.set_help_all_flag("--help-all", "Show help for all subcommands");

  bool json = false;
  std::uint64_t seed = 42;
  auto add_json = [&](CLI::App* s) { s->add_flag("--json", json, "Machine-readable output"); };
  auto add_seed = [&](CLI::App* s) { s->add_option("--seed", seed, "Seed for every random choice")->capture_default_str(); };

  // ingest
  std::string in_path, out_path;
  double min_age = 18.0;
  mm::DimsProfile profile;
  auto* ingest = app.add_subcommand("ingest", "Filter JSONL records into a dataset file");
  ingest->add_option("--input", in_path, "JSON-lines records")->required()->check(CLI::ExistingFile);
  ingest->add_option("--out", out_path, "Dataset file to write")->required();
  ingest->add_option("--min-age", min_age, "Keep records with estimated age >= this")->capture_default_str();
  ingest->add_option("--shape", profile.shape, "beta length")->capture_default_str();
  ingest->add_option("--expression", profile.expression, "psi length")->capture_default_str();
  ingest->add_option("--pose", profile.pose, "theta length")->capture_default_str();
  ingest->add_option("--detail", profile.detail, "delta length")->capture_default_str();
  add_json(ingest);

  // split
  std::string dataset_path;
  std::optional<std::string> out_opt;
  double val_fraction = 0.1;
  auto* split_cmd = app.add_subcommand("split", "Deterministic train/validation split by record id");
  split_cmd->add_option("--dataset", dataset_path, "Dataset file")->required()->check(CLI::ExistingFile);
  split_cmd->add_option("--val-fraction", val_fraction, "Validation share")->capture_default_str();
  split_cmd->add_option("--out", out_opt, "Split JSON to write");
  add_seed(split_cmd);
  add_json(split_cmd);

  // train
  reg::TrainConfig tc;
  std::optional<std::string> arch, init_path, report_path, split_path;
  std::string group_weights = "1,1,1,1";
  bool no_normalize = false, no_std_inputs = false, no_std_targets = false, quiet = false;
  auto* train = app.add_subcommand("train", "Train the regressor");
  train->add_option("--dataset", dataset_path, "Dataset file")->required()->check(CLI::ExistingFile);
  train->add_option("--out", out_path, "Weights file to write")->required();
  train->add_option("--arch", arch, "Layer widths, e.g. 768-1024-1024-512-284 (default E-1024-1024-512-total)");
  train->add_option("--lr", tc.learning_rate, "Adam learning rate")->capture_default_str();
  train->add_option("--batch", tc.batch_size, "Mini-batch size")->capture_default_str();
  train->add_option("--epochs", tc.max_epochs, "Maximum epochs")->capture_default_str();
  train->add_option("--patience", tc.patience, "Early-stopping patience, 0 disables")->capture_default_str();
  train->add_option("--val-fraction", val_fraction, "Validation share")->capture_default_str();
  train->add_option("--split", split_path, "Split JSON from `t2f split` (overrides --val-fraction)");
  train->add_option("--group-weights", group_weights, "Loss weights for beta,psi,theta,delta")->capture_default_str();
  train->add_option("--init", init_path, "Continue from these weights (same architecture)");
  train->add_option("--report", report_path, "Training report JSON to write");
  train->add_flag("--no-normalize-embeddings", no_normalize, "Skip L2 normalization of embeddings");
  train->add_flag("--no-standardize-inputs", no_std_inputs, "Skip per-dimension input standardization");
  train->add_flag("--no-standardize-targets", no_std_targets, "Skip per-dimension target standardization");
  train->add_flag("--quiet", quiet, "No per-epoch progress on stderr");
  add_seed(train);
  add_json(train);

  // infer
  std::optional<std::string> embedding_path, text, embed_url;
  std::string weights_path;
  auto* infer = app.add_subcommand("infer", "Regress parameters from an embedding");
  auto* emb_opt = infer->add_option("--embedding", embedding_path, "JSON array or {\"embedding\": [...]}");
  auto* text_opt = infer->add_option("--text", text, "Text to embed through the embedder service");
  emb_opt->excludes(text_opt);
  infer->add_option("--embed-url", embed_url, "Embedder base URL (default $EMBED_SERVICE_URL)");
  infer->add_option("--weights", weights_path, "Weights file")->required()->check(CLI::ExistingFile);
  infer->add_option("--out", out_opt, "Params JSON to write (default stdout)");
  add_json(infer);

  // decode
  std::string params_path, model_path, format = "obj";
  std::optional<std::string> detail_path, texture_path, pose_joints;
  auto* decode = app.add_subcommand("decode", "Decode parameters to a mesh");
  decode->add_option("--params", params_path, "Params JSON")->required()->check(CLI::ExistingFile);
  decode->add_option("--model", model_path, "Model asset (.mfa)")->required()->check(CLI::ExistingFile);
  decode->add_option("--out", out_opt, "Mesh file to write (default stdout)");
  decode->add_option("--format", format, "obj or json")->capture_default_str()->check(CLI::IsMember({"obj", "json"}));
  decode->add_option("--detail", detail_path, "Displacement map JSON {width,height,scale,samples}");
  decode->add_option("--texture", texture_path, "Texture image bound through an MTL (OBJ output only)");
  decode->add_option("--pose-joints", pose_joints, "Model joints receiving a reduced pose, e.g. 0,1");
  add_json(decode);

  // export-obj
  std::string mesh_path;
  auto* export_cmd = app.add_subcommand("export-obj", "Write a mesh JSON as OBJ with optional texture");
  export_cmd->add_option("--mesh", mesh_path, "Mesh JSON")->required()->check(CLI::ExistingFile);
  export_cmd->add_option("--out", out_path, "OBJ file to write")->required();
  export_cmd->add_option("--texture", texture_path, "Texture image");
  add_json(export_cmd);

  // eval
  bool all_rows = false;
  auto* eval = app.add_subcommand("eval", "Per-group validation MSE for weights on a dataset");
  eval->add_option("--dataset", dataset_path, "Dataset file")->required()->check(CLI::ExistingFile);
  eval->add_option("--weights", weights_path, "Weights file")->required()->check(CLI::ExistingFile);
  eval->add_option("--val-fraction", val_fraction, "Validation share")->capture_default_str();
  eval->add_option("--split", split_path, "Split JSON (overrides --val-fraction)");
  eval->add_flag("--all", all_rows, "Evaluate every record instead of the validation split");
  add_seed(eval);
  add_json(eval);

  // serve
  std::optional<std::string> serve_model, serve_weights;
  std::string host = "0.0.0.0";
  std::optional<int> port;
  bool normalize_embeddings = false;
  auto* serve = app.add_subcommand("serve", "Run the HTTP API");
  serve->add_option("--model", serve_model, "Model asset (default $MODEL_ASSET)");
  serve->add_option("--weights", serve_weights, "Weights file (default $WEIGHTS)");
  serve->add_option("--host", host, "Listen address")->capture_default_str();
  serve->add_option("--port", port, "Listen port (default $PORT or 8080)");
  serve->add_option("--embed-url", embed_url, "Embedder base URL (default $EMBED_SERVICE_URL)");
  serve->add_flag("--normalize-embeddings", normalize_embeddings, "L2-normalize /v1/embed-text output");
  serve->add_option("--pose-joints", pose_joints, "Model joints receiving a reduced pose");
  add_json(serve);

  try {
    app.parse(detail::hoist_config(argc, argv));
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (ingest->parsed()) {
      std::ifstream in(in_path);
      const auto result = data::ingest(data::read_jsonl(in), {min_age, profile});
      data::write_dataset(result.dataset, out_path);
      for (const auto& r : result.rejected) err << r << "\n";
      auto summary = data::summarize(result.dataset);
      if (json) {
        ojson j;
        j["out"] = out_path;
        j["below_min_age"] = result.below_min_age;
        j["rejected"] = result.rejected.size();
        j["summary"] = summary;
        detail::emit(out, j);
      } else {
        out << "wrote " << out_path << "\n"
            << "dropped " << result.below_min_age << " below age " << min_age << ", rejected "
            << result.rejected.size() << " non-finite\n"
            << data::summary_text(summary);
      }
    } else if (split_cmd->parsed()) {
      const auto ds = data::read_dataset(dataset_path);
      const auto s = data::split(ds, val_fraction, seed);
      const auto j = detail::split_json(ds, s, val_fraction, seed);
      if (out_opt) io::write_text(*out_opt, j.dump(2) + "\n");
      if (json) detail::emit(out, {{"train", s.train.size()}, {"val", s.val.size()}, {"seed", seed}});
      else if (out_opt) out << "train " << s.train.size() << ", val " << s.val.size() << " -> " << *out_opt << "\n";
      else out << j.dump(2) << "\n";
    } else if (train->parsed()) {
      const auto ds = data::read_dataset(dataset_path);
      tc.seed = seed;
      tc.validation_fraction = val_fraction;
      tc.group_weights = detail::parse_group_weights(group_weights);
      tc.normalize_embeddings = !no_normalize;
      tc.standardize_inputs = !no_std_inputs;
      tc.standardize_targets = !no_std_targets;
      tc.validate();
      const auto s = detail::resolve_split(ds, split_path, val_fraction, seed);
      const std::string architecture = arch ? *arch : reg::default_architecture(ds.header.embedding_dim, ds.header.profile);
      std::optional<reg::MlpWeights> init;
      if (init_path) {
        const auto expected = reg::MlpWeights::from_architecture(architecture, ds.header.profile).signature();
        init = reg::load_weights_for_finetune(*init_path, expected).weights;
      }
      reg::TrainHooks hooks;
      if (!quiet && !json)
        hooks.on_epoch = [&err](std::size_t epoch, double tl, double vl) {
          err << "epoch " << epoch << "  train " << tl << "  val " << vl << "\n";
        };
      const auto trained = reg::train_regressor(ds, s, architecture, tc, init, hooks);
      reg::save_weights(trained.regressor.weights, trained.regressor.stats, out_path);
      const auto report = reg::report_json(trained.report);
      if (report_path) io::write_text(*report_path, report.dump(2) + "\n");
      if (json) {
        ojson j;
        j["out"] = out_path;
        j["signature"] = trained.regressor.weights.signature();
        j["train_size"] = s.train.size();
        j["val_size"] = s.val.size();
        j["wall_seconds"] = trained.report.wall_seconds;
        j["report"] = report;
        detail::emit(out, j);
      } else {
        out << "wrote " << out_path << " (" << trained.regressor.weights.signature() << ")\n"
            << "epochs " << trained.report.val_loss.size() << ", best " << trained.report.best_epoch << " val loss "
            << trained.report.val_loss[trained.report.best_epoch]
            << (trained.report.early_stopped ? " (early stop)" : "") << "\n";
      }
    } else if (infer->parsed()) {
      const auto r = reg::load_weights(weights_path);
      Eigen::VectorXd x;
      if (embedding_path) {
        x = pipeline::embedding_from_json(detail::read_json_file(*embedding_path));
      } else if (text) {
        std::string url = embed_url.value_or("");
        if (url.empty())
          if (const char* env = std::getenv("EMBED_SERVICE_URL")) url = env;
        if (url.empty()) throw DataError("--text needs --embed-url or EMBED_SERVICE_URL");
        service::EmbedClientConfig cfg{url};
        cfg.expected_dim = r.weights.input_dim();
        const auto v = service::EmbedClient(cfg).embed_text(*text);
        x = Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
      } else {
        throw CLI::RequiredError("--embedding or --text");
      }
      const auto params = pipeline::infer_text(r, x);
      if (out_opt) {
        io::write_text(*out_opt, params);
        if (json) detail::emit(out, {{"out", *out_opt}, {"signature", r.weights.signature()}});
        else out << "wrote " << *out_opt << "\n";
      } else {
        out << params;
      }
    } else if (decode->parsed()) {
      const auto model = mm::load_model_asset(model_path);
      const auto params = meshio::read_params_json(params_path);
      std::optional<mm::DetailMap> detail_map;
      if (detail_path) detail_map = meshio::detail_from_json(detail::read_json_file(*detail_path));
      const auto joints = pose_joints ? pipeline::parse_joint_list(*pose_joints) : std::vector<std::uint32_t>{};
      const auto mesh = pipeline::decode(model, params, joints, detail_map);
      const auto fmt = pipeline::parse_mesh_format(format);
      if (texture_path) {
        if (fmt != pipeline::MeshFormat::obj || !out_opt) throw DataError("--texture needs OBJ output to a file");
        meshio::export_obj(mesh, *out_opt, std::filesystem::path(*texture_path));
      } else {
        detail::write_or_print(out_opt, pipeline::mesh_text(mesh, fmt), out);
      }
      if (out_opt) {
        if (json)
          detail::emit(out, {{"out", *out_opt}, {"vertices", mesh.vertices.rows()}, {"faces", mesh.faces.size()}});
        else out << "wrote " << *out_opt << " (" << mesh.vertices.rows() << " vertices)\n";
      }
    } else if (export_cmd->parsed()) {
      auto mesh = meshio::mesh_from_json(detail::read_json_file(mesh_path));
      std::optional<std::filesystem::path> texture;
      if (texture_path) texture = *texture_path;
      else if (mesh.texture_ref) texture = std::filesystem::path(mesh_path).parent_path() / *mesh.texture_ref;
      const auto files = meshio::export_obj(mesh, out_path, texture);
      if (json) {
        ojson j{{"obj", files.obj.string()}};
        j["mtl"] = files.mtl ? ojson(files.mtl->string()) : ojson();
        j["texture"] = files.texture ? ojson(files.texture->string()) : ojson();
        detail::emit(out, j);
      } else {
        out << "wrote " << files.obj.string() << (files.mtl ? " + " + files.mtl->string() : "") << "\n";
      }
    } else if (eval->parsed()) {
      const auto ds = data::read_dataset(dataset_path);
      const auto r = reg::load_weights(weights_path);
      std::vector<std::size_t> rows;
      if (all_rows) {
        rows.resize(ds.size());
        std::iota(rows.begin(), rows.end(), std::size_t{0});
      } else {
        rows = detail::resolve_split(ds, split_path, val_fraction, seed).val;
      }
      const auto mse = reg::evaluate_group_mse(r, ds, rows);
      double total = 0.0;
      const auto groups = ds.header.profile.groups();
      for (std::size_t g = 0; g < 4; ++g) total += mse[g] * groups[g];
      total /= double(ds.header.profile.total());
      if (json) {
        detail::emit(out, {{"rows", rows.size()}, {"group_mse", detail::group_json(mse)}, {"mse", total}});
      } else {
        out << "rows " << rows.size() << "\n";
        for (std::size_t g = 0; g < 4; ++g) out << mm::kGroupNames[g] << " mse " << mse[g] << "\n";
        out << "all mse " << total << "\n";
      }
    } else if (serve->parsed()) {
      auto cfg = service::ServiceConfig::from_env();
      if (serve_model) cfg.model_path = *serve_model;
      if (serve_weights) cfg.weights_path = *serve_weights;
      if (embed_url) cfg.embedder = service::EmbedClientConfig{*embed_url};
      if (normalize_embeddings) cfg.normalize_embeddings = true;
      if (pose_joints) cfg.pose_joints = pipeline::parse_joint_list(*pose_joints);
      int listen_port = 8080;
      if (port) listen_port = *port;
      else if (const char* env = std::getenv("PORT"); env && *env) listen_port = std::stoi(env);
      service::Service svc(cfg);
      service::HttpServer http(svc);
      const int bound = http.bind(host, listen_port);
      if (json) detail::emit(out, {{"host", host}, {"port", bound}});
      else out << "listening on " << host << ":" << bound << "\n";
      out.flush();
      http.listen();
    }
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kExitOk : kExitUsage;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const nlohmann::json::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitOk;
}

}  // namespace t2f::cli
