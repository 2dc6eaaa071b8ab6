#pragma once

#include <nlohmann/json.hpp>

#include <cstdlib>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>

#include "t2f/common/format.hpp"
#include "t2f/mm/asset_io.hpp"
#include "t2f/pipeline/inference.hpp"
#include "t2f/service/embed_client.hpp"

// After Eigen: <resolv.h> (pulled in by httplib) defines a `_res` macro.
#include <httplib.h>

namespace t2f::service {

struct ServiceConfig {
  std::optional<std::filesystem::path> model_path;
  std::optional<std::filesystem::path> weights_path;
  std::optional<EmbedClientConfig> embedder;
  bool normalize_embeddings = false;  // applies to /v1/embed-text output
  std::vector<std::uint32_t> pose_joints;

  // MODEL_ASSET, WEIGHTS, EMBED_SERVICE_URL, NORMALIZE_EMBEDDINGS, POSE_JOINTS.
  static ServiceConfig from_env() {
    ServiceConfig c;
    if (const char* v = std::getenv("MODEL_ASSET"); v && *v) c.model_path = v;
    if (const char* v = std::getenv("WEIGHTS"); v && *v) c.weights_path = v;
    if (const char* v = std::getenv("EMBED_SERVICE_URL"); v && *v) c.embedder = EmbedClientConfig{v};
    if (const char* v = std::getenv("NORMALIZE_EMBEDDINGS"); v && *v) c.normalize_embeddings = env_flag(v);
    if (const char* v = std::getenv("POSE_JOINTS"); v && *v) c.pose_joints = pipeline::parse_joint_list(v);
    return c;
  }

  static bool env_flag(std::string v) {
    for (auto& ch : v) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    return v == "1" || v == "true" || v == "yes" || v == "on";
  }
};

// Immutable view of everything a request may read. Replaced wholesale on reload.
struct Snapshot {
  std::shared_ptr<const mm::MorphableModel> model;
  std::filesystem::path model_path;
  std::string model_checksum;
  std::shared_ptr<const reg::Regressor> weights;
  std::filesystem::path weights_path;
  std::string weights_signature;
  std::string weights_checksum;
};

struct Reply {
  Reply(int status_ = 200, std::string body_ = {}, std::string content_type_ = "application/json")
      : status(status_), body(std::move(body_)), content_type(std::move(content_type_)) {}

  int status;
  std::string body;
  std::string content_type;
  std::map<std::string, std::string> headers;
};

inline Reply error_reply(int status, const std::string& error, const std::string& detail) {
  return {status, nlohmann::json{{"error", error}, {"detail", detail}}.dump() + "\n", "application/json"};
}

class Service {
 public:
  explicit Service(ServiceConfig config) : config_(std::move(config)), snapshot_(std::make_shared<Snapshot>()) {
    if (config_.embedder) embedder_.emplace(*config_.embedder);
    load(config_.model_path, config_.weights_path);
  }

  std::shared_ptr<const Snapshot> snapshot() const {
    std::lock_guard lock(mutex_);
    return snapshot_;
  }

  // Loads whichever paths are given and swaps in a new snapshot. Nothing
  // changes if any load fails.
  void load(const std::optional<std::filesystem::path>& model_path,
            const std::optional<std::filesystem::path>& weights_path) {
    std::lock_guard reload_lock(reload_mutex_);
    auto next = std::make_shared<Snapshot>(*snapshot());
    if (model_path) {
      const auto bytes = io::read_file(*model_path);
      next->model = std::make_shared<const mm::MorphableModel>(mm::parse_model_asset(bytes));
      next->model_path = *model_path;
      next->model_checksum = pipeline::checksum_hex(bytes);
    }
    if (weights_path) {
      const auto bytes = io::read_file(*weights_path);
      auto r = std::make_shared<const reg::Regressor>(reg::parse_weights(bytes));
      next->weights_signature = r->weights.signature();
      next->weights = std::move(r);
      next->weights_path = *weights_path;
      next->weights_checksum = pipeline::checksum_hex(bytes);
    }
    std::lock_guard lock(mutex_);
    snapshot_ = std::move(next);
  }

  Reply info() const {
    const auto snap = snapshot();
    nlohmann::ordered_json j;
    if (snap->model) {
      const auto d = snap->model->dims();
      j["model"] = {{"path", snap->model_path.string()}, {"checksum", snap->model_checksum},
                    {"N", d.vertices}, {"F", d.faces}, {"S", d.shape}, {"Ex", d.expression}, {"J", d.joints},
                    {"P", d.pose_correctives},
                    {"uv_count", d.uv_count}};
    } else {
      j["model"] = nullptr;
    }
    if (snap->weights) {
      const auto& w = snap->weights->weights;
      const auto& p = w.profile();
      j["weights"] = {{"path", snap->weights_path.string()},
                      {"signature", snap->weights_signature},
                      {"checksum", snap->weights_checksum},
                      {"input_dim", w.input_dim()},
                      {"output_dim", w.output_dim()},
                      {"profile", {{"beta", p.shape}, {"psi", p.expression}, {"theta", p.pose}, {"delta", p.detail}}}};
    } else {
      j["weights"] = nullptr;
    }
    j["embedder"] = {{"configured", embedder_.has_value()},
                     {"url", embedder_ ? nlohmann::ordered_json(embedder_->config().base_url) : nlohmann::ordered_json()},
                     {"expected_dim", expected_dim(*snap) ? nlohmann::ordered_json(*expected_dim(*snap))
                                                          : nlohmann::ordered_json()},
                     {"normalize", config_.normalize_embeddings}};
    j["pose_joints"] = config_.pose_joints;
    return with_headers(*snap, {200, j.dump(2) + "\n"});
  }

  Reply embed_text(const std::string& body) const {
    const auto snap = snapshot();
    nlohmann::json req;
    if (auto bad = parse_body(body, req)) return with_headers(*snap, *bad);
    if (!req.is_object() || !req.contains("text") || !req["text"].is_string())
      return with_headers(*snap, error_reply(400, "invalid request", "body needs a string field 'text'"));
    if (!embedder_)
      return with_headers(*snap, error_reply(503, "embedder unavailable", "EMBED_SERVICE_URL is not configured"));
    try {
      auto e = embedder_->embed(nlohmann::json{{"text", req["text"]}}.dump(), expected_dim(*snap));
      if (config_.normalize_embeddings) {
        Eigen::Map<Eigen::VectorXd> v(e.data(), static_cast<Eigen::Index>(e.size()));
        data::l2_normalize(v);
      }
      std::string out = "{\"embedding\":[";
      for (std::size_t i = 0; i < e.size(); ++i) {
        if (i) out += ',';
        fmt::append_exact(out, e[i]);
      }
      out += "],\"dim\":" + std::to_string(e.size()) + "}\n";
      return with_headers(*snap, {200, std::move(out)});
    } catch (const EmbedUnavailable& e) {
      auto r = error_reply(503, "embedder unavailable", e.what());
      auto j = nlohmann::json::parse(r.body);
      j["attempts"] = e.attempts();
      r.body = j.dump() + "\n";
      return with_headers(*snap, r);
    } catch (const EmbedBadResponse& e) {
      return with_headers(*snap, error_reply(502, "bad embedder response", e.what()));
    }
  }

  Reply regress(const std::string& body) const {
    const auto snap = snapshot();
    if (!snap->weights) return with_headers(*snap, error_reply(409, "no weights loaded", "set WEIGHTS or POST /v1/reload"));
    nlohmann::json req;
    if (auto bad = parse_body(body, req)) return with_headers(*snap, *bad);
    try {
      const auto x = pipeline::embedding_from_json(req);
      return with_headers(*snap, {200, pipeline::infer_text(*snap->weights, x)});
    } catch (const Error& e) {
      return with_headers(*snap, error_reply(400, "invalid embedding", e.what()));
    }
  }

  Reply decode(const std::string& body) const {
    const auto snap = snapshot();
    if (!snap->model)
      return with_headers(*snap, error_reply(409, "no model asset loaded", "set MODEL_ASSET or POST /v1/reload"));
    nlohmann::json req;
    if (auto bad = parse_body(body, req)) return with_headers(*snap, *bad);
    try {
      if (!req.is_object() || !req.contains("params")) throw DataError("body needs 'params'");
      const auto format = pipeline::parse_mesh_format(req.value("want", std::string("obj")));
      const auto params = meshio::params_from_json(req["params"]);
      std::optional<mm::DetailMap> detail;
      if (req.contains("detail") && !req["detail"].is_null()) detail = meshio::detail_from_json(req["detail"]);
      const auto mesh = pipeline::decode(*snap->model, params, config_.pose_joints, detail);
      return with_headers(*snap, {200, pipeline::mesh_text(mesh, format),
                                  format == pipeline::MeshFormat::obj ? "model/obj" : "application/json"});
    } catch (const Error& e) {
      return with_headers(*snap, error_reply(400, "invalid params", e.what()));
    } catch (const nlohmann::json::exception& e) {
      return with_headers(*snap, error_reply(400, "invalid params", e.what()));
    }
  }

  // {"model"?: path, "weights"?: path}; an empty body reloads the configured paths.
  Reply reload(const std::string& body) {
    nlohmann::json req = nlohmann::json::object();
    if (body.find_first_not_of(" \t\r\n") != std::string::npos) {
      if (auto bad = parse_body(body, req)) return *bad;
    }
    std::optional<std::filesystem::path> model = config_.model_path, weights = config_.weights_path;
    try {
      if (req.contains("model")) model = req["model"].get<std::string>();
      if (req.contains("weights")) weights = req["weights"].get<std::string>();
      load(model, weights);
    } catch (const std::exception& e) {
      return error_reply(400, "reload failed", e.what());
    }
    {
      std::lock_guard lock(reload_mutex_);
      config_.model_path = model;
      config_.weights_path = weights;
    }
    return info();
  }

  void mount(httplib::Server& server) {
    auto send = [](httplib::Response& res, const Reply& r) {
      res.status = r.status;
      for (const auto& [k, v] : r.headers) res.set_header(k, v);
      res.set_content(r.body, r.content_type);
    };
    server.Get("/v1/info", [this, send](const httplib::Request&, httplib::Response& res) { send(res, info()); });
    server.Post("/v1/embed-text",
                [this, send](const httplib::Request& req, httplib::Response& res) { send(res, embed_text(req.body)); });
    server.Post("/v1/regress",
                [this, send](const httplib::Request& req, httplib::Response& res) { send(res, regress(req.body)); });
    server.Post("/v1/decode",
                [this, send](const httplib::Request& req, httplib::Response& res) { send(res, decode(req.body)); });
    server.Post("/v1/reload",
                [this, send](const httplib::Request& req, httplib::Response& res) { send(res, reload(req.body)); });
  }

 private:
  std::optional<std::size_t> expected_dim(const Snapshot& snap) const {
    if (snap.weights) return snap.weights->weights.input_dim();
    if (embedder_ && embedder_->config().expected_dim) return embedder_->config().expected_dim;
    return std::nullopt;
  }

  static std::optional<Reply> parse_body(const std::string& body, nlohmann::json& out) {
    try {
      out = nlohmann::json::parse(body);
      return std::nullopt;
    } catch (const nlohmann::json::exception& e) {
      return error_reply(400, "invalid JSON", e.what());
    }
  }

  static Reply with_headers(const Snapshot& snap, Reply r) {
    r.headers["X-Weights-Signature"] = snap.weights_signature;
    r.headers["X-Weights-Checksum"] = snap.weights_checksum;
    r.headers["X-Model-Checksum"] = snap.model_checksum;
    return r;
  }

  ServiceConfig config_;
  std::optional<EmbedClient> embedder_;
  mutable std::mutex mutex_;
  std::mutex reload_mutex_;
  std::shared_ptr<const Snapshot> snapshot_;
};

// Owns the HTTP listener. bind() then listen() (blocking) or start() (thread).
class HttpServer {
 public:
  explicit HttpServer(Service& service) { service.mount(server_); }
  ~HttpServer() { stop(); }

  int bind(const std::string& host, int port) {
    if (port == 0) return server_.bind_to_any_port(host);
    if (!server_.bind_to_port(host, port)) throw Error("cannot bind " + host + ":" + std::to_string(port));
    return port;
  }

  void listen() { server_.listen_after_bind(); }

  void start() {
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }

  void stop() {
    server_.stop();
    if (thread_.joinable()) thread_.join();
  }

 private:
  httplib::Server server_;
  std::thread thread_;
};

}  // namespace t2f::service
