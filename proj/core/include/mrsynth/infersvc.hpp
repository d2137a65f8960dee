#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>
#include "mrsynth/checkpoint.hpp"
#include "mrsynth/error.hpp"
#include "mrsynth/turing.hpp"

namespace mrsynth {

struct ServiceConfig {
  std::size_t max_count = 16;
  std::size_t max_grid_axis = 8;
  /// When set, Turing sessions are written here as <id>.json after every change.
  std::optional<std::filesystem::path> session_dir;
};

struct HttpResponse {
  int status = 200;
  std::string body;
  std::string content_type = "application/json";
};

int http_status(ErrorCode code);
/// {"error": code, "field": field-or-null, "message": text}
nlohmann::json error_body(const Error& e);

/// Turing sessions behind one lock; every mutation is serialized.
class TuringStore {
 public:
  explicit TuringStore(std::optional<std::filesystem::path> dir = std::nullopt);

  std::string add(TuringSession session);
  TuringSession get(const std::string& id) const;
  SubmitOutcome submit(const std::string& id, const std::string& reader, std::size_t grid,
                       const std::vector<TuringLabel>& labels);
  TuringReport report(const std::string& id) const;

 private:
  void persist(const TuringSession& s) const;

  mutable std::mutex mu_;
  std::map<std::string, TuringSession> sessions_;
  std::optional<std::filesystem::path> dir_;
};

/// Transport-independent request handling. The loaded model is immutable
/// and replaced as a whole, so each request sees exactly one model version.
class InferenceService {
 public:
  explicit InferenceService(ServiceConfig cfg = {});

  void load_model(const std::filesystem::path& checkpoint);
  void set_model(std::shared_ptr<LoadedModel> model);
  std::shared_ptr<LoadedModel> model() const;

  // Each throws Error; handle() maps errors to HTTP responses.
  nlohmann::json generate(const nlohmann::json& request) const;
  nlohmann::json grid(const nlohmann::json& request) const;
  nlohmann::json model_info() const;
  nlohmann::json create_session(const nlohmann::json& request);
  nlohmann::json session_grid(const std::string& id, std::size_t grid) const;
  nlohmann::json submit_labels(const std::string& id, std::size_t grid, const nlohmann::json& request);
  nlohmann::json session_report(const std::string& id) const;

  HttpResponse handle(const std::string& method, const std::string& path, const std::string& body);

  const ServiceConfig& config() const { return cfg_; }

 private:
  std::shared_ptr<LoadedModel> require_model() const;

  ServiceConfig cfg_;
  mutable std::mutex model_mu_;
  std::shared_ptr<LoadedModel> model_;
  TuringStore store_;
};

/// "<first 16 hex digits of the checkpoint hash>@<step>"
std::string model_version(const LoadedModel& m);

/// HTTP front end for an InferenceService.
class HttpServer {
 public:
  explicit HttpServer(InferenceService& service);
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  /// Binds and returns the bound port; port 0 picks a free one.
  int bind(const std::string& host, int port);
  /// Blocks until stop() is called from another thread.
  void listen();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace mrsynth
