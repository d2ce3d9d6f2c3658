#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>

#include "ctfkit/dataset.hpp"
#include "ctfkit/engine.hpp"
#include "ctfkit/error.hpp"

namespace ctfkit {

struct ExplorerLimits {
  std::size_t max_n = 20000;  // samples per request (grid points x individuals for /curves)
  std::size_t max_replications = 20;
};

struct HttpResponse {
  int status = 200;
  std::string body;  // JSON
};

/// Read-only query layer over one model. Every handler is a pure function of
/// the model and the request body; the random stream comes from the
/// client seed and a fixed per-endpoint tag.
class ExplorerService {
 public:
  ExplorerService(std::shared_ptr<const TrainedModel> model, std::optional<Dataset> data = std::nullopt,
                  ExplorerLimits limits = {});

  /// Routes GET /model/info, POST /coupling, POST /curves, POST /effect-curve.
  /// Errors become {"error_code", "message"} with a 4xx or 5xx status.
  HttpResponse handle(std::string_view method, std::string_view path, std::string_view body) const;

  std::string model_info() const;
  std::string coupling(std::string_view body) const;
  std::string curves(std::string_view body) const;
  std::string effect_curve(std::string_view body) const;

  const TrainedModel& model() const noexcept { return *model_; }
  const ExplorerLimits& limits() const noexcept { return limits_; }

 private:
  std::shared_ptr<const TrainedModel> model_;
  std::optional<Dataset> data_;
  ExplorerLimits limits_;
};

/// HTTP status used for an error code.
int http_status(ErrorCode code) noexcept;

struct ServeOptions {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string cors_origin = "*";
};

/// Blocks serving `service` until `stop_server` or process exit. Throws
/// AddressInUse when the port cannot be bound.
class HttpServer {
 public:
  HttpServer(const ExplorerService& service, ServeOptions options);
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  /// Binds the socket; returns the bound port (useful with port 0).
  int bind();
  /// Serves on the bound socket until stop().
  void listen();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace ctfkit
