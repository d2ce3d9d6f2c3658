// Eigen first: the resolver header pulled in by httplib defines `_res`.
#include "ctfkit/explorer.hpp"

#include <httplib.h>

#include "ctfkit/error.hpp"

namespace ctfkit {

struct HttpServer::Impl {
  Impl(const ExplorerService& s, ServeOptions o) : service(s), options(std::move(o)) {}

  const ExplorerService& service;
  ServeOptions options;
  httplib::Server server;
  int port = -1;
};

HttpServer::HttpServer(const ExplorerService& service, ServeOptions options)
    : impl_(std::make_unique<Impl>(service, std::move(options))) {
  auto& srv = impl_->server;
  // The library default adds SO_REUSEPORT, which lets a second server share a
  // busy port instead of failing.
  srv.set_socket_options([](socket_t sock) {
    int yes = 1;
    setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, reinterpret_cast<const void*>(&yes), sizeof(yes));
  });
  srv.set_default_headers({{"Access-Control-Allow-Origin", impl_->options.cors_origin},
                           {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"},
                           {"Access-Control-Allow-Headers", "Content-Type"}});
  const auto forward = [this](const httplib::Request& req, httplib::Response& res) {
    const HttpResponse out = impl_->service.handle(req.method, req.path, req.body);
    res.status = out.status;
    res.set_content(out.body, "application/json");
  };
  srv.Get(".*", forward);
  srv.Post(".*", forward);
  srv.Put(".*", forward);
  srv.Delete(".*", forward);
  srv.Options(".*", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind() {
  auto& opts = impl_->options;
  if (opts.port == 0) {
    impl_->port = impl_->server.bind_to_any_port(opts.host);
  } else {
    impl_->port = impl_->server.bind_to_port(opts.host, opts.port) ? opts.port : -1;
  }
  if (impl_->port < 0) {
    fail(ErrorCode::AddressInUse, "cannot bind " + opts.host + ":" + std::to_string(opts.port));
  }
  return impl_->port;
}

void HttpServer::listen() {
  if (impl_->port < 0) bind();
  impl_->server.listen_after_bind();
}

void HttpServer::stop() {
  if (impl_->server.is_running()) impl_->server.stop();
}

}  // namespace ctfkit
