#include <httplib.h>

#include "aidtwin/service.hpp"

namespace aidtwin::service {

struct HttpServer::Impl {
  Impl(Service& s, ServeOptions o) : service(s), options(std::move(o)) {}

  Service& service;
  ServeOptions options;
  httplib::Server server;
  int port = -1;
};

HttpServer::HttpServer(Service& service, ServeOptions options)
    : impl_(std::make_unique<Impl>(service, std::move(options))) {
  auto& srv = impl_->server;
  if (impl_->options.ui_dir && !srv.set_mount_point("/", impl_->options.ui_dir->string())) {
    throw Error(errc::io_error, "UI directory " + impl_->options.ui_dir->string() + " does not exist");
  }
  auto dispatch = [this](const httplib::Request& req, httplib::Response& res) {
    Request r{req.method, req.path, req.body, {}};
    for (const auto& [k, v] : req.params) r.query.emplace(k, v);
    const auto out = impl_->service.handle(r);
    res.status = out.status;
    res.set_content(out.body.dump(), "application/json");
  };
  const std::string any = R"(/.*)";
  srv.Get(any, dispatch);
  srv.Post(any, dispatch);
  srv.Put(any, dispatch);
  srv.Patch(any, dispatch);
  srv.Delete(any, dispatch);
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind() {
  auto& o = impl_->options;
  impl_->port = o.port == 0 ? impl_->server.bind_to_any_port(o.host)
                            : (impl_->server.bind_to_port(o.host, o.port) ? o.port : -1);
  if (impl_->port < 0) {
    throw Error(errc::io_error, "cannot listen on " + o.host + ":" + std::to_string(o.port));
  }
  return impl_->port;
}

void HttpServer::run() {
  if (impl_->port < 0) throw Error(errc::io_error, "server is not bound");
  impl_->server.listen_after_bind();
}

void HttpServer::stop() {
  if (impl_->server.is_running()) impl_->server.stop();
}

}  // namespace aidtwin::service
