#pragma once

#include <condition_variable>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "aidtwin/ident.hpp"
#include "aidtwin/json_io.hpp"
#include "aidtwin/llm.hpp"

namespace aidtwin::service {

using json_io::json;

/// Append-only record log. Each line is {"kind": ..., "record": {...}};
/// a later line with the same kind and id supersedes an earlier one (used
/// for job status updates). An empty path keeps everything in memory.
class Store {
 public:
  explicit Store(std::filesystem::path path = {});

  /// Next free id for a kind, e.g. "twin-000003".
  [[nodiscard]] std::string next_id(std::string_view kind);
  void append(std::string_view kind, const json& record);

  [[nodiscard]] std::optional<json> find(std::string_view kind, std::string_view id) const;
  /// Latest version of every record of a kind, in creation order.
  [[nodiscard]] std::vector<json> list(std::string_view kind) const;

 private:
  void apply(const std::string& kind, const json& record);

  std::filesystem::path path_;
  mutable std::mutex mutex_;
  std::map<std::string, std::vector<std::string>, std::less<>> order_;
  std::map<std::string, std::map<std::string, json, std::less<>>, std::less<>> records_;
  std::map<std::string, std::uint64_t, std::less<>> counters_;
};

struct Request {
  std::string method;
  std::string path;
  std::string body;
  std::map<std::string, std::string> query;
};

struct Response {
  int status = 200;
  json body;
};

struct ServiceOptions {
  std::filesystem::path store_path;
  int workers = 2;
  FitOptions fit;
  llm::ClientConfig llm;
  /// Builds the transport for an LLM refinement job. Defaults to HTTP.
  std::function<std::shared_ptr<llm::ChatTransport>(const llm::ClientConfig&)> llm_transport;
  /// ISO-8601 UTC timestamp for new records. Defaults to the system clock.
  std::function<std::string()> clock;
};

/// HTTP-agnostic request handler:
///
///   POST /twins            {params} or {record: {cgm_csv, pump_csv}, init?}  -> 201 twin
///   GET  /twins, /twins/{id}
///   POST /simulate         {twin_id, plan, scenario, dt?}                     -> trace + metrics
///   POST /evaluate         {twin_id, plan, scenario, spec, dt?}               -> quality + trace
///   POST /refine           {twin_id, context, planner: local|llm, budget, seed?} -> 202 job
///   GET  /jobs/{id}
///   POST /decisions        {twin_id, plan, verdict: approved|rejected, note}  -> 201 decision
///   GET  /decisions[?twin_id=], /decisions/{id}
///
/// Every error body is {code, message, details}. Handlers may run
/// concurrently; refinement jobs run on a bounded worker pool.
class Service {
 public:
  explicit Service(ServiceOptions options = {});
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  [[nodiscard]] Response handle(const Request& request);

  /// Blocks until the job queue is empty and no job is running.
  void wait_idle();

  [[nodiscard]] const Store& store() const { return store_; }

 private:
  struct Job {
    std::string id;
    json request;
  };

  Response route(const Request& request);
  Response create_twin(const json& body);
  Response simulate(const json& body);
  Response evaluate(const json& body);
  Response refine(const json& body);
  Response create_decision(const json& body);
  PatientParams twin_params(const json& body) const;

  void worker_loop();
  void run_job(const Job& job);
  void update_job(const std::string& id, const std::function<void(json&)>& change);

  ServiceOptions options_;
  Store store_;
  std::mutex queue_mutex_;
  std::mutex job_write_mutex_;
  std::condition_variable queue_cv_;
  std::condition_variable idle_cv_;
  std::deque<Job> queue_;
  std::map<std::string, json> progress_;  // live iteration counts, guarded by job_write_mutex_
  int running_ = 0;
  bool stopping_ = false;
  std::vector<std::thread> workers_;
};

struct ServeOptions {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::optional<std::filesystem::path> ui_dir;  // static assets mounted at /
};

/// HTTP/1.1 front end. Routes every method and path to Service::handle;
/// GET requests for existing files under ui_dir are served statically first.
class HttpServer {
 public:
  HttpServer(Service& service, ServeOptions options);
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  /// Binds the listen socket and returns the port (port 0 picks a free one).
  /// Throws Error(io-error) when the address cannot be bound.
  int bind();
  /// Serves until stop() is called. bind() must have succeeded.
  void run();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace aidtwin::service
