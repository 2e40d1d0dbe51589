#include "aidtwin/service.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "aidtwin/evaluate.hpp"
#include "aidtwin/ingest.hpp"
#include "aidtwin/metrics.hpp"
#include "aidtwin/plan.hpp"
#include "aidtwin/planner.hpp"
#include "aidtwin/scenario.hpp"

namespace aidtwin::service {

namespace {

constexpr std::string_view kTwin = "twin";
constexpr std::string_view kJob = "job";
constexpr std::string_view kDecision = "decision";

std::string system_clock_now() {
  const auto now = std::chrono::system_clock::now();
  return format_timestamp(std::chrono::duration_cast<std::chrono::seconds>(now.time_since_epoch()).count());
}

int status_for(std::string_view code) {
  if (code == errc::plan_validation || code == errc::plan_coverage || code == errc::divergence ||
      code == errc::infeasible_context || code == errc::record_too_short ||
      code == errc::all_starts_diverged || code == errc::non_finite_objective ||
      code == errc::insufficient_horizon) {
    return 422;
  }
  if (code == errc::twin_not_found || code == errc::job_not_found ||
      code == errc::decision_not_found || code == errc::not_found) {
    return 404;
  }
  if (code == errc::method_not_allowed) return 405;
  if (code == errc::io_error || code == errc::planner_failure) return 500;
  return 400;
}

Response error_response(const Error& e) { return {status_for(e.code()), json_io::error_body(e)}; }

std::vector<std::string> split_path(std::string_view path) {
  std::vector<std::string> parts;
  std::size_t i = 0;
  while (i < path.size()) {
    while (i < path.size() && path[i] == '/') ++i;
    const auto j = path.find('/', i);
    const auto end = j == std::string_view::npos ? path.size() : j;
    if (end > i) parts.emplace_back(path.substr(i, end - i));
    i = end;
  }
  return parts;
}

const json& field(const json& body, const char* key) {
  if (!body.contains(key)) {
    throw Error(errc::invalid_argument, std::string("missing field '") + key + "'");
  }
  return body.at(key);
}

std::string string_field(const json& body, const char* key) {
  const auto& v = field(body, key);
  if (!v.is_string()) throw Error(errc::invalid_argument, std::string("'") + key + "' must be a string");
  return v.get<std::string>();
}

std::optional<double> number_field(const json& body, const char* key) {
  if (!body.contains(key) || body.at(key).is_null()) return std::nullopt;
  const auto& v = body.at(key);
  if (!v.is_number()) throw Error(errc::invalid_argument, std::string("'") + key + "' must be a number");
  return v.get<double>();
}

SimulationOptions simulation_options(const json& body) {
  SimulationOptions sim;
  if (auto dt = number_field(body, "dt")) sim.dt = *dt;
  return sim;
}

Response not_allowed(const Request& r) {
  return {405, json_io::error_body(errc::method_not_allowed,
                                   r.method + " is not allowed on " + r.path)};
}

}  // namespace

// ---------------------------------------------------------------------------

Store::Store(std::filesystem::path path) : path_(std::move(path)) {
  if (path_.empty() || !std::filesystem::exists(path_)) return;
  std::istringstream in(read_text_file(path_));
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.empty()) continue;
    try {
      const auto j = json::parse(line);
      apply(j.at("kind").get<std::string>(), j.at("record"));
    } catch (const json::exception& e) {
      throw Error(errc::io_error, "store " + path_.string() + " line " + std::to_string(number) +
                                      " is corrupt: " + e.what());
    }
  }
}

void Store::apply(const std::string& kind, const json& record) {
  const auto id = record.at("id").get<std::string>();
  auto& bucket = records_[kind];
  if (!bucket.contains(id)) order_[kind].push_back(id);
  bucket[id] = record;
  const auto dash = id.rfind('-');
  if (dash != std::string::npos) {
    std::uint64_t seq = 0;
    if (std::sscanf(id.c_str() + dash + 1, "%lu", &seq) == 1) {
      auto& c = counters_[kind];
      c = std::max(c, seq);
    }
  }
}

std::string Store::next_id(std::string_view kind) {
  std::lock_guard lock(mutex_);
  const auto seq = ++counters_[std::string(kind)];
  char buf[32];
  std::snprintf(buf, sizeof buf, "%06llu", static_cast<unsigned long long>(seq));
  return std::string(kind) + "-" + buf;
}

void Store::append(std::string_view kind, const json& record) {
  std::lock_guard lock(mutex_);
  if (!path_.empty()) {
    std::ofstream out(path_, std::ios::app | std::ios::binary);
    const json line = {{"kind", kind}, {"record", record}};
    out << line.dump() << '\n';
    out.flush();
    if (!out) throw Error(errc::io_error, "cannot append to store " + path_.string());
  }
  apply(std::string(kind), record);
}

std::optional<json> Store::find(std::string_view kind, std::string_view id) const {
  std::lock_guard lock(mutex_);
  const auto b = records_.find(kind);
  if (b == records_.end()) return std::nullopt;
  const auto r = b->second.find(id);
  if (r == b->second.end()) return std::nullopt;
  return std::optional<json>(std::in_place, r->second);
}

std::vector<json> Store::list(std::string_view kind) const {
  std::lock_guard lock(mutex_);
  std::vector<json> out;
  const auto o = order_.find(kind);
  if (o == order_.end()) return out;
  const auto& bucket = records_.find(kind)->second;
  for (const auto& id : o->second) out.push_back(bucket.find(id)->second);
  return out;
}

// ---------------------------------------------------------------------------

Service::Service(ServiceOptions options) : options_(std::move(options)), store_(options_.store_path) {
  if (!options_.clock) options_.clock = system_clock_now;
  if (!options_.llm_transport) {
    options_.llm_transport = [](const llm::ClientConfig& c) {
      return std::make_shared<llm::HttpChatTransport>(c);
    };
  }
  // Jobs cut short by a previous shutdown can never finish.
  for (const auto& job : store_.list(kJob)) {
    const auto status = job.value("status", "");
    if (status == "queued" || status == "running") {
      auto failed = job;
      failed["status"] = "failed";
      failed["error"] = json_io::error_body(errc::planner_failure, "service restarted before the job finished");
      store_.append(kJob, failed);
    }
  }
  const int n = std::max(1, options_.workers);
  for (int i = 0; i < n; ++i) workers_.emplace_back([this] { worker_loop(); });
}

Service::~Service() {
  {
    std::lock_guard lock(queue_mutex_);
    stopping_ = true;
  }
  queue_cv_.notify_all();
  for (auto& w : workers_) w.join();
}

void Service::wait_idle() {
  std::unique_lock lock(queue_mutex_);
  idle_cv_.wait(lock, [this] { return queue_.empty() && running_ == 0; });
}

Response Service::handle(const Request& request) {
  try {
    return route(request);
  } catch (const Error& e) {
    return error_response(e);
  } catch (const json::exception& e) {
    return {400, json_io::error_body(errc::invalid_argument, std::string("malformed request body: ") + e.what())};
  } catch (const std::exception& e) {
    return {500, json_io::error_body("internal-error", e.what())};
  }
}

Response Service::route(const Request& r) {
  const auto parts = split_path(r.path);
  const bool get = r.method == "GET";
  const bool post = r.method == "POST";
  auto body = [&] {
    if (r.body.empty()) throw Error(errc::invalid_argument, "request body must be a JSON object");
    auto j = json_io::parse(r.body);
    if (!j.is_object()) throw Error(errc::invalid_argument, "request body must be a JSON object");
    return j;
  };
  const auto n = parts.size();
  const std::string head = n > 0 ? parts[0] : "";

  if (head == "twins" && n == 1) {
    if (post) return create_twin(body());
    if (get) return {200, store_.list(kTwin)};
    return not_allowed(r);
  }
  if (head == "twins" && n == 2) {
    if (!get) return not_allowed(r);
    if (auto t = store_.find(kTwin, parts[1])) return {200, *t};
    throw Error(errc::twin_not_found, "no twin with id '" + parts[1] + "'");
  }
  if (head == "simulate" && n == 1) return post ? simulate(body()) : not_allowed(r);
  if (head == "evaluate" && n == 1) return post ? evaluate(body()) : not_allowed(r);
  if (head == "refine" && n == 1) return post ? refine(body()) : not_allowed(r);
  if (head == "jobs" && n == 2) {
    if (!get) return not_allowed(r);
    auto job = store_.find(kJob, parts[1]);
    if (!job) throw Error(errc::job_not_found, "no job with id '" + parts[1] + "'");
    std::lock_guard lock(job_write_mutex_);
    if (auto p = progress_.find(parts[1]); p != progress_.end()) (*job)["progress"] = p->second;
    return {200, *job};
  }
  if (head == "decisions" && n == 1) {
    if (post) return create_decision(body());
    if (!get) return not_allowed(r);
    json out = json::array();
    const auto filter = r.query.find("twin_id");
    for (auto& d : store_.list(kDecision)) {
      if (filter == r.query.end() || d.value("twin_id", "") == filter->second) out.push_back(std::move(d));
    }
    return {200, out};
  }
  if (head == "decisions" && n == 2) {
    if (!get) return not_allowed(r);
    if (auto d = store_.find(kDecision, parts[1])) return {200, *d};
    throw Error(errc::decision_not_found, "no decision with id '" + parts[1] + "'");
  }
  throw Error(errc::not_found, "no route for " + r.method + " " + r.path);
}

PatientParams Service::twin_params(const json& body) const {
  const auto id = string_field(body, "twin_id");
  const auto twin = store_.find(kTwin, id);
  if (!twin) throw Error(errc::twin_not_found, "no twin with id '" + id + "'");
  return json_io::params_from_json(twin->at("params"));
}

Response Service::create_twin(const json& body) {
  json twin;
  if (body.contains("record")) {
    const auto& rec = body.at("record");
    const auto cgm = parse_cgm_csv(string_field(rec, "cgm_csv"));
    const auto pump = rec.contains("pump_csv") ? parse_pump_csv(string_field(rec, "pump_csv")) : PumpLog{};
    const auto init = body.contains("init") ? json_io::params_from_json(body.at("init")) : nominal_adult();
    const auto result = fit(make_usage_record(cgm, pump), init, options_.fit);
    twin["params"] = json_io::to_json(result.params);
    twin["provenance"] = "fit";
    twin["fit"] = json_io::to_json(result);
    twin["warnings"] = cgm.warnings;
  } else if (body.contains("params")) {
    twin["params"] = json_io::to_json(json_io::params_from_json(body.at("params")));
    twin["provenance"] = "manual";
  } else {
    throw Error(errc::invalid_argument, "POST /twins needs 'params' or 'record'");
  }
  if (body.contains("name")) twin["name"] = string_field(body, "name");
  twin["id"] = store_.next_id(kTwin);
  twin["created_at"] = options_.clock();
  store_.append(kTwin, twin);
  return {201, twin};
}

Response Service::simulate(const json& body) {
  const auto params = twin_params(body);
  const auto plan = parse_plan(string_field(body, "plan"));
  const auto scenario = parse_scenario(string_field(body, "scenario"));
  const auto trace = aidtwin::simulate(params, plan, scenario, simulation_options(body));
  return {200, {{"trace", json_io::to_json(trace)}, {"metrics", json_io::to_json(glycemic_metrics(trace))}}};
}

Response Service::evaluate(const json& body) {
  const auto params = twin_params(body);
  const auto plan = parse_plan(string_field(body, "plan"));
  const auto scenario = parse_scenario(string_field(body, "scenario"));
  const auto spec = stl::parse_formula(string_field(body, "spec"));
  EvaluationOptions opts;
  opts.simulation = simulation_options(body);
  const auto ev = evaluate_plan(params, plan, scenario, *spec, opts);
  return {200, {{"quality", json_io::to_json(ev.quality)}, {"trace", json_io::to_json(ev.trace)}}};
}

Response Service::refine(const json& body) {
  const auto twin_id = string_field(body, "twin_id");
  (void)twin_params(body);
  auto context = parse_context(string_field(body, "context"));  // reject bad input up front
  const auto planner = body.value("planner", std::string("local"));
  if (planner != "local" && planner != "llm") {
    throw Error(errc::invalid_argument, "planner must be 'local' or 'llm'");
  }
  const auto& b = field(body, "budget");
  if (!b.is_number_integer() || b.get<long long>() < 1) {
    throw Error(errc::invalid_argument, "budget must be an integer >= 1");
  }
  if (body.contains("seed") && !body.at("seed").is_number_unsigned()) {
    throw Error(errc::invalid_argument, "seed must be a non-negative integer");
  }

  json job = {{"id", store_.next_id(kJob)},
              {"status", "queued"},
              {"twin_id", twin_id},
              {"planner", planner},
              {"budget", b},
              {"seed", body.value("seed", std::uint64_t{7})},
              {"created_at", options_.clock()}};
  store_.append(kJob, job);
  {
    std::lock_guard lock(queue_mutex_);
    queue_.push_back({job.at("id").get<std::string>(), body});
  }
  queue_cv_.notify_one();
  return {202, {{"job_id", job.at("id")}, {"status", "queued"}, {"job", job}}};
}

Response Service::create_decision(const json& body) {
  const auto twin_id = string_field(body, "twin_id");
  (void)twin_params(body);
  const auto plan = parse_plan(string_field(body, "plan"));
  const auto verdict = string_field(body, "verdict");
  if (verdict != "approved" && verdict != "rejected") {
    throw Error(errc::invalid_argument, "verdict must be 'approved' or 'rejected'");
  }
  const auto note = body.contains("note") && body.at("note").is_string() ? body.at("note").get<std::string>() : "";
  if (note.find_first_not_of(" \t\r\n") == std::string::npos) {
    throw Error(errc::invalid_argument, "a reviewer note is required");
  }
  json decision = {{"id", store_.next_id(kDecision)},
                   {"twin_id", twin_id},
                   {"plan", serialize_plan(plan)},
                   {"verdict", verdict},
                   {"note", note},
                   {"created_at", options_.clock()}};
  if (body.contains("job_id")) decision["job_id"] = body.at("job_id");
  store_.append(kDecision, decision);
  return {201, decision};
}

// ---------------------------------------------------------------------------

void Service::worker_loop() {
  for (;;) {
    Job job;
    {
      std::unique_lock lock(queue_mutex_);
      queue_cv_.wait(lock, [this] { return stopping_ || !queue_.empty(); });
      if (queue_.empty()) return;  // stopping
      job = std::move(queue_.front());
      queue_.pop_front();
      ++running_;
    }
    run_job(job);
    {
      std::lock_guard lock(queue_mutex_);
      --running_;
    }
    idle_cv_.notify_all();
  }
}

void Service::update_job(const std::string& id, const std::function<void(json&)>& change) {
  std::lock_guard lock(job_write_mutex_);
  auto job = store_.find(kJob, id);
  if (!job) return;
  change(*job);
  store_.append(kJob, *job);
}

void Service::run_job(const Job& job) {
  update_job(job.id, [](json& j) { j["status"] = "running"; });
  try {
    auto context = parse_context(job.request.at("context").get<std::string>());
    context.params = twin_params(job.request);
    const int budget = job.request.at("budget").get<int>();
    const auto planner = job.request.value("planner", std::string("local"));

    RefinementResult result;
    if (planner == "llm") {
      auto transport = options_.llm_transport(options_.llm);
      result = llm::llm_refine(context, *transport, options_.llm, budget);
    } else {
      LocalSearchOptions ls;
      ls.seed = job.request.value("seed", std::uint64_t{7});
      ls.on_iteration = [&](const IterationRecord& rec) {
        std::lock_guard lock(job_write_mutex_);
        progress_[job.id] = {{"iterations", rec.index + 1}, {"budget", budget}};
      };
      result = local_search_refine(context, budget, ls);
    }
    const auto payload = json_io::to_json(result);
    update_job(job.id, [&](json& j) {
      j["status"] = "done";
      j["result"] = payload;
    });
  } catch (const PlannerFailure& e) {
    const auto partial = json_io::to_json(e.partial());
    update_job(job.id, [&](json& j) {
      j["status"] = "failed";
      j["error"] = json_io::error_body(e);
      j["result"] = partial;
    });
  } catch (const Error& e) {
    update_job(job.id, [&](json& j) {
      j["status"] = "failed";
      j["error"] = json_io::error_body(e);
    });
  } catch (const std::exception& e) {
    update_job(job.id, [&](json& j) {
      j["status"] = "failed";
      j["error"] = json_io::error_body("internal-error", e.what());
    });
  }
  std::lock_guard lock(job_write_mutex_);
  progress_.erase(job.id);
}

}  // namespace aidtwin::service
