// aidtwin: fit, simulate, evaluate, refine, report and serve from the shell.
//
// Exit codes: 0 success (and, for evaluate/refine, a safe plan), 1 an unsafe
// plan, 2 any error. Errors are a single JSON line on stderr.

#include <CLI11.hpp>

#include <csignal>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>

#include "aidtwin/error.hpp"
#include "aidtwin/evaluate.hpp"
#include "aidtwin/ident.hpp"
#include "aidtwin/ingest.hpp"
#include "aidtwin/json_io.hpp"
#include "aidtwin/llm.hpp"
#include "aidtwin/planner.hpp"
#include "aidtwin/records.hpp"
#include "aidtwin/report.hpp"
#include "aidtwin/service.hpp"

namespace {

using namespace aidtwin;
using json_io::json;

constexpr int kExitOk = 0;
constexpr int kExitUnsafe = 1;
constexpr int kExitError = 2;

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  out << content;
  out.close();
  if (!out) throw Error(errc::io_error, "cannot write " + path);
}

void emit(const std::string& path, const std::string& content) {
  if (path.empty() || path == "-") {
    std::cout << content;
  } else {
    write_file(path, content);
  }
}

// Spec files hold one formula; '#' comment lines are allowed.
std::string read_spec(const std::string& path) {
  std::string out;
  std::istringstream in(read_text_file(path));
  std::string line;
  while (std::getline(in, line)) {
    const auto t = records::trim(line);
    if (t.empty() || t.front() == '#') continue;
    out += std::string(t) + ' ';
  }
  return out;
}

FitOptions bounds_from_file(const std::string& path, FitOptions options) {
  const auto j = json_io::parse(read_text_file(path));
  if (!j.is_object() || j.empty()) {
    throw Error(errc::invalid_argument, "bounds file must map parameter names to [lo, hi]");
  }
  options.free.clear();
  for (const auto& [name, box] : j.items()) {
    const auto p = parse_param_name(name);
    if (!p || !box.is_array() || box.size() != 2 || !box[0].is_number() || !box[1].is_number()) {
      throw Error(errc::invalid_argument, "bounds entry '" + name + "' must be \"name\": [lo, hi]");
    }
    options.free.push_back(*p);
    options.bounds[*p] = {box[0].get<double>(), box[1].get<double>()};
  }
  return options;
}

struct FitArgs {
  std::string cgm, pump, bounds, init, out;
  int starts = 8;
  std::uint64_t seed = 1;
};

int run_fit(const FitArgs& a) {
  const auto cgm = load_cgm(a.cgm);
  const auto pump = a.pump.empty() ? PumpLog{} : load_pump(a.pump);
  const auto record = make_usage_record(cgm, pump);
  FitOptions options;
  if (!a.bounds.empty()) options = bounds_from_file(a.bounds, options);
  options.starts = a.starts;
  options.seed = a.seed;
  const auto init = a.init.empty() ? nominal_adult() : json_io::load_twin(a.init);
  const auto result = fit(record, init, options);

  const json twin = {{"params", json_io::to_json(result.params)},
                     {"provenance", "fit"},
                     {"fit", json_io::to_json(result)},
                     {"warnings", cgm.warnings}};
  emit(a.out, twin.dump(2) + "\n");

  for (const auto& w : cgm.warnings) std::cerr << "warning: " << w << '\n';
  std::cerr << "rmse " << result.rmse << " mg/dL (initial " << result.initial_rmse << "), "
            << (result.converged ? "converged" : "not converged") << " after "
            << result.n_iterations << " iterations\n";
  std::cerr << "parameter  value        sensitivity  identifiable\n";
  for (const auto& s : result.identifiability.params) {
    char line[128];
    std::snprintf(line, sizeof line, "%-10s %-12.6g %-12.4g %s\n", std::string(param_name(s.param)).c_str(),
                  get(result.params, s.param), s.l2, s.identifiable ? "yes" : "NO");
    std::cerr << line;
  }
  std::cerr << "condition number " << result.identifiability.condition_number << '\n';
  return kExitOk;
}

struct SimArgs {
  std::string twin, plan, scenario, spec, out;
  double dt = 1.0;
};

int run_simulate(const SimArgs& a) {
  const auto params = json_io::load_twin(a.twin);
  const auto plan = parse_plan(read_text_file(a.plan));
  const auto scenario = parse_scenario(read_text_file(a.scenario));
  SimulationOptions sim;
  sim.dt = a.dt;
  emit(a.out, write_trace_csv(simulate(params, plan, scenario, sim)));
  return kExitOk;
}

int run_evaluate(const SimArgs& a) {
  const auto params = json_io::load_twin(a.twin);
  const auto plan = parse_plan(read_text_file(a.plan));
  const auto scenario = parse_scenario(read_text_file(a.scenario));
  const auto spec = stl::parse_formula(read_spec(a.spec));
  EvaluationOptions opts;
  opts.simulation.dt = a.dt;
  const auto ev = evaluate_plan(params, plan, scenario, *spec, opts);
  std::cout << json_io::to_json(ev.quality).dump(2) << '\n';
  return ev.quality.safe() ? kExitOk : kExitUnsafe;
}

struct RefineArgs {
  std::string twin, context, planner = "local", transcript, record, out, log;
  std::string llm_url = llm::ClientConfig{}.base_url;
  std::string llm_model = llm::ClientConfig{}.model;
  int budget = 500;
  std::uint64_t seed = 7;
};

int run_refine(const RefineArgs& a) {
  auto context = parse_context(read_text_file(a.context));
  context.params = json_io::load_twin(a.twin);

  RefinementResult result;
  if (a.planner == "local") {
    LocalSearchOptions opts;
    opts.seed = a.seed;
    result = local_search_refine(context, a.budget, opts);
  } else {
    llm::ClientConfig config;
    config.base_url = a.llm_url;
    config.model = a.llm_model;
    std::shared_ptr<llm::ChatTransport> transport;
    if (!a.transcript.empty()) {
      transport = std::make_shared<llm::ReplayTransport>(llm::ReplayTransport::from_file(a.transcript));
    } else {
      transport = std::make_shared<llm::HttpChatTransport>(config);
    }
    if (!a.record.empty()) transport = std::make_shared<llm::RecordingTransport>(transport, a.record);
    try {
      result = llm::llm_refine(context, *transport, config, a.budget);
    } catch (const PlannerFailure& e) {
      if (!a.log.empty()) write_file(a.log, json_io::to_json(e.partial()).dump(2) + "\n");
      throw;
    }
  }

  emit(a.out, serialize_plan(result.plan));
  if (!a.log.empty()) write_file(a.log, json_io::to_json(result).dump(2) + "\n");
  std::cerr << "stop reason " << to_string(result.log.stop_reason) << " after "
            << result.log.iterations.size() << " iterations\n";
  return result.log.stop_reason == StopReason::safe ? kExitOk : kExitUnsafe;
}

int run_report(const std::string& trace_path, const std::string& out, const std::string& title) {
  ChartOptions chart;
  chart.title = title;
  emit(out, render_svg(parse_trace_csv(read_text_file(trace_path)), chart));
  return kExitOk;
}

service::HttpServer* g_server = nullptr;

void on_signal(int) {
  if (g_server) g_server->stop();
}

int run_serve(const std::string& addr, const std::string& store, const std::string& ui_dir, int workers) {
  const auto colon = addr.rfind(':');
  if (colon == std::string::npos) throw Error(errc::invalid_argument, "--addr must be HOST:PORT");
  service::ServeOptions serve;
  serve.host = addr.substr(0, colon);
  const auto port = records::parse_number(addr.substr(colon + 1));
  if (!port || *port < 0 || *port > 65535 || *port != static_cast<int>(*port)) {
    throw Error(errc::invalid_argument, "invalid port in --addr");
  }
  serve.port = static_cast<int>(*port);
  if (!ui_dir.empty()) serve.ui_dir = ui_dir;

  service::ServiceOptions options;
  options.store_path = store;
  options.workers = workers;
  service::Service svc(options);
  service::HttpServer server(svc, serve);
  const int bound = server.bind();
  g_server = &server;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  std::cerr << "listening on " << serve.host << ':' << bound << '\n';
  server.run();
  g_server = nullptr;
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Digital twin engine for automated insulin delivery plans"};
  app.require_subcommand(1);

  FitArgs fa;
  auto* fit_cmd = app.add_subcommand("fit", "Fit a twin to CGM and pump records");
  fit_cmd->add_option("--cgm", fa.cgm, "CGM CSV (timestamp,glucose_mgdl)")->required();
  fit_cmd->add_option("--pump", fa.pump, "Pump CSV (timestamp,kind,value)");
  fit_cmd->add_option("--bounds", fa.bounds, "JSON {\"param\": [lo, hi]}; keys are the free parameters");
  fit_cmd->add_option("--init", fa.init, "Twin JSON used as the first start");
  fit_cmd->add_option("--starts", fa.starts, "Number of multi-start runs")->check(CLI::PositiveNumber);
  fit_cmd->add_option("--seed", fa.seed, "Seed for start sampling");
  fit_cmd->add_option("-o,--output", fa.out, "Twin JSON output (stdout if omitted)");

  SimArgs sa;
  auto* sim_cmd = app.add_subcommand("simulate", "Simulate a plan and write the trace CSV");
  sim_cmd->add_option("--twin", sa.twin)->required();
  sim_cmd->add_option("--plan", sa.plan)->required();
  sim_cmd->add_option("--scenario", sa.scenario)->required();
  sim_cmd->add_option("--dt", sa.dt, "Integrator step in minutes");
  sim_cmd->add_option("-o,--output", sa.out, "Trace CSV (stdout if omitted)");

  SimArgs ea;
  auto* eval_cmd = app.add_subcommand("evaluate", "Score a plan; exit 0 iff robustness >= 0");
  eval_cmd->add_option("--twin", ea.twin)->required();
  eval_cmd->add_option("--plan", ea.plan)->required();
  eval_cmd->add_option("--scenario", ea.scenario)->required();
  eval_cmd->add_option("--spec", ea.spec)->required();
  eval_cmd->add_option("--dt", ea.dt, "Integrator step in minutes");

  RefineArgs ra;
  auto* refine_cmd = app.add_subcommand("refine", "Refine a plan until it is safe or the budget is spent");
  refine_cmd->add_option("--twin", ra.twin)->required();
  refine_cmd->add_option("--context", ra.context)->required();
  refine_cmd->add_option("--planner", ra.planner)->check(CLI::IsMember({"local", "llm"}));
  refine_cmd->add_option("--budget", ra.budget)->check(CLI::PositiveNumber);
  refine_cmd->add_option("--seed", ra.seed);
  refine_cmd->add_option("--transcript", ra.transcript, "Replay LLM exchanges from a JSONL transcript");
  refine_cmd->add_option("--record", ra.record, "Append LLM exchanges to a JSONL transcript");
  refine_cmd->add_option("--llm-url", ra.llm_url, "Chat-completion base URL");
  refine_cmd->add_option("--llm-model", ra.llm_model);
  refine_cmd->add_option("-o,--output", ra.out, "Best plan (stdout if omitted)");
  refine_cmd->add_option("--log", ra.log, "Refinement log JSON");

  std::string trace_path, report_out, title = "Glucose";
  auto* report_cmd = app.add_subcommand("report", "Render a trace CSV as SVG");
  report_cmd->add_option("--trace", trace_path)->required();
  report_cmd->add_option("--title", title);
  report_cmd->add_option("-o,--output", report_out, "SVG output (stdout if omitted)");

  std::string addr = "127.0.0.1:8080", store, ui_dir;
  int workers = 2;
  auto* serve_cmd = app.add_subcommand("serve", "Run the HTTP service");
  serve_cmd->add_option("--addr", addr, "HOST:PORT");
  serve_cmd->add_option("--store", store, "Append-only store file")->required();
  serve_cmd->add_option("--ui-dir", ui_dir, "Static UI assets");
  serve_cmd->add_option("--workers", workers)->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << json_io::error_body(errc::invalid_argument, e.what()).dump() << '\n';
    return kExitError;
  }

  try {
    if (*fit_cmd) return run_fit(fa);
    if (*sim_cmd) return run_simulate(sa);
    if (*eval_cmd) return run_evaluate(ea);
    if (*refine_cmd) return run_refine(ra);
    if (*report_cmd) return run_report(trace_path, report_out, title);
    if (*serve_cmd) return run_serve(addr, store, ui_dir, workers);
  } catch (const Error& e) {
    std::cerr << json_io::error_body(e).dump() << '\n';
    return kExitError;
  } catch (const std::exception& e) {
    std::cerr << json_io::error_body("internal-error", e.what()).dump() << '\n';
    return kExitError;
  }
  return kExitError;
}
