#include "aidtwin/json_io.hpp"

#include <cmath>

#include "aidtwin/ingest.hpp"
#include "aidtwin/plan.hpp"

namespace aidtwin::json_io {

namespace {

json number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json numbers(const std::vector<double>& values) {
  json out = json::array();
  for (double v : values) out.push_back(number(v));
  return out;
}

}  // namespace

json to_json(const PatientParams& params) {
  json j = json::object();
  for (Param p : kAllParams) j[std::string(param_name(p))] = get(params, p);
  return j;
}

PatientParams params_from_json(const json& j, const PatientParams& base) {
  if (!j.is_object()) throw Error(errc::invalid_params, "params must be a JSON object");
  auto params = base;
  std::vector<std::string> issues;
  for (const auto& [key, value] : j.items()) {
    const auto p = parse_param_name(key);
    if (!p) {
      issues.push_back("unknown parameter '" + key + "'");
    } else if (!value.is_number()) {
      issues.push_back(key + " must be a number");
    } else {
      set(params, *p, value.get<double>());
    }
  }
  for (auto& s : validate(params)) issues.push_back(std::move(s));
  if (!issues.empty()) {
    throw Error(errc::invalid_params, "invalid params: " + issues.front(), issues);
  }
  return params;
}

json to_json(const GlucoseTrace& trace) {
  return {{"t0", trace.t0},
          {"dt", trace.dt},
          {"samples", numbers(trace.samples)},
          {"insulin_delivered", numbers(trace.insulin_delivered)}};
}

json to_json(const GlycemicMetrics& m) {
  return {{"tir", m.tir},
          {"tar", m.tar},
          {"tbr", m.tbr},
          {"mean_glucose", m.mean_glucose},
          {"hypo_episodes", m.hypo_episodes},
          {"severe_hypo_episodes", m.severe_hypo_episodes}};
}

json to_json(const PlanQuality& q) {
  return {{"robustness", number(q.robustness)},
          {"safe", q.safe()},
          {"tir", q.tir},
          {"tar", q.tar},
          {"tbr", q.tbr},
          {"mean_glucose", q.mean_glucose},
          {"hypo_episodes", q.hypo_episodes},
          {"severe_hypo_episodes", q.severe_hypo_episodes},
          {"score", number(q.score)}};
}

json to_json(const IdentifiabilityReport& report) {
  json params = json::array();
  for (const auto& s : report.params) {
    params.push_back({{"param", std::string(param_name(s.param))},
                      {"sensitivity", s.l2},
                      {"identifiable", s.identifiable}});
  }
  return {{"params", params}, {"condition_number", number(report.condition_number)}};
}

json to_json(const FitResult& fit) {
  return {{"params", to_json(fit.params)},
          {"rmse", fit.rmse},
          {"initial_rmse", number(fit.initial_rmse)},
          {"n_iterations", fit.n_iterations},
          {"best_start", fit.best_start},
          {"diverged_starts", fit.diverged_starts},
          {"converged", fit.converged},
          {"identifiability", to_json(fit.identifiability)}};
}

json to_json(const IterationRecord& r) {
  json j = {{"index", r.index},
            {"kind", std::string(to_string(r.kind))},
            {"accepted", r.accepted},
            {"move", r.move},
            {"feedback", r.feedback}};
  j["plan"] = r.plan ? json(serialize_plan(*r.plan)) : json(nullptr);
  j["quality"] = r.quality ? to_json(*r.quality) : json(nullptr);
  if (r.response) j["response"] = *r.response;
  return j;
}

json to_json(const RefinementLog& log) {
  json its = json::array();
  for (const auto& r : log.iterations) its.push_back(to_json(r));
  return {{"iterations", its},
          {"best_index", log.best_index ? json(*log.best_index) : json(nullptr)},
          {"stop_reason", std::string(to_string(log.stop_reason))},
          {"infeasible_rejected", log.infeasible_rejected}};
}

json to_json(const HallucinationCounter& c) {
  return {{"queries", c.queries}, {"irrelevant", c.irrelevant}, {"per_hundred", c.per_hundred()}};
}

json to_json(const RefinementResult& result) {
  return {{"plan", serialize_plan(result.plan)},
          {"log", to_json(result.log)},
          {"hallucinations", to_json(result.counter)}};
}

json error_body(std::string_view code, std::string_view message,
                const std::vector<std::string>& details) {
  return {{"code", code}, {"message", message}, {"details", details}};
}

json error_body(const Error& error) { return error_body(error.code(), error.what(), error.details()); }

PatientParams load_twin(const std::filesystem::path& path) {
  const auto j = parse(read_text_file(path));
  if (j.is_object() && j.contains("params")) return params_from_json(j.at("params"));
  return params_from_json(j);
}

json parse(std::string_view text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(errc::parse_error, std::string("invalid JSON: ") + e.what());
  }
}

}  // namespace aidtwin::json_io
