#include "aidtwin/llm.hpp"

#include <httplib.h>

#include <cstdlib>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "aidtwin/ingest.hpp"
#include "aidtwin/records.hpp"

namespace aidtwin::llm {

using nlohmann::json;
using records::format_number;

namespace {

constexpr std::string_view kPlanKeywords[] = {"segment", "meal", "snack", "bolus", "suspend", "initial"};

bool is_plan_keyword(std::string_view word) {
  for (auto k : kPlanKeywords) {
    if (word == k) return true;
  }
  return false;
}

std::string join_lines(const std::vector<std::string>& lines) {
  std::string out;
  for (const auto& l : lines) out += "- " + l + "\n";
  return out;
}

}  // namespace

HttpChatTransport::HttpChatTransport(ClientConfig config) : config_(std::move(config)) {}

Exchange HttpChatTransport::post(const std::string& request_body) {
  httplib::Client client(config_.base_url);
  client.set_connection_timeout(config_.timeout);
  client.set_read_timeout(config_.timeout);
  client.set_write_timeout(config_.timeout);
  if (const char* token = std::getenv(config_.token_env.c_str()); token && *token) {
    client.set_bearer_token_auth(token);
  }
  auto res = client.Post(config_.path, request_body, "application/json");
  if (!res) return {0, httplib::to_string(res.error())};
  return {res->status, res->body};
}

RecordingTransport::RecordingTransport(std::shared_ptr<ChatTransport> inner,
                                       std::filesystem::path transcript)
    : inner_(std::move(inner)), path_(std::move(transcript)) {}

Exchange RecordingTransport::post(const std::string& request_body) {
  auto ex = inner_->post(request_body);
  const json line = {{"request", request_body}, {"status", ex.status}, {"response", ex.body}};
  std::lock_guard lock(mutex_);
  std::ofstream out(path_, std::ios::app | std::ios::binary);
  if (!out) throw Error(errc::io_error, "cannot append to transcript " + path_.string());
  out << line.dump() << '\n';
  return ex;
}

std::vector<ReplayTransport::Entry> parse_transcript(std::string_view jsonl) {
  std::vector<ReplayTransport::Entry> entries;
  std::istringstream in{std::string(jsonl)};
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (records::trim(line).empty()) continue;
    try {
      const auto j = json::parse(line);
      ReplayTransport::Entry e;
      if (j.contains("request") && !j.at("request").is_null()) {
        e.request = j.at("request").get<std::string>();
      }
      e.status = j.value("status", 200);
      e.response = j.at("response").get<std::string>();
      entries.push_back(std::move(e));
    } catch (const json::exception& ex) {
      throw Error(errc::parse_error,
                  "transcript line " + std::to_string(number) + ": " + ex.what());
    }
  }
  return entries;
}

ReplayTransport::ReplayTransport(std::vector<Entry> entries, bool strict)
    : entries_(std::move(entries)), strict_(strict) {}

ReplayTransport ReplayTransport::from_file(const std::filesystem::path& transcript, bool strict) {
  return ReplayTransport(parse_transcript(read_text_file(transcript)), strict);
}

Exchange ReplayTransport::post(const std::string& request_body) {
  if (next_ >= entries_.size()) return {0, "transcript exhausted"};
  const auto& e = entries_[next_++];
  if (strict_ && e.request && *e.request != request_body) {
    return {0, "request " + std::to_string(next_) + " differs from the transcript"};
  }
  return {e.status, e.response};
}

std::string system_prompt() {
  return "You are an assistant that writes insulin pump usage plans for a person with type 1 "
         "diabetes. Every plan you write is simulated on the person's digital twin and checked "
         "against a glucose safety specification before anyone sees it.\n"
         "Reply with plan records only, one per line, using exactly this grammar:\n"
         "segment <start_min> <end_min> basal=<U/h> isf=<mg/dL per U> cr=<g per U> "
         "target=<mg/dL>\n"
         "meal <time_min> carbs=<g>      (announced meal; the pump boluses for it)\n"
         "snack <time_min> carbs=<g>     (carbohydrate without a bolus)\n"
         "bolus <time_min> units=<U>     (manual bolus)\n"
         "suspend <mg/dL>                (optional; basal stops below this glucose)\n"
         "Segments must start at 0, be contiguous and end at the horizon. Times are minutes "
         "from now.";
}

std::string context_prompt(const PlanContext& c) {
  std::ostringstream os;
  os << "Goal: " << (c.goal.empty() ? "keep glucose safe" : c.goal) << "\n";
  os << "Current CGM reading: " << format_number(c.glucose) << " mg/dL\n";
  os << "Current settings: basal " << format_number(c.settings.basal) << " U/h, isf "
     << format_number(c.settings.isf) << " mg/dL per U, cr " << format_number(c.settings.cr)
     << " g per U, target " << format_number(c.settings.target) << " mg/dL\n";
  os << "Plan horizon: " << format_number(c.horizon()) << " min\n";
  for (const auto& m : c.scenario.meals) {
    os << "Expected meal at " << format_number(m.time) << " min: " << format_number(m.carbs)
       << " g\n";
  }
  for (const auto& e : c.scenario.exercise) {
    os << "Exercise from " << format_number(e.start) << " min for " << format_number(e.duration)
       << " min at intensity " << format_number(e.intensity) << "\n";
  }
  if (c.spec) os << "Safety specification (STL): " << stl::to_string(*c.spec) << "\n";
  const auto& k = c.constraints;
  for (const auto& [field, b] : k.fields) {
    os << "Constraint: " << field << " within [" << format_number(b.lo) << ", "
       << format_number(b.hi) << "]\n";
  }
  if (k.max_bolus) os << "Constraint: each bolus at most " << format_number(*k.max_bolus) << " U\n";
  if (k.max_boluses) os << "Constraint: at most " << *k.max_boluses << " boluses\n";
  if (k.max_carbs) os << "Constraint: each meal or snack at most " << format_number(*k.max_carbs) << " g\n";
  if (k.max_meals) os << "Constraint: at most " << *k.max_meals << " meals and snacks\n";
  os << "Write a plan that satisfies the safety specification.";
  return os.str();
}

std::string quality_feedback(const PlanQuality& q) {
  return "Simulated plan quality: " + describe_quality(q) + "\n" +
         (q.safe() ? "The plan is safe."
                   : "The plan violates the safety specification. Revise it and reply with the "
                     "complete revised plan.");
}

std::string corrective_feedback(const std::vector<std::string>& problems) {
  return "Your previous reply could not be used:\n" + join_lines(problems) +
         "Reply with the complete plan as plan records only, following the grammar.";
}

std::string request_body(const ClientConfig& config, const std::vector<Message>& messages) {
  json msgs = json::array();
  for (const auto& m : messages) msgs.push_back({{"role", m.role}, {"content", m.content}});
  const json body = {{"model", config.model}, {"temperature", config.temperature}, {"messages", msgs}};
  return body.dump();
}

std::optional<std::string> response_content(std::string_view body) {
  const auto j = json::parse(body, nullptr, false);
  if (j.is_discarded() || !j.is_object()) return std::nullopt;
  const auto choices = j.find("choices");
  if (choices == j.end() || !choices->is_array() || choices->empty()) return std::nullopt;
  const auto& first = (*choices)[0];
  if (!first.is_object() || !first.contains("message")) return std::nullopt;
  const auto& msg = first.at("message");
  if (!msg.is_object() || !msg.contains("content") || !msg.at("content").is_string()) {
    return std::nullopt;
  }
  return msg.at("content").get<std::string>();
}

std::string extract_plan_text(std::string_view response) {
  std::string out;
  std::istringstream in{std::string(response)};
  std::string line;
  while (std::getline(in, line)) {
    const auto t = records::trim(line);
    const auto word = t.substr(0, t.find_first_of(" \t"));
    if (is_plan_keyword(word)) {
      out.append(t);
      out.push_back('\n');
    }
  }
  return out;
}

ResponseCheck check_response(std::string_view content, const PlanContext& context) {
  ResponseCheck check;
  const auto text = extract_plan_text(content);
  if (text.empty()) {
    check.problems.emplace_back("no plan records found");
    return check;
  }
  UsagePlan plan;
  try {
    plan = parse_plan(text);
  } catch (const Error& e) {
    check.problems = e.details().empty() ? std::vector<std::string>{e.what()} : e.details();
    return check;
  }
  plan.initial_glucose = context.glucose;  // the context, not the model, knows the current reading
  for (const auto& v : check_feasibility(plan, context.constraints, context.horizon())) {
    check.problems.push_back(v.message());
  }
  if (check.problems.empty()) check.plan = std::move(plan);
  return check;
}

namespace {

// One query with retries; the partial result is attached on failure.
std::string query(ChatTransport& transport, const ClientConfig& config,
                  const std::vector<Message>& messages, const RefinementResult& partial) {
  const auto body = request_body(config, messages);
  std::string last;
  for (int attempt = 0; attempt <= config.max_retries; ++attempt) {
    const auto ex = transport.post(body);
    if (ex.status >= 200 && ex.status < 300) {
      if (auto content = response_content(ex.body)) return *content;
      last = "malformed chat-completion response";
    } else {
      last = ex.status == 0 ? ex.body : "HTTP " + std::to_string(ex.status);
    }
  }
  auto failed = partial;
  failed.log.stop_reason = StopReason::planner_failure;
  throw PlannerFailure("chat endpoint failed after " + std::to_string(config.max_retries + 1) +
                           " attempts: " + last,
                       std::move(failed));
}

}  // namespace

LlmPlanner::LlmPlanner(std::shared_ptr<ChatTransport> transport, ClientConfig config)
    : transport_(std::move(transport)), config_(std::move(config)) {}

UsagePlan LlmPlanner::propose(const PlanContext& context, const RefinementLog& history) {
  std::vector<Message> messages{{"system", system_prompt()}, {"user", context_prompt(context)}};
  if (!history.iterations.empty()) {
    const auto& last = history.iterations.back();
    if (last.response) messages.push_back({"assistant", *last.response});
    if (!last.feedback.empty()) messages.push_back({"user", last.feedback});
  }
  RefinementResult partial{seed_plan(context), history, {}};
  const auto content = query(*transport_, config_, messages, partial);
  auto check = check_response(content, context);
  if (!check.plan) {
    throw PlannerFailure("planner response is not a usable plan: " + check.problems.front(),
                         std::move(partial));
  }
  return std::move(*check.plan);
}

RefinementResult llm_refine(const PlanContext& context, ChatTransport& transport,
                            const ClientConfig& config, int budget) {
  if (budget < 1) throw Error(errc::invalid_argument, "budget must be >= 1");
  RefinementResult out;
  out.plan = seed_plan(context);
  auto& log = out.log;
  std::vector<Message> messages{{"system", system_prompt()}, {"user", context_prompt(context)}};

  while (static_cast<int>(log.iterations.size()) < budget) {
    const auto content = query(transport, config, messages, out);
    ++out.counter.queries;

    IterationRecord rec;
    rec.index = static_cast<int>(log.iterations.size());
    rec.kind = IterationKind::response;
    rec.response = content;
    auto check = check_response(content, context);
    bool safe = false;
    if (!check.plan) {
      ++out.counter.irrelevant;
      rec.move = "irrelevant response";
      rec.feedback = corrective_feedback(check.problems);
    } else {
      rec.plan = *check.plan;
      try {
        const auto ev = evaluate_in_context(context, *check.plan);
        rec.quality = ev.quality;
        rec.feedback = quality_feedback(ev.quality);
        const bool better =
            !log.best_index ||
            ev.quality.score > log.iterations[static_cast<std::size_t>(*log.best_index)].quality->score;
        if (better) {
          rec.accepted = true;
          log.best_index = rec.index;
          out.plan = *check.plan;
        }
        safe = ev.quality.safe() && safety_gate(context, *check.plan);
        rec.move = "planner response";
      } catch (const Error& e) {
        rec.move = "planner response";
        rec.feedback = corrective_feedback({std::string("simulation failed: ") + e.what()});
      }
    }
    messages.push_back({"assistant", content});
    messages.push_back({"user", rec.feedback});
    log.iterations.push_back(std::move(rec));
    if (safe) {
      out.plan = *log.iterations.back().plan;
      log.best_index = static_cast<int>(log.iterations.size()) - 1;
      log.stop_reason = StopReason::safe;
      return out;
    }
  }
  log.stop_reason = StopReason::budget;
  return out;
}

}  // namespace aidtwin::llm
