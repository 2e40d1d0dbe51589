#pragma once

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "aidtwin/planner.hpp"

namespace aidtwin::llm {

/// Raw HTTP exchange with a chat-completion endpoint. status 0 means the
/// request never produced an HTTP response (connection refused, timeout).
struct Exchange {
  int status = 0;
  std::string body;
};

class ChatTransport {
 public:
  virtual ~ChatTransport() = default;
  virtual Exchange post(const std::string& request_body) = 0;
};

struct ClientConfig {
  std::string base_url = "https://api.openai.com";
  std::string path = "/v1/chat/completions";
  std::string model = "gpt-4o-mini";
  std::string token_env = "AIDTWIN_LLM_TOKEN";  // bearer token is read from this variable
  double temperature = 0.0;
  std::chrono::seconds timeout{60};
  int max_retries = 2;  // extra attempts after a failed exchange
};

/// Blocking HTTPS/HTTP transport; one request in flight at a time.
class HttpChatTransport : public ChatTransport {
 public:
  explicit HttpChatTransport(ClientConfig config);
  Exchange post(const std::string& request_body) override;

 private:
  ClientConfig config_;
};

/// Forwards to another transport and appends every exchange to a JSONL
/// transcript: {"request": <string>, "status": <int>, "response": <string>}.
class RecordingTransport : public ChatTransport {
 public:
  RecordingTransport(std::shared_ptr<ChatTransport> inner, std::filesystem::path transcript);
  Exchange post(const std::string& request_body) override;

 private:
  std::shared_ptr<ChatTransport> inner_;
  std::filesystem::path path_;
  std::mutex mutex_;
};

/// Serves recorded exchanges in order. In strict mode each request must match
/// the recorded request byte for byte (entries recorded with a null request
/// match anything). Running past the end yields status 0.
class ReplayTransport : public ChatTransport {
 public:
  struct Entry {
    std::optional<std::string> request;
    int status = 200;
    std::string response;
  };

  explicit ReplayTransport(std::vector<Entry> entries, bool strict = false);
  static ReplayTransport from_file(const std::filesystem::path& transcript, bool strict = false);

  Exchange post(const std::string& request_body) override;
  [[nodiscard]] std::size_t consumed() const { return next_; }

 private:
  std::vector<Entry> entries_;
  bool strict_;
  std::size_t next_ = 0;
};

[[nodiscard]] std::vector<ReplayTransport::Entry> parse_transcript(std::string_view jsonl);

struct Message {
  std::string role;  // system, user, assistant
  std::string content;
};

/// Instructions and the plan record grammar.
[[nodiscard]] std::string system_prompt();
/// The decision at hand: glucose, settings, goal, events, constraints, spec.
[[nodiscard]] std::string context_prompt(const PlanContext& context);
/// Quality feedback after a usable plan.
[[nodiscard]] std::string quality_feedback(const PlanQuality& quality);
/// Corrective back-prompt after an unusable response.
[[nodiscard]] std::string corrective_feedback(const std::vector<std::string>& problems);

/// Chat-completions request body (deterministic serialization).
[[nodiscard]] std::string request_body(const ClientConfig& config,
                                       const std::vector<Message>& messages);
/// Assistant text from a chat-completions response; nullopt on a malformed body.
[[nodiscard]] std::optional<std::string> response_content(std::string_view body);

/// Plan record lines found in free-form model output (code fences and prose
/// dropped). Empty when the text holds no plan records.
[[nodiscard]] std::string extract_plan_text(std::string_view response);

/// Outcome of checking one response against the grammar and the constraints.
/// A usable plan gets the context's current glucose as its initial glucose.
struct ResponseCheck {
  std::optional<UsagePlan> plan;     // set when the response is usable
  std::vector<std::string> problems; // parse errors or feasibility violations
};

[[nodiscard]] ResponseCheck check_response(std::string_view content, const PlanContext& context);

/// Planner that asks a chat model for one plan per call.
class LlmPlanner : public Planner {
 public:
  LlmPlanner(std::shared_ptr<ChatTransport> transport, ClientConfig config);
  UsagePlan propose(const PlanContext& context, const RefinementLog& history) override;

 private:
  std::shared_ptr<ChatTransport> transport_;
  ClientConfig config_;
};

/// Refinement loop against a chat model. Each query is one iteration.
/// Unusable responses count as irrelevant and are followed by a corrective
/// back-prompt; usable plans are simulated and their quality is fed back.
/// Stops on the first plan that passes the safety gate (stop_reason safe) or
/// when the budget is spent (stop_reason budget, best-effort plan returned).
/// Throws PlannerFailure carrying the partial log when the endpoint keeps
/// failing after config.max_retries.
[[nodiscard]] RefinementResult llm_refine(const PlanContext& context, ChatTransport& transport,
                                          const ClientConfig& config, int budget);

}  // namespace aidtwin::llm
