#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace aidtwin {

// Stable, machine-readable error codes. These strings appear on the wire
// (service error bodies, CLI stderr) and must not change casually.
namespace errc {
inline constexpr std::string_view invalid_state = "invalid-state";
inline constexpr std::string_view invalid_params = "invalid-params";
inline constexpr std::string_view invalid_scenario = "invalid-scenario";
inline constexpr std::string_view divergence = "divergence";
inline constexpr std::string_view plan_coverage = "plan-coverage";
inline constexpr std::string_view plan_validation = "plan-validation";
inline constexpr std::string_view parse_error = "parse-error";
inline constexpr std::string_view insufficient_horizon = "insufficient-horizon";
inline constexpr std::string_view invalid_band = "invalid-band";
inline constexpr std::string_view invalid_argument = "invalid-argument";
inline constexpr std::string_view record_too_short = "record-too-short";
inline constexpr std::string_view non_finite_objective = "non-finite-objective";
inline constexpr std::string_view all_starts_diverged = "all-starts-diverged";
inline constexpr std::string_view infeasible_context = "infeasible-context";
inline constexpr std::string_view planner_failure = "planner-failure";
inline constexpr std::string_view io_error = "io-error";
inline constexpr std::string_view not_found = "not-found";
inline constexpr std::string_view twin_not_found = "twin-not-found";
inline constexpr std::string_view job_not_found = "job-not-found";
inline constexpr std::string_view decision_not_found = "decision-not-found";
inline constexpr std::string_view method_not_allowed = "method-not-allowed";
}  // namespace errc

/// Base exception for every failure raised by the library. Carries a stable
/// code and an optional list of detail lines (e.g. one per validation issue).
class Error : public std::runtime_error {
 public:
  Error(std::string_view code, const std::string& message,
        std::vector<std::string> details = {})
      : std::runtime_error(message), code_(code), details_(std::move(details)) {}

  [[nodiscard]] const std::string& code() const noexcept { return code_; }
  [[nodiscard]] const std::vector<std::string>& details() const noexcept {
    return details_;
  }

 private:
  std::string code_;
  std::vector<std::string> details_;
};

}  // namespace aidtwin
