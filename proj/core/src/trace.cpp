#include "aidtwin/trace.hpp"

#include <cmath>

#include "aidtwin/error.hpp"

namespace aidtwin {

std::vector<std::string> validate(const GlucoseTrace& trace) {
  std::vector<std::string> issues;
  if (!(trace.dt > 0.0) || !std::isfinite(trace.dt)) issues.emplace_back("dt must be > 0");
  if (!std::isfinite(trace.t0)) issues.emplace_back("t0 must be finite");
  if (trace.samples.empty()) issues.emplace_back("trace has no samples");
  for (std::size_t i = 0; i < trace.samples.size(); ++i) {
    if (!std::isfinite(trace.samples[i])) {
      issues.push_back("sample " + std::to_string(i) + " is not finite");
      break;
    }
  }
  if (!trace.insulin_delivered.empty() &&
      trace.insulin_delivered.size() != trace.samples.size()) {
    issues.emplace_back("insulin_delivered is not aligned with samples");
  }
  return issues;
}

void require_valid(const GlucoseTrace& trace) {
  auto issues = validate(trace);
  if (!issues.empty()) {
    throw Error(errc::invalid_argument, "invalid trace: " + issues.front(), issues);
  }
}

}  // namespace aidtwin
