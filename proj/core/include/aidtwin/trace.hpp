#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace aidtwin {

/// Uniformly sampled glucose signal. insulin_delivered[i] is the insulin (U)
/// delivered during [time(i), time(i+1)); the final entry is always 0.
struct GlucoseTrace {
  double t0 = 0.0;  // min
  double dt = 5.0;  // min
  std::vector<double> samples;            // mg/dL
  std::vector<double> insulin_delivered;  // U per interval

  [[nodiscard]] std::size_t size() const { return samples.size(); }
  [[nodiscard]] double time(std::size_t i) const { return t0 + static_cast<double>(i) * dt; }
  [[nodiscard]] double end_time() const {
    return samples.empty() ? t0 : time(samples.size() - 1);
  }

  friend bool operator==(const GlucoseTrace&, const GlucoseTrace&) = default;
};

/// Every violated invariant (dt > 0, non-empty, finite samples, aligned insulin).
[[nodiscard]] std::vector<std::string> validate(const GlucoseTrace& trace);
void require_valid(const GlucoseTrace& trace);

}  // namespace aidtwin
