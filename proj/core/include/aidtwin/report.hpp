#pragma once

#include <string>
#include <string_view>

#include "aidtwin/metrics.hpp"
#include "aidtwin/trace.hpp"

namespace aidtwin {

/// Trace as CSV with header `t_min,glucose_mgdl,insulin_U`.
[[nodiscard]] std::string write_trace_csv(const GlucoseTrace& trace);
/// Inverse of write_trace_csv. Rows must be uniformly spaced in time.
/// Throws Error(parse-error) naming the offending line.
[[nodiscard]] GlucoseTrace parse_trace_csv(std::string_view text);

struct ChartOptions {
  int width = 800;
  int height = 360;
  double band_low = kTargetRangeLow;
  double band_high = kTargetRangeHigh;
  std::string title = "Glucose";
};

/// Static SVG line chart of the glucose trace over a shaded target band.
[[nodiscard]] std::string render_svg(const GlucoseTrace& trace, const ChartOptions& options = {});

}  // namespace aidtwin
