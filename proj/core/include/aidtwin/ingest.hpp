#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "aidtwin/trace.hpp"

namespace aidtwin {

/// An event or rate change at `time` minutes after the record origin.
struct TimedValue {
  double time = 0.0;
  double value = 0.0;

  friend bool operator==(const TimedValue&, const TimedValue&) = default;
};

/// Normal device usage data: CGM on a uniform grid and pump/meal logs, all
/// timed in minutes relative to the first CGM sample.
struct UsageRecord {
  GlucoseTrace cgm;                 // t0 = 0, dt = grid
  std::vector<TimedValue> basal;    // U/h, each rate holds until the next entry
  std::vector<TimedValue> boluses;  // U
  std::vector<TimedValue> meals;    // g
  std::int64_t origin_epoch = 0;    // UTC seconds of cgm sample 0

  [[nodiscard]] double duration() const { return cgm.end_time() - cgm.t0; }

  friend bool operator==(const UsageRecord&, const UsageRecord&) = default;
};

struct CgmLoadOptions {
  double grid_minutes = 5.0;
  double max_gap_minutes = 30.0;  // longer gaps split the record
};

struct CgmSeries {
  GlucoseTrace trace;  // t0 = 0
  std::int64_t origin_epoch = 0;
  std::vector<std::string> warnings;
};

struct PumpEvent {
  std::int64_t epoch = 0;
  double value = 0.0;
};

struct PumpLog {
  std::vector<PumpEvent> basal;  // U/h
  std::vector<PumpEvent> bolus;  // U
  std::vector<PumpEvent> meal;   // g
};

/// ISO-8601 UTC timestamp ("2024-03-01T08:05:00Z", optional fraction, 'Z',
/// "+00:00" or no zone) to Unix seconds. Throws Error(parse-error).
[[nodiscard]] std::int64_t parse_timestamp(std::string_view text);
[[nodiscard]] std::string format_timestamp(std::int64_t epoch);

/// CSV with header `timestamp,glucose_mgdl`. Rows are sorted, equal
/// timestamps deduplicated (last row wins), samples snapped to the nearest
/// grid slot, gaps up to max_gap linearly interpolated. When a longer gap
/// splits the record the longest contiguous segment is returned and a
/// warning lists each discarded span.
[[nodiscard]] CgmSeries parse_cgm_csv(std::string_view text, const CgmLoadOptions& options = {});
[[nodiscard]] CgmSeries load_cgm(const std::filesystem::path& path,
                                 const CgmLoadOptions& options = {});

/// CSV with header `timestamp,kind,value`, kind one of basal (U/h), bolus
/// (U), meal (g). Throws on unknown kinds or negative values, naming the line.
[[nodiscard]] PumpLog parse_pump_csv(std::string_view text);
[[nodiscard]] PumpLog load_pump(const std::filesystem::path& path);

/// Aligns pump events to the CGM origin. The last basal rate set before the
/// origin becomes the rate at time 0; events outside the CGM span are dropped.
[[nodiscard]] UsageRecord make_usage_record(const CgmSeries& cgm, const PumpLog& pump);

[[nodiscard]] std::string write_cgm_csv(const GlucoseTrace& trace, std::int64_t origin_epoch);
[[nodiscard]] std::string write_pump_csv(const UsageRecord& record);

[[nodiscard]] std::string read_text_file(const std::filesystem::path& path);

}  // namespace aidtwin
