#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace aidtwin {

/// AID configuration active over [start, end) minutes.
struct ConfigSegment {
  double start = 0.0;   // min
  double end = 0.0;     // min
  double basal = 0.0;   // U/h
  double isf = 50.0;    // mg/dL per U
  double cr = 10.0;     // g per U
  double target = 120;  // mg/dL

  friend bool operator==(const ConfigSegment&, const ConfigSegment&) = default;
};

enum class ActionKind {
  meal,   // announced meal: the bolus calculator doses for it
  snack,  // carbohydrate taken without a bolus (e.g. pre-exercise)
  bolus,  // manual bolus, delivered verbatim
};

struct PlanAction {
  double time = 0.0;    // min
  ActionKind kind = ActionKind::bolus;
  double amount = 0.0;  // g for meal/snack, U for bolus

  friend bool operator==(const PlanAction&, const PlanAction&) = default;
};

/// Time-aligned AID settings plus discrete user actions over [0, horizon].
struct UsagePlan {
  std::vector<ConfigSegment> segments;
  std::vector<PlanAction> actions;
  std::optional<double> suspend_threshold;  // mg/dL; basal stops below it
  std::optional<double> initial_glucose;    // mg/dL at t = 0; basal equilibrium otherwise

  [[nodiscard]] double horizon() const { return segments.empty() ? 0.0 : segments.back().end; }

  friend bool operator==(const UsagePlan&, const UsagePlan&) = default;
};

[[nodiscard]] std::string_view action_keyword(ActionKind kind);

/// Standard bolus calculator: carbs/cr + max(0, (glucose - target)/isf), in U.
[[nodiscard]] double bolus_dose(double carbs, double glucose, const ConfigSegment& segment);

/// Segment active at t. The horizon end maps to the last segment.
/// Throws Error(plan-coverage) when no segment covers t.
[[nodiscard]] const ConfigSegment& active_segment(const UsagePlan& plan, double t);

enum class BolusSource { manual, meal };

struct BolusEvent {
  double time = 0.0;
  double units = 0.0;
  BolusSource source = BolusSource::manual;
};

/// Pump command for the interval [t, t + window).
struct InsulinInput {
  double basal_milliunits_per_min = 0.0;  // continuous model input
  std::vector<BolusEvent> boluses;        // discrete events in the window
};

/// Turns the plan into pump commands at time t given the current glucose.
/// Basal is suspended while glucose is below the plan's suspend threshold.
/// Bolus events whose time lies in [t, t + window) are emitted; with
/// window == 0 only events exactly at t are emitted.
[[nodiscard]] InsulinInput insulin_input(const UsagePlan& plan, double t, double glucose,
                                         double window = 0.0);

/// Sorted segments and time-sorted actions (meal, snack, bolus order on ties).
[[nodiscard]] UsagePlan canonicalize(UsagePlan plan);

/// Every structural violation of the plan invariants. Empty when valid.
[[nodiscard]] std::vector<std::string> validate(const UsagePlan& plan);

/// Non-fatal warnings, e.g. a carbohydrate ratio outside the usual clinical range.
[[nodiscard]] std::vector<std::string> lint(const UsagePlan& plan);

/// Parses the plan text format:
///
///   segment <start_min> <end_min> basal=<U/h> isf=<mg/dL/U> cr=<g/U> target=<mg/dL>
///   meal <time_min> carbs=<g>
///   snack <time_min> carbs=<g>
///   bolus <time_min> units=<U>
///   suspend <mg/dL>
///   initial <mg/dL>
///
/// Throws Error(plan-validation) whose details list every violation with its
/// line number. The result is canonical.
[[nodiscard]] UsagePlan parse_plan(std::string_view text);

/// Canonical text form; parse_plan(serialize_plan(p)) == canonicalize(p).
[[nodiscard]] std::string serialize_plan(const UsagePlan& plan);

/// Single segment [0, horizon) carrying the given settings, no actions.
[[nodiscard]] UsagePlan constant_plan(const ConfigSegment& settings, double horizon);

}  // namespace aidtwin
