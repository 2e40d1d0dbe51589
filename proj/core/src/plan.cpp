#include "aidtwin/plan.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "aidtwin/error.hpp"
#include "aidtwin/records.hpp"
#include "aidtwin/units.hpp"

namespace aidtwin {

namespace {

using records::format_number;

constexpr double kTargetMin = 70.0;
constexpr double kTargetMax = 200.0;
constexpr double kTimeEps = 1e-9;

int kind_rank(ActionKind k) { return static_cast<int>(k); }

bool action_less(const PlanAction& a, const PlanAction& b) {
  if (a.time != b.time) return a.time < b.time;
  if (a.kind != b.kind) return kind_rank(a.kind) < kind_rank(b.kind);
  return a.amount < b.amount;
}

std::string where(int line) { return line > 0 ? "line " + std::to_string(line) + ": " : ""; }

// Shared structural checks. Line vectors are optional (empty for plans built
// in code) and, when given, are parallel to the plan's segment/action lists.
void check_structure(const UsagePlan& plan, const std::vector<int>& seg_lines,
                     const std::vector<int>& act_lines, std::vector<std::string>& issues) {
  auto seg_line = [&](std::size_t i) { return i < seg_lines.size() ? seg_lines[i] : 0; };
  auto act_line = [&](std::size_t i) { return i < act_lines.size() ? act_lines[i] : 0; };

  for (std::size_t i = 0; i < plan.segments.size(); ++i) {
    const auto& s = plan.segments[i];
    const auto at = where(seg_line(i)) + "segment [" + format_number(s.start) + ", " +
                    format_number(s.end) + "): ";
    if (!(s.end > s.start)) issues.push_back(at + "end must be greater than start");
    if (s.start < 0) issues.push_back(at + "start must be >= 0");
    if (!(s.basal >= 0)) issues.push_back(at + "basal must be >= 0");
    if (!(s.isf > 0)) issues.push_back(at + "isf must be > 0");
    if (!(s.cr > 0)) issues.push_back(at + "cr must be > 0");
    if (!(s.target >= kTargetMin && s.target <= kTargetMax)) {
      issues.push_back(at + "target must lie in [70, 200] mg/dL");
    }
  }

  if (plan.segments.empty()) {
    issues.emplace_back("plan has no segments");
  } else {
    std::vector<std::size_t> order(plan.segments.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return plan.segments[a].start < plan.segments[b].start;
    });
    const auto& first = plan.segments[order.front()];
    if (first.start > 0.0) {
      issues.push_back(where(seg_line(order.front())) + "coverage gap [0, " +
                       format_number(first.start) + ") min: first segment must start at 0");
    }
    for (std::size_t k = 1; k < order.size(); ++k) {
      const auto& prev = plan.segments[order[k - 1]];
      const auto& cur = plan.segments[order[k]];
      const auto lines = seg_line(order[k - 1]) > 0
                             ? "lines " + std::to_string(seg_line(order[k - 1])) + " and " +
                                   std::to_string(seg_line(order[k])) + ": "
                             : std::string{};
      if (cur.start > prev.end + kTimeEps) {
        issues.push_back(lines + "coverage gap [" + format_number(prev.end) + ", " +
                         format_number(cur.start) + ") min between segments");
      } else if (cur.start < prev.end - kTimeEps) {
        issues.push_back(lines + "segments overlap on [" + format_number(cur.start) + ", " +
                         format_number(std::min(prev.end, cur.end)) + ") min");
      }
    }
  }

  const double horizon =
      plan.segments.empty()
          ? 0.0
          : std::max_element(plan.segments.begin(), plan.segments.end(),
                             [](const auto& a, const auto& b) { return a.end < b.end; })
                ->end;
  for (std::size_t i = 0; i < plan.actions.size(); ++i) {
    const auto& a = plan.actions[i];
    const auto at = where(act_line(i)) + std::string(action_keyword(a.kind)) + " at " +
                    format_number(a.time) + " min: ";
    if (!(a.amount > 0)) {
      issues.push_back(at + (a.kind == ActionKind::bolus ? "units" : "carbs") + " must be > 0");
    }
    if (a.time < 0 || a.time > horizon + kTimeEps) {
      issues.push_back(at + "time outside plan horizon [0, " + format_number(horizon) + "]");
    }
  }

  if (plan.suspend_threshold && !(*plan.suspend_threshold > 0)) {
    issues.emplace_back("suspend threshold must be > 0");
  }
  if (plan.initial_glucose && !(*plan.initial_glucose > 0)) {
    issues.emplace_back("initial glucose must be > 0");
  }
}

std::optional<double> take_number(const records::Record& rec, const std::string& key,
                                  std::vector<std::string>& issues) {
  auto it = rec.named.find(key);
  if (it == rec.named.end()) {
    issues.push_back(where(rec.line) + rec.keyword + ": missing " + key + "=");
    return std::nullopt;
  }
  auto v = records::parse_number(it->second);
  if (!v) issues.push_back(where(rec.line) + rec.keyword + ": " + key + " is not a number");
  return v;
}

std::optional<double> take_positional(const records::Record& rec, std::size_t index,
                                      const char* what, std::vector<std::string>& issues) {
  if (index >= rec.positional.size()) {
    issues.push_back(where(rec.line) + rec.keyword + ": missing " + what);
    return std::nullopt;
  }
  auto v = records::parse_number(rec.positional[index]);
  if (!v) issues.push_back(where(rec.line) + rec.keyword + ": " + what + " is not a number");
  return v;
}

void check_arity(const records::Record& rec, std::size_t positional,
                 std::initializer_list<const char*> keys, std::vector<std::string>& issues) {
  if (rec.positional.size() > positional) {
    issues.push_back(where(rec.line) + rec.keyword + ": unexpected field '" +
                     rec.positional[positional] + "'");
  }
  for (const auto& [k, v] : rec.named) {
    if (std::find_if(keys.begin(), keys.end(), [&](const char* key) { return k == key; }) ==
        keys.end()) {
      issues.push_back(where(rec.line) + rec.keyword + ": unknown key '" + k + "'");
    }
  }
}

}  // namespace

std::string_view action_keyword(ActionKind kind) {
  switch (kind) {
    case ActionKind::meal: return "meal";
    case ActionKind::snack: return "snack";
    case ActionKind::bolus: return "bolus";
  }
  return "?";
}

double bolus_dose(double carbs, double glucose, const ConfigSegment& segment) {
  const double correction = std::max(0.0, (glucose - segment.target) / segment.isf);
  return carbs / segment.cr + correction;
}

const ConfigSegment& active_segment(const UsagePlan& plan, double t) {
  const auto& segs = plan.segments;
  // First segment whose end is beyond t.
  auto it = std::upper_bound(segs.begin(), segs.end(), t,
                             [](double time, const ConfigSegment& s) { return time < s.end; });
  if (it != segs.end() && it->start <= t) return *it;
  if (!segs.empty() && std::abs(t - segs.back().end) <= kTimeEps) return segs.back();
  throw Error(errc::plan_coverage, "no plan segment covers t=" + format_number(t) + " min");
}

InsulinInput insulin_input(const UsagePlan& plan, double t, double glucose, double window) {
  const auto& seg = active_segment(plan, t);
  InsulinInput out;
  const bool suspended = plan.suspend_threshold && glucose < *plan.suspend_threshold;
  out.basal_milliunits_per_min =
      suspended ? 0.0 : units::units_per_hour_to_milliunits_per_min(seg.basal);

  auto in_window = [&](double time) {
    return window > 0.0 ? (time >= t && time < t + window) : time == t;
  };
  for (const auto& a : plan.actions) {
    if (!in_window(a.time)) continue;
    if (a.kind == ActionKind::bolus) {
      out.boluses.push_back({a.time, a.amount, BolusSource::manual});
    } else if (a.kind == ActionKind::meal) {
      out.boluses.push_back({a.time, bolus_dose(a.amount, glucose, seg), BolusSource::meal});
    }
  }
  return out;
}

UsagePlan canonicalize(UsagePlan plan) {
  std::stable_sort(plan.segments.begin(), plan.segments.end(),
                   [](const auto& a, const auto& b) { return a.start < b.start; });
  std::stable_sort(plan.actions.begin(), plan.actions.end(), action_less);
  return plan;
}

std::vector<std::string> validate(const UsagePlan& plan) {
  std::vector<std::string> issues;
  check_structure(plan, {}, {}, issues);
  return issues;
}

std::vector<std::string> lint(const UsagePlan& plan) {
  std::vector<std::string> warnings;
  for (const auto& s : plan.segments) {
    if (s.cr < 2.0 || s.cr > 30.0) {
      warnings.push_back("segment at " + format_number(s.start) + " min: cr=" +
                         format_number(s.cr) + " g/U is outside the usual range [2, 30]");
    }
  }
  return warnings;
}

UsagePlan parse_plan(std::string_view text) {
  UsagePlan plan;
  std::vector<std::string> issues;
  std::vector<int> seg_lines;
  std::vector<int> act_lines;
  int suspend_line = 0;
  int initial_line = 0;

  for (const auto& rec : records::split_records(text)) {
    if (rec.keyword == "segment") {
      check_arity(rec, 2, {"basal", "isf", "cr", "target"}, issues);
      auto start = take_positional(rec, 0, "start", issues);
      auto end = take_positional(rec, 1, "end", issues);
      auto basal = take_number(rec, "basal", issues);
      auto isf = take_number(rec, "isf", issues);
      auto cr = take_number(rec, "cr", issues);
      auto target = take_number(rec, "target", issues);
      if (start && end && basal && isf && cr && target) {
        plan.segments.push_back({*start, *end, *basal, *isf, *cr, *target});
        seg_lines.push_back(rec.line);
      }
    } else if (rec.keyword == "meal" || rec.keyword == "snack" || rec.keyword == "bolus") {
      const bool is_bolus = rec.keyword == "bolus";
      const char* key = is_bolus ? "units" : "carbs";
      check_arity(rec, 1, {key}, issues);
      auto time = take_positional(rec, 0, "time", issues);
      auto amount = take_number(rec, key, issues);
      if (time && amount) {
        const auto kind = is_bolus                  ? ActionKind::bolus
                          : rec.keyword == "meal" ? ActionKind::meal
                                                  : ActionKind::snack;
        plan.actions.push_back({*time, kind, *amount});
        act_lines.push_back(rec.line);
      }
    } else if (rec.keyword == "suspend") {
      check_arity(rec, 1, {}, issues);
      if (suspend_line > 0) {
        issues.push_back(where(rec.line) + "suspend given more than once (first on line " +
                         std::to_string(suspend_line) + ")");
      }
      suspend_line = rec.line;
      if (auto v = take_positional(rec, 0, "threshold", issues)) plan.suspend_threshold = *v;
    } else if (rec.keyword == "initial") {
      check_arity(rec, 1, {}, issues);
      if (initial_line > 0) {
        issues.push_back(where(rec.line) + "initial given more than once (first on line " +
                         std::to_string(initial_line) + ")");
      }
      initial_line = rec.line;
      if (auto v = take_positional(rec, 0, "glucose", issues)) plan.initial_glucose = *v;
    } else {
      issues.push_back(where(rec.line) + "unknown record '" + rec.keyword + "'");
    }
  }

  check_structure(plan, seg_lines, act_lines, issues);
  if (!issues.empty()) {
    throw Error(errc::plan_validation,
                "plan has " + std::to_string(issues.size()) + " violation(s): " + issues.front(),
                issues);
  }
  return canonicalize(std::move(plan));
}

std::string serialize_plan(const UsagePlan& input) {
  const auto plan = canonicalize(input);
  std::ostringstream os;
  for (const auto& s : plan.segments) {
    os << "segment " << format_number(s.start) << ' ' << format_number(s.end)
       << " basal=" << format_number(s.basal) << " isf=" << format_number(s.isf)
       << " cr=" << format_number(s.cr) << " target=" << format_number(s.target) << '\n';
  }
  if (plan.suspend_threshold) os << "suspend " << format_number(*plan.suspend_threshold) << '\n';
  if (plan.initial_glucose) os << "initial " << format_number(*plan.initial_glucose) << '\n';
  for (const auto& a : plan.actions) {
    os << action_keyword(a.kind) << ' ' << format_number(a.time)
       << (a.kind == ActionKind::bolus ? " units=" : " carbs=") << format_number(a.amount)
       << '\n';
  }
  return os.str();
}

UsagePlan constant_plan(const ConfigSegment& settings, double horizon) {
  UsagePlan plan;
  auto seg = settings;
  seg.start = 0.0;
  seg.end = horizon;
  plan.segments.push_back(seg);
  return plan;
}

}  // namespace aidtwin
