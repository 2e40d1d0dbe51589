#include "aidtwin/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "aidtwin/error.hpp"
#include "aidtwin/records.hpp"

namespace aidtwin {

using records::format_number;

std::vector<std::string> validate(const Scenario& s) {
  std::vector<std::string> issues;
  if (!(s.horizon > 0) || !std::isfinite(s.horizon)) issues.emplace_back("horizon must be > 0");
  for (const auto& m : s.meals) {
    const auto at = "meal at " + format_number(m.time) + " min: ";
    if (!(m.carbs > 0)) issues.push_back(at + "carbs must be > 0");
    if (m.time < 0 || m.time > s.horizon) issues.push_back(at + "outside [0, horizon]");
  }
  for (const auto& e : s.exercise) {
    const auto at = "exercise at " + format_number(e.start) + " min: ";
    if (!(e.duration > 0)) issues.push_back(at + "duration must be > 0");
    if (!(e.intensity >= 0 && e.intensity <= 1)) issues.push_back(at + "intensity must lie in [0, 1]");
    if (e.start < 0 || e.start > s.horizon) issues.push_back(at + "outside [0, horizon]");
  }
  if (!std::is_sorted(s.meals.begin(), s.meals.end(),
                      [](const auto& a, const auto& b) { return a.time < b.time; })) {
    issues.emplace_back("meals are not sorted by time");
  }
  if (!std::is_sorted(s.exercise.begin(), s.exercise.end(),
                      [](const auto& a, const auto& b) { return a.start < b.start; })) {
    issues.emplace_back("exercise bouts are not sorted by time");
  }
  return issues;
}

void require_valid(const Scenario& scenario) {
  auto issues = validate(scenario);
  if (!issues.empty()) {
    throw Error(errc::invalid_scenario, "invalid scenario: " + issues.front(), issues);
  }
}

double exercise_intensity(const Scenario& scenario, double t) {
  double level = 0.0;
  for (const auto& e : scenario.exercise) {
    const double end = e.start + e.duration;
    if (t >= e.start && t < end) {
      level = std::max(level, e.intensity);
    } else if (t >= end && t < end + kExerciseWashoutMinutes) {
      level = std::max(level, e.intensity * (1.0 - (t - end) / kExerciseWashoutMinutes));
    }
  }
  return level;
}

Scenario parse_scenario(std::string_view text) {
  Scenario s;
  bool have_horizon = false;
  std::vector<std::string> issues;
  auto at = [](const records::Record& r) { return "line " + std::to_string(r.line) + ": "; };
  auto num = [&](const records::Record& r, const std::string& tok, const char* what) {
    auto v = records::parse_number(tok);
    if (!v) issues.push_back(at(r) + r.keyword + ": " + what + " is not a number");
    return v;
  };

  for (const auto& r : records::split_records(text)) {
    if (r.keyword == "horizon" && r.positional.size() == 1 && r.named.empty()) {
      if (auto v = num(r, r.positional[0], "horizon")) {
        s.horizon = *v;
        have_horizon = true;
      }
    } else if (r.keyword == "meal" && r.positional.size() == 1 && r.named.size() == 1 &&
               r.named.count("carbs")) {
      auto t = num(r, r.positional[0], "time");
      auto c = num(r, r.named.at("carbs"), "carbs");
      if (t && c) s.meals.push_back({*t, *c});
    } else if (r.keyword == "exercise" && r.positional.size() == 2 && r.named.size() == 1 &&
               r.named.count("intensity")) {
      auto t = num(r, r.positional[0], "start");
      auto d = num(r, r.positional[1], "duration");
      auto i = num(r, r.named.at("intensity"), "intensity");
      if (t && d && i) s.exercise.push_back({*t, *d, *i});
    } else {
      issues.push_back(at(r) + "malformed or unknown scenario record '" + r.keyword + "'");
    }
  }
  if (!have_horizon) issues.emplace_back("missing 'horizon' record");
  std::stable_sort(s.meals.begin(), s.meals.end(),
                   [](const auto& a, const auto& b) { return a.time < b.time; });
  std::stable_sort(s.exercise.begin(), s.exercise.end(),
                   [](const auto& a, const auto& b) { return a.start < b.start; });
  if (issues.empty()) {
    issues = validate(s);
  }
  if (!issues.empty()) {
    throw Error(errc::invalid_scenario, "invalid scenario: " + issues.front(), issues);
  }
  return s;
}

std::string serialize_scenario(const Scenario& s) {
  std::ostringstream os;
  os << "horizon " << format_number(s.horizon) << '\n';
  for (const auto& m : s.meals) {
    os << "meal " << format_number(m.time) << " carbs=" << format_number(m.carbs) << '\n';
  }
  for (const auto& e : s.exercise) {
    os << "exercise " << format_number(e.start) << ' ' << format_number(e.duration)
       << " intensity=" << format_number(e.intensity) << '\n';
  }
  return os.str();
}

}  // namespace aidtwin
