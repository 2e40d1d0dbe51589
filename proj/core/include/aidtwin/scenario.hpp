#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace aidtwin {

struct MealEvent {
  double time = 0.0;   // min
  double carbs = 0.0;  // g

  friend bool operator==(const MealEvent&, const MealEvent&) = default;
};

struct ExerciseBout {
  double start = 0.0;      // min
  double duration = 0.0;   // min
  double intensity = 0.0;  // [0, 1]

  friend bool operator==(const ExerciseBout&, const ExerciseBout&) = default;
};

/// What happens to the patient regardless of the plan: carbohydrates eaten
/// (without an announcement to the pump) and exercise.
struct Scenario {
  std::vector<MealEvent> meals;
  std::vector<ExerciseBout> exercise;
  double horizon = 0.0;  // min

  friend bool operator==(const Scenario&, const Scenario&) = default;
};

/// Length of the linear decay of the exercise effect after a bout ends.
inline constexpr double kExerciseWashoutMinutes = 60.0;

[[nodiscard]] std::vector<std::string> validate(const Scenario& scenario);
void require_valid(const Scenario& scenario);

/// Exercise intensity in effect at t: the bout intensity during the bout,
/// decaying linearly to zero over the washout. Overlapping bouts take the max.
[[nodiscard]] double exercise_intensity(const Scenario& scenario, double t);

/// Parses scenario records:
///
///   horizon <min>
///   meal <time_min> carbs=<g>
///   exercise <start_min> <duration_min> intensity=<0..1>
///
/// Events are sorted by time. Throws Error(invalid-scenario) on any violation.
[[nodiscard]] Scenario parse_scenario(std::string_view text);
[[nodiscard]] std::string serialize_scenario(const Scenario& scenario);

}  // namespace aidtwin
