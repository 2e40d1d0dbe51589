#pragma once

#include "aidtwin/trace.hpp"

namespace aidtwin {

/// Consensus glycemic target range and goal (70-180 mg/dL for >= 70% of the day).
inline constexpr double kTargetRangeLow = 70.0;
inline constexpr double kTargetRangeHigh = 180.0;
inline constexpr double kTimeInRangeGoal = 0.70;

inline constexpr double kHypoThreshold = 70.0;
inline constexpr double kSevereHypoThreshold = 54.0;
inline constexpr double kEpisodeMinMinutes = 15.0;

struct GlycemicMetrics {
  double tir = 0.0;  // fraction of samples with lo <= G <= hi
  double tar = 0.0;  // fraction with G > hi
  double tbr = 0.0;  // fraction with G < lo
  double mean_glucose = 0.0;
  int hypo_episodes = 0;         // runs below 70 lasting >= 15 min
  int severe_hypo_episodes = 0;  // runs below 54 lasting >= 15 min
};

/// Metric bundle plus STL robustness and the scalar score fed back to planners.
struct PlanQuality {
  double robustness = 0.0;
  double tir = 0.0;
  double tar = 0.0;
  double tbr = 0.0;
  double mean_glucose = 0.0;
  int hypo_episodes = 0;
  int severe_hypo_episodes = 0;
  double score = 0.0;

  [[nodiscard]] bool safe() const { return robustness >= 0.0; }
};

/// A run of k consecutive samples spans (k - 1) * dt minutes. Throws
/// Error(invalid-band) when lo >= hi.
[[nodiscard]] GlycemicMetrics glycemic_metrics(const GlucoseTrace& trace,
                                               double lo = kTargetRangeLow,
                                               double hi = kTargetRangeHigh);

struct ScoreWeights {
  double tir = 100.0;
  double robustness = 1.0;
  double robustness_cap = 50.0;
  double unsafe_penalty = 100.0;  // multiplies a negative robustness
};

/// tir_weight*tir + rho_weight*min(rho, cap) when rho >= 0; penalty*rho otherwise.
/// Every unsafe score is negative and every safe score is >= 0.
[[nodiscard]] double quality_score(const GlycemicMetrics& metrics, double robustness,
                                   const ScoreWeights& weights = {});

[[nodiscard]] PlanQuality make_quality(const GlycemicMetrics& metrics, double robustness,
                                       const ScoreWeights& weights = {});

}  // namespace aidtwin
