#pragma once

#include "aidtwin/metrics.hpp"
#include "aidtwin/stl.hpp"
#include "aidtwin/twin.hpp"

namespace aidtwin {

struct EvaluationOptions {
  SimulationOptions simulation;
  ScoreWeights weights;
  double band_low = kTargetRangeLow;
  double band_high = kTargetRangeHigh;
};

struct PlanEvaluation {
  GlucoseTrace trace;
  PlanQuality quality;
};

/// Forward-simulates the plan on the twin and scores the resulting trace:
/// robustness of the safety spec at t = 0, glycemic metrics, and the score.
[[nodiscard]] PlanEvaluation evaluate_plan(const PatientParams& params, const UsagePlan& plan,
                                           const Scenario& scenario, const stl::Formula& spec,
                                           const EvaluationOptions& options = {});

}  // namespace aidtwin
