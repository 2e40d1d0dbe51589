#include "aidtwin/evaluate.hpp"

namespace aidtwin {

PlanEvaluation evaluate_plan(const PatientParams& params, const UsagePlan& plan,
                             const Scenario& scenario, const stl::Formula& spec,
                             const EvaluationOptions& options) {
  PlanEvaluation out;
  out.trace = simulate(params, plan, scenario, options.simulation);
  const double rho = stl::robustness(spec, out.trace, out.trace.t0);
  const auto metrics = glycemic_metrics(out.trace, options.band_low, options.band_high);
  out.quality = make_quality(metrics, rho, options.weights);
  return out;
}

}  // namespace aidtwin
