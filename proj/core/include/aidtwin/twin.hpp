#pragma once

#include <optional>
#include <vector>

#include "aidtwin/params.hpp"
#include "aidtwin/plan.hpp"
#include "aidtwin/scenario.hpp"
#include "aidtwin/trace.hpp"

namespace aidtwin {

/// Instantaneous physiological state of the twin.
struct TwinState {
  double G = 0.0;   // plasma glucose, mg/dL
  double X = 0.0;   // remote insulin action, 1/min
  double I = 0.0;   // plasma insulin, uU/mL
  double Q1 = 0.0;  // gut compartment 1, mg carbohydrate
  double Q2 = 0.0;  // gut compartment 2, mg carbohydrate
  double t = 0.0;   // min

  friend bool operator==(const TwinState&, const TwinState&) = default;
};

struct StateRate {
  double dG = 0.0;
  double dX = 0.0;
  double dI = 0.0;
  double dQ1 = 0.0;
  double dQ2 = 0.0;
};

/// Basal steady state: G = Gb, X = 0, I = Ib, empty gut.
[[nodiscard]] TwinState equilibrium_state(const PatientParams& params);

/// Right-hand side of the extended minimal model:
///
///   dG/dt  = -(p1 (1 + alpha_ex e) + X) G + p1 Gb + f_bio k_abs Q2 / Vg
///   dX/dt  = -p2 X + p3 (I - Ib)
///   dI/dt  = -n I + u / Vi
///   dQ1/dt = -k_emp Q1
///   dQ2/dt =  k_emp Q1 - k_abs Q2
///
/// with insulin input u in mU/min and exercise intensity e in [0, 1].
/// Throws Error(invalid-state) on any non-finite input.
[[nodiscard]] StateRate derivatives(const TwinState& state, const PatientParams& params,
                                    double insulin_input, double exercise_intensity);

/// One classical RK4 step of length dt in (0, 5] with inputs held constant.
/// X is clamped at 0 after the update. Throws Error(invalid-state) on a
/// non-finite input and Error(divergence) when the result has non-finite
/// components (all listed in details()) or non-positive glucose.
[[nodiscard]] TwinState step(const TwinState& state, const PatientParams& params,
                             double insulin_input, double exercise_intensity, double dt);

struct SimulationOptions {
  double dt = 1.0;               // integrator step, min
  double sample_interval = 5.0;  // output cadence, min; a multiple of dt
  std::optional<TwinState> initial;  // overrides the plan's initial glucose
};

struct Simulation {
  GlucoseTrace trace;
  std::vector<TwinState> states;  // full state at each output sample
};

/// Steps the twin over [0, scenario.horizon] under the plan.
///
/// The start state is options.initial when given; otherwise the basal
/// equilibrium, with glucose replaced by the plan's initial glucose if set.
/// For each integrator step [t, t + dt): scenario meals and plan snacks in the
/// window add 1000*carbs mg to Q1, plan boluses (manual and meal-calculator)
/// are injected into plasma insulin, and basal comes from the active plan
/// segment, suspended while glucose is below the plan threshold. The exercise
/// intensity is evaluated at every RK stage so that washout ramps integrate to
/// full order. Deterministic: identical inputs give bit-identical output.
[[nodiscard]] Simulation simulate_detailed(const PatientParams& params, const UsagePlan& plan,
                                           const Scenario& scenario,
                                           const SimulationOptions& options = {});

[[nodiscard]] GlucoseTrace simulate(const PatientParams& params, const UsagePlan& plan,
                                    const Scenario& scenario,
                                    const SimulationOptions& options = {});

}  // namespace aidtwin
