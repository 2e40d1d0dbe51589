#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <span>
#include <vector>

#include "aidtwin/ingest.hpp"
#include "aidtwin/params.hpp"
#include "aidtwin/twin.hpp"

namespace aidtwin {

struct ParamBox {
  double lo = 0.0;
  double hi = 0.0;
};

using ParamBounds = std::map<Param, ParamBox>;

/// Parameters fitted by default; volumes, gut rates and basal levels stay fixed.
inline constexpr std::array<Param, 5> kDefaultFreeParams = {Param::p1, Param::p2, Param::p3,
                                                            Param::n, Param::alpha_ex};

/// Physiologically plausible boxes for every parameter.
[[nodiscard]] ParamBounds default_bounds();

struct FitOptions {
  std::vector<Param> free{kDefaultFreeParams.begin(), kDefaultFreeParams.end()};
  ParamBounds bounds = default_bounds();
  int starts = 8;  // start 0 is the supplied init; others are sampled in the box
  std::uint64_t seed = 1;
  int max_iterations = 200;
  double dt = 1.0;                    // internal integrator step, min
  double min_record_minutes = 360.0;  // six hours
  bool parallel = true;
};

struct ParamSensitivity {
  Param param = Param::p1;
  double l2 = 0.0;  // ||d CGM / d ln(theta)||_2, mg/dL
  bool identifiable = true;
};

struct IdentifiabilityReport {
  std::vector<ParamSensitivity> params;
  /// Condition number of the column-normalized sensitivity Gram matrix over
  /// the identifiable parameters; +inf when singular.
  double condition_number = 0.0;
};

struct FitResult {
  PatientParams params;
  double rmse = 0.0;          // mg/dL
  double initial_rmse = 0.0;  // at the supplied init
  int n_iterations = 0;       // of the winning start
  int best_start = 0;
  int diverged_starts = 0;
  bool converged = false;
  IdentifiabilityReport identifiability;
};

/// Simulation inputs equivalent to a usage record: logged basal as plan
/// segments, logged boluses as manual boluses, logged meals as scenario
/// meals, starting from the first CGM reading with basal insulin state.
struct RecordInputs {
  UsagePlan plan;
  Scenario scenario;
  SimulationOptions options;
};

[[nodiscard]] RecordInputs record_inputs(const PatientParams& params, const UsageRecord& record,
                                         double dt = 1.0);

/// Simulated CGM at the record's sample times.
[[nodiscard]] std::vector<double> predict_cgm(const PatientParams& params,
                                              const UsageRecord& record, double dt = 1.0);

[[nodiscard]] double sum_squared_residuals(const PatientParams& params, const UsageRecord& record,
                                           double dt = 1.0);
[[nodiscard]] double rmse(const PatientParams& params, const UsageRecord& record, double dt = 1.0);

/// Central-difference gradient of the sum of squared residuals with respect
/// to each listed parameter, using step rel_step * |theta|.
[[nodiscard]] std::vector<double> objective_gradient(const PatientParams& params,
                                                     const UsageRecord& record,
                                                     std::span<const Param> which,
                                                     double rel_step, double dt = 1.0);

/// Output sensitivity of the simulated CGM to each listed parameter
/// (central differences, relative step 1e-4). Parameters whose sensitivity
/// is at most 1e-8 of the largest are flagged unidentifiable.
[[nodiscard]] IdentifiabilityReport identifiability(const PatientParams& params,
                                                    const UsageRecord& record,
                                                    std::span<const Param> which,
                                                    double dt = 1.0);

/// Bound-constrained least-squares fit of the twin to the record by single
/// shooting, multi-started. Uses only the supplied record. A free parameter
/// with exactly zero sensitivity is returned at its value in `init`.
[[nodiscard]] FitResult fit(const UsageRecord& record, const PatientParams& init,
                            const FitOptions& options = {});

}  // namespace aidtwin
