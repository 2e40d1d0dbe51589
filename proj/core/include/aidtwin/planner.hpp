#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "aidtwin/error.hpp"
#include "aidtwin/evaluate.hpp"
#include "aidtwin/params.hpp"
#include "aidtwin/plan.hpp"
#include "aidtwin/scenario.hpp"
#include "aidtwin/stl.hpp"
#include "aidtwin/twin.hpp"

namespace aidtwin {

struct FieldBounds {
  double lo = 0.0;
  double hi = 0.0;

  friend bool operator==(const FieldBounds&, const FieldBounds&) = default;
};

/// User preferences a plan must honor before it is worth simulating.
struct FeasibilityConstraints {
  std::map<std::string, FieldBounds> fields;  // basal, isf, cr, target: per segment
  std::optional<double> max_bolus;            // U per manual bolus
  std::optional<int> max_boluses;             // manual boluses per plan
  std::optional<double> max_carbs;            // g per meal or snack action
  std::optional<int> max_meals;               // meal and snack actions per plan

  friend bool operator==(const FeasibilityConstraints&, const FeasibilityConstraints&) = default;
};

struct Violation {
  std::string field;     // e.g. "bolus", "max_meals", "basal"
  std::string location;  // e.g. "t=30 min", "segment 0", "plan"
  double value = 0.0;
  double bound = 0.0;

  [[nodiscard]] std::string message() const;
};

/// Every violated constraint; empty iff the plan is feasible for a context
/// whose horizon is `horizon` (a plan must cover exactly that horizon).
[[nodiscard]] std::vector<Violation> check_feasibility(const UsagePlan& plan,
                                                       const FeasibilityConstraints& constraints,
                                                       std::optional<double> horizon = {});

/// Everything a planner needs to propose plans for one decision.
struct PlanContext {
  PatientParams params;
  Scenario scenario;
  ConfigSegment settings;  // start/end ignored; the seed spans the horizon
  std::optional<double> suspend_threshold;
  double glucose = 0.0;  // current CGM reading, mg/dL
  std::string goal;
  stl::FormulaPtr spec;
  FeasibilityConstraints constraints;
  EvaluationOptions evaluation;  // initial state is derived from `glucose`

  [[nodiscard]] double horizon() const { return scenario.horizon; }
};

/// Context file, one record per line:
///
///   glucose <mg/dL>
///   goal <free text>
///   settings basal=<U/h> isf=<mg/dL/U> cr=<g/U> target=<mg/dL>
///   suspend <mg/dL>
///   horizon <min>
///   meal <time_min> carbs=<g>
///   exercise <start_min> <duration_min> intensity=<0..1>
///   spec <formula>
///   limit <basal|isf|cr|target> <lo> <hi>
///   max_bolus <U> | max_boluses <n> | max_carbs <g> | max_meals <n>
///
/// The safety formula defaults to `always 0 <horizon> (ge 70)`. Params are left at the
/// nominal adult profile for the caller to replace. Throws Error(parse-error)
/// listing every problem with its line number.
[[nodiscard]] PlanContext parse_context(std::string_view text);
[[nodiscard]] std::string serialize_context(const PlanContext& context);

/// Initial twin state for the context: current glucose, basal insulin, empty gut.
[[nodiscard]] TwinState context_initial_state(const PlanContext& context);

/// Simulates and scores a plan under the context.
[[nodiscard]] PlanEvaluation evaluate_in_context(const PlanContext& context, const UsagePlan& plan);

/// Status quo: the current settings held over the whole horizon, no actions,
/// starting from the current glucose.
[[nodiscard]] UsagePlan seed_plan(const PlanContext& context);

/// One-line numeric feedback for a planner, e.g. "robustness=-5.2 mg/dL (unsafe); tir=0.93; ...".
[[nodiscard]] std::string describe_quality(const PlanQuality& quality);

enum class IterationKind { seed, move, restart, response };
enum class StopReason { safe, budget, planner_failure };

[[nodiscard]] std::string_view to_string(IterationKind kind);
[[nodiscard]] std::string_view to_string(StopReason reason);

struct IterationRecord {
  int index = 0;
  IterationKind kind = IterationKind::seed;
  std::optional<UsagePlan> plan;
  std::optional<PlanQuality> quality;
  std::string feedback;
  bool accepted = false;
  std::string move;                     // move description or planner note
  std::optional<std::string> response;  // raw planner text (LLM)
};

struct RefinementLog {
  std::vector<IterationRecord> iterations;
  std::optional<int> best_index;
  StopReason stop_reason = StopReason::budget;
  int infeasible_rejected = 0;  // candidates dropped before simulation
};

struct HallucinationCounter {
  int queries = 0;
  int irrelevant = 0;  // unparseable or feasibility-violating responses

  [[nodiscard]] double per_hundred() const { return queries == 0 ? 0.0 : 100.0 * irrelevant / queries; }
};

struct RefinementResult {
  UsagePlan plan;
  RefinementLog log;
  HallucinationCounter counter;
};

/// Raised when a planner cannot produce any further plan. Carries the
/// iterations completed so far.
class PlannerFailure : public Error {
 public:
  PlannerFailure(const std::string& message, RefinementResult partial);
  [[nodiscard]] const RefinementResult& partial() const noexcept { return partial_; }

 private:
  RefinementResult partial_;
};

class Planner {
 public:
  virtual ~Planner() = default;
  /// A syntactically valid plan covering the context horizon.
  virtual UsagePlan propose(const PlanContext& context, const RefinementLog& history) = 0;
};

/// Single-move neighborhood used by local search. Moves: basal x1.1 or x0.9 on
/// a segment, target +/-10 mg/dL, isf and cr x1.1 or x0.9, add a 10-30 g
/// snack before an event or remove one, add a 0.5 U bolus, remove one, or
/// resize one by +/-0.5 U.
struct Move {
  UsagePlan plan;
  std::string description;
};

/// Draws a random structurally valid single-move neighbor; nullopt when the
/// drawn move does not apply (e.g. removing a snack from a plan without one).
[[nodiscard]] std::optional<Move> random_neighbor(const UsagePlan& plan, const PlanContext& context,
                                                  std::mt19937_64& rng);

/// Seed on empty history, otherwise a random feasible neighbor of the best
/// plan in the history.
class LocalSearchPlanner : public Planner {
 public:
  explicit LocalSearchPlanner(std::uint64_t seed = 7) : rng_(seed) {}
  UsagePlan propose(const PlanContext& context, const RefinementLog& history) override;

 private:
  std::mt19937_64 rng_;
};

struct LocalSearchOptions {
  std::uint64_t seed = 7;
  int patience = 40;           // consecutive rejections before a restart
  int restart_moves = 3;       // random moves applied to the best plan on restart
  int max_draws = 200;         // attempts to find a feasible neighbor per iteration
  bool stop_when_safe = true;
  std::function<void(const IterationRecord&)> on_iteration;
};

/// Hill climbing with restarts. Every iteration (seed included) is one
/// simulation; a candidate is accepted iff its score strictly exceeds the
/// best so far, so accepted scores strictly increase. Infeasible candidates
/// are dropped before simulation. The returned plan is labeled safe only
/// after an independent re-simulation confirms robustness >= 0.
/// Throws Error(infeasible-context) when the seed plan is infeasible.
[[nodiscard]] RefinementResult local_search_refine(const PlanContext& context, int budget,
                                                   const LocalSearchOptions& options = {});

/// Re-simulates `plan` from scratch and checks robustness >= 0.
[[nodiscard]] bool safety_gate(const PlanContext& context, const UsagePlan& plan);

}  // namespace aidtwin
