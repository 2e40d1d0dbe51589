// Runs every primary acceptance criterion and prints one PASS/FAIL line each.
// Exit status is nonzero when any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "aidtwin/evaluate.hpp"
#include "aidtwin/ident.hpp"
#include "aidtwin/ingest.hpp"
#include "aidtwin/llm.hpp"
#include "aidtwin/metrics.hpp"
#include "aidtwin/planner.hpp"
#include "aidtwin/twin.hpp"
#include "aidtwin/units.hpp"
#include "support/generators.hpp"
#include "support/stl_oracle.hpp"
#include "support/synthetic.hpp"

using namespace aidtwin;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(double v, int precision = 4) {
  std::ostringstream os;
  os.precision(precision);
  os << v;
  return os.str();
}

double rel(double a, double b) { return std::abs(a - b) / std::abs(b); }

PlanContext exercise_context() {
  return parse_context(read_text_file(fs::path(AIDTWIN_FIXTURE_DIR) / "exercise.context"));
}

Outcome equilibrium_hold() {
  const auto p = nominal_adult();
  ConfigSegment s;
  s.basal = units::milliunits_per_min_to_units_per_hour(p.n * p.Ib * p.Vi);
  const auto start = Clock::now();
  Scenario day;
  day.horizon = 1440;
  const auto trace = simulate(p, constant_plan(s, 1440), day);
  const double elapsed = seconds_since(start);
  double worst = 0.0;
  for (double g : trace.samples) worst = std::max(worst, std::abs(g - p.Gb));
  return {worst <= 1e-6 && elapsed < 1.0,
          "max |G - Gb| = " + fmt(worst) + " mg/dL over " + std::to_string(trace.size()) + " samples, " +
              fmt(elapsed, 3) + " s"};
}

Outcome integrator_order() {
  const auto p = nominal_adult();
  ConfigSegment s;
  s.basal = 1.0;
  auto plan = constant_plan(s, 360);
  plan.actions.push_back({60, ActionKind::bolus, 4.0});
  Scenario sc;
  sc.horizon = 360;
  sc.meals.push_back({60, 60});
  sc.exercise.push_back({120, 40, 0.8});

  auto run = [&](double dt) {
    SimulationOptions o;
    o.dt = dt;
    o.sample_interval = 4;
    return simulate(p, plan, sc, o).samples;
  };
  const auto reference = run(1.0 / 64.0);
  std::vector<double> dts{4, 2, 1, 0.5};
  std::vector<double> errors;
  for (double dt : dts) {
    const auto g = run(dt);
    double e = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) e = std::max(e, std::abs(g[i] - reference[i]));
    errors.push_back(e);
  }
  // Least-squares slope of log error against log dt, plus each halving.
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < dts.size(); ++i) {
    mx += std::log(dts[i]) / dts.size();
    my += std::log(errors[i]) / dts.size();
  }
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < dts.size(); ++i) {
    sxy += (std::log(dts[i]) - mx) * (std::log(errors[i]) - my);
    sxx += (std::log(dts[i]) - mx) * (std::log(dts[i]) - mx);
  }
  const double slope = sxy / sxx;
  bool pass = slope >= 3.5 && slope <= 4.5;
  std::string detail = "fitted order " + fmt(slope) + "; halvings";
  for (std::size_t i = 0; i + 1 < errors.size(); ++i) {
    const double q = std::log2(errors[i] / errors[i + 1]);
    pass = pass && q >= 3.5 && q <= 4.5;
    detail += " " + fmt(q);
  }
  return {pass, detail};
}

Outcome stl_equivalence() {
  std::mt19937_64 rng(20240301);
  long checked = 0;
  long nonzero = 0;
  long sign_mismatch = 0;
  long value_mismatch = 0;
  for (int i = 0; i < 1000; ++i) {
    const double dt = gen::integer(rng, 0, 1) == 0 ? 1.0 : 5.0;
    const auto f = gen::formula(rng, 4, 12);
    const auto g = gen::trace(rng, 50, dt);
    const auto signal = stl::robustness_signal(*f, g);
    std::size_t defined = 0;
    for (std::size_t j = 0; j < g.size(); ++j) {
      const auto r = oracle::rho(*f, g, j);
      const auto b = oracle::sat(*f, g, j);
      if (!r || !b) continue;
      ++defined;
      ++checked;
      if (j >= signal.size() || signal[j] != *r) ++value_mismatch;
      if (*r != 0.0) {
        ++nonzero;
        if ((*r > 0.0) != *b) ++sign_mismatch;
      }
    }
    if (defined != signal.size()) ++value_mismatch;
  }
  return {sign_mismatch == 0 && value_mismatch == 0 && nonzero > 0,
          std::to_string(checked) + " points, " + std::to_string(nonzero) + " nonzero; sign mismatches " +
              std::to_string(sign_mismatch) + ", value mismatches " + std::to_string(value_mismatch)};
}

Outcome identification_round_trip() {
  const auto truth = synthetic::truth();
  const auto start = Clock::now();
  const auto clean = fit(synthetic::informative_day(truth), nominal_adult());
  const auto noisy = fit(synthetic::informative_day(truth, 2.0, 7), nominal_adult());
  const double elapsed = seconds_since(start);
  double worst = 0.0;
  for (Param q : {Param::p1, Param::p2, Param::p3, Param::n}) {
    worst = std::max(worst, rel(get(clean.params, q), get(truth, q)));
  }
  const double p1_noisy = rel(noisy.params.p1, truth.p1);
  return {worst <= 0.01 && p1_noisy <= 0.10 && elapsed < 60.0,
          "noiseless worst rel. error " + fmt(worst) + ", noisy p1 rel. error " + fmt(p1_noisy) + ", " +
              fmt(elapsed, 3) + " s"};
}

Outcome identifiability_flags() {
  const auto p = nominal_adult();
  const auto report = identifiability(p, synthetic::informative_day(p), kDefaultFreeParams);
  for (const auto& s : report.params) {
    if (s.param == Param::alpha_ex) {
      return {s.l2 == 0.0 && !s.identifiable,
              "alpha_ex l2 = " + fmt(s.l2) + (s.identifiable ? ", identifiable" : ", flagged")};
    }
  }
  return {false, "alpha_ex missing from the report"};
}

Outcome refinement_convergence() {
  const auto ctx = exercise_context();
  const auto seed = seed_plan(ctx);
  const double seed_rho = evaluate_in_context(ctx, seed).quality.robustness;
  const auto start = Clock::now();
  LocalSearchOptions o;
  o.seed = 7;
  const auto r = local_search_refine(ctx, 500, o);
  const double elapsed = seconds_since(start);
  const bool gate = safety_gate(ctx, r.plan);
  const double final_rho = r.log.best_index ? r.log.iterations[*r.log.best_index].quality->robustness : seed_rho;
  return {seed_rho < 0.0 && r.log.stop_reason == StopReason::safe && r.log.iterations.size() <= 500 && gate &&
              elapsed < 120.0,
          "seed rho " + fmt(seed_rho) + ", safe after " + std::to_string(r.log.iterations.size()) +
              " iterations with rho " + fmt(final_rho) + ", gate " + (gate ? "passed" : "failed") + ", " +
              fmt(elapsed, 3) + " s"};
}

Outcome metrics_fixture() {
  GlucoseTrace g;
  g.dt = 5;
  g.samples = {60, 100, 150, 200};
  g.insulin_delivered.assign(4, 0.0);
  const auto m = glycemic_metrics(g);
  const bool constants = kTargetRangeLow == 70.0 && kTargetRangeHigh == 180.0 && kTimeInRangeGoal == 0.70;
  return {m.tir == 0.5 && m.tar == 0.25 && constants,
          "tir " + fmt(m.tir) + ", tar " + fmt(m.tar) + ", band [" + fmt(kTargetRangeLow) + ", " +
              fmt(kTargetRangeHigh) + "], goal " + fmt(kTimeInRangeGoal)};
}

Outcome penalty_dominance() {
  std::mt19937_64 rng(31);
  int violations = 0;
  const int trials = 10000;
  for (int i = 0; i < trials; ++i) {
    GlycemicMetrics a;
    GlycemicMetrics b;
    a.tir = gen::uniform(rng, 0, 1);
    b.tir = gen::uniform(rng, 0, 1);
    a.mean_glucose = gen::uniform(rng, 40, 300);
    b.mean_glucose = gen::uniform(rng, 40, 300);
    const double unsafe = -gen::uniform(rng, 1e-9, 300);
    const double safe = gen::integer(rng, 0, 9) == 0 ? 0.0 : gen::uniform(rng, 0, 300);
    if (!(quality_score(a, unsafe) < quality_score(b, safe))) ++violations;
  }
  // Extremes: best possible unsafe plan against worst possible safe plan.
  GlycemicMetrics perfect;
  perfect.tir = 1.0;
  GlycemicMetrics awful;
  awful.tir = 0.0;
  if (!(quality_score(perfect, -1e-12) < quality_score(awful, 0.0))) ++violations;
  return {violations == 0, std::to_string(trials + 1) + " pairs, " + std::to_string(violations) + " violations"};
}

Outcome llm_transcripts() {
  const auto ctx = exercise_context();
  const auto dir = fs::path(AIDTWIN_FIXTURE_DIR) / "transcripts";
  auto good = llm::ReplayTransport::from_file(dir / "irrelevant_then_safe.jsonl");
  const auto a = llm::llm_refine(ctx, good, {}, 5);
  const int budget = 3;
  auto prose = llm::ReplayTransport::from_file(dir / "prose_only.jsonl");
  const auto b = llm::llm_refine(ctx, prose, {}, budget);
  const bool pass = a.counter.irrelevant == 1 && a.log.stop_reason == StopReason::safe &&
                    b.counter.irrelevant == budget && b.log.stop_reason == StopReason::budget;
  return {pass, "irrelevant_then_safe: irrelevant " + std::to_string(a.counter.irrelevant) + ", " +
                    std::string(to_string(a.log.stop_reason)) + "; prose_only: irrelevant " +
                    std::to_string(b.counter.irrelevant) + "/" + std::to_string(budget) + ", " +
                    std::string(to_string(b.log.stop_reason))};
}

Outcome plan_round_trip() {
  std::mt19937_64 rng(500);
  int failures = 0;
  for (int i = 0; i < 500; ++i) {
    const auto p = gen::plan(rng);
    if (!validate(p).empty() || parse_plan(serialize_plan(p)) != canonicalize(p)) ++failures;
  }
  return {failures == 0, "500 plans, " + std::to_string(failures) + " failures"};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"equilibrium-hold", equilibrium_hold},
      {"integrator-order", integrator_order},
      {"stl-oracle-equivalence", stl_equivalence},
      {"identification-round-trip", identification_round_trip},
      {"identifiability-flags", identifiability_flags},
      {"refinement-convergence", refinement_convergence},
      {"metrics", metrics_fixture},
      {"penalty-dominance", penalty_dominance},
      {"llm-transcripts", llm_transcripts},
      {"plan-round-trip", plan_round_trip},
  };
  int failed = 0;
  for (const auto& [name, check] : criteria) {
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    if (!o.pass) ++failed;
    std::printf("%s %s: %s\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%zu criteria, %d failed\n", criteria.size(), failed);
  return failed == 0 ? 0 : 1;
}
