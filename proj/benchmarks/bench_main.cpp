#include <benchmark/benchmark.h>

#include <random>

#include "aidtwin/ident.hpp"
#include "aidtwin/ingest.hpp"
#include "aidtwin/planner.hpp"
#include "support/generators.hpp"
#include "support/synthetic.hpp"

using namespace aidtwin;

namespace {

UsagePlan day_plan() {
  ConfigSegment s;
  s.basal = 1.0;
  auto plan = constant_plan(s, 1440);
  plan.actions = {{420, ActionKind::meal, 60}, {750, ActionKind::meal, 80}, {1110, ActionKind::meal, 70}};
  return plan;
}

void BM_SimulateDay(benchmark::State& state) {
  const auto p = nominal_adult();
  const auto plan = day_plan();
  Scenario sc;
  sc.horizon = 1440;
  sc.exercise = {{1020, 45, 0.6}};
  SimulationOptions o;
  o.dt = static_cast<double>(state.range(0)) / 4.0;
  for (auto _ : state) benchmark::DoNotOptimize(simulate(p, plan, sc, o));
  state.SetLabel("dt=" + std::to_string(o.dt));
}
BENCHMARK(BM_SimulateDay)->Arg(1)->Arg(4)->Arg(20);

void BM_RobustnessSignal(benchmark::State& state) {
  std::mt19937_64 rng(5);
  GlucoseTrace g;
  g.dt = 1;
  for (int i = 0; i < state.range(0); ++i) g.samples.push_back(gen::uniform(rng, 50, 250));
  g.insulin_delivered.assign(g.samples.size(), 0.0);
  const auto f = stl::parse_formula("and (always 0 240 (ge 70)) (ev 0 120 (always 0 30 (le 180)))");
  for (auto _ : state) benchmark::DoNotOptimize(stl::robustness_signal(*f, g));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_RobustnessSignal)->Arg(1441)->Arg(14401);

void BM_PlanRoundTrip(benchmark::State& state) {
  std::mt19937_64 rng(8);
  std::vector<std::string> texts;
  for (int i = 0; i < 64; ++i) texts.push_back(serialize_plan(gen::plan(rng)));
  std::size_t i = 0;
  for (auto _ : state) benchmark::DoNotOptimize(parse_plan(texts[i++ % texts.size()]));
}
BENCHMARK(BM_PlanRoundTrip);

void BM_FitDay(benchmark::State& state) {
  const auto rec = synthetic::informative_day(synthetic::truth(), 2.0, 7);
  FitOptions o;
  o.starts = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(fit(rec, nominal_adult(), o));
}
BENCHMARK(BM_FitDay)->Arg(1)->Arg(8)->Unit(benchmark::kMillisecond);

void BM_LocalSearch(benchmark::State& state) {
  const auto ctx = parse_context(read_text_file(AIDTWIN_FIXTURE_DIR "/exercise.context"));
  LocalSearchOptions o;
  o.stop_when_safe = state.range(0) != 0;
  for (auto _ : state) benchmark::DoNotOptimize(local_search_refine(ctx, 500, o));
  state.SetLabel(o.stop_when_safe ? "stop when safe" : "full budget");
}
BENCHMARK(BM_LocalSearch)->Arg(1)->Arg(0)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
