#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "aidtwin/error.hpp"
#include "aidtwin/twin.hpp"

namespace aidtwin {
namespace {

UsagePlan basal_plan(const PatientParams& p, double horizon) {
  ConfigSegment s;
  s.basal = equilibrium_basal_rate(p);
  return constant_plan(s, horizon);
}

Scenario empty_scenario(double horizon) {
  Scenario sc;
  sc.horizon = horizon;
  return sc;
}

TEST(Derivatives, ZeroAtEquilibrium) {
  const auto p = nominal_adult();
  const auto r = derivatives(equilibrium_state(p), p, equilibrium_insulin_input(p), 0.0);
  EXPECT_EQ(r.dG, 0.0);
  EXPECT_EQ(r.dX, 0.0);
  EXPECT_EQ(r.dI, 0.0);
  EXPECT_EQ(r.dQ1, 0.0);
  EXPECT_EQ(r.dQ2, 0.0);
}

TEST(Derivatives, GlucoseRateByHand) {
  auto p = nominal_adult();
  p.p1 = 0.03;
  p.Gb = 100;
  TwinState s;
  s.G = 150;
  s.X = 0.01;
  s.I = p.Ib;
  EXPECT_NEAR(derivatives(s, p, 0.0, 0.0).dG, -3.0, 1e-12);
}

TEST(Derivatives, RemoteActionRateByHand) {
  auto p = nominal_adult();
  p.p2 = 0.02;
  p.p3 = 1e-5;
  p.Ib = 15;
  TwinState s;
  s.G = 100;
  s.X = 0.01;
  s.I = 25;
  EXPECT_NEAR(derivatives(s, p, 0.0, 0.0).dX, -1.0e-4, 1e-15);
}

TEST(Derivatives, ExerciseRaisesUptake) {
  const auto p = nominal_adult();
  auto s = equilibrium_state(p);
  s.G = 120;
  EXPECT_LT(derivatives(s, p, 0.0, 1.0).dG, derivatives(s, p, 0.0, 0.0).dG);
}

TEST(Derivatives, NonFiniteInputIsInvalidState) {
  const auto p = nominal_adult();
  auto s = equilibrium_state(p);
  s.I = std::nan("");
  try {
    (void)derivatives(s, p, 0.0, 0.0);
    FAIL() << "expected invalid-state";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), errc::invalid_state);
  }
  EXPECT_THROW((void)derivatives(equilibrium_state(p), p, INFINITY, 0.0), Error);
}

TEST(Step, FixedPointAdvancesOnlyTime) {
  const auto p = nominal_adult();
  const auto s0 = equilibrium_state(p);
  const auto s1 = step(s0, p, equilibrium_insulin_input(p), 0.0, 2.5);
  auto expected = s0;
  expected.t = 2.5;
  EXPECT_EQ(s1, expected);
}

// dG/dt = -k G: zero Gb removes the basal-glucose source term, and holding
// I = Ib under equilibrium input freezes X at 0.
PatientParams decay_params(double k) {
  auto p = nominal_adult();
  p.p1 = k;
  p.Gb = 0.0;
  return p;
}

TEST(Step, MatchesFiveTermTaylorOnLinearDecay) {
  const double k = 0.1;
  const double h = 1.0;
  const auto p = decay_params(k);
  auto s = equilibrium_state(p);
  s.G = 100.0;
  const double kh = k * h;
  const double expected = 100.0 * (1 - kh + kh * kh / 2 - kh * kh * kh / 6 + kh * kh * kh * kh / 24);
  EXPECT_NEAR(step(s, p, equilibrium_insulin_input(p), 0.0, h).G, expected, 1e-10);
  EXPECT_NEAR(expected, 90.48375, 1e-5);
}

TEST(Step, HalvingStepCutsErrorSixteenfold) {
  const double k = 0.1;
  const double T = 20.0;
  const auto p = decay_params(k);
  const double exact = 100.0 * std::exp(-k * T);
  std::vector<double> errors;
  for (double h : {1.0, 0.5, 0.25}) {
    auto s = equilibrium_state(p);
    s.G = 100.0;
    for (int i = 0; i < static_cast<int>(T / h); ++i) {
      s = step(s, p, equilibrium_insulin_input(p), 0.0, h);
    }
    errors.push_back(std::abs(s.G - exact));
  }
  EXPECT_NEAR(errors[0] / errors[1], 16.0, 1.0);
  EXPECT_NEAR(errors[1] / errors[2], 16.0, 1.0);
}

TEST(Step, ClampsRemoteActionAtZero) {
  const auto p = nominal_adult();
  auto s = equilibrium_state(p);
  s.I = 0.0;  // far below Ib drives X negative
  const auto next = step(s, p, 0.0, 0.0, 5.0);
  EXPECT_EQ(next.X, 0.0);
}

TEST(Step, RejectsStepOutsideRange) {
  const auto p = nominal_adult();
  EXPECT_THROW((void)step(equilibrium_state(p), p, 0.0, 0.0, 0.0), Error);
  EXPECT_THROW((void)step(equilibrium_state(p), p, 0.0, 0.0, 5.5), Error);
}

TEST(Step, DivergenceNamesComponent) {
  auto p = nominal_adult();
  p.n = -1e6;  // explosive insulin growth; step does not validate parameters
  p.p3 = 0.0;  // keep the blow-up out of X and G
  auto s = equilibrium_state(p);
  s.I = 1e300;
  try {
    (void)step(s, p, 0.0, 0.0, 5.0);
    FAIL() << "expected divergence";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), errc::divergence);
    // I blows up first; X and G inherit the non-finite value within the step.
    const auto& names = e.details();
    EXPECT_NE(std::find(names.begin(), names.end(), "I"), names.end()) << e.what();
    EXPECT_EQ(std::find(names.begin(), names.end(), "Q1"), names.end()) << e.what();
  }
}

TEST(Simulate, EquilibriumHoldsForADay) {
  const auto p = nominal_adult();
  const auto sim = simulate_detailed(p, basal_plan(p, 1440), empty_scenario(1440));
  ASSERT_EQ(sim.trace.size(), 289u);
  EXPECT_EQ(sim.trace.dt, 5.0);
  for (const auto& s : sim.states) {
    EXPECT_LE(std::abs(s.G - p.Gb), 1e-6);
    EXPECT_LE(std::abs(s.X), 1e-6);
    EXPECT_LE(std::abs(s.I - p.Ib), 1e-6);
    EXPECT_EQ(s.Q1, 0.0);
    EXPECT_EQ(s.Q2, 0.0);
  }
}

TEST(Simulate, MealRiseHasSingleInteriorPeak) {
  const auto p = nominal_adult();
  auto sc = empty_scenario(720);
  sc.meals.push_back({60, 50});
  const auto g = simulate(p, basal_plan(p, 720), sc).samples;
  const auto peak = static_cast<std::size_t>(std::max_element(g.begin(), g.end()) - g.begin());
  EXPECT_GT(g[peak], p.Gb + 10);
  EXPECT_GT(peak * 5.0, 60.0);
  EXPECT_LT(peak, g.size() - 1);
  for (std::size_t i = 13; i < peak; ++i) EXPECT_GE(g[i], g[i - 1]) << i;
  for (std::size_t i = peak + 1; i < g.size(); ++i) EXPECT_LE(g[i], g[i - 1]) << i;
  EXPECT_LT(std::abs(g.back() - p.Gb), g[peak] - p.Gb);

  // A much finer integrator puts the peak in the same place.
  SimulationOptions fine;
  fine.dt = 1.0 / 8;
  const auto gf = simulate(p, basal_plan(p, 720), sc, fine).samples;
  const auto peak_f = static_cast<std::size_t>(std::max_element(gf.begin(), gf.end()) - gf.begin());
  EXPECT_EQ(peak, peak_f);
}

TEST(Simulate, ExerciseLowersGlucoseDuringAndAfter) {
  const auto p = nominal_adult();
  ASSERT_GT(p.alpha_ex, 0.0);
  auto with = empty_scenario(360);
  with.exercise.push_back({60, 60, 1.0});
  const auto a = simulate(p, basal_plan(p, 360), with);
  const auto b = simulate(p, basal_plan(p, 360), empty_scenario(360));
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a.time(i) <= 60) {
      EXPECT_EQ(a.samples[i], b.samples[i]);
    } else {
      EXPECT_LT(a.samples[i], b.samples[i]) << "t=" << a.time(i);
    }
  }
}

double simpson(const std::vector<double>& f, double h) {
  // composite Simpson; falls back to a trapezoid on the last panel when odd
  const std::size_t n = f.size() - 1;
  double sum = 0.0;
  std::size_t m = n - n % 2;
  for (std::size_t i = 0; i + 2 <= m; i += 2) sum += h / 3 * (f[i] + 4 * f[i + 1] + f[i + 2]);
  if (m < n) sum += h / 2 * (f[n - 1] + f[n]);
  return sum;
}

TEST(Simulate, ConservesCarbohydrateMass) {
  const auto p = nominal_adult();
  auto sc = empty_scenario(600);
  sc.meals = {{0, 50}, {100, 30}};
  auto plan = basal_plan(p, 600);
  plan.actions.push_back({250, ActionKind::snack, 15});
  SimulationOptions opt;
  opt.sample_interval = 1.0;
  const auto sim = simulate_detailed(p, plan, sc, opt);
  std::vector<double> flux;
  for (const auto& s : sim.states) flux.push_back(p.k_abs * s.Q2);
  const auto& last = sim.states.back();
  const double absorbed = simpson(flux, 1.0);
  const double total = 1000.0 * (50 + 30 + 15);
  EXPECT_NEAR(absorbed + last.Q1 + last.Q2, total, 1e-3 * total);
}

TEST(Simulate, LargerBolusesNeverRaiseGlucose) {
  const auto p = nominal_adult();
  auto sc = empty_scenario(720);
  sc.meals = {{60, 60}, {300, 40}};
  auto plan = basal_plan(p, 720);
  plan.actions = {{60, ActionKind::bolus, 4.0}, {300, ActionKind::bolus, 2.5}};
  auto scaled = plan;
  for (auto& a : scaled.actions) a.amount *= 1.5;
  const auto a = simulate(p, plan, sc);
  const auto b = simulate(p, scaled, sc);
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a.time(i) >= 60) {
      EXPECT_LE(b.samples[i], a.samples[i]) << "t=" << a.time(i);
    }
  }
}

TEST(Simulate, BitIdenticalOnRepeat) {
  const auto p = nominal_adult();
  auto sc = empty_scenario(480);
  sc.meals = {{30, 45}};
  sc.exercise = {{200, 40, 0.6}};
  auto plan = basal_plan(p, 480);
  plan.actions = {{30, ActionKind::meal, 45}};
  plan.suspend_threshold = 80;
  const auto a = simulate_detailed(p, plan, sc);
  const auto b = simulate_detailed(p, plan, sc);
  EXPECT_EQ(a.trace, b.trace);
  EXPECT_EQ(a.states, b.states);
}

TEST(Simulate, SuspendStopsBasalBelowThreshold) {
  const auto p = nominal_adult();
  auto sc = empty_scenario(480);
  sc.exercise = {{30, 90, 1.0}};
  ConfigSegment seg;
  seg.basal = 1.5;
  auto plan = constant_plan(seg, 480);
  plan.suspend_threshold = 90;
  SimulationOptions opt;
  opt.sample_interval = opt.dt;  // one delivery interval per integrator step
  const auto tr = simulate(p, plan, sc, opt);
  int below = 0;
  for (std::size_t i = 0; i + 1 < tr.size(); ++i) {
    if (tr.samples[i] < 90) {
      ++below;
      EXPECT_EQ(tr.insulin_delivered[i], 0.0) << "t=" << tr.time(i);
    }
  }
  EXPECT_GT(below, 0);
}

TEST(Simulate, InitialGlucosePrecedence) {
  const auto p = nominal_adult();
  auto plan = basal_plan(p, 60);
  EXPECT_EQ(simulate(p, plan, empty_scenario(60)).samples.front(), p.Gb);
  plan.initial_glucose = 85;
  EXPECT_EQ(simulate(p, plan, empty_scenario(60)).samples.front(), 85);
  SimulationOptions opt;
  auto s = equilibrium_state(p);
  s.G = 140;
  opt.initial = s;
  EXPECT_EQ(simulate(p, plan, empty_scenario(60), opt).samples.front(), 140);
}

TEST(Simulate, GapIsCoverageError) {
  const auto p = nominal_adult();
  UsagePlan plan;
  plan.segments = {{0, 60, 1.0, 50, 10, 120}, {70, 120, 1.0, 50, 10, 120}};
  try {
    (void)simulate(p, plan, empty_scenario(120));
    FAIL() << "expected plan-coverage";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), errc::plan_coverage);
  }
  try {
    (void)simulate(p, basal_plan(p, 60), empty_scenario(120));
    FAIL() << "expected plan-coverage";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), errc::plan_coverage);
  }
}

TEST(Simulate, MisalignedGridIsRejected) {
  const auto p = nominal_adult();
  SimulationOptions opt;
  opt.dt = 1.0;
  opt.sample_interval = 2.5;
  EXPECT_THROW((void)simulate(p, basal_plan(p, 60), empty_scenario(60), opt), Error);
}

TEST(Simulate, InsulinDeliveredAccountsForBasalAndBoluses) {
  const auto p = nominal_adult();
  ConfigSegment seg;
  seg.basal = 1.2;
  auto plan = constant_plan(seg, 60);
  plan.actions = {{10, ActionKind::bolus, 2.0}};
  const auto tr = simulate(p, plan, empty_scenario(60));
  double total = 0.0;
  for (double u : tr.insulin_delivered) total += u;
  EXPECT_NEAR(total, 1.2 + 2.0, 1e-12);
  EXPECT_EQ(tr.insulin_delivered.back(), 0.0);
  EXPECT_NEAR(tr.insulin_delivered[2], 1.2 / 12 + 2.0, 1e-12);
}

}  // namespace
}  // namespace aidtwin
