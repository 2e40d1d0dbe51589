#pragma once

// Random inputs for property tests. Every generator takes the RNG by
// reference so a test's seed pins the whole sequence.

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "aidtwin/plan.hpp"
#include "aidtwin/stl.hpp"
#include "aidtwin/trace.hpp"

namespace gen {

using Rng = std::mt19937_64;

inline double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline int integer(Rng& rng, int lo, int hi) {
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

/// Value with a few significant digits, like a hand-written plan.
inline double rounded(Rng& rng, double lo, double hi, double quantum) {
  return std::round(uniform(rng, lo, hi) / quantum) * quantum;
}

/// A structurally valid plan: contiguous segments from 0, actions inside the
/// horizon, listed in arbitrary order so canonicalization has work to do.
inline aidtwin::UsagePlan plan(Rng& rng) {
  aidtwin::UsagePlan p;
  const int n_segments = integer(rng, 1, 5);
  double t = 0.0;
  for (int i = 0; i < n_segments; ++i) {
    aidtwin::ConfigSegment s;
    s.start = t;
    s.end = t + integer(rng, 1, 48) * 15.0;
    s.basal = rounded(rng, 0.0, 3.0, 0.025);
    s.isf = rounded(rng, 10.0, 120.0, 0.5);
    s.cr = rounded(rng, 0.3, 30.0, 0.01);
    s.target = rounded(rng, 70.0, 200.0, 1.0);
    t = s.end;
    p.segments.push_back(s);
  }
  const int n_actions = integer(rng, 0, 8);
  for (int i = 0; i < n_actions; ++i) {
    aidtwin::PlanAction a;
    a.time = rounded(rng, 0.0, t, 1.0);
    switch (integer(rng, 0, 2)) {
      case 0:
        a.kind = aidtwin::ActionKind::meal;
        a.amount = rounded(rng, 5.0, 120.0, 0.5);
        break;
      case 1:
        a.kind = aidtwin::ActionKind::snack;
        a.amount = rounded(rng, 5.0, 40.0, 0.5);
        break;
      default:
        a.kind = aidtwin::ActionKind::bolus;
        a.amount = rounded(rng, 0.05, 12.0, 0.05);
        break;
    }
    p.actions.push_back(a);
  }
  std::shuffle(p.segments.begin(), p.segments.end(), rng);
  if (integer(rng, 0, 1) == 1) p.suspend_threshold = rounded(rng, 55.0, 90.0, 1.0);
  if (integer(rng, 0, 1) == 1) p.initial_glucose = rounded(rng, 60.0, 250.0, 0.1);
  return p;
}

/// Random formula of depth at most max_depth with integer windows.
inline aidtwin::stl::FormulaPtr formula(Rng& rng, int max_depth, int max_window) {
  namespace stl = aidtwin::stl;
  const double c = rounded(rng, 60.0, 200.0, 1.0);
  if (max_depth <= 1) return integer(rng, 0, 1) == 0 ? stl::ge(c) : stl::le(c);
  switch (integer(rng, 0, 6)) {
    case 0:
      return stl::ge(c);
    case 1:
      return stl::le(c);
    case 2:
      return stl::negate(formula(rng, max_depth - 1, max_window));
    case 3:
      return stl::conj(formula(rng, max_depth - 1, max_window),
                       formula(rng, max_depth - 1, max_window));
    case 4:
      return stl::disj(formula(rng, max_depth - 1, max_window),
                       formula(rng, max_depth - 1, max_window));
    default: {
      const int a = integer(rng, 0, max_window);
      const int b = integer(rng, a, max_window);
      auto sub = formula(rng, max_depth - 1, max_window);
      return integer(rng, 0, 1) == 0 ? stl::always(a, b, sub) : stl::eventually(a, b, sub);
    }
  }
}

/// Random trace of whole-mg/dL samples so that exact ties (zero robustness) occur.
inline aidtwin::GlucoseTrace trace(Rng& rng, std::size_t max_samples, double dt) {
  aidtwin::GlucoseTrace g;
  g.dt = dt;
  const auto n = static_cast<std::size_t>(integer(rng, 1, static_cast<int>(max_samples)));
  for (std::size_t i = 0; i < n; ++i) g.samples.push_back(rounded(rng, 40.0, 260.0, 1.0));
  g.insulin_delivered.assign(n, 0.0);
  return g;
}

}  // namespace gen
