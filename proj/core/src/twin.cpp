#include "aidtwin/twin.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "aidtwin/error.hpp"
#include "aidtwin/records.hpp"
#include "aidtwin/units.hpp"

namespace aidtwin {

namespace {

constexpr double kMaxStep = 5.0;

bool all_finite(const TwinState& s) {
  return std::isfinite(s.G) && std::isfinite(s.X) && std::isfinite(s.I) &&
         std::isfinite(s.Q1) && std::isfinite(s.Q2) && std::isfinite(s.t);
}

TwinState advance(const TwinState& s, const StateRate& r, double h) {
  TwinState out = s;
  out.G += h * r.dG;
  out.X += h * r.dX;
  out.I += h * r.dI;
  out.Q1 += h * r.dQ1;
  out.Q2 += h * r.dQ2;
  out.t += h;
  return out;
}

// Exercise intensity at stage time tau within a step whose midpoint is mid.
// The piece of each bout's profile is chosen by the midpoint, so a step that
// lies inside one piece sees the exact affine profile at every stage.
double stage_intensity(const Scenario& scenario, double mid, double tau) {
  double level = 0.0;
  for (const auto& e : scenario.exercise) {
    const double end = e.start + e.duration;
    if (mid >= e.start && mid < end) {
      level = std::max(level, e.intensity);
    } else if (mid >= end && mid < end + kExerciseWashoutMinutes) {
      level = std::max(level, e.intensity * (1.0 - (tau - end) / kExerciseWashoutMinutes));
    }
  }
  return level;
}

// Right-hand side without input checks; RK stages may pass through
// non-finite values, which the post-step divergence check reports.
StateRate rates(const TwinState& s, const PatientParams& p, double u, double exercise_intensity) {
  StateRate r;
  const double uptake = p.p1 * (1.0 + p.alpha_ex * exercise_intensity);
  r.dG = -(uptake + s.X) * s.G + p.p1 * p.Gb + p.f_bio * p.k_abs * s.Q2 / p.Vg;
  r.dX = -p.p2 * s.X + p.p3 * (s.I - p.Ib);
  r.dI = -p.n * s.I + u / p.Vi;
  r.dQ1 = -p.k_emp * s.Q1;
  r.dQ2 = p.k_emp * s.Q1 - p.k_abs * s.Q2;
  return r;
}

template <typename IntensityAt>
TwinState rk4(const TwinState& s, const PatientParams& p, double u, IntensityAt intensity_at,
              double h) {
  const double half = 0.5 * h;
  const auto k1 = rates(s, p, u, intensity_at(s.t));
  const auto k2 = rates(advance(s, k1, half), p, u, intensity_at(s.t + half));
  const auto k3 = rates(advance(s, k2, half), p, u, intensity_at(s.t + half));
  const auto k4 = rates(advance(s, k3, h), p, u, intensity_at(s.t + h));

  TwinState out = s;
  const double w = h / 6.0;
  out.G += w * (k1.dG + 2.0 * k2.dG + 2.0 * k3.dG + k4.dG);
  out.X += w * (k1.dX + 2.0 * k2.dX + 2.0 * k3.dX + k4.dX);
  out.I += w * (k1.dI + 2.0 * k2.dI + 2.0 * k3.dI + k4.dI);
  out.Q1 += w * (k1.dQ1 + 2.0 * k2.dQ1 + 2.0 * k3.dQ1 + k4.dQ1);
  out.Q2 += w * (k1.dQ2 + 2.0 * k2.dQ2 + 2.0 * k3.dQ2 + k4.dQ2);
  out.t = s.t + h;
  out.X = std::max(out.X, 0.0);
  return out;
}

void check_divergence(const TwinState& s) {
  std::vector<std::string> bad;
  const std::pair<const char*, double> components[] = {
      {"G", s.G}, {"X", s.X}, {"I", s.I}, {"Q1", s.Q1}, {"Q2", s.Q2}};
  for (const auto& [name, value] : components) {
    if (!std::isfinite(value)) bad.emplace_back(name);
  }
  if (!bad.empty()) {
    std::string names = bad.front();
    for (std::size_t i = 1; i < bad.size(); ++i) names += ", " + bad[i];
    throw Error(errc::divergence, "simulation diverged: " + names + " became non-finite at t=" +
                                      records::format_number(s.t) + " min",
                bad);
  }
  if (s.G <= 0.0) {
    throw Error(errc::divergence, "simulation diverged: G became non-positive at t=" +
                                      records::format_number(s.t) + " min");
  }
}

long checked_ratio(double num, double den, const char* what) {
  const double r = num / den;
  const long n = std::lround(r);
  if (n < 1 || std::abs(r - static_cast<double>(n)) > 1e-9 * std::max(1.0, r)) {
    throw Error(errc::invalid_argument,
                std::string(what) + " must be a positive integer multiple of dt");
  }
  return n;
}

void check_coverage(const UsagePlan& plan, double horizon) {
  auto issues = validate(plan);
  if (!issues.empty()) {
    // A gap leaves some step without a segment; report it as such.
    const bool gap = std::any_of(issues.begin(), issues.end(), [](const std::string& i) {
      return i.find("coverage gap") != std::string::npos;
    });
    throw Error(gap ? errc::plan_coverage : errc::plan_validation,
                "invalid plan: " + issues.front(), issues);
  }
  if (plan.horizon() + 1e-9 < horizon) {
    throw Error(errc::plan_coverage, "plan covers [0, " + records::format_number(plan.horizon()) +
                                         ") but the scenario runs to " +
                                         records::format_number(horizon) + " min");
  }
}

}  // namespace

TwinState equilibrium_state(const PatientParams& params) {
  TwinState s;
  s.G = params.Gb;
  s.X = 0.0;
  s.I = params.Ib;
  return s;
}

StateRate derivatives(const TwinState& s, const PatientParams& p, double u,
                      double exercise_intensity) {
  if (!all_finite(s) || !std::isfinite(u) || !std::isfinite(exercise_intensity)) {
    throw Error(errc::invalid_state, "non-finite state or input passed to the twin model");
  }
  return rates(s, p, u, exercise_intensity);
}

TwinState step(const TwinState& state, const PatientParams& params, double insulin_input,
               double exercise_intensity, double dt) {
  if (!(dt > 0.0 && dt <= kMaxStep)) {
    throw Error(errc::invalid_argument, "step size must lie in (0, 5] min");
  }
  if (!all_finite(state) || !std::isfinite(insulin_input) || !std::isfinite(exercise_intensity)) {
    throw Error(errc::invalid_state, "non-finite state or input passed to the twin model");
  }
  auto next = rk4(state, params, insulin_input, [=](double) { return exercise_intensity; }, dt);
  check_divergence(next);
  return next;
}

Simulation simulate_detailed(const PatientParams& params, const UsagePlan& plan_in,
                             const Scenario& scenario, const SimulationOptions& options) {
  require_valid(params);
  require_valid(scenario);
  if (!(options.dt > 0.0 && options.dt <= kMaxStep)) {
    throw Error(errc::invalid_argument, "dt must lie in (0, 5] min");
  }
  const auto plan = canonicalize(plan_in);
  check_coverage(plan, scenario.horizon);

  const double dt = options.dt;
  const long steps = checked_ratio(scenario.horizon, dt, "horizon");
  const long stride = checked_ratio(options.sample_interval, dt, "sample_interval");
  if (steps % stride != 0) {
    throw Error(errc::invalid_argument, "horizon must be a multiple of sample_interval");
  }

  TwinState state = equilibrium_state(params);
  if (options.initial) {
    state = *options.initial;
  } else if (plan.initial_glucose) {
    state.G = *plan.initial_glucose;
  }
  state.t = 0.0;
  if (!all_finite(state) || state.G <= 0.0 || state.Q1 < 0.0 || state.Q2 < 0.0) {
    throw Error(errc::invalid_state, "initial state violates the state invariants");
  }
  state.X = std::max(state.X, 0.0);

  Simulation sim;
  const auto n_samples = static_cast<std::size_t>(steps / stride) + 1;
  sim.trace.t0 = 0.0;
  sim.trace.dt = static_cast<double>(stride) * dt;
  sim.trace.samples.reserve(n_samples);
  sim.trace.insulin_delivered.assign(n_samples, 0.0);
  sim.states.reserve(n_samples);

  std::size_t next_meal = 0;
  const auto& meals = scenario.meals;

  for (long k = 0; k < steps; ++k) {
    const double t = static_cast<double>(k) * dt;
    const double t_next = static_cast<double>(k + 1) * dt;
    state.t = t;
    if (k % stride == 0) {
      sim.trace.samples.push_back(state.G);
      sim.states.push_back(state);
    }
    const auto interval = static_cast<std::size_t>(k / stride);

    while (next_meal < meals.size() && meals[next_meal].time < t_next) {
      if (meals[next_meal].time >= t) state.Q1 += units::grams_to_milligrams(meals[next_meal].carbs);
      ++next_meal;
    }
    for (const auto& a : plan.actions) {
      if (a.kind == ActionKind::snack && a.time >= t && a.time < t_next) {
        state.Q1 += units::grams_to_milligrams(a.amount);
      }
    }

    const auto cmd = insulin_input(plan, t, state.G, dt);
    double delivered = cmd.basal_milliunits_per_min * dt / units::kMilliunitsPerUnit;
    for (const auto& b : cmd.boluses) {
      state.I += units::units_to_milliunits(b.units) / params.Vi;
      delivered += b.units;
    }
    sim.trace.insulin_delivered[interval] += delivered;

    const double mid = t + 0.5 * dt;
    state = rk4(state, params, cmd.basal_milliunits_per_min,
                [&](double tau) { return stage_intensity(scenario, mid, tau); }, dt);
    state.t = t_next;
    check_divergence(state);
  }
  sim.trace.samples.push_back(state.G);
  sim.states.push_back(state);
  return sim;
}

GlucoseTrace simulate(const PatientParams& params, const UsagePlan& plan,
                      const Scenario& scenario, const SimulationOptions& options) {
  return simulate_detailed(params, plan, scenario, options).trace;
}

}  // namespace aidtwin
