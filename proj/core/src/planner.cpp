#include "aidtwin/planner.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "aidtwin/records.hpp"

namespace aidtwin {

namespace {

using records::format_number;

constexpr double kTimeEps = 1e-9;
constexpr std::array<std::string_view, 4> kBoundedFields = {"basal", "isf", "cr", "target"};
constexpr std::array<double, 5> kSnackSizes = {10.0, 15.0, 20.0, 25.0, 30.0};
constexpr double kBolusStep = 0.5;

double segment_field(const ConfigSegment& s, std::string_view field) {
  if (field == "basal") return s.basal;
  if (field == "isf") return s.isf;
  if (field == "cr") return s.cr;
  return s.target;
}

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string minutes(double t) { return "t=" + format_number(t) + " min"; }

template <class T>
const T& pick(const std::vector<T>& items, std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> d(0, items.size() - 1);
  return items[d(rng)];
}

std::vector<std::size_t> action_indices(const UsagePlan& plan, ActionKind kind) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < plan.actions.size(); ++i) {
    if (plan.actions[i].kind == kind) out.push_back(i);
  }
  return out;
}

std::vector<double> clamp_unique(std::vector<double> times, double horizon) {
  for (auto& t : times) t = std::clamp(t, 0.0, horizon);
  std::sort(times.begin(), times.end());
  times.erase(std::unique(times.begin(), times.end()), times.end());
  return times;
}

// Times at which carbohydrate taken ahead of an event can help.
std::vector<double> snack_times(const PlanContext& c) {
  std::vector<double> times{0.0};
  for (const auto& e : c.scenario.exercise) {
    times.insert(times.end(), {e.start - 30.0, e.start - 15.0, e.start});
  }
  for (const auto& m : c.scenario.meals) times.insert(times.end(), {m.time - 15.0, m.time});
  return clamp_unique(std::move(times), c.horizon());
}

std::vector<double> bolus_times(const PlanContext& c, const UsagePlan& plan) {
  std::vector<double> times{0.0};
  for (const auto& m : c.scenario.meals) times.push_back(m.time);
  for (const auto& a : plan.actions) {
    if (a.kind == ActionKind::meal) times.push_back(a.time);
  }
  return clamp_unique(std::move(times), c.horizon());
}

std::optional<Move> finish(UsagePlan plan, std::string description) {
  plan = canonicalize(std::move(plan));
  if (!validate(plan).empty()) return std::nullopt;
  return Move{std::move(plan), std::move(description)};
}

std::optional<Move> draw_feasible(const UsagePlan& from, const PlanContext& c, std::mt19937_64& rng,
                                  int max_draws, int& rejected) {
  for (int i = 0; i < max_draws; ++i) {
    auto m = random_neighbor(from, c, rng);
    if (!m) continue;
    if (!check_feasibility(m->plan, c.constraints, c.horizon()).empty()) {
      ++rejected;
      continue;
    }
    return m;
  }
  return std::nullopt;
}

}  // namespace

std::string Violation::message() const {
  return field + " at " + location + ": " + format_number(value) +
         (value > bound ? " exceeds bound " : " is below bound ") + format_number(bound);
}

std::vector<Violation> check_feasibility(const UsagePlan& plan, const FeasibilityConstraints& c,
                                         std::optional<double> horizon) {
  std::vector<Violation> out;
  if (horizon && std::abs(plan.horizon() - *horizon) > kTimeEps) {
    out.push_back({"horizon", "plan", plan.horizon(), *horizon});
  }
  for (std::size_t i = 0; i < plan.segments.size(); ++i) {
    const auto& s = plan.segments[i];
    const auto where = "segment " + std::to_string(i) + " [" + format_number(s.start) + ", " +
                       format_number(s.end) + ")";
    for (auto field : kBoundedFields) {
      const auto it = c.fields.find(std::string(field));
      if (it == c.fields.end()) continue;
      const double v = segment_field(s, field);
      if (v < it->second.lo) out.push_back({std::string(field), where, v, it->second.lo});
      if (v > it->second.hi) out.push_back({std::string(field), where, v, it->second.hi});
    }
  }
  int boluses = 0;
  int meals = 0;
  for (const auto& a : plan.actions) {
    if (a.kind == ActionKind::bolus) {
      ++boluses;
      if (c.max_bolus && a.amount > *c.max_bolus) {
        out.push_back({"bolus", minutes(a.time), a.amount, *c.max_bolus});
      }
    } else {
      ++meals;
      if (c.max_carbs && a.amount > *c.max_carbs) {
        out.push_back({std::string(action_keyword(a.kind)), minutes(a.time), a.amount, *c.max_carbs});
      }
    }
  }
  if (c.max_boluses && boluses > *c.max_boluses) {
    out.push_back({"max_boluses", "plan", static_cast<double>(boluses),
                   static_cast<double>(*c.max_boluses)});
  }
  if (c.max_meals && meals > *c.max_meals) {
    out.push_back({"max_meals", "plan", static_cast<double>(meals),
                   static_cast<double>(*c.max_meals)});
  }
  return out;
}

PlanContext parse_context(std::string_view text) {
  PlanContext c;
  c.params = nominal_adult();
  std::vector<std::string> issues;
  bool have_glucose = false;
  bool have_settings = false;
  bool have_horizon = false;
  std::optional<std::string> spec_text;
  int spec_line = 0;

  for (const auto& r : records::split_records(text)) {
    const auto at = "line " + std::to_string(r.line) + ": ";
    auto num = [&](const std::string& tok, const std::string& what) {
      auto v = records::parse_number(tok);
      if (!v) issues.push_back(at + r.keyword + ": " + what + " is not a number");
      return v;
    };
    auto count = [&](const std::string& tok) -> std::optional<int> {
      auto v = num(tok, "count");
      if (v && (*v < 0 || *v != std::floor(*v))) {
        issues.push_back(at + r.keyword + ": count must be a non-negative integer");
        return std::nullopt;
      }
      if (v) return static_cast<int>(*v);
      return std::nullopt;
    };
    const bool one = r.positional.size() == 1 && r.named.empty();

    if (r.keyword == "glucose" && one) {
      if (auto v = num(r.positional[0], "glucose")) {
        c.glucose = *v;
        have_glucose = true;
      }
    } else if (r.keyword == "goal") {
      c.goal = r.rest;
    } else if (r.keyword == "spec") {
      spec_text = r.rest;
      spec_line = r.line;
    } else if (r.keyword == "settings" && r.positional.empty() && r.named.count("basal")) {
      for (const auto& [key, value] : r.named) {
        auto v = num(value, key);
        if (!v) continue;
        if (key == "basal") c.settings.basal = *v;
        else if (key == "isf") c.settings.isf = *v;
        else if (key == "cr") c.settings.cr = *v;
        else if (key == "target") c.settings.target = *v;
        else issues.push_back(at + "settings: unknown key '" + key + "'");
      }
      have_settings = true;
    } else if (r.keyword == "suspend" && one) {
      if (auto v = num(r.positional[0], "threshold")) c.suspend_threshold = *v;
    } else if (r.keyword == "horizon" && one) {
      if (auto v = num(r.positional[0], "horizon")) {
        c.scenario.horizon = *v;
        have_horizon = true;
      }
    } else if (r.keyword == "meal" && r.positional.size() == 1 && r.named.size() == 1 &&
               r.named.count("carbs")) {
      auto t = num(r.positional[0], "time");
      auto g = num(r.named.at("carbs"), "carbs");
      if (t && g) c.scenario.meals.push_back({*t, *g});
    } else if (r.keyword == "exercise" && r.positional.size() == 2 && r.named.size() == 1 &&
               r.named.count("intensity")) {
      auto t = num(r.positional[0], "start");
      auto d = num(r.positional[1], "duration");
      auto i = num(r.named.at("intensity"), "intensity");
      if (t && d && i) c.scenario.exercise.push_back({*t, *d, *i});
    } else if (r.keyword == "limit" && r.positional.size() == 3 && r.named.empty()) {
      const auto& field = r.positional[0];
      if (std::find(kBoundedFields.begin(), kBoundedFields.end(), field) == kBoundedFields.end()) {
        issues.push_back(at + "limit: unknown field '" + field + "'");
        continue;
      }
      auto lo = num(r.positional[1], "lower bound");
      auto hi = num(r.positional[2], "upper bound");
      if (lo && hi) {
        if (*lo > *hi) issues.push_back(at + "limit " + field + ": lower bound exceeds upper bound");
        c.constraints.fields[field] = {*lo, *hi};
      }
    } else if (r.keyword == "max_bolus" && one) {
      c.constraints.max_bolus = num(r.positional[0], "max_bolus");
    } else if (r.keyword == "max_carbs" && one) {
      c.constraints.max_carbs = num(r.positional[0], "max_carbs");
    } else if (r.keyword == "max_boluses" && one) {
      c.constraints.max_boluses = count(r.positional[0]);
    } else if (r.keyword == "max_meals" && one) {
      c.constraints.max_meals = count(r.positional[0]);
    } else {
      issues.push_back(at + "malformed or unknown context record '" + r.keyword + "'");
    }
  }

  if (!have_glucose) issues.emplace_back("missing 'glucose' record");
  if (have_glucose && !(c.glucose > 0)) issues.emplace_back("glucose must be > 0");
  if (!have_settings) issues.emplace_back("missing 'settings' record");
  if (!have_horizon) issues.emplace_back("missing 'horizon' record");

  auto by_time = [](const auto& a, const auto& b) { return a.time < b.time; };
  std::stable_sort(c.scenario.meals.begin(), c.scenario.meals.end(), by_time);
  std::stable_sort(c.scenario.exercise.begin(), c.scenario.exercise.end(),
                   [](const auto& a, const auto& b) { return a.start < b.start; });
  if (have_horizon) {
    for (auto& s : validate(c.scenario)) issues.push_back(std::move(s));
  }
  if (have_settings && have_horizon) {
    for (auto& s : validate(seed_plan(c))) issues.push_back("settings: " + s);
  }

  if (spec_text) {
    try {
      c.spec = stl::parse_formula(*spec_text);
    } catch (const Error& e) {
      issues.push_back("line " + std::to_string(spec_line) + ": spec: " + e.what());
    }
  } else if (have_horizon) {
    c.spec = stl::always(0.0, c.scenario.horizon, stl::ge(kHypoThreshold));
  }

  if (!issues.empty()) {
    throw Error(errc::parse_error, "invalid context: " + issues.front(), issues);
  }
  return c;
}

std::string serialize_context(const PlanContext& c) {
  std::ostringstream os;
  os << "glucose " << format_number(c.glucose) << '\n';
  if (!c.goal.empty()) os << "goal " << c.goal << '\n';
  os << "settings basal=" << format_number(c.settings.basal) << " isf=" << format_number(c.settings.isf)
     << " cr=" << format_number(c.settings.cr) << " target=" << format_number(c.settings.target)
     << '\n';
  if (c.suspend_threshold) os << "suspend " << format_number(*c.suspend_threshold) << '\n';
  os << "horizon " << format_number(c.scenario.horizon) << '\n';
  for (const auto& m : c.scenario.meals) {
    os << "meal " << format_number(m.time) << " carbs=" << format_number(m.carbs) << '\n';
  }
  for (const auto& e : c.scenario.exercise) {
    os << "exercise " << format_number(e.start) << ' ' << format_number(e.duration)
       << " intensity=" << format_number(e.intensity) << '\n';
  }
  if (c.spec) os << "spec " << stl::to_string(*c.spec) << '\n';
  for (const auto& [field, b] : c.constraints.fields) {
    os << "limit " << field << ' ' << format_number(b.lo) << ' ' << format_number(b.hi) << '\n';
  }
  if (c.constraints.max_bolus) os << "max_bolus " << format_number(*c.constraints.max_bolus) << '\n';
  if (c.constraints.max_boluses) os << "max_boluses " << *c.constraints.max_boluses << '\n';
  if (c.constraints.max_carbs) os << "max_carbs " << format_number(*c.constraints.max_carbs) << '\n';
  if (c.constraints.max_meals) os << "max_meals " << *c.constraints.max_meals << '\n';
  return os.str();
}

TwinState context_initial_state(const PlanContext& context) {
  auto s = equilibrium_state(context.params);
  s.G = context.glucose;
  return s;
}

PlanEvaluation evaluate_in_context(const PlanContext& context, const UsagePlan& plan) {
  if (!context.spec) throw Error(errc::invalid_argument, "context has no safety spec");
  auto options = context.evaluation;
  options.simulation.initial = context_initial_state(context);
  return evaluate_plan(context.params, plan, context.scenario, *context.spec, options);
}

UsagePlan seed_plan(const PlanContext& context) {
  auto plan = constant_plan(context.settings, context.horizon());
  plan.suspend_threshold = context.suspend_threshold;
  plan.initial_glucose = context.glucose;
  return plan;
}

std::string describe_quality(const PlanQuality& q) {
  std::ostringstream os;
  os << "robustness=" << fixed(q.robustness, 2) << " mg/dL (" << (q.safe() ? "safe" : "unsafe")
     << "); score=" << fixed(q.score, 2) << "; tir=" << fixed(q.tir, 3) << "; tar=" << fixed(q.tar, 3)
     << "; tbr=" << fixed(q.tbr, 3) << "; mean_glucose=" << fixed(q.mean_glucose, 1)
     << " mg/dL; hypo_episodes=" << q.hypo_episodes
     << "; severe_hypo_episodes=" << q.severe_hypo_episodes;
  return os.str();
}

std::string_view to_string(IterationKind kind) {
  switch (kind) {
    case IterationKind::seed: return "seed";
    case IterationKind::move: return "move";
    case IterationKind::restart: return "restart";
    case IterationKind::response: return "response";
  }
  return "unknown";
}

std::string_view to_string(StopReason reason) {
  switch (reason) {
    case StopReason::safe: return "safe";
    case StopReason::budget: return "budget";
    case StopReason::planner_failure: return "planner-failure";
  }
  return "unknown";
}

PlannerFailure::PlannerFailure(const std::string& message, RefinementResult partial)
    : Error(errc::planner_failure, message), partial_(std::move(partial)) {}

std::optional<Move> random_neighbor(const UsagePlan& plan, const PlanContext& context,
                                    std::mt19937_64& rng) {
  enum Kind { basal, target, isf, cr, add_snack, remove_snack, add_bolus, remove_bolus, resize_bolus };
  std::uniform_int_distribution<int> kinds(basal, resize_bolus);
  std::bernoulli_distribution up(0.5);
  std::uniform_int_distribution<std::size_t> segs(0, plan.segments.empty() ? 0 : plan.segments.size() - 1);

  auto next = plan;
  const auto kind = static_cast<Kind>(kinds(rng));
  if (kind <= cr) {
    if (plan.segments.empty()) return std::nullopt;
    const auto i = segs(rng);
    auto& s = next.segments[i];
    const bool inc = up(rng);
    const auto where = " on segment " + std::to_string(i);
    const double factor = inc ? 1.1 : 0.9;
    switch (kind) {
      case basal:
        s.basal *= factor;
        return finish(std::move(next), std::string("basal x") + (inc ? "1.1" : "0.9") + where);
      case target:
        s.target += inc ? 10.0 : -10.0;
        return finish(std::move(next), std::string("target ") + (inc ? "+10" : "-10") + where);
      case isf:
        s.isf *= factor;
        return finish(std::move(next), std::string("isf x") + (inc ? "1.1" : "0.9") + where);
      default:
        s.cr *= factor;
        return finish(std::move(next), std::string("cr x") + (inc ? "1.1" : "0.9") + where);
    }
  }

  switch (kind) {
    case add_snack: {
      const double t = pick(snack_times(context), rng);
      const double g = kSnackSizes[std::uniform_int_distribution<std::size_t>(0, kSnackSizes.size() - 1)(rng)];
      next.actions.push_back({t, ActionKind::snack, g});
      return finish(std::move(next), "add snack " + format_number(g) + " g at " + format_number(t) + " min");
    }
    case remove_snack: {
      const auto idx = action_indices(plan, ActionKind::snack);
      if (idx.empty()) return std::nullopt;
      const auto i = pick(idx, rng);
      const auto a = next.actions[i];
      next.actions.erase(next.actions.begin() + static_cast<std::ptrdiff_t>(i));
      return finish(std::move(next), "remove snack " + format_number(a.amount) + " g at " +
                                         format_number(a.time) + " min");
    }
    case add_bolus: {
      const double t = pick(bolus_times(context, plan), rng);
      next.actions.push_back({t, ActionKind::bolus, kBolusStep});
      return finish(std::move(next), "add bolus 0.5 U at " + format_number(t) + " min");
    }
    case remove_bolus: {
      const auto idx = action_indices(plan, ActionKind::bolus);
      if (idx.empty()) return std::nullopt;
      const auto i = pick(idx, rng);
      const auto a = next.actions[i];
      next.actions.erase(next.actions.begin() + static_cast<std::ptrdiff_t>(i));
      return finish(std::move(next), "remove bolus " + format_number(a.amount) + " U at " +
                                         format_number(a.time) + " min");
    }
    default: {
      const auto idx = action_indices(plan, ActionKind::bolus);
      if (idx.empty()) return std::nullopt;
      const auto i = pick(idx, rng);
      auto& a = next.actions[i];
      const bool inc = up(rng);
      a.amount += inc ? kBolusStep : -kBolusStep;
      const auto desc = std::string("resize bolus at ") + format_number(a.time) + " min " +
                        (inc ? "+0.5" : "-0.5") + " U";
      if (a.amount <= 0.0) next.actions.erase(next.actions.begin() + static_cast<std::ptrdiff_t>(i));
      return finish(std::move(next), desc);
    }
  }
}

UsagePlan LocalSearchPlanner::propose(const PlanContext& context, const RefinementLog& history) {
  if (!history.best_index) return seed_plan(context);
  const auto& best = history.iterations.at(static_cast<std::size_t>(*history.best_index));
  if (!best.plan) return seed_plan(context);
  int rejected = 0;
  if (auto m = draw_feasible(*best.plan, context, rng_, 200, rejected)) return std::move(m->plan);
  return *best.plan;
}

bool safety_gate(const PlanContext& context, const UsagePlan& plan) {
  if (!context.spec) return false;
  SimulationOptions sim = context.evaluation.simulation;
  sim.initial = context_initial_state(context);
  const auto trace = simulate(context.params, plan, context.scenario, sim);
  return stl::robustness(*context.spec, trace, trace.t0) >= 0.0;
}

RefinementResult local_search_refine(const PlanContext& context, int budget,
                                     const LocalSearchOptions& options) {
  if (budget < 1) throw Error(errc::invalid_argument, "budget must be >= 1");
  require_valid(context.params);

  RefinementResult out;
  auto& log = out.log;
  const auto seed = seed_plan(context);
  if (auto v = check_feasibility(seed, context.constraints, context.horizon()); !v.empty()) {
    std::vector<std::string> details;
    for (const auto& x : v) details.push_back(x.message());
    throw Error(errc::infeasible_context, "seed plan violates the feasibility constraints",
                std::move(details));
  }

  std::mt19937_64 rng(options.seed);
  double best_score = -std::numeric_limits<double>::infinity();
  UsagePlan best = seed;
  UsagePlan current = seed;
  int stale = 0;

  auto record = [&](IterationRecord rec) {
    rec.index = static_cast<int>(log.iterations.size());
    if (options.on_iteration) options.on_iteration(rec);
    log.iterations.push_back(std::move(rec));
  };

  // Simulates a candidate and logs it; returns true when it became the best.
  auto try_plan = [&](UsagePlan plan, IterationKind kind, std::string move) {
    IterationRecord rec;
    rec.kind = kind;
    rec.move = std::move(move);
    try {
      const auto ev = evaluate_in_context(context, plan);
      rec.quality = ev.quality;
      rec.feedback = describe_quality(ev.quality);
      rec.accepted = ev.quality.score > best_score;
    } catch (const Error& e) {
      if (kind == IterationKind::seed) throw;
      rec.feedback = std::string("simulation failed: ") + e.what();
    }
    rec.plan = plan;
    const bool accepted = rec.accepted;
    if (accepted) {
      best_score = rec.quality->score;
      best = plan;
      log.best_index = static_cast<int>(log.iterations.size());
    }
    record(std::move(rec));
    return accepted;
  };

  try_plan(seed, IterationKind::seed, "seed: current settings over the horizon");
  auto best_safe = [&] {
    return log.best_index && log.iterations[static_cast<std::size_t>(*log.best_index)].quality->safe();
  };

  while (static_cast<int>(log.iterations.size()) < budget) {
    if (options.stop_when_safe && best_safe()) break;

    if (stale >= options.patience) {
      UsagePlan jumped = best;
      std::string desc = "restart from best:";
      for (int k = 0; k < options.restart_moves; ++k) {
        auto m = draw_feasible(jumped, context, rng, options.max_draws, log.infeasible_rejected);
        if (!m) break;
        jumped = std::move(m->plan);
        desc += " " + m->description + ";";
      }
      stale = 0;
      current = jumped;
      if (try_plan(jumped, IterationKind::restart, desc)) current = best;
      continue;
    }

    auto m = draw_feasible(current, context, rng, options.max_draws, log.infeasible_rejected);
    if (!m) {
      stale = options.patience;
      continue;
    }
    if (try_plan(m->plan, IterationKind::move, m->description)) {
      current = best;
      stale = 0;
    } else {
      ++stale;
    }
  }

  out.plan = best;
  log.stop_reason = best_safe() && safety_gate(context, best) ? StopReason::safe : StopReason::budget;
  return out;
}

}  // namespace aidtwin
