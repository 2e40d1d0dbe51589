#include "aidtwin/ident.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <future>
#include <limits>
#include <optional>
#include <random>

#include "aidtwin/error.hpp"
#include "aidtwin/records.hpp"

namespace aidtwin {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kSensitivityStep = 1e-4;
constexpr double kUnidentifiableRatio = 1e-8;

// Placeholder settings for record replay; only basal matters because logged
// boluses are replayed verbatim and logged meals are unannounced.
ConfigSegment replay_segment(double start, double end, double basal) {
  return {start, end, basal, 50.0, 10.0, 120.0};
}

std::optional<std::vector<double>> try_residuals(const PatientParams& params,
                                                 const UsageRecord& record, double dt) {
  try {
    auto pred = predict_cgm(params, record, dt);
    for (std::size_t i = 0; i < pred.size(); ++i) {
      pred[i] -= record.cgm.samples[i];
      if (!std::isfinite(pred[i])) return std::nullopt;
    }
    return pred;
  } catch (const Error& e) {
    if (e.code() == errc::divergence || e.code() == errc::invalid_params) return std::nullopt;
    throw;
  }
}

double squared_norm(const std::vector<double>& r) {
  double s = 0.0;
  for (double v : r) s += v * v;
  return s;
}

double relative_step(double value) { return kSensitivityStep * (value != 0.0 ? std::abs(value) : 1.0); }

// ---------------------------------------------------------------------------
// Projected Levenberg-Marquardt in box-normalized coordinates z in [0, 1]^m.

struct StartOutcome {
  bool ok = false;
  PatientParams params;
  double sse = kInf;
  int iterations = 0;
  bool converged = false;
};

class BoxProblem {
 public:
  BoxProblem(const UsageRecord& record, const PatientParams& base, const FitOptions& options)
      : record_(record), base_(base), options_(options) {
    for (Param p : options.free) {
      const auto it = options.bounds.find(p);
      if (it == options.bounds.end()) {
        throw Error(errc::invalid_argument,
                    "no bounds given for free parameter " + std::string(param_name(p)));
      }
      if (!(it->second.hi > it->second.lo)) {
        throw Error(errc::invalid_argument,
                    "empty bounds for parameter " + std::string(param_name(p)));
      }
      boxes_.push_back(it->second);
    }
  }

  [[nodiscard]] std::size_t size() const { return boxes_.size(); }

  [[nodiscard]] PatientParams params_at(const Eigen::VectorXd& z) const {
    auto p = base_;
    for (std::size_t j = 0; j < boxes_.size(); ++j) {
      const double zj = std::clamp(z[static_cast<Eigen::Index>(j)], 0.0, 1.0);
      set(p, options_.free[j], boxes_[j].lo + zj * (boxes_[j].hi - boxes_[j].lo));
    }
    return p;
  }

  [[nodiscard]] Eigen::VectorXd normalize(const PatientParams& p) const {
    Eigen::VectorXd z(static_cast<Eigen::Index>(boxes_.size()));
    for (std::size_t j = 0; j < boxes_.size(); ++j) {
      const auto& b = boxes_[j];
      z[static_cast<Eigen::Index>(j)] =
          std::clamp((get(p, options_.free[j]) - b.lo) / (b.hi - b.lo), 0.0, 1.0);
    }
    return z;
  }

  [[nodiscard]] std::optional<std::vector<double>> residuals(const Eigen::VectorXd& z) const {
    return try_residuals(params_at(z), record_, options_.dt);
  }

  [[nodiscard]] Eigen::VectorXd sample(std::mt19937_64& rng) const {
    Eigen::VectorXd z(static_cast<Eigen::Index>(boxes_.size()));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (std::size_t j = 0; j < boxes_.size(); ++j) {
      const auto& b = boxes_[j];
      const double u = unit(rng);
      // Log-uniform over strictly positive boxes, so rates spanning decades are covered.
      const double value =
          b.lo > 0.0 ? std::exp(std::log(b.lo) + u * (std::log(b.hi) - std::log(b.lo)))
                     : b.lo + u * (b.hi - b.lo);
      z[static_cast<Eigen::Index>(j)] = std::clamp((value - b.lo) / (b.hi - b.lo), 0.0, 1.0);
    }
    return z;
  }

 private:
  const UsageRecord& record_;
  PatientParams base_;
  const FitOptions& options_;
  std::vector<ParamBox> boxes_;
};

Eigen::MatrixXd jacobian(const BoxProblem& prob, const Eigen::VectorXd& z,
                         const std::vector<double>& r0) {
  constexpr double h = 1e-6;
  const auto m = static_cast<Eigen::Index>(prob.size());
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(r0.size()), m);
  for (Eigen::Index j = 0; j < m; ++j) {
    Eigen::VectorXd zp = z;
    Eigen::VectorXd zm = z;
    zp[j] = std::min(1.0, z[j] + h);
    zm[j] = std::max(0.0, z[j] - h);
    auto rp = prob.residuals(zp);
    auto rm = prob.residuals(zm);
    const std::vector<double>* hi = rp ? &*rp : &r0;
    const std::vector<double>* lo = rm ? &*rm : &r0;
    const double span = (rp ? zp[j] : z[j]) - (rm ? zm[j] : z[j]);
    if (span <= 0.0) continue;
    for (std::size_t i = 0; i < r0.size(); ++i) {
      J(static_cast<Eigen::Index>(i), j) = ((*hi)[i] - (*lo)[i]) / span;
    }
  }
  return J;
}

StartOutcome levenberg_marquardt(const BoxProblem& prob, Eigen::VectorXd z, int max_iterations) {
  StartOutcome out;
  auto r = prob.residuals(z);
  if (!r) return out;
  double sse = squared_norm(*r);
  if (!std::isfinite(sse)) return out;

  const auto m = static_cast<Eigen::Index>(prob.size());
  const double floor = 1e-24 * static_cast<double>(r->size());
  double lambda = 1e-3;
  int it = 0;
  bool converged = sse <= floor;

  while (!converged && it < max_iterations) {
    ++it;
    const Eigen::MatrixXd J = jacobian(prob, z, *r);
    const Eigen::Map<const Eigen::VectorXd> rv(r->data(), static_cast<Eigen::Index>(r->size()));
    const Eigen::VectorXd g = J.transpose() * rv;
    const Eigen::MatrixXd A = J.transpose() * J;

    // Variables pinned at a bound with the descent direction pointing outward.
    std::vector<Eigen::Index> active;
    for (Eigen::Index j = 0; j < m; ++j) {
      const bool pinned = (z[j] <= 0.0 && g[j] > 0.0) || (z[j] >= 1.0 && g[j] < 0.0);
      if (!pinned) active.push_back(j);
    }
    double pg = 0.0;
    for (auto j : active) pg = std::max(pg, std::abs(g[j]));
    if (active.empty() || pg <= 1e-12 * std::max(1.0, sse)) {
      converged = true;
      break;
    }

    const auto k = static_cast<Eigen::Index>(active.size());
    Eigen::MatrixXd Af(k, k);
    Eigen::VectorXd gf(k);
    for (Eigen::Index a = 0; a < k; ++a) {
      gf[a] = g[active[a]];
      for (Eigen::Index b = 0; b < k; ++b) Af(a, b) = A(active[a], active[b]);
    }

    bool accepted = false;
    for (int attempt = 0; attempt < 12; ++attempt) {
      Eigen::MatrixXd M = Af;
      for (Eigen::Index a = 0; a < k; ++a) M(a, a) += lambda * std::max(Af(a, a), 1e-12);
      const Eigen::VectorXd step = M.ldlt().solve(-gf);
      Eigen::VectorXd zn = z;
      for (Eigen::Index a = 0; a < k; ++a) {
        zn[active[a]] = std::clamp(z[active[a]] + step[a], 0.0, 1.0);
      }
      auto rn = prob.residuals(zn);
      const double sn = rn ? squared_norm(*rn) : kInf;
      if (std::isfinite(sn) && sn < sse) {
        const double moved = (zn - z).cwiseAbs().maxCoeff();
        const double gain = sse - sn;
        z = zn;
        r = std::move(rn);
        sse = sn;
        lambda = std::max(lambda / 3.0, 1e-12);
        accepted = true;
        if (gain <= 1e-12 * sse || moved <= 1e-12 || sse <= floor) converged = true;
        break;
      }
      lambda *= 4.0;
    }
    if (!accepted) converged = true;  // no descent within the damping budget: stationary
  }

  out.ok = true;
  out.params = prob.params_at(z);
  out.sse = sse;
  out.iterations = it;
  out.converged = converged;
  return out;
}

}  // namespace

ParamBounds default_bounds() {
  return {
      {Param::p1, {0.005, 0.1}},    {Param::p2, {0.005, 0.1}},    {Param::p3, {1e-6, 1e-4}},
      {Param::n, {0.02, 0.3}},      {Param::Gb, {60.0, 200.0}},   {Param::Ib, {2.0, 50.0}},
      {Param::Vi, {5.0, 25.0}},     {Param::Vg, {60.0, 250.0}},   {Param::k_emp, {0.01, 0.2}},
      {Param::k_abs, {0.01, 0.2}},  {Param::f_bio, {0.5, 1.0}},   {Param::alpha_ex, {0.0, 3.0}},
  };
}

RecordInputs record_inputs(const PatientParams& params, const UsageRecord& record, double dt) {
  require_valid(record.cgm);
  RecordInputs in;
  const double horizon = record.cgm.end_time() - record.cgm.t0;
  if (!(horizon > 0.0)) {
    throw Error(errc::record_too_short, "usage record has fewer than two CGM samples");
  }

  auto basal = record.basal;
  std::stable_sort(basal.begin(), basal.end(),
                   [](const auto& a, const auto& b) { return a.time < b.time; });
  double rate = basal.empty() ? equilibrium_basal_rate(params) : basal.front().value;
  double start = 0.0;
  for (const auto& e : basal) {
    if (e.time > start && e.time < horizon) {
      in.plan.segments.push_back(replay_segment(start, e.time, rate));
      start = e.time;
    }
    rate = e.value;
  }
  in.plan.segments.push_back(replay_segment(start, horizon, rate));

  for (const auto& b : record.boluses) {
    if (b.time >= 0.0 && b.time <= horizon && b.value > 0.0) {
      in.plan.actions.push_back({b.time, ActionKind::bolus, b.value});
    }
  }
  for (const auto& m : record.meals) {
    if (m.time >= 0.0 && m.time <= horizon && m.value > 0.0) {
      in.scenario.meals.push_back({m.time, m.value});
    }
  }
  std::stable_sort(in.scenario.meals.begin(), in.scenario.meals.end(),
                   [](const auto& a, const auto& b) { return a.time < b.time; });
  in.plan = canonicalize(std::move(in.plan));
  in.scenario.horizon = horizon;

  in.options.dt = dt;
  in.options.sample_interval = record.cgm.dt;
  auto init = equilibrium_state(params);
  init.G = record.cgm.samples.front();
  in.options.initial = init;
  return in;
}

std::vector<double> predict_cgm(const PatientParams& params, const UsageRecord& record, double dt) {
  const auto in = record_inputs(params, record, dt);
  return simulate(params, in.plan, in.scenario, in.options).samples;
}

double sum_squared_residuals(const PatientParams& params, const UsageRecord& record, double dt) {
  const auto pred = predict_cgm(params, record, dt);
  double sse = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred[i] - record.cgm.samples[i];
    sse += d * d;
  }
  return sse;
}

double rmse(const PatientParams& params, const UsageRecord& record, double dt) {
  return std::sqrt(sum_squared_residuals(params, record, dt) /
                   static_cast<double>(record.cgm.samples.size()));
}

std::vector<double> objective_gradient(const PatientParams& params, const UsageRecord& record,
                                       std::span<const Param> which, double rel_step, double dt) {
  std::vector<double> grad;
  grad.reserve(which.size());
  for (Param p : which) {
    const double v = get(params, p);
    const double h = rel_step * (v != 0.0 ? std::abs(v) : 1.0);
    auto hi = params;
    auto lo = params;
    set(hi, p, v + h);
    set(lo, p, v - h);
    grad.push_back((sum_squared_residuals(hi, record, dt) - sum_squared_residuals(lo, record, dt)) /
                   (2.0 * h));
  }
  return grad;
}

IdentifiabilityReport identifiability(const PatientParams& params, const UsageRecord& record,
                                      std::span<const Param> which, double dt) {
  IdentifiabilityReport report;
  const auto n = static_cast<Eigen::Index>(record.cgm.samples.size());
  Eigen::MatrixXd S(n, static_cast<Eigen::Index>(which.size()));

  for (std::size_t j = 0; j < which.size(); ++j) {
    const Param p = which[j];
    const double v = get(params, p);
    const double h = relative_step(v);
    const double scale = v != 0.0 ? std::abs(v) : 1.0;
    auto hi = params;
    auto lo = params;
    set(hi, p, v + h);
    set(lo, p, v - h);
    const auto yp = predict_cgm(hi, record, dt);
    const auto ym = predict_cgm(lo, record, dt);
    for (Eigen::Index i = 0; i < n; ++i) {
      S(i, static_cast<Eigen::Index>(j)) = (yp[i] - ym[i]) / (2.0 * h) * scale;
    }
    report.params.push_back({p, S.col(static_cast<Eigen::Index>(j)).norm(), true});
  }

  double largest = 0.0;
  for (const auto& s : report.params) largest = std::max(largest, s.l2);
  std::vector<Eigen::Index> kept;
  for (std::size_t j = 0; j < report.params.size(); ++j) {
    auto& s = report.params[j];
    s.identifiable = largest > 0.0 && s.l2 > kUnidentifiableRatio * largest;
    if (s.identifiable) kept.push_back(static_cast<Eigen::Index>(j));
  }

  if (kept.empty()) {
    report.condition_number = kInf;
    return report;
  }
  Eigen::MatrixXd N(n, static_cast<Eigen::Index>(kept.size()));
  for (std::size_t k = 0; k < kept.size(); ++k) {
    N.col(static_cast<Eigen::Index>(k)) = S.col(kept[k]).normalized();
  }
  const Eigen::MatrixXd gram = N.transpose() * N;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram, Eigen::EigenvaluesOnly);
  const double lo = eig.eigenvalues().minCoeff();
  const double hi = eig.eigenvalues().maxCoeff();
  report.condition_number = lo > 0.0 ? hi / lo : kInf;
  return report;
}

FitResult fit(const UsageRecord& record, const PatientParams& init, const FitOptions& options) {
  require_valid(init);
  require_valid(record.cgm);
  if (record.duration() < options.min_record_minutes) {
    throw Error(errc::record_too_short,
                "usage record spans " + records::format_number(record.duration()) +
                    " min; at least " + records::format_number(options.min_record_minutes) +
                    " min are required");
  }
  if (options.starts < 1 || options.max_iterations < 1) {
    throw Error(errc::invalid_argument, "fit needs at least one start and one iteration");
  }
  for (Param p : options.free) {
    const auto it = options.bounds.find(p);
    if (it != options.bounds.end() &&
        (get(init, p) < it->second.lo || get(init, p) > it->second.hi)) {
      throw Error(errc::invalid_argument,
                  "initial " + std::string(param_name(p)) + " lies outside its bounds");
    }
  }

  const BoxProblem problem(record, init, options);

  std::vector<Eigen::VectorXd> starts;
  starts.push_back(problem.normalize(init));
  std::mt19937_64 rng(options.seed);
  for (int s = 1; s < options.starts; ++s) starts.push_back(problem.sample(rng));

  std::vector<StartOutcome> outcomes(starts.size());
  if (options.parallel && starts.size() > 1) {
    std::vector<std::future<StartOutcome>> jobs;
    jobs.reserve(starts.size());
    for (const auto& z : starts) {
      jobs.push_back(std::async(std::launch::async, [&problem, z, &options] {
        return levenberg_marquardt(problem, z, options.max_iterations);
      }));
    }
    for (std::size_t i = 0; i < jobs.size(); ++i) outcomes[i] = jobs[i].get();
  } else {
    for (std::size_t i = 0; i < starts.size(); ++i) {
      outcomes[i] = levenberg_marquardt(problem, starts[i], options.max_iterations);
    }
  }

  FitResult result;
  int best = -1;
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    if (!outcomes[i].ok) {
      ++result.diverged_starts;
      continue;
    }
    if (best < 0 || outcomes[i].sse < outcomes[static_cast<std::size_t>(best)].sse) {
      best = static_cast<int>(i);
    }
  }
  if (best < 0) {
    throw Error(errc::all_starts_diverged, "every fit start diverged");
  }
  const auto& win = outcomes[static_cast<std::size_t>(best)];
  if (!std::isfinite(win.sse)) {
    throw Error(errc::non_finite_objective, "fit objective is not finite");
  }

  const auto n = static_cast<double>(record.cgm.samples.size());
  result.params = win.params;
  result.rmse = std::sqrt(win.sse / n);
  result.n_iterations = win.iterations;
  result.best_start = best;
  result.converged = win.converged;
  if (auto r0 = try_residuals(init, record, options.dt)) {
    result.initial_rmse = std::sqrt(squared_norm(*r0) / n);
  } else {
    result.initial_rmse = kInf;
  }
  result.identifiability = identifiability(result.params, record, options.free, options.dt);

  // A parameter the record cannot see at all keeps its supplied value rather
  // than whatever a sampled start happened to hold.
  auto restored = result.params;
  bool changed = false;
  for (const auto& s : result.identifiability.params) {
    if (s.l2 == 0.0 && get(restored, s.param) != get(init, s.param)) {
      set(restored, s.param, get(init, s.param));
      changed = true;
    }
  }
  if (changed) {
    if (auto r = try_residuals(restored, record, options.dt); r && squared_norm(*r) <= win.sse) {
      result.params = restored;
    }
  }
  return result;
}

}  // namespace aidtwin
