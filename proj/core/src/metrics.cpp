#include "aidtwin/metrics.hpp"

#include <algorithm>

#include "aidtwin/error.hpp"

namespace aidtwin {

namespace {

int count_episodes(const GlucoseTrace& trace, double threshold) {
  int episodes = 0;
  std::size_t run = 0;
  auto close_run = [&] {
    if (run > 0 && static_cast<double>(run - 1) * trace.dt >= kEpisodeMinMinutes - 1e-9) {
      ++episodes;
    }
    run = 0;
  };
  for (double g : trace.samples) {
    if (g < threshold) {
      ++run;
    } else {
      close_run();
    }
  }
  close_run();
  return episodes;
}

}  // namespace

GlycemicMetrics glycemic_metrics(const GlucoseTrace& trace, double lo, double hi) {
  if (!(lo < hi)) {
    throw Error(errc::invalid_band, "glycemic band requires lo < hi");
  }
  require_valid(trace);

  std::size_t in = 0;
  std::size_t above = 0;
  std::size_t below = 0;
  double sum = 0.0;
  for (double g : trace.samples) {
    if (g > hi) {
      ++above;
    } else if (g < lo) {
      ++below;
    } else {
      ++in;
    }
    sum += g;
  }
  const auto n = static_cast<double>(trace.samples.size());
  GlycemicMetrics m;
  m.tir = static_cast<double>(in) / n;
  m.tar = static_cast<double>(above) / n;
  m.tbr = static_cast<double>(below) / n;
  m.mean_glucose = sum / n;
  m.hypo_episodes = count_episodes(trace, kHypoThreshold);
  m.severe_hypo_episodes = count_episodes(trace, kSevereHypoThreshold);
  return m;
}

double quality_score(const GlycemicMetrics& metrics, double robustness, const ScoreWeights& w) {
  if (robustness < 0.0) return w.unsafe_penalty * robustness;
  return w.tir * metrics.tir + w.robustness * std::min(robustness, w.robustness_cap);
}

PlanQuality make_quality(const GlycemicMetrics& metrics, double robustness,
                         const ScoreWeights& weights) {
  PlanQuality q;
  q.robustness = robustness;
  q.tir = metrics.tir;
  q.tar = metrics.tar;
  q.tbr = metrics.tbr;
  q.mean_glucose = metrics.mean_glucose;
  q.hypo_episodes = metrics.hypo_episodes;
  q.severe_hypo_episodes = metrics.severe_hypo_episodes;
  q.score = quality_score(metrics, robustness, weights);
  return q;
}

}  // namespace aidtwin
