#include <gtest/gtest.h>

#include <random>

#include "../support/generators.hpp"
#include "aidtwin/error.hpp"
#include "aidtwin/metrics.hpp"

namespace aidtwin {
namespace {

GlucoseTrace trace(std::vector<double> samples, double dt = 5.0) {
  GlucoseTrace g;
  g.dt = dt;
  g.insulin_delivered.assign(samples.size(), 0.0);
  g.samples = std::move(samples);
  return g;
}

TEST(Metrics, ConsensusConstants) {
  EXPECT_EQ(kTargetRangeLow, 70.0);
  EXPECT_EQ(kTargetRangeHigh, 180.0);
  EXPECT_EQ(kTimeInRangeGoal, 0.70);
  EXPECT_EQ(kHypoThreshold, 70.0);
  EXPECT_EQ(kSevereHypoThreshold, 54.0);
  EXPECT_EQ(kEpisodeMinMinutes, 15.0);
}

TEST(Metrics, HandCount) {
  const auto m = glycemic_metrics(trace({60, 100, 150, 200}));
  EXPECT_EQ(m.tir, 0.5);
  EXPECT_EQ(m.tar, 0.25);
  EXPECT_EQ(m.tbr, 0.25);
  EXPECT_EQ(m.mean_glucose, 127.5);
}

TEST(Metrics, BandEdgesCountAsInRange) {
  const auto m = glycemic_metrics(trace({70, 180}));
  EXPECT_EQ(m.tir, 1.0);
}

TEST(Metrics, ConstantInRange) {
  const auto m = glycemic_metrics(trace(std::vector<double>(100, 100.0)));
  EXPECT_EQ(m.tir, 1.0);
  EXPECT_EQ(m.tar, 0.0);
  EXPECT_EQ(m.hypo_episodes, 0);
  EXPECT_EQ(m.severe_hypo_episodes, 0);
  EXPECT_EQ(m.mean_glucose, 100.0);
}

TEST(Metrics, EpisodesNeedFifteenMinutes) {
  EXPECT_EQ(glycemic_metrics(trace({65, 65, 65})).hypo_episodes, 0);
  EXPECT_EQ(glycemic_metrics(trace({65, 65, 65, 65})).hypo_episodes, 1);
  EXPECT_EQ(glycemic_metrics(trace({100, 65, 65, 65, 65, 100, 50, 50, 50, 50, 120})).hypo_episodes, 2);
  const auto m = glycemic_metrics(trace({60, 50, 50, 50, 53, 60}));
  EXPECT_EQ(m.hypo_episodes, 1);
  EXPECT_EQ(m.severe_hypo_episodes, 1);
}

TEST(Metrics, InvalidBand) {
  try {
    (void)glycemic_metrics(trace({100}), 180, 70);
    FAIL() << "expected invalid-band";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), errc::invalid_band);
  }
  EXPECT_THROW((void)glycemic_metrics(trace({100}), 100, 100), Error);
}

TEST(Metrics, FractionsSumToOne) {
  std::mt19937_64 rng(17);
  for (int i = 0; i < 300; ++i) {
    const auto m = glycemic_metrics(gen::trace(rng, 300, 5.0));
    EXPECT_NEAR(m.tir + m.tar + m.tbr, 1.0, 1e-12);
    EXPECT_GE(m.tir, 0.0);
    EXPECT_LE(m.tir, 1.0);
  }
}

TEST(Score, Examples) {
  GlycemicMetrics m;
  m.tir = 0.9;
  EXPECT_EQ(quality_score(m, -5), -500.0);
  m.tir = 0.7;
  EXPECT_DOUBLE_EQ(quality_score(m, 0), 70.0);
  m.tir = 1.0;
  EXPECT_EQ(quality_score(m, 80), 150.0);
}

TEST(Score, PenaltyDominance) {
  std::mt19937_64 rng(23);
  for (int i = 0; i < 5000; ++i) {
    GlycemicMetrics a;
    GlycemicMetrics b;
    a.tir = gen::uniform(rng, 0, 1);
    b.tir = gen::uniform(rng, 0, 1);
    const double unsafe = -gen::uniform(rng, 1e-9, 200);
    const double safe = gen::uniform(rng, 0, 200);
    EXPECT_LT(quality_score(a, unsafe), quality_score(b, safe));
    EXPECT_LT(quality_score(a, unsafe), 0.0);
    EXPECT_GE(quality_score(b, safe), 0.0);
  }
}

TEST(Score, NonDecreasingInRobustness) {
  std::mt19937_64 rng(29);
  for (int i = 0; i < 2000; ++i) {
    GlycemicMetrics m;
    m.tir = gen::uniform(rng, 0, 1);
    const double r = gen::uniform(rng, -100, 100);
    EXPECT_LE(quality_score(m, r), quality_score(m, r + gen::uniform(rng, 0, 50)));
  }
}

TEST(Score, QualityBundle) {
  GlycemicMetrics m;
  m.tir = 0.8;
  m.tar = 0.15;
  m.tbr = 0.05;
  m.mean_glucose = 140;
  m.hypo_episodes = 1;
  const auto q = make_quality(m, -2.0);
  EXPECT_EQ(q.robustness, -2.0);
  EXPECT_EQ(q.score, -200.0);
  EXPECT_FALSE(q.safe());
  EXPECT_EQ(q.hypo_episodes, 1);
  EXPECT_TRUE(make_quality(m, 0.0).safe());
}

}  // namespace
}  // namespace aidtwin
