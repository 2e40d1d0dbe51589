#include <gtest/gtest.h>

#include <random>
#include <string>

#include "../support/generators.hpp"
#include "aidtwin/error.hpp"
#include "aidtwin/plan.hpp"

namespace aidtwin {
namespace {

ConfigSegment settings(double isf = 50, double cr = 10, double target = 120) {
  ConfigSegment s;
  s.basal = 1.0;
  s.isf = isf;
  s.cr = cr;
  s.target = target;
  return s;
}

std::vector<std::string> violations(std::string_view text) {
  try {
    (void)parse_plan(text);
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), errc::plan_validation);
    return e.details();
  }
  ADD_FAILURE() << "plan parsed without error:\n" << text;
  return {};
}

bool mentions(const std::vector<std::string>& lines, std::string_view needle) {
  for (const auto& l : lines) {
    if (l.find(needle) != std::string::npos) return true;
  }
  return false;
}

TEST(BolusDose, CarbsPlusCorrection) {
  EXPECT_DOUBLE_EQ(bolus_dose(50, 170, settings()), 6.0);
  EXPECT_EQ(bolus_dose(0, 120, settings()), 0.0);
  EXPECT_EQ(bolus_dose(0, 90, settings()), 0.0);
  EXPECT_DOUBLE_EQ(bolus_dose(30, 120, settings()), 3.0);
}

TEST(BolusDose, NonDecreasingInCarbsAndGlucose) {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 2000; ++i) {
    const auto s = settings(gen::uniform(rng, 10, 120), gen::uniform(rng, 2, 30),
                            gen::uniform(rng, 70, 200));
    const double c = gen::uniform(rng, 0, 150);
    const double g = gen::uniform(rng, 40, 400);
    const double dc = gen::uniform(rng, 0, 20);
    const double dg = gen::uniform(rng, 0, 50);
    EXPECT_LE(bolus_dose(c, g, s), bolus_dose(c + dc, g, s));
    EXPECT_LE(bolus_dose(c, g, s), bolus_dose(c, g + dg, s));
  }
}

TEST(InsulinInput, BasalInModelUnits) {
  const auto plan = constant_plan(settings(), 120);
  const auto in = insulin_input(plan, 30, 110);
  EXPECT_DOUBLE_EQ(in.basal_milliunits_per_min, 1000.0 / 60.0);
  EXPECT_TRUE(in.boluses.empty());
}

TEST(InsulinInput, SuspendClampsBasal) {
  auto plan = constant_plan(settings(), 120);
  plan.suspend_threshold = 70;
  EXPECT_EQ(insulin_input(plan, 30, 65).basal_milliunits_per_min, 0.0);
  EXPECT_GT(insulin_input(plan, 30, 70).basal_milliunits_per_min, 0.0);
}

TEST(InsulinInput, MealAnnouncementDosesThroughCalculator) {
  auto plan = constant_plan(settings(), 120);
  plan.actions = {{40, ActionKind::meal, 30}, {40, ActionKind::snack, 15}, {90, ActionKind::bolus, 1.5}};
  const auto at40 = insulin_input(plan, 40, 120);
  ASSERT_EQ(at40.boluses.size(), 1u);
  EXPECT_DOUBLE_EQ(at40.boluses[0].units, 3.0);
  EXPECT_EQ(at40.boluses[0].source, BolusSource::meal);

  const auto window = insulin_input(plan, 85, 120, 10);
  ASSERT_EQ(window.boluses.size(), 1u);
  EXPECT_EQ(window.boluses[0].units, 1.5);
  EXPECT_EQ(window.boluses[0].source, BolusSource::manual);
  EXPECT_TRUE(insulin_input(plan, 89, 120).boluses.empty());
}

TEST(InsulinInput, OutsideSegmentsIsCoverageError) {
  const auto plan = constant_plan(settings(), 120);
  EXPECT_NO_THROW((void)insulin_input(plan, 120, 100));
  try {
    (void)insulin_input(plan, 121, 100);
    FAIL() << "expected plan-coverage";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), errc::plan_coverage);
  }
}

TEST(ParsePlan, MinimalPlan) {
  const auto p = parse_plan("segment 0 90 basal=0.8 isf=45 cr=12 target=110\n");
  ASSERT_EQ(p.segments.size(), 1u);
  EXPECT_EQ(p.horizon(), 90);
  EXPECT_EQ(p.segments[0].basal, 0.8);
  EXPECT_TRUE(p.actions.empty());
  EXPECT_FALSE(p.suspend_threshold);
}

TEST(ParsePlan, PromptSettingsRoundTripExactly) {
  const std::string text = "segment 0 1440 basal=0.9 isf=50 cr=0.36 target=120\n";
  const auto p = parse_plan(text);
  EXPECT_EQ(p.segments[0].isf, 50.0);
  EXPECT_EQ(p.segments[0].cr, 0.36);
  EXPECT_EQ(serialize_plan(p), text);
  EXPECT_EQ(parse_plan(serialize_plan(p)), p);
  const auto warnings = lint(p);
  ASSERT_EQ(warnings.size(), 1u);
  EXPECT_NE(warnings[0].find("cr=0.36"), std::string::npos);
}

TEST(ParsePlan, GapIsNamed) {
  const auto v = violations(
      "segment 0 60 basal=1 isf=50 cr=10 target=120\n"
      "segment 70 120 basal=1 isf=50 cr=10 target=120\n");
  ASSERT_EQ(v.size(), 1u);
  EXPECT_NE(v[0].find("[60, 70)"), std::string::npos) << v[0];
}

TEST(ParsePlan, ListsEveryViolationWithLine) {
  const auto v = violations(
      "# header comment\n"
      "segment 0 60 basal=-1 isf=50 cr=10 target=120\n"
      "segment 50 120 basal=1 isf=0 cr=10 target=250\n"
      "bolus 200 units=2\n"
      "meal 10 carbs=abc\n"
      "dance 5\n");
  EXPECT_TRUE(mentions(v, "line 2")) << ::testing::PrintToString(v);
  EXPECT_TRUE(mentions(v, "overlap"));
  EXPECT_TRUE(mentions(v, "line 3"));
  EXPECT_TRUE(mentions(v, "line 4"));
  EXPECT_TRUE(mentions(v, "line 5"));
  EXPECT_TRUE(mentions(v, "line 6"));
  EXPECT_GE(v.size(), 6u);
}

TEST(ParsePlan, RejectsRepeatedSingletons) {
  const auto v = violations(
      "segment 0 60 basal=1 isf=50 cr=10 target=120\n"
      "suspend 70\nsuspend 75\ninitial 90\ninitial 95\n");
  EXPECT_EQ(v.size(), 2u);
}

TEST(ParsePlan, MustStartAtZero) {
  const auto v = violations("segment 10 60 basal=1 isf=50 cr=10 target=120\n");
  EXPECT_TRUE(mentions(v, "[0, 10)"));
}

TEST(ParsePlan, CanonicalOrder) {
  const auto p = parse_plan(
      "bolus 30 units=1\n"
      "segment 60 120 basal=1.1 isf=50 cr=10 target=120\n"
      "snack 30 carbs=15\n"
      "segment 0 60 basal=1 isf=50 cr=10 target=120\n"
      "meal 30 carbs=40\n");
  EXPECT_EQ(p.segments[0].start, 0);
  ASSERT_EQ(p.actions.size(), 3u);
  EXPECT_EQ(p.actions[0].kind, ActionKind::meal);
  EXPECT_EQ(p.actions[1].kind, ActionKind::snack);
  EXPECT_EQ(p.actions[2].kind, ActionKind::bolus);
}

TEST(ParsePlan, RandomPlansRoundTrip) {
  std::mt19937_64 rng(2024);
  for (int i = 0; i < 500; ++i) {
    const auto p = gen::plan(rng);
    ASSERT_TRUE(validate(p).empty()) << ::testing::PrintToString(validate(p));
    const auto text = serialize_plan(p);
    EXPECT_EQ(parse_plan(text), canonicalize(p)) << text;
    EXPECT_EQ(serialize_plan(parse_plan(text)), text);
  }
}

}  // namespace
}  // namespace aidtwin
