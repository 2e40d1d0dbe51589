#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

#include "../support/generators.hpp"
#include "../support/stl_oracle.hpp"
#include "aidtwin/error.hpp"
#include "aidtwin/stl.hpp"

namespace aidtwin::stl {
namespace {

GlucoseTrace trace(std::vector<double> samples, double dt = 1.0) {
  GlucoseTrace g;
  g.dt = dt;
  g.insulin_delivered.assign(samples.size(), 0.0);
  g.samples = std::move(samples);
  return g;
}

TEST(Robustness, ConstantTraceAlways) {
  const auto g = trace(std::vector<double>(289, 100.0), 5.0);
  EXPECT_EQ(robustness(*always(0, 1440, ge(70)), g, 0), 30.0);
}

TEST(Robustness, EventuallyTakesWindowMax) {
  EXPECT_EQ(robustness(*eventually(0, 2, le(80)), trace({100, 90, 75}), 0), 5.0);
}

TEST(Robustness, ConjunctionTakesMin) {
  EXPECT_EQ(robustness(*conj(ge(70), le(180)), trace({85}), 0), 15.0);
  EXPECT_EQ(robustness(*disj(ge(70), le(180)), trace({85}), 0), 95.0);
  EXPECT_EQ(robustness(*negate(ge(70)), trace({85}), 0), -15.0);
}

TEST(Robustness, WindowPastEndIsInsufficientHorizon) {
  try {
    (void)robustness(*always(0, 10, ge(70)), trace({100, 100, 100}), 0);
    FAIL() << "expected insufficient-horizon";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), errc::insufficient_horizon);
  }
  EXPECT_THROW((void)robustness(*ge(70), trace({100, 100}), 5), Error);
}

TEST(Robustness, EmptyWindowIsIdentityElement) {
  // [2, 3] holds no sample of a dt = 5 grid
  const auto g = trace({100, 100, 100}, 5.0);
  EXPECT_EQ(robustness(*always(2, 3, ge(70)), g, 0), std::numeric_limits<double>::infinity());
  EXPECT_EQ(robustness(*eventually(2, 3, ge(70)), g, 0), -std::numeric_limits<double>::infinity());
}

TEST(Robustness, OffGridTimeIsRejected) {
  EXPECT_THROW((void)robustness(*ge(70), trace({100, 100}, 5.0), 2.5), Error);
}

TEST(Formula, BadWindowIsRejected) {
  EXPECT_THROW((void)always(5, 1, ge(70)), Error);
  EXPECT_THROW((void)eventually(-1, 1, ge(70)), Error);
}

TEST(Formula, ParseAndPrint) {
  const auto f = parse_formula("and (always 0 1440 (ge 70)) (ev 0 60 (le 180))");
  EXPECT_EQ(f->op, Op::conjunction);
  EXPECT_EQ(f->lhs->op, Op::always);
  EXPECT_EQ(f->lhs->hi, 1440);
  EXPECT_EQ(f->rhs->op, Op::eventually);
  EXPECT_EQ(depth(*f), 3);
  EXPECT_EQ(time_horizon(*f), 1440);
  EXPECT_EQ(to_string(*parse_formula(to_string(*f))), to_string(*f));
  EXPECT_EQ(parse_formula("G 0 30 not le 60")->lhs->op, Op::negation);
  EXPECT_EQ(parse_formula("F 0 30 (ge 60)")->op, Op::eventually);
}

TEST(Formula, ParseErrors) {
  for (const char* text : {"", "ge", "ge abc", "and (ge 70)", "always 10 0 (ge 70)",
                           "(ge 70", "ge 70 extra", "until 0 5 (ge 70)"}) {
    try {
      (void)parse_formula(text);
      ADD_FAILURE() << "parsed: " << text;
    } catch (const Error& e) {
      EXPECT_FALSE(e.code().empty());
    }
  }
}

TEST(Robustness, ShiftInvariance) {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 200; ++i) {
    auto g = gen::trace(rng, 40, 5.0);
    const double k = gen::uniform(rng, 60, 200);
    const double c = gen::uniform(rng, -30, 30);
    auto shifted = g;
    for (auto& s : shifted.samples) s += c;
    const auto idx = static_cast<double>(gen::integer(rng, 0, static_cast<int>(g.size()) - 1));
    const double t = idx * g.dt;
    EXPECT_NEAR(robustness(*ge(k), shifted, t), robustness(*ge(k), g, t) + c, 1e-12);
  }
}

TEST(Robustness, MatchesBruteForceOracles) {
  std::mt19937_64 rng(99);
  int nonzero = 0;
  for (int i = 0; i < 500; ++i) {
    const double dt = gen::integer(rng, 0, 1) == 0 ? 1.0 : 5.0;
    const auto f = gen::formula(rng, 4, 12);
    const auto g = gen::trace(rng, 50, dt);
    const auto signal = robustness_signal(*f, g);
    std::size_t defined = 0;
    for (std::size_t j = 0; j < g.size(); ++j) {
      const auto r = oracle::rho(*f, g, j);
      const auto b = oracle::sat(*f, g, j);
      ASSERT_EQ(r.has_value(), b.has_value());
      if (!r) continue;
      ++defined;
      ASSERT_LT(j, signal.size()) << to_string(*f);
      EXPECT_EQ(signal[j], *r) << to_string(*f) << " at " << j;
      if (*r > 0) {
        EXPECT_TRUE(*b);
      }
      if (*r < 0) {
        EXPECT_FALSE(*b);
      }
      if (*r != 0) ++nonzero;
    }
    EXPECT_EQ(signal.size(), defined) << to_string(*f);
  }
  EXPECT_GT(nonzero, 1000);
}

}  // namespace
}  // namespace aidtwin::stl
