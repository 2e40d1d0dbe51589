#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "aidtwin/error.hpp"
#include "aidtwin/json_io.hpp"
#include "aidtwin/report.hpp"

namespace aidtwin {
namespace {

using json_io::json;

GlucoseTrace sample_trace() {
  GlucoseTrace t;
  t.t0 = 0;
  t.dt = 5;
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> g(40, 320);
  std::uniform_real_distribution<double> u(0, 0.2);
  for (int i = 0; i < 97; ++i) {
    t.samples.push_back(g(rng));
    t.insulin_delivered.push_back(u(rng));
  }
  return t;
}

TEST(TraceCsv, RoundTripsExactly) {
  const auto t = sample_trace();
  const auto csv = write_trace_csv(t);
  EXPECT_EQ(csv.rfind("t_min,glucose_mgdl,insulin_U\n", 0), 0u);
  EXPECT_EQ(parse_trace_csv(csv), t);
}

TEST(TraceCsv, RejectsUnevenSpacing) {
  try {
    (void)parse_trace_csv("t_min,glucose_mgdl,insulin_U\n0,100,0\n5,101,0\n12,99,0\n");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), errc::parse_error);
    EXPECT_NE(std::string(e.what()).find("line 4"), std::string::npos) << e.what();
  }
}

TEST(Svg, DrawsBandAndTrace) {
  const auto t = sample_trace();
  const auto svg = render_svg(t);
  EXPECT_EQ(svg.rfind("<svg", 0), 0u);
  EXPECT_NE(svg.find("class=\"target-band\""), std::string::npos);
  const auto poly = svg.find("<polyline class=\"glucose\"");
  ASSERT_NE(poly, std::string::npos);
  const auto pts_begin = svg.find("points=\"", poly) + 8;
  const auto pts_end = svg.find('"', pts_begin);
  const auto pts = svg.substr(pts_begin, pts_end - pts_begin);
  EXPECT_EQ(static_cast<std::size_t>(std::count(pts.begin(), pts.end(), ',')), t.size());
  EXPECT_NE(svg.find("</svg>"), std::string::npos);
}

TEST(JsonIo, ParamsRoundTrip) {
  auto p = nominal_adult();
  p.p3 = 2.2e-5;
  p.alpha_ex = 0.4;
  EXPECT_EQ(json_io::params_from_json(json_io::to_json(p)), p);
}

TEST(JsonIo, PartialParamsKeepBase) {
  const auto p = json_io::params_from_json({{"n", 0.12}});
  auto expected = nominal_adult();
  expected.n = 0.12;
  EXPECT_EQ(p, expected);
}

TEST(JsonIo, UnknownOrInvalidParamsThrow) {
  for (const auto& bad : {json{{"p9", 1}}, json{{"Vi", 0}}, json{{"p1", "fast"}}, json::array()}) {
    try {
      (void)json_io::params_from_json(bad);
      FAIL() << bad.dump();
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), errc::invalid_params) << bad.dump();
    }
  }
}

TEST(JsonIo, NonFiniteBecomesNull) {
  PlanQuality q;
  q.robustness = std::numeric_limits<double>::infinity();
  q.score = std::nan("");
  const auto j = json_io::to_json(q);
  EXPECT_TRUE(j.at("robustness").is_null());
  EXPECT_TRUE(j.at("score").is_null());
  EXPECT_EQ(j.at("safe"), true);
}

TEST(JsonIo, ParseErrorsAreTyped) {
  try {
    (void)json_io::parse("{\"a\":");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), errc::parse_error);
  }
}

}  // namespace
}  // namespace aidtwin
