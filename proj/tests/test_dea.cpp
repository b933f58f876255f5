#include <gtest/gtest.h>

#include <numeric>
#include <random>

#include "cfdea/dea.hpp"
#include "fixtures.hpp"

using namespace cfdea;

namespace {

constexpr Technology kCrs = Technology::kCrs;
constexpr Technology kVrs = Technology::kVrs;
constexpr Orientation kIn = Orientation::kInput;
constexpr Orientation kOut = Orientation::kOutput;

Panel scaled(const Panel& p, const std::vector<double>& in_f, const std::vector<double>& out_f) {
  Matrix in = p.inputs();
  Matrix out = p.outputs();
  for (std::size_t k = 0; k < p.size(); ++k) {
    for (std::size_t i = 0; i < in.cols(); ++i) in(k, i) *= in_f[i];
    for (std::size_t o = 0; o < out.cols(); ++o) out(k, o) *= out_f[o];
  }
  return Panel(p.ids(), in, out);
}

}  // namespace

TEST(Efficiency, FourFirmScores) {
  const auto s = efficiency_scores(fixtures::four_firms(), kCrs, kIn);
  ASSERT_EQ(s.size(), 4u);
  EXPECT_NEAR(s[0], 1.0, 1e-9);
  EXPECT_NEAR(s[1], 1.0, 1e-9);
  EXPECT_NEAR(s[2], 0.59, 0.005);
  EXPECT_NEAR(s[2], 10.0 / 17.0, 1e-9);
  EXPECT_NEAR(s[3], 0.50, 1e-9);
}

TEST(Efficiency, PeersAndLambdas) {
  const Panel p = fixtures::four_firms();
  const EfficiencyResult r = efficiency(p, 3, kCrs, kIn);
  // Firm 4 at half its inputs lies on the segment between firms 1 and 2.
  EXPECT_EQ(r.peers, (std::vector<std::size_t>{0, 1}));
  for (double l : r.lambdas) EXPECT_GE(l, 0.0);
  double x0 = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) x0 += r.lambdas[k] * p.input(k)[0];
  EXPECT_LE(x0, r.score * p.input(3)[0] + 1e-9);
}

TEST(Efficiency, DoubledInputsHalveTheScore) {
  const PanelBuild pb = parse_panel_csv(std::string(fixtures::kFourFirmsCsv) + "5,1,2,1\n");
  EXPECT_NEAR(efficiency(pb.panel, 4, kCrs, kIn).score, 0.5, 1e-9);
}

TEST(Efficiency, OutputOrientationReportsBothScales) {
  const Panel p = fixtures::four_firms();
  const EfficiencyResult r = efficiency(p, 2, kCrs, kOut);
  EXPECT_NEAR(r.output_factor, 1.7, 1e-9);
  EXPECT_NEAR(r.score, 10.0 / 17.0, 1e-9);
  EXPECT_GE(r.output_factor, 1.0);
}

TEST(Efficiency, VrsConvexity) {
  std::mt19937_64 rng(2);
  const Panel p = fixtures::random_panel(rng, 7, 2, 2);
  for (std::size_t k = 0; k < p.size(); ++k) {
    const EfficiencyResult r = efficiency(p, k, kVrs, kIn);
    EXPECT_NEAR(std::accumulate(r.lambdas.begin(), r.lambdas.end(), 0.0), 1.0, 1e-8);
    EXPECT_GT(r.score, 0.0);
    EXPECT_LE(r.score, 1.0 + 1e-9);
  }
}

TEST(Efficiency, UnknownUnit) {
  try {
    efficiency(fixtures::four_firms(), 9, kCrs, kIn);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kNotFound);
  }
}

TEST(PlanScore, ObservedEfficientPoint) {
  const Panel p = fixtures::four_firms();
  EXPECT_NEAR(efficiency_of_plan(p, p.input(1), p.output(1), kCrs, kIn).score, 1.0, 1e-9);
}

TEST(PlanScore, TableTwoPlan) {
  const Panel p = fixtures::four_firms();
  const std::vector<double> x{1.53, 0.80};
  const std::vector<double> y{1.0};
  EXPECT_NEAR(efficiency_of_plan(p, x, y, kCrs, kIn).score, 0.80, 0.01);
}

TEST(PlanScore, PlanOutsideTechnologyMayExceedOne) {
  const Panel p = fixtures::four_firms();
  const std::vector<double> x{0.4, 0.8};
  const std::vector<double> y{1.0};
  EXPECT_NEAR(efficiency_of_plan(p, x, y, kCrs, kIn).score, 1.25, 1e-9);
}

TEST(PlanScore, VrsOutputAboveMaximumIsInfeasible) {
  const Panel p = fixtures::four_firms();
  const std::vector<double> x{5.0, 5.0};
  const std::vector<double> y{2.0};
  EXPECT_EQ(efficiency_of_plan(p, x, y, kVrs, kIn).status, ScoreStatus::kInfeasible);
  EXPECT_EQ(efficiency_of_plan(p, x, y, kCrs, kIn).status, ScoreStatus::kOptimal);
}

TEST(PlanScore, RejectsBadPlans) {
  const Panel p = fixtures::four_firms();
  const std::vector<double> x{1.0};
  const std::vector<double> y{1.0};
  EXPECT_THROW(efficiency_of_plan(p, x, y, kCrs, kIn), Error);
  const std::vector<double> neg{-1.0, 1.0};
  EXPECT_THROW(efficiency_of_plan(p, neg, y, kCrs, kIn), Error);
}

TEST(Directional, RadialDirectionGivesOneMinusScore) {
  const Panel p = fixtures::four_firms();
  for (std::size_t k = 0; k < p.size(); ++k) {
    DirectionalRequest d;
    d.d_x.assign(p.input(k).begin(), p.input(k).end());
    d.d_y = {0.0};
    const DirectionalResult r = directional_distance(p, k, d, kCrs);
    ASSERT_EQ(r.status, ScoreStatus::kOptimal);
    EXPECT_NEAR(r.excess, 1.0 - efficiency(p, k, kCrs, kIn).score, 1e-9);
  }
  DirectionalRequest d{{1.75, 1.25}, {0.0}};
  EXPECT_NEAR(directional_distance(p, 2, d, kCrs).excess, 0.412, 0.001);
}

TEST(Directional, EfficientFirmHasNoExcess) {
  const Panel p = fixtures::four_firms();
  for (const DirectionalRequest& d :
       {DirectionalRequest{{1.0, 0.0}, {0.0}}, DirectionalRequest{{0.0, 0.0}, {1.0}},
        DirectionalRequest{{0.3, 0.7}, {0.2}}}) {
    EXPECT_NEAR(directional_distance(p, 0, d, kCrs).excess, 0.0, 1e-9);
    EXPECT_NEAR(directional_distance(p, 1, d, kVrs).excess, 0.0, 1e-9);
  }
}

TEST(Directional, TargetPlanIsOnFrontier) {
  const Panel p = fixtures::four_firms();
  DirectionalRequest d{{1.0, 0.0}, {0.0}};
  const DirectionalResult r = directional_distance(p, 3, d, kCrs);
  ASSERT_EQ(r.status, ScoreStatus::kOptimal);
  EXPECT_NEAR(efficiency_of_plan(p, r.target_x, r.target_y, kCrs, kIn).score, 1.0, 1e-7);
}

TEST(Directional, InvalidDirection) {
  const Panel p = fixtures::four_firms();
  EXPECT_THROW(directional_distance(p, 0, DirectionalRequest{{0.0, 0.0}, {0.0}}, kCrs), Error);
  EXPECT_THROW(directional_distance(p, 0, DirectionalRequest{{-1.0, 1.0}, {0.0}}, kCrs), Error);
  EXPECT_THROW(directional_distance(p, 0, DirectionalRequest{{1.0}, {0.0}}, kCrs), Error);
}

TEST(Projection, FourFirmTargets) {
  const Panel p = fixtures::four_firms();
  const auto f3 = farrell_projection(p, 2, 0.8, kCrs);
  EXPECT_NEAR(f3[0], 1.29, 0.01);
  EXPECT_NEAR(f3[1], 0.92, 0.01);
  const auto f4 = farrell_projection(p, 3, 0.8, kCrs);
  EXPECT_NEAR(f4[0], 1.56, 0.01);
  EXPECT_NEAR(f4[1], 0.78, 0.01);
}

TEST(Projection, IdentityAtCurrentScore) {
  const Panel p = fixtures::four_firms();
  const auto x = farrell_projection(p, 3, 0.5, kCrs);
  EXPECT_DOUBLE_EQ(x[0], 2.5);
  EXPECT_DOUBLE_EQ(x[1], 1.25);
  EXPECT_THROW(farrell_projection(p, 3, 0.4, kCrs), Error);
}

TEST(Projection, RescoresToTarget) {
  std::mt19937_64 rng(31);
  for (int t = 0; t < 20; ++t) {
    const Panel p = fixtures::random_panel(rng, 6, 2, 1);
    for (std::size_t k = 0; k < p.size(); ++k) {
      for (Technology tech : {kCrs, kVrs}) {
        const double e = efficiency(p, k, tech, kIn).score;
        const double target = std::min(1.0, e + 0.5 * (1.0 - e));
        const auto x = farrell_projection(p, k, target, tech);
        EXPECT_NEAR(efficiency_of_plan(p, x, p.output(k), tech, kIn).score, target, 1e-6);
      }
    }
  }
}

TEST(DeaProperty, VrsScoresDominateCrs) {
  std::mt19937_64 rng(17);
  for (int t = 0; t < 20; ++t) {
    const Panel p = fixtures::random_panel(rng, 8, 3, 2);
    const auto crs = efficiency_scores(p, kCrs, kIn);
    const auto vrs = efficiency_scores(p, kVrs, kIn);
    for (std::size_t k = 0; k < p.size(); ++k) EXPECT_GE(vrs[k], crs[k] - 1e-9);
  }
}

TEST(DeaProperty, UnitsInvariance) {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> f(0.01, 100.0);
  for (int t = 0; t < 20; ++t) {
    const Panel p = fixtures::random_panel(rng, 8, 3, 2);
    const Panel q = scaled(p, {f(rng), f(rng), f(rng)}, {f(rng), f(rng)});
    for (Technology tech : {kCrs, kVrs})
      for (Orientation o : {kIn, kOut}) {
        const auto a = efficiency_scores(p, tech, o);
        const auto b = efficiency_scores(q, tech, o);
        for (std::size_t k = 0; k < p.size(); ++k) EXPECT_NEAR(a[k], b[k], 1e-9);
      }
  }
}

TEST(DeaProperty, StrongDualityOfScoringLp) {
  std::mt19937_64 rng(29);
  for (int t = 0; t < 20; ++t) {
    const Panel p = fixtures::random_panel(rng, 8, 2, 2);
    for (std::size_t k = 0; k < p.size(); ++k) {
      const EfficiencyResult r = efficiency(p, k, kCrs, kIn);
      // Multiplier form: v.x0 = 1, u.y0 = E, u.y^j - v.x^j <= 0 for every unit.
      double vx = 0.0;
      double uy = 0.0;
      for (std::size_t i = 0; i < 2; ++i) vx += r.input_duals[i] * p.input(k)[i];
      for (std::size_t o = 0; o < 2; ++o) uy += r.output_duals[o] * p.output(k)[o];
      EXPECT_NEAR(vx, 1.0, 1e-7);
      EXPECT_NEAR(uy, r.score, 1e-7);
      for (std::size_t j = 0; j < p.size(); ++j) {
        double u = 0.0;
        double v = 0.0;
        for (std::size_t i = 0; i < 2; ++i) v += r.input_duals[i] * p.input(j)[i];
        for (std::size_t o = 0; o < 2; ++o) u += r.output_duals[o] * p.output(j)[o];
        EXPECT_LE(u - v, 1e-7);
      }
    }
  }
}

TEST(DeaProperty, MaxSlackStageKeepsScore) {
  const Panel p = fixtures::four_firms();
  EfficiencyOptions o;
  o.max_slacks = true;
  for (std::size_t k = 0; k < p.size(); ++k) {
    const EfficiencyResult a = efficiency(p, k, kCrs, kIn);
    const EfficiencyResult b = efficiency(p, k, kCrs, kIn, o);
    EXPECT_NEAR(a.score, b.score, 1e-12);
    for (double s : b.input_slacks) EXPECT_GE(s, -1e-9);
  }
}
