#include <gtest/gtest.h>

#include <random>

#include "uwauth/detect.hpp"
#include "uwauth/error.hpp"

using namespace uwauth;
using namespace uwauth::detect;
using geometry::Point;

namespace {

constexpr Decision H0 = Decision::kH0;
constexpr Decision H1 = Decision::kH1;

geometry::GroundTruth truth_of(std::vector<geometry::PolarPosition> nodes) {
  geometry::Deployment d;
  d.alice = std::move(nodes);
  return geometry::ground_truth(d);
}

}  // namespace

TEST(Step1, Examples) {
  EXPECT_EQ(test1_distance_bounding(600, 500), H1);
  EXPECT_EQ(test1_distance_bounding(400, 500), H0);
  EXPECT_EQ(test1_distance_bounding(500, 500), H0);
}

TEST(NearestNeighbour, Position) {
  const std::vector<Point> p{{0, 100}, {100, 0}, {5, 5}, {-7, 3}};
  EXPECT_EQ(nn_position(p[3], p), (NearestNeighbour{0.0, 3}));
  const std::vector<Point> two{{0, 100}, {100, 0}};
  EXPECT_EQ(nn_position({99, 0}, two), (NearestNeighbour{1.0, 1}));
  EXPECT_THROW(nn_position({0, 0}, std::vector<Point>{}), ContractError);
}

TEST(NearestNeighbour, PositionMatchesBruteForce) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-500, 500);
  std::vector<Point> p(25);
  for (auto& q : p) q = {u(rng), u(rng)};
  for (int t = 0; t < 200; ++t) {
    const Point x{u(rng), u(rng)};
    double best = 1e300;
    std::size_t idx = 0;
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double dd = std::hypot(x.x - p[i].x, x.y - p[i].y);
      if (dd < best) best = dd, idx = i;
    }
    const auto r = nn_position(x, p);
    EXPECT_EQ(r.index, idx);
    EXPECT_DOUBLE_EQ(r.stat, best);
  }
}

TEST(NearestNeighbour, Distance) {
  const std::vector<double> d{100, 200, 300};
  EXPECT_EQ(nn_distance(210, d), (NearestNeighbour{10.0, 1}));
  EXPECT_EQ(nn_distance(300, d), (NearestNeighbour{0.0, 2}));
  const std::vector<double> tie{100, 200};
  EXPECT_EQ(nn_distance(150, tie).index, 0u);
}

TEST(NearestNeighbour, Aoa) {
  const std::vector<double> th{30, 60, 90};
  EXPECT_EQ(nn_aoa(58, th), (NearestNeighbour{2.0, 1}));
  EXPECT_EQ(nn_aoa(90, th), (NearestNeighbour{0.0, 2}));
  const std::vector<double> tie{30, 60};
  EXPECT_EQ(nn_aoa(45, tie).index, 0u);
  // no wrap-around: 179 is far from 1
  const std::vector<double> ends{1.0};
  EXPECT_DOUBLE_EQ(nn_aoa(179.0, ends).stat, 178.0);
}

TEST(BallTest, Examples) {
  EXPECT_EQ(bh_outlier(0.5, 1.0), H0);
  EXPECT_EQ(bh_outlier(3.1, 3.0), H1);
  EXPECT_EQ(bh_outlier(1.0, 1.0), H0);
}

TEST(Fusion, Step2Examples) {
  const std::array<Decision, 3> a{H1, H0, H0}, b{H1, H1, H0}, c{H0, H0, H0}, d{H1, H1, H1};
  EXPECT_EQ(fuse_step2(a, FusionRule::kAnd), H1);
  EXPECT_EQ(fuse_step2(a, FusionRule::kOr), H0);
  EXPECT_EQ(fuse_step2(a, FusionRule::kMajority), H0);
  EXPECT_EQ(fuse_step2(b, FusionRule::kAnd), H1);
  EXPECT_EQ(fuse_step2(b, FusionRule::kOr), H0);
  EXPECT_EQ(fuse_step2(b, FusionRule::kMajority), H1);
  for (auto r : kFusionRules) {
    EXPECT_EQ(fuse_step2(c, r), H0);
    EXPECT_EQ(fuse_step2(d, r), H1);
  }
  const std::array<Decision, 2> short_list{H0, H0};
  EXPECT_THROW(fuse_step2(short_list, FusionRule::kAnd), ContractError);
}

TEST(Fusion, Steps) {
  EXPECT_EQ(fuse_steps(H0, H0), H0);
  EXPECT_EQ(fuse_steps(H1, H0), H1);
  EXPECT_EQ(fuse_steps(H0, H1), H1);
  EXPECT_EQ(fuse_steps(H1, H1), H1);
}

TEST(Fusion, RuleNames) {
  for (auto r : kFusionRules) EXPECT_EQ(parse_fusion_rule(to_string(r)), r);
  EXPECT_EQ(parse_fusion_rule("MV"), FusionRule::kMajority);
  EXPECT_THROW(parse_fusion_rule("xor"), DomainError);
}

TEST(Identify, Examples) {
  EXPECT_EQ(identify(2, 2, 5), 2u);
  EXPECT_EQ(identify(1, 1, 1), 1u);
  EXPECT_EQ(identify(1, 2, 3), 1u);
  EXPECT_EQ(identify(4, 2, 2), 2u);
  EXPECT_EQ(identify(3, 7, 3), 3u);
}

TEST(Algorithm1, AliceNoiseless) {
  const auto truth = truth_of({{120, 10}, {300, 45}, {450, 170}});
  const Thresholds th{500, 1, 1, 1};
  const auto r = algorithm1(Measurement::full(300, 45), truth, th, Mode::kFull);
  EXPECT_EQ(r.step1, H0);
  EXPECT_EQ(r.final, H0);
  ASSERT_TRUE(r.identified);
  EXPECT_EQ(*r.identified, 1u);
  EXPECT_NEAR(r.position->stat, 0.0, 1e-9);
  EXPECT_EQ(r.distance.stat, 0.0);
  EXPECT_EQ(r.aoa->stat, 0.0);
}

TEST(Algorithm1, EveOutside) {
  const auto truth = truth_of({{120, 10}, {300, 45}});
  const auto r = algorithm1(Measurement::full(800, 30), truth, Thresholds{}, Mode::kFull);
  EXPECT_EQ(r.step1, H1);
  for (auto rule : kFusionRules) EXPECT_EQ(r.final_for(rule), H1);
  EXPECT_FALSE(r.identified);
}

TEST(Algorithm1, EveInsideOffEveryNode) {
  const auto truth = truth_of({{120, 10}, {300, 45}});
  const auto r = algorithm1(Measurement::full(200, 100), truth, Thresholds{}, Mode::kFull);
  EXPECT_EQ(r.step1, H0);
  EXPECT_EQ(*r.test_position, H1);
  EXPECT_EQ(r.test_distance, H1);
  EXPECT_EQ(*r.test_aoa, H1);
  EXPECT_EQ(r.final, H1);
  EXPECT_FALSE(r.identified);
}

TEST(Algorithm1, DistanceOnly) {
  const auto truth = truth_of({{120, 10}, {300, 45}});
  const auto r = algorithm1(Measurement::distance_only(300.5), truth, Thresholds{}, Mode::kDistanceOnly);
  EXPECT_FALSE(r.position);
  EXPECT_FALSE(r.aoa);
  EXPECT_EQ(r.final, H0);
  EXPECT_EQ(*r.identified, 1u);
  for (auto rule : kFusionRules) EXPECT_EQ(r.fused(rule), r.test_distance);
  EXPECT_THROW(algorithm1(Measurement::distance_only(10), truth, Thresholds{}, Mode::kFull), ContractError);
  EXPECT_THROW(algorithm1(Measurement::distance_only(10), geometry::GroundTruth{}, Thresholds{},
                          Mode::kDistanceOnly),
               ContractError);
}

TEST(Algorithm1, FinalRuleSelection) {
  // only the distance test passes: OR authenticates, MV and AND do not
  const auto truth = truth_of({{300, 45}});
  const auto m = Measurement::full(300, 60);
  const auto r_or = algorithm1(m, truth, Thresholds{}, Mode::kFull, FusionRule::kOr);
  const auto r_and = algorithm1(m, truth, Thresholds{}, Mode::kFull, FusionRule::kAnd);
  EXPECT_EQ(r_or.final, H0);
  EXPECT_EQ(r_and.final, H1);
  EXPECT_EQ(r_or.final_by_rule, r_and.final_by_rule);
}

TEST(Properties, InclusionsMonotonicityDeterminism) {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> rad(0, 700), ang(0, 180), eps(0.1, 50);
  geometry::Deployment dep;
  Rng grng(5);
  dep.alice = geometry::deploy_alice(10, 500, 10, grng);
  const auto truth = geometry::ground_truth(dep);
  for (int t = 0; t < 5000; ++t) {
    const auto m = Measurement::full(rad(rng), ang(rng));
    const Thresholds th{500, eps(rng), eps(rng), eps(rng)};
    const auto r = algorithm1(m, truth, th, Mode::kFull);
    ASSERT_TRUE(fusion_inclusions_hold(r));
    ASSERT_EQ(r, algorithm1(m, truth, th, Mode::kFull));
    Thresholds wider = th;
    wider.eps_p *= 2;
    wider.eps_d *= 1.5;
    wider.eps_theta *= 3;
    const auto w = algorithm1(m, truth, wider, Mode::kFull);
    for (auto rule : kFusionRules) {
      if (r.final_for(rule) == H0) ASSERT_EQ(w.final_for(rule), H0);
      if (r.fused(rule) == H0) ASSERT_EQ(w.fused(rule), H0);
    }
    // an unbounded position ball always authenticates the position test
    Thresholds huge = th;
    huge.eps_p = 1e12;
    ASSERT_EQ(*algorithm1(m, truth, huge, Mode::kFull).test_position, H0);
  }
}

TEST(Properties, InclusionCheckerCatchesViolation) {
  DecisionRecord r;
  r.step2 = {H0, H1, H1};  // AND authenticates while OR does not
  EXPECT_FALSE(fusion_inclusions_hold(r));
}

TEST(ThresholdsTest, Validate) {
  EXPECT_NO_THROW(Thresholds{}.validate());
  EXPECT_THROW((Thresholds{500, 1, -1, 1}).validate(), DomainError);
  EXPECT_THROW((Thresholds{0, 1, 1, 1}).validate(), DomainError);
}
