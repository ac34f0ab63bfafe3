#include <gtest/gtest.h>

#include <cmath>

#include "uwauth/error.hpp"
#include "uwauth/geometry.hpp"

using namespace uwauth;
using namespace uwauth::geometry;

namespace {

Deployment small_deployment() {
  Deployment d;
  d.d0 = 500.0;
  d.d_min = 10.0;
  d.alice = {{200.0, 40.0}, {480.0, 170.0}};
  return d;
}

}  // namespace

TEST(Polar, RoundTrip) {
  for (double r : {1.0, 37.5, 500.0}) {
    for (double a = 0.0; a <= 180.0; a += 7.5) {
      const auto back = to_polar(to_cartesian({r, a}));
      EXPECT_NEAR(back.distance, r, 1e-9 * r);
      EXPECT_NEAR(back.aoa, a, 1e-9);
    }
  }
  const auto p = to_cartesian({2.0, 90.0});
  EXPECT_NEAR(p.x, 0.0, 1e-15);
  EXPECT_DOUBLE_EQ(p.y, 2.0);
}

TEST(DeployAlice, SupportAndMeanDistance) {
  Rng rng(1);
  const double d0 = 500.0;
  const auto nodes = deploy_alice(200000, d0, 0.0, rng);
  double sum = 0.0, sum2 = 0.0;
  for (const auto& n : nodes) {
    ASSERT_GE(n.distance, 0.0);
    ASSERT_LE(n.distance, d0);
    ASSERT_GE(n.aoa, 0.0);
    ASSERT_LE(n.aoa, 180.0);
    sum += n.distance;
    sum2 += n.distance * n.distance;
  }
  const double n = static_cast<double>(nodes.size());
  const double mean = sum / n;
  // area-uniform on a half-disc: E[r] = 2/3 d0, Var[r] = d0^2/18
  const double se = std::sqrt(d0 * d0 / 18.0 / n);
  EXPECT_NEAR(mean, 2.0 / 3.0 * d0, 5 * se);
  EXPECT_NEAR(sum2 / n, d0 * d0 / 2.0, 0.01 * d0 * d0);
}

TEST(DeployAlice, SectorFractionMatchesArea) {
  Rng rng(2);
  const auto nodes = deploy_alice(100000, 500.0, 10.0, rng);
  // inner sector r < 250, aoa < 90
  const double expected = 0.5 * (250.0 * 250.0 - 100.0) / (500.0 * 500.0 - 100.0);
  int hits = 0;
  for (const auto& n : nodes) hits += (n.distance < 250.0 && n.aoa < 90.0) ? 1 : 0;
  const double p = static_cast<double>(hits) / nodes.size();
  EXPECT_NEAR(p, expected, 5 * std::sqrt(expected * (1 - expected) / nodes.size()));
  for (const auto& n : nodes) ASSERT_GE(n.distance, 10.0);
}

TEST(DeployAlice, Deterministic) {
  Rng a(79), b(79);
  EXPECT_EQ(deploy_alice(10, 500.0, 10.0, a), deploy_alice(10, 500.0, 10.0, b));
}

TEST(DeployAlice, Errors) {
  Rng rng(1);
  EXPECT_THROW(deploy_alice(0, 500.0, 10.0, rng), DomainError);
  EXPECT_THROW(deploy_alice(3, 500.0, 500.0, rng), DomainError);
  EXPECT_THROW(deploy_alice(3, 500.0, -1.0, rng), DomainError);
}

TEST(Deployment, Validate) {
  auto d = small_deployment();
  EXPECT_NO_THROW(d.validate());
  d.alice[1].distance = 501.0;
  EXPECT_THROW(d.validate(), DomainError);
  d = small_deployment();
  d.alice[0].aoa = -0.1;
  EXPECT_THROW(d.validate(), DomainError);
  d.alice.clear();
  EXPECT_THROW(d.validate(), DomainError);
}

TEST(PlaceEve, OutsideRingSupportAndMean) {
  const auto ctx = small_deployment();
  Rng rng(4);
  const scenario::OutsideRing ring{2.0, 1.0};
  double sum = 0.0;
  const int n = 50000;
  for (int i = 0; i < n; ++i) {
    const auto e = place_eve(ring, ctx, rng);
    ASSERT_GT(e.distance, 501.0);
    ASSERT_LE(e.distance, 1000.0);
    ASSERT_GE(e.aoa, 0.0);
    ASSERT_LE(e.aoa, 180.0);
    sum += e.distance;
  }
  const double width = 499.0;
  EXPECT_NEAR(sum / n, 750.5, 5 * width / std::sqrt(12.0 * n));
}

TEST(PlaceEve, OutsideRingErrors) {
  const auto ctx = small_deployment();
  Rng rng(4);
  EXPECT_THROW(place_eve(scenario::OutsideRing{1.0, 1.0}, ctx, rng), DomainError);
  EXPECT_THROW(place_eve(scenario::OutsideRing{2.0, 0.0}, ctx, rng), DomainError);
  EXPECT_THROW(place_eve(scenario::OutsideRing{1.001, 1.0}, ctx, rng), DomainError);
}

TEST(PlaceEve, InsideUniformStaysInside) {
  const auto ctx = small_deployment();
  Rng rng(5);
  for (int i = 0; i < 1000; ++i) {
    const auto e = place_eve(scenario::InsideUniform{}, ctx, rng);
    ASSERT_GE(e.distance, ctx.d_min);
    ASSERT_LE(e.distance, ctx.d0);
  }
}

TEST(PlaceEve, WorstCases) {
  const auto ctx = small_deployment();
  Rng rng(6);
  const auto aoa_case = place_eve(scenario::WorstCaseAoA{0, 50.0}, ctx, rng);
  EXPECT_DOUBLE_EQ(aoa_case.aoa, 40.0);
  EXPECT_DOUBLE_EQ(aoa_case.distance, 250.0);
  // pushed past d0 gets clamped to the boundary
  const auto clamped = place_eve(scenario::WorstCaseAoA{1, 50.0}, ctx, rng);
  EXPECT_DOUBLE_EQ(clamped.distance, 500.0);
  EXPECT_THROW(place_eve(scenario::WorstCaseAoA{0, -195.0}, ctx, rng), DomainError);
  EXPECT_THROW(place_eve(scenario::WorstCaseAoA{0, 900.0}, ctx, rng), DomainError);

  const auto dist_case = place_eve(scenario::WorstCaseDistance{0, 30.0}, ctx, rng);
  EXPECT_DOUBLE_EQ(dist_case.distance, 200.0);
  EXPECT_DOUBLE_EQ(dist_case.aoa, 70.0);
  EXPECT_THROW(place_eve(scenario::WorstCaseDistance{1, 30.0}, ctx, rng), DomainError);
  EXPECT_THROW(place_eve(scenario::WorstCaseDistance{7, 30.0}, ctx, rng), DomainError);
}

TEST(PlaceEve, FixedAndRandomness) {
  const auto ctx = small_deployment();
  Rng rng(7);
  const PolarPosition at{123.0, 45.0};
  EXPECT_EQ(place_eve(scenario::Fixed{at}, ctx, rng), at);
  EXPECT_TRUE(is_random(scenario::OutsideRing{}));
  EXPECT_TRUE(is_random(scenario::InsideUniform{}));
  EXPECT_FALSE(is_random(scenario::WorstCaseAoA{}));
  EXPECT_FALSE(is_random(scenario::Fixed{at}));
}

TEST(GroundTruth, MirrorsDeployment) {
  const auto ctx = small_deployment();
  const auto gt = ground_truth(ctx);
  ASSERT_EQ(gt.d.size(), 2u);
  EXPECT_EQ(gt.d[1], 480.0);
  EXPECT_EQ(gt.theta[0], 40.0);
  EXPECT_NEAR(gt.p[0].x, 200.0 * std::cos(40.0 * M_PI / 180.0), 1e-12);
}
