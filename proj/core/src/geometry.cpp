#include "uwauth/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "uwauth/error.hpp"

namespace uwauth::geometry {
namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;

// Upper bound on how far a worst-case offset may push Eve (ring ratio of the
// default step-1 scenario family).
constexpr double kWorstCaseMaxRatio = 2.0;

}  // namespace

Point to_cartesian(const PolarPosition& p) {
  return {p.distance * std::cos(p.aoa * kDegToRad), p.distance * std::sin(p.aoa * kDegToRad)};
}

PolarPosition to_polar(const Point& p) {
  return {std::hypot(p.x, p.y), std::atan2(p.y, p.x) / kDegToRad};
}

void Deployment::validate() const {
  if (alice.empty()) throw DomainError("deployment needs at least one Alice node");
  if (!(d_min >= 0.0 && d_min < d0)) throw DomainError("deployment requires 0 <= d_min < d0");
  for (std::size_t i = 0; i < alice.size(); ++i) {
    const auto& a = alice[i];
    if (a.distance < d_min || a.distance > d0) {
      throw DomainError("alice[" + std::to_string(i) + "] distance outside [d_min, d0]");
    }
    if (a.aoa < 0.0 || a.aoa > 180.0) {
      throw DomainError("alice[" + std::to_string(i) + "] aoa outside [0, 180] degrees");
    }
  }
}

bool is_random(const EveScenario& s) {
  return std::holds_alternative<scenario::OutsideRing>(s) ||
         std::holds_alternative<scenario::InsideUniform>(s);
}

std::vector<PolarPosition> deploy_alice(std::size_t m, double d0, double d_min, Rng& rng) {
  if (m < 1) throw DomainError("deploy_alice: m must be at least 1");
  if (!(d_min >= 0.0 && d_min < d0)) throw DomainError("deploy_alice: requires 0 <= d_min < d0");
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<PolarPosition> out(m);
  const double r2_lo = d_min * d_min;
  const double r2_span = d0 * d0 - r2_lo;
  for (auto& p : out) {
    const double aoa = 180.0 * unit(rng);
    const double u = unit(rng);
    p = {std::sqrt(r2_lo + u * r2_span), aoa};
  }
  return out;
}

PolarPosition place_eve(const EveScenario& sc, const Deployment& ctx, Rng& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto target_of = [&](std::size_t idx) -> const PolarPosition& {
    if (idx >= ctx.alice.size()) throw DomainError("eve scenario target index out of range");
    return ctx.alice[idx];
  };

  if (const auto* ring = std::get_if<scenario::OutsideRing>(&sc)) {
    if (!(ring->k > 1.0)) throw DomainError("outside ring requires k > 1");
    if (!(ring->epsilon > 0.0)) throw DomainError("outside ring requires epsilon > 0");
    const double lo = ctx.d0 + ring->epsilon;
    const double hi = ring->k * ctx.d0;
    if (!(hi > lo)) throw DomainError("outside ring support is empty (k d0 <= d0 + epsilon)");
    const double aoa = 180.0 * unit(rng);
    // (lo, hi]: 1 - U(0,1) lies in (0, 1].
    const double dist = lo + (1.0 - unit(rng)) * (hi - lo);
    return {dist, aoa};
  }
  if (std::holds_alternative<scenario::InsideUniform>(sc)) {
    return deploy_alice(1, ctx.d0, ctx.d_min, rng).front();
  }
  if (const auto* wa = std::get_if<scenario::WorstCaseAoA>(&sc)) {
    const auto& t = target_of(wa->target);
    const double raw = t.distance + wa->radial_offset;
    if (raw < ctx.d_min || raw > kWorstCaseMaxRatio * ctx.d0) {
      throw DomainError("worst-case AoA offset pushes Eve outside [d_min, k d0]");
    }
    return {std::min(raw, ctx.d0), t.aoa};
  }
  if (const auto* wd = std::get_if<scenario::WorstCaseDistance>(&sc)) {
    const auto& t = target_of(wd->target);
    const double aoa = t.aoa + wd->angular_offset;
    if (aoa < 0.0 || aoa > 180.0) {
      throw DomainError("worst-case distance offset pushes Eve outside [0, 180] degrees");
    }
    return {t.distance, aoa};
  }
  return std::get<scenario::Fixed>(sc).position;
}

GroundTruth ground_truth(const Deployment& deployment) {
  GroundTruth gt;
  gt.d.reserve(deployment.m());
  gt.theta.reserve(deployment.m());
  gt.p.reserve(deployment.m());
  for (const auto& a : deployment.alice) {
    gt.d.push_back(a.distance);
    gt.theta.push_back(a.aoa);
    gt.p.push_back(to_cartesian(a));
  }
  return gt;
}

}  // namespace uwauth::geometry
