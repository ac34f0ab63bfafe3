#pragma once

#include <cstddef>
#include <variant>
#include <vector>

#include "uwauth/env.hpp"

namespace uwauth::geometry {

/// Polar position relative to the sink. The AoA is measured in degrees,
/// counter-clockwise from the positive horizontal axis; nodes live in the
/// half-plane 0 <= aoa <= 180.
struct PolarPosition {
  double distance = 0.0;
  double aoa = 0.0;

  bool operator==(const PolarPosition&) const = default;
};

struct Point {
  double x = 0.0;
  double y = 0.0;
};

Point to_cartesian(const PolarPosition& p);
PolarPosition to_polar(const Point& p);

/// Deployment of M Alice nodes inside the trusted half-disc, plus Eve.
struct Deployment {
  double d0 = 500.0;
  double d_min = 10.0;
  std::vector<PolarPosition> alice;
  PolarPosition eve;

  std::size_t m() const noexcept { return alice.size(); }
  /// Throws DomainError on any violated invariant.
  void validate() const;
};

namespace scenario {
/// Eve uniformly (in distance) on the ring d0 + epsilon .. k d0.
struct OutsideRing {
  double k = 2.0;
  double epsilon = 1.0;
};
/// Eve drawn with the same area-uniform law as the Alice nodes.
struct InsideUniform {};
/// Eve on the bearing of a target node, pushed radially by an offset.
struct WorstCaseAoA {
  std::size_t target = 0;
  double radial_offset = 50.0;
};
/// Eve at the range of a target node, rotated by an angular offset.
struct WorstCaseDistance {
  std::size_t target = 0;
  double angular_offset = 30.0;
};
struct Fixed {
  PolarPosition position;
};
}  // namespace scenario

using EveScenario = std::variant<scenario::OutsideRing, scenario::InsideUniform,
                                 scenario::WorstCaseAoA, scenario::WorstCaseDistance,
                                 scenario::Fixed>;

/// True when the scenario draws a fresh Eve position per trial.
bool is_random(const EveScenario& s);

/// Area-uniform placement over the half-annulus d_min..d0.
std::vector<PolarPosition> deploy_alice(std::size_t m, double d0, double d_min, Rng& rng);

/// Places Eve according to the scenario. The deployment supplies d0, d_min
/// and the Alice positions referenced by the worst-case variants; the ring
/// ratio k bounds how far out a worst-case offset may push Eve.
PolarPosition place_eve(const EveScenario& scenario, const Deployment& context, Rng& rng);

/// Ground-truth fingerprint vectors known to the sink.
struct GroundTruth {
  std::vector<double> d;
  std::vector<double> theta;
  std::vector<Point> p;
};

GroundTruth ground_truth(const Deployment& deployment);

}  // namespace uwauth::geometry
