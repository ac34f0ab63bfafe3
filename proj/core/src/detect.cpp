#include "uwauth/detect.hpp"

#include <cmath>
#include <string>

#include "uwauth/error.hpp"

namespace uwauth::detect {
namespace {

template <typename Dist>
NearestNeighbour scan(std::size_t n, Dist dist) {
  if (n == 0) throw ContractError("nearest-neighbour search over an empty set");
  NearestNeighbour best{dist(0), 0};
  for (std::size_t i = 1; i < n; ++i) {
    const double v = dist(i);
    if (v < best.stat) best = {v, i};
  }
  return best;
}

}  // namespace

std::string_view to_string(FusionRule rule) {
  switch (rule) {
    case FusionRule::kAnd:
      return "and";
    case FusionRule::kOr:
      return "or";
    case FusionRule::kMajority:
      return "mv";
  }
  return "?";
}

FusionRule parse_fusion_rule(std::string_view name) {
  if (name == "and" || name == "AND") return FusionRule::kAnd;
  if (name == "or" || name == "OR") return FusionRule::kOr;
  if (name == "mv" || name == "MV") return FusionRule::kMajority;
  throw DomainError("unknown fusion rule '" + std::string(name) + "' (expected and|or|mv)");
}

Measurement Measurement::full(double z, double y) {
  Measurement m;
  m.z = z;
  m.y = y;
  m.p_hat = geometry::to_cartesian({z, y});
  return m;
}

Measurement Measurement::distance_only(double z) {
  Measurement m;
  m.z = z;
  return m;
}

void Thresholds::validate() const {
  if (!(d0 > 0.0)) throw DomainError("thresholds.d0 must be positive");
  if (!(eps_p > 0.0)) throw DomainError("thresholds.eps_p must be positive");
  if (!(eps_d > 0.0)) throw DomainError("thresholds.eps_d must be positive");
  if (!(eps_theta > 0.0)) throw DomainError("thresholds.eps_theta must be positive");
}

Decision test1_distance_bounding(double z, double d0) {
  return z > d0 ? Decision::kH1 : Decision::kH0;
}

NearestNeighbour nn_position(const geometry::Point& p_hat, std::span<const geometry::Point> p) {
  return scan(p.size(), [&](std::size_t i) { return std::hypot(p_hat.x - p[i].x, p_hat.y - p[i].y); });
}

NearestNeighbour nn_distance(double z, std::span<const double> d) {
  return scan(d.size(), [&](std::size_t i) { return std::abs(z - d[i]); });
}

NearestNeighbour nn_aoa(double y, std::span<const double> theta) {
  return scan(theta.size(), [&](std::size_t i) { return std::abs(y - theta[i]); });
}

Decision bh_outlier(double stat, double eps) {
  return stat > eps ? Decision::kH1 : Decision::kH0;
}

Decision fuse_step2(std::span<const Decision> decisions, FusionRule rule) {
  if (decisions.size() != 3) throw ContractError("step-2 fusion expects exactly three decisions");
  int h0 = 0;
  for (Decision d : decisions) h0 += d == Decision::kH0 ? 1 : 0;
  switch (rule) {
    case FusionRule::kAnd:
      return h0 == 3 ? Decision::kH0 : Decision::kH1;
    case FusionRule::kOr:
      return h0 >= 1 ? Decision::kH0 : Decision::kH1;
    case FusionRule::kMajority:
      return h0 >= 2 ? Decision::kH0 : Decision::kH1;
  }
  throw ContractError("unknown fusion rule");
}

Decision fuse_steps(Decision step1, Decision step2) {
  return (step1 == Decision::kH0 && step2 == Decision::kH0) ? Decision::kH0 : Decision::kH1;
}

std::size_t identify(std::size_t i_p, std::size_t i_d, std::size_t i_theta) {
  if (i_d == i_theta) return i_d;
  return i_p;  // i_p agrees with one of the others, or all differ
}

DecisionRecord algorithm1(const Measurement& m, const geometry::GroundTruth& truth,
                          const Thresholds& th, Mode mode, FusionRule final_rule) {
  if (truth.d.empty()) throw ContractError("algorithm1: empty ground truth");
  DecisionRecord r;
  r.rule = final_rule;
  r.step1 = test1_distance_bounding(m.z, th.d0);
  r.distance = nn_distance(m.z, truth.d);
  r.test_distance = bh_outlier(r.distance.stat, th.eps_d);

  if (mode == Mode::kFull) {
    if (!m.y || !m.p_hat) throw ContractError("algorithm1: full mode needs AoA and position");
    if (truth.theta.size() != truth.d.size() || truth.p.size() != truth.d.size()) {
      throw ContractError("algorithm1: ground-truth vectors differ in length");
    }
    r.position = nn_position(*m.p_hat, truth.p);
    r.aoa = nn_aoa(*m.y, truth.theta);
    r.test_position = bh_outlier(r.position->stat, th.eps_p);
    r.test_aoa = bh_outlier(r.aoa->stat, th.eps_theta);
    const std::array<Decision, 3> tests = {*r.test_position, r.test_distance, *r.test_aoa};
    for (FusionRule rule : kFusionRules) r.step2[static_cast<std::size_t>(rule)] = fuse_step2(tests, rule);
    r.candidate = identify(r.position->index, r.distance.index, r.aoa->index);
  } else {
    r.step2.fill(r.test_distance);
    r.candidate = r.distance.index;
  }

  for (FusionRule rule : kFusionRules) {
    r.final_by_rule[static_cast<std::size_t>(rule)] = fuse_steps(r.step1, r.fused(rule));
  }
  r.final = r.final_for(final_rule);
  if (r.final == Decision::kH0) r.identified = r.candidate;
  return r;
}

bool fusion_inclusions_hold(const DecisionRecord& r) {
  auto ordered = [](Decision a, Decision mv, Decision o) {
    // H0 under a stricter rule implies H0 under every looser one.
    if (a == Decision::kH0 && mv != Decision::kH0) return false;
    if (mv == Decision::kH0 && o != Decision::kH0) return false;
    return true;
  };
  return ordered(r.fused(FusionRule::kAnd), r.fused(FusionRule::kMajority), r.fused(FusionRule::kOr)) &&
         ordered(r.final_for(FusionRule::kAnd), r.final_for(FusionRule::kMajority),
                 r.final_for(FusionRule::kOr));
}

}  // namespace uwauth::detect
