#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string_view>

#include "uwauth/geometry.hpp"

namespace uwauth::detect {

/// H0: sender authenticated (inside the proximity region / trusted zone).
/// H1: impersonation declared.
enum class Decision : std::uint8_t { kH0 = 0, kH1 = 1 };

enum class FusionRule : std::uint8_t { kAnd = 0, kOr = 1, kMajority = 2 };

inline constexpr std::array<FusionRule, 3> kFusionRules = {FusionRule::kAnd, FusionRule::kOr,
                                                           FusionRule::kMajority};

std::string_view to_string(FusionRule rule);
FusionRule parse_fusion_rule(std::string_view name);

enum class Mode : std::uint8_t {
  kFull,          ///< distance, AoA and position tests
  kDistanceOnly,  ///< step 2 reduces to the distance test
};

/// One slot's noisy observables as presented to the sink.
struct Measurement {
  double z = 0.0;                      ///< distance estimate, metres
  std::optional<double> y;             ///< AoA estimate, degrees
  std::optional<geometry::Point> p_hat;

  static Measurement full(double z, double y);
  static Measurement distance_only(double z);
};

struct Thresholds {
  double d0 = 500.0;
  double eps_p = 1.0;      ///< metres
  double eps_d = 1.0;      ///< metres
  double eps_theta = 1.0;  ///< degrees

  void validate() const;
};

struct NearestNeighbour {
  double stat = 0.0;
  std::size_t index = 0;

  bool operator==(const NearestNeighbour&) const = default;
};

Decision test1_distance_bounding(double z, double d0);

NearestNeighbour nn_position(const geometry::Point& p_hat, std::span<const geometry::Point> p);
NearestNeighbour nn_distance(double z, std::span<const double> d);
/// Plain absolute difference; the AoA domain is [0, 180] so nothing wraps.
NearestNeighbour nn_aoa(double y, std::span<const double> theta);

Decision bh_outlier(double stat, double eps);

Decision fuse_step2(std::span<const Decision> decisions, FusionRule rule);
Decision fuse_steps(Decision step1, Decision step2);

/// Majority index; all three distinct falls back to the position index.
std::size_t identify(std::size_t i_p, std::size_t i_d, std::size_t i_theta);

/// Who actually transmitted in the slot.
struct Occupant {
  static constexpr std::size_t kEveIndex = std::numeric_limits<std::size_t>::max();
  std::size_t index = kEveIndex;

  static Occupant alice(std::size_t i) { return {i}; }
  static Occupant eve() { return {}; }
  bool is_eve() const noexcept { return index == kEveIndex; }

  bool operator==(const Occupant&) const = default;
};

struct DecisionRecord {
  Decision step1 = Decision::kH0;

  std::optional<NearestNeighbour> position;
  NearestNeighbour distance;
  std::optional<NearestNeighbour> aoa;

  std::optional<Decision> test_position;
  Decision test_distance = Decision::kH0;
  std::optional<Decision> test_aoa;

  /// Step-2 fusion under each rule, indexed by FusionRule.
  std::array<Decision, 3> step2{};
  /// step1 AND step2 under each step-2 rule.
  std::array<Decision, 3> final_by_rule{};

  /// Rule selected for the reported final decision.
  FusionRule rule = FusionRule::kAnd;
  Decision final = Decision::kH0;
  /// MV over the test indices (full mode) or the distance index.
  std::size_t candidate = 0;
  /// Present exactly when final == H0.
  std::optional<std::size_t> identified;

  Occupant truth;

  Decision fused(FusionRule r) const { return step2[static_cast<std::size_t>(r)]; }
  Decision final_for(FusionRule r) const { return final_by_rule[static_cast<std::size_t>(r)]; }

  bool operator==(const DecisionRecord&) const = default;
};

/// Step 1, the available step-2 tests, fusion and identification.
DecisionRecord algorithm1(const Measurement& m, const geometry::GroundTruth& truth,
                          const Thresholds& thresholds, Mode mode,
                          FusionRule final_rule = FusionRule::kAnd);

/// H0(AND) within H0(MV) within H0(OR) for both the step-2 and the final decisions.
bool fusion_inclusions_hold(const DecisionRecord& r);

}  // namespace uwauth::detect
