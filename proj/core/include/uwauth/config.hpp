#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "uwauth/geometry.hpp"
#include "uwauth/sim.hpp"

namespace uwauth::config {

struct GeometrySpec {
  double d0 = 500.0;
  std::size_t m = 10;
  double d_min = 10.0;
  std::uint64_t seed = 79;
  std::optional<std::vector<geometry::PolarPosition>> nodes;  ///< overrides the seeded draw
};

struct Outputs {
  std::string directory = "out";
  std::vector<std::string> formats{"csv"};
};

struct ExperimentConfig {
  GeometrySpec geometry;
  double p_t_db = 250.0;  ///< dB re uPa, as entered
  Outputs outputs;
  /// Fully resolved experiment: deployment drawn, dB values converted.
  sim::Experiment experiment;
  /// One line per dB to linear conversion performed at resolution.
  std::vector<std::string> conversions;
};

/// Parses a JSON document, fills every default and validates. Unknown keys
/// and violated constraints throw ValidationError naming the field.
ExperimentConfig parse_config(std::string_view text);

/// Canonical JSON of the resolved configuration. Parsing it again yields an
/// identical experiment. indent < 0 gives the compact single-line form.
std::string to_json(const ExperimentConfig& cfg, int indent = -1);

/// Preset configurations: outside_ring, inside_uniform, worst_case (the
/// three Eve placements) and colored (waveform ranging, distance only).
std::vector<std::pair<std::string, ExperimentConfig>> scenario_presets();

std::string_view to_string(geometry::EveScenario const& s);

}  // namespace uwauth::config
