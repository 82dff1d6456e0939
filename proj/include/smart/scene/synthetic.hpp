#pragma once

#include "smart/scene/bundle.hpp"

namespace smart::scene {

enum class Layout { kStraight, kCurve, kTee, kCrossroad };

const char* layout_name(Layout l);
Layout layout_from_name(const std::string& name);

// Deterministic synthetic scene recipe: same spec -> byte-identical bundle.
struct SyntheticSpec {
  std::uint64_t seed = 0;
  Layout layout = Layout::kStraight;
  int lanes_per_road = 1;      // 1..3
  double lane_width = 3.5;     // meters, [2.5, 5]
  double curvature = 0.0;      // 1/m, [-0.03, 0.03]; used by the curve layout
  double texture_noise = 3.0;  // raster noise sigma, [0, 30]
  long n_points = 11;
  geo::Extent extent{};

  void validate() const;
  json to_json() const;
  static SyntheticSpec from_json(const json& j);
};

SceneBundle generate_synthetic_scene(const SyntheticSpec& spec);

}  // namespace smart::scene
