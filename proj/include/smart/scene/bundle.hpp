#pragma once

#include <optional>
#include <string>
#include <vector>

#include "smart/geo/image.hpp"
#include "smart/geo/sdmap.hpp"
#include "smart/scene/lane_graph.hpp"

namespace smart::scene {

constexpr int kBundleSchemaVersion = 1;

// One training/eval sample persisted as a directory:
//   {root}/{scene_id}/{sd_map.json, satellite.png, lane_graph.json, meta.json}
struct SceneBundle {
  std::string scene_id;
  geo::GeoPose pose;
  geo::Extent extent;
  std::string split_key;
  geo::SDMap sd_map;
  geo::SatelliteImage satellite;
  std::optional<LaneGraph> gt_graph;  // absent for inference-only bundles
};

void save_bundle(const SceneBundle& bundle, const std::string& root);
SceneBundle load_bundle(const std::string& root, const std::string& scene_id);

// Scene ids under a dataset root, sorted.
std::vector<std::string> list_scenes(const std::string& root);

// Partitions scene ids by split_key membership: ids whose key is in
// `held_out_keys` land in the second list. The two sets are disjoint and
// their union is the input.
std::pair<std::vector<std::string>, std::vector<std::string>> split_dataset(
    const std::string& root, const std::vector<std::string>& held_out_keys,
    double min_displacement_m = 0.0);

}  // namespace smart::scene
