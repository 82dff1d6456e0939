#pragma once

#include <map>
#include <string>
#include <vector>

#include "smart/scene/lane_graph.hpp"

namespace smart::scene {

// Adapter contract for HD-map supervision: per-lane centerline point lists in
// a planar world frame (x east, y north, z up, meters) plus a successor
// relation. Dataset-specific converters produce this form.
struct HdRecord {
  struct HdLane {
    long long id = 0;
    std::vector<std::array<double, 3>> points;  // >= 2
  };
  std::vector<HdLane> lanes;
  std::map<long long, std::vector<long long>> successors;

  static HdRecord from_json(const json& j);
  json to_json() const;
};

// Pose of the ego vehicle inside the HdRecord's world frame.
struct WorldPose {
  double x = 0.0;
  double y = 0.0;
  double heading = 0.0;  // radians CCW from +x (east)
};

struct HdToGraphResult {
  LaneGraph graph;
  std::vector<std::string> warnings;
};

// Transforms centerlines into the ego frame, clips to the extent, resamples
// each surviving lane to n_points, and restricts the successor relation to
// surviving lanes. Lanes fully clipped away are dropped and their
// pass-through connectivity (pred -> succ) is re-linked transitively.
HdToGraphResult hdmap_to_lanegraph(const HdRecord& record, const WorldPose& pose,
                                   double forward_m, double lateral_m,
                                   long n_points = 11);

}  // namespace smart::scene
