#pragma once

#include <array>
#include <map>
#include <string>
#include <vector>

#include "smart/geo/geo.hpp"

namespace smart::geo {

// Road classes retained from the source tags; anything else maps to kOther.
enum class RoadClass : int {
  kMotorway = 0,
  kTrunk,
  kPrimary,
  kSecondary,
  kTertiary,
  kResidential,
  kService,
  kOther,
};
constexpr int kNumRoadClasses = 8;
constexpr int kAttributeDim = kNumRoadClasses + 2;  // one-hot + lane_count + one_way

RoadClass road_class_from_tag(const std::string& highway_value);
const char* road_class_name(RoadClass rc);

struct SDPolyline {
  std::vector<std::array<double, 2>> points;  // ego meters (x forward, y left)
  RoadClass road_class = RoadClass::kOther;
  int lane_count = 0;  // clipped to [0, 8]
  bool one_way = false;

  // Attribute vector alpha, width kAttributeDim.
  std::vector<double> attributes() const;
};

struct SDMap {
  std::vector<SDPolyline> polylines;
  GeoPose pose;
  Extent extent;

  json to_json() const;
  static SDMap from_json(const json& j);
};

// Parsed road-vector extract: nodes plus tagged ways.
struct RoadExtract {
  std::map<long long, std::array<double, 2>> nodes;  // id -> (lat, lon)
  struct Way {
    std::vector<long long> refs;
    std::map<std::string, std::string> tags;
  };
  std::vector<Way> ways;
};

// Parses an OSM XML extract (subset: node/way/nd/tag elements) or the
// pre-parsed JSON form {nodes:{id:[lat,lon]}, ways:[{refs:[...], tags:{...}}]}.
// Format is sniffed from the first non-space byte.
RoadExtract parse_road_extract(const std::string& path);
RoadExtract parse_road_extract_text(const std::string& text);

// Projects ways around the pose (equirectangular, x east scaled by cos lat),
// rotates into the ego frame and clips to the extent rectangle. Ways that
// exit and re-enter split into separate polylines.
SDMap extract_local_sd(const RoadExtract& source, const GeoPose& pose,
                       const Extent& extent);

// Clips one polyline to |x| <= fx, |y| <= fy, splitting at exits.
std::vector<std::vector<std::array<double, 2>>> clip_polyline_to_rect(
    const std::vector<std::array<double, 2>>& pts, double fx, double fy);

}  // namespace smart::geo
