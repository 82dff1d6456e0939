#pragma once

#include <utility>

#include "smart/common.hpp"

namespace smart::geo {

constexpr double kMaxMercatorLat = 85.0511;
constexpr double kEarthCircumference = 40075016.686;  // meters at the equator
constexpr double kEarthRadius = 6378137.0;
constexpr long kTileSize = 256;

// WGS-84 position plus heading; heading is radians CCW from east and defines
// ego +x (travel direction). +y is to the left.
struct GeoPose {
  double lat = 0.0;
  double lon = 0.0;
  double heading = 0.0;

  // Validates ranges, normalizes heading to [-pi, pi) and lon to [-180, 180).
  static GeoPose make(double lat, double lon, double heading);

  json to_json() const;
  static GeoPose from_json(const json& j);
};

struct Extent {
  double forward_m = 100.0;  // +x half-range is +-forward_m/2
  double lateral_m = 50.0;

  static Extent make(double forward_m, double lateral_m);
  json to_json() const;
  static Extent from_json(const json& j);
};

struct TileIndex {
  long zoom = 0;
  long x = 0;
  long y = 0;
  bool operator==(const TileIndex&) const = default;
  std::string str() const;
};

// Slippy-map forward projection to fractional tile coordinates.
std::pair<double, double> wgs84_to_tile(double lat, double lon, long zoom);
// Inverse of the above.
std::pair<double, double> tile_to_wgs84(double tx, double ty, long zoom);

// Meters per pixel of a 256-px tile at the given latitude and zoom.
double ground_resolution(double lat, long zoom);

double normalize_heading(double h);  // -> [-pi, pi)

}  // namespace smart::geo
