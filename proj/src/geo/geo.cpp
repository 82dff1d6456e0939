#include "smart/geo/geo.hpp"

#include <cmath>

namespace smart::geo {

double normalize_heading(double h) {
  h = std::fmod(h + M_PI, 2.0 * M_PI);
  if (h < 0.0) h += 2.0 * M_PI;
  return h - M_PI;
}

GeoPose GeoPose::make(double lat, double lon, double heading) {
  if (!(lat >= -kMaxMercatorLat && lat <= kMaxMercatorLat))
    throw InputError("latitude " + std::to_string(lat) +
                     " outside Web-Mercator validity");
  lon = std::fmod(lon + 180.0, 360.0);
  if (lon < 0.0) lon += 360.0;
  lon -= 180.0;
  return GeoPose{lat, lon, normalize_heading(heading)};
}

json GeoPose::to_json() const {
  return json{{"lat", lat}, {"lon", lon}, {"heading", heading}};
}

GeoPose GeoPose::from_json(const json& j) {
  return GeoPose::make(j.at("lat").get<double>(), j.at("lon").get<double>(),
                       j.at("heading").get<double>());
}

Extent Extent::make(double forward_m, double lateral_m) {
  if (!(forward_m > 0.0) || !(lateral_m > 0.0))
    throw InputError("extent dimensions must be positive");
  return Extent{forward_m, lateral_m};
}

json Extent::to_json() const {
  return json{{"forward_m", forward_m}, {"lateral_m", lateral_m}};
}

Extent Extent::from_json(const json& j) {
  return Extent::make(j.at("forward_m").get<double>(),
                      j.at("lateral_m").get<double>());
}

std::string TileIndex::str() const {
  return std::to_string(zoom) + "/" + std::to_string(x) + "/" + std::to_string(y);
}

std::pair<double, double> wgs84_to_tile(double lat, double lon, long zoom) {
  if (!(lat >= -kMaxMercatorLat && lat <= kMaxMercatorLat))
    throw InputError("latitude " + std::to_string(lat) +
                     " outside Web-Mercator validity");
  const double n = double(1L << zoom);
  const double x = (lon + 180.0) / 360.0 * n;
  const double rad = lat * M_PI / 180.0;
  const double y = (1.0 - std::asinh(std::tan(rad)) / M_PI) / 2.0 * n;
  return {x, y};
}

std::pair<double, double> tile_to_wgs84(double tx, double ty, long zoom) {
  const double n = double(1L << zoom);
  const double lon = tx / n * 360.0 - 180.0;
  const double lat = std::atan(std::sinh(M_PI * (1.0 - 2.0 * ty / n))) * 180.0 / M_PI;
  return {lat, lon};
}

double ground_resolution(double lat, long zoom) {
  if (!(lat >= -90.0 && lat <= 90.0)) throw InputError("invalid latitude");
  return kEarthCircumference / (double(kTileSize) * double(1L << zoom)) *
         std::cos(lat * M_PI / 180.0);
}

}  // namespace smart::geo
