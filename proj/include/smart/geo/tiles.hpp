#pragma once

#include <optional>
#include <string>
#include <vector>

#include "smart/geo/image.hpp"

namespace smart::geo {

struct TileClientConfig {
  std::string base_url;       // e.g. https://host/tiles
  std::string suffix = ".png";
  std::string token;          // appended as ?access_token=...
  std::string cache_dir;      // zoom/x/y.png hierarchy
  bool offline = false;       // forbid network, cache only
  int retries = 2;
  std::uint8_t fill_value = 128;  // mid-gray for missing tiles

  static TileClientConfig from_json(const json& j);
};

// Fetches raster tiles with a write-through disk cache. Safe for concurrent
// calls; cache writes are write-then-rename.
class TileClient {
 public:
  explicit TileClient(TileClientConfig cfg);

  // Returns the tile raster, or nullopt when unavailable (offline miss,
  // exhausted retries on transient failures).
  std::optional<Image> fetch(const TileIndex& idx);

  const TileClientConfig& config() const { return cfg_; }

 private:
  std::string cache_path(const TileIndex& idx) const;
  TileClientConfig cfg_;
};

// Stitched rectangular mosaic plus its global-pixel origin.
struct Stitched {
  Image image;
  long zoom = 0;
  double origin_px_x = 0.0;  // global pixel coords of image (0,0)
  double origin_px_y = 0.0;
  std::vector<TileIndex> missing;  // tiles replaced by fill color
};

// Fetches the inclusive index rectangle [x0,x1]x[y0,y1] and stitches it in
// slippy order (x grows east, y grows south). Missing tiles become fill-color
// blocks recorded in `missing`.
Stitched fetch_tiles(TileClient& client, long zoom, long x0, long y0, long x1,
                     long y1);

// Covering tile rectangle for the rotated extent around a pose, with margin.
struct TileRange {
  long zoom, x0, y0, x1, y1;
};
TileRange covering_range(const GeoPose& pose, const Extent& extent, long zoom,
                         double margin_m = 10.0);

// Ego-centric rotated crop: ego at the center, +x (heading) toward image up,
// bilinear resampling. out_rows/out_cols <= 0 derive the native size from the
// extent at this zoom's ground resolution.
SatelliteImage crop_satellite(const Stitched& stitched, const GeoPose& pose,
                              const Extent& extent, long out_rows = -1,
                              long out_cols = -1);

}  // namespace smart::geo
