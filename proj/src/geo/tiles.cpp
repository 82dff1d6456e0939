#include "smart/geo/tiles.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

namespace smart::geo {

namespace fs = std::filesystem;

TileClientConfig TileClientConfig::from_json(const json& j) {
  TileClientConfig c;
  c.base_url = j.value("base_url", "");
  c.suffix = j.value("suffix", ".png");
  c.token = j.value("token", "");
  c.cache_dir = j.value("cache_dir", "");
  c.offline = j.value("offline", false);
  c.retries = j.value("retries", 2);
  return c;
}

TileClient::TileClient(TileClientConfig cfg) : cfg_(std::move(cfg)) {}

std::string TileClient::cache_path(const TileIndex& idx) const {
  return cfg_.cache_dir + "/" + std::to_string(idx.zoom) + "/" +
         std::to_string(idx.x) + "/" + std::to_string(idx.y) + ".png";
}

std::optional<Image> TileClient::fetch(const TileIndex& idx) {
  if (idx.x < 0 || idx.y < 0 || idx.x >= (1L << idx.zoom) || idx.y >= (1L << idx.zoom))
    throw InputError("tile index out of range: " + idx.str());

  if (!cfg_.cache_dir.empty()) {
    const std::string path = cache_path(idx);
    if (fs::exists(path)) {
      try {
        return Image::load_png(path);
      } catch (const std::exception&) {
        // fall through to refetch a corrupt cache entry
      }
    }
  }
  if (cfg_.offline || cfg_.base_url.empty()) return std::nullopt;

  // Split base_url into host part and path prefix.
  std::string url = cfg_.base_url;
  std::string scheme_host = url, prefix;
  const auto scheme_end = url.find("://");
  const auto path_start = url.find('/', scheme_end == std::string::npos ? 0 : scheme_end + 3);
  if (path_start != std::string::npos) {
    scheme_host = url.substr(0, path_start);
    prefix = url.substr(path_start);
  }
  std::string path = prefix + "/" + std::to_string(idx.zoom) + "/" +
                     std::to_string(idx.x) + "/" + std::to_string(idx.y) + cfg_.suffix;
  if (!cfg_.token.empty()) path += "?access_token=" + cfg_.token;

  httplib::Client cli(scheme_host);
  cli.set_connection_timeout(5, 0);
  cli.set_read_timeout(10, 0);
  for (int attempt = 0; attempt <= cfg_.retries; ++attempt) {
    auto res = cli.Get(path);
    if (!res) continue;
    if (res->status == 404) return std::nullopt;
    if (res->status != 200) continue;
    std::vector<std::uint8_t> bytes(res->body.begin(), res->body.end());
    Image img = Image::decode(bytes);  // throws FetchError on malformed payload
    if (!cfg_.cache_dir.empty()) {
      const std::string cpath = cache_path(idx);
      fs::create_directories(fs::path(cpath).parent_path());
      const std::string tmp = cpath + ".tmp." + std::to_string(::getpid());
      {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        os.write(res->body.data(), std::streamsize(res->body.size()));
      }
      fs::rename(tmp, cpath);
    }
    return img;
  }
  throw FetchError("tile fetch failed after " + std::to_string(cfg_.retries + 1) +
                   " attempts: " + idx.str());
}

Stitched fetch_tiles(TileClient& client, long zoom, long x0, long y0, long x1,
                     long y1) {
  if (x1 < x0 || y1 < y0) throw InputError("fetch_tiles: empty index range");
  const long cols = x1 - x0 + 1, rows = y1 - y0 + 1;
  Stitched out;
  out.zoom = zoom;
  out.origin_px_x = double(x0) * kTileSize;
  out.origin_px_y = double(y0) * kTileSize;
  out.image = Image(rows * kTileSize, cols * kTileSize, client.config().fill_value);
  for (long ty = y0; ty <= y1; ++ty) {
    for (long tx = x0; tx <= x1; ++tx) {
      const TileIndex idx{zoom, tx, ty};
      std::optional<Image> tile;
      try {
        tile = client.fetch(idx);
      } catch (const FetchError&) {
        throw;  // network exhaustion is a hard error carrying the index
      }
      if (!tile) {
        out.missing.push_back(idx);
        continue;
      }
      if (tile->rows != kTileSize || tile->cols != kTileSize)
        throw FetchError("tile " + idx.str() + " has unexpected size");
      const long r_off = (ty - y0) * kTileSize, c_off = (tx - x0) * kTileSize;
      for (long r = 0; r < kTileSize; ++r)
        std::copy_n(tile->pixels.data() + r * kTileSize * 3, kTileSize * 3,
                    out.image.pixels.data() +
                        ((r_off + r) * out.image.cols + c_off) * 3);
    }
  }
  return out;
}

namespace {

// Ego meters -> WGS-84 via equirectangular approximation about the pose.
void ego_to_geo(const GeoPose& pose, double x, double y, double& lat, double& lon) {
  const double ch = std::cos(pose.heading), sh = std::sin(pose.heading);
  const double de = x * ch - y * sh;
  const double dn = x * sh + y * ch;
  const double deg = 180.0 / M_PI;
  lat = pose.lat + dn / kEarthRadius * deg;
  lon = pose.lon + de / (kEarthRadius * std::cos(pose.lat * M_PI / 180.0)) * deg;
}

}  // namespace

TileRange covering_range(const GeoPose& pose, const Extent& extent, long zoom,
                         double margin_m) {
  const double hx = extent.forward_m / 2.0 + margin_m;
  const double hy = extent.lateral_m / 2.0 + margin_m;
  double min_tx = 1e18, max_tx = -1e18, min_ty = 1e18, max_ty = -1e18;
  for (double sx : {-1.0, 1.0}) {
    for (double sy : {-1.0, 1.0}) {
      double lat, lon;
      ego_to_geo(pose, sx * hx, sy * hy, lat, lon);
      auto [tx, ty] = wgs84_to_tile(lat, lon, zoom);
      min_tx = std::min(min_tx, tx);
      max_tx = std::max(max_tx, tx);
      min_ty = std::min(min_ty, ty);
      max_ty = std::max(max_ty, ty);
    }
  }
  const long n = 1L << zoom;
  auto clampi = [n](long v) { return std::clamp(v, 0L, n - 1); };
  return TileRange{zoom, clampi(long(std::floor(min_tx))), clampi(long(std::floor(min_ty))),
                   clampi(long(std::floor(max_tx))), clampi(long(std::floor(max_ty)))};
}

SatelliteImage crop_satellite(const Stitched& stitched, const GeoPose& pose,
                              const Extent& extent, long out_rows, long out_cols) {
  const double mpp = ground_resolution(pose.lat, stitched.zoom);
  if (out_rows <= 0) out_rows = long(std::llround(extent.forward_m / mpp));
  if (out_cols <= 0) out_cols = long(std::llround(extent.lateral_m / mpp));

  // Coverage check at the four extent corners.
  const char* corner_names[4] = {"front-left", "front-right", "rear-left",
                                 "rear-right"};
  const double cx[4] = {extent.forward_m / 2, extent.forward_m / 2,
                        -extent.forward_m / 2, -extent.forward_m / 2};
  const double cy[4] = {extent.lateral_m / 2, -extent.lateral_m / 2,
                        extent.lateral_m / 2, -extent.lateral_m / 2};
  for (int i = 0; i < 4; ++i) {
    double lat, lon;
    ego_to_geo(pose, cx[i], cy[i], lat, lon);
    auto [tx, ty] = wgs84_to_tile(lat, lon, stitched.zoom);
    const double px = tx * kTileSize - stitched.origin_px_x;
    const double py = ty * kTileSize - stitched.origin_px_y;
    if (px < -0.5 || py < -0.5 || px > stitched.image.cols - 0.5 ||
        py > stitched.image.rows - 0.5)
      throw InputError(std::string("stitched raster does not cover the ") +
                       corner_names[i] + " extent corner");
  }

  SatelliteImage out;
  out.image = Image(out_rows, out_cols);
  out.mpp_row = extent.forward_m / double(out_rows);
  out.mpp_col = extent.lateral_m / double(out_cols);
  out.pose = pose;
  out.extent = extent;
  double px[3];
  for (long r = 0; r < out_rows; ++r) {
    // Row 0 is the far-forward edge; +x points up.
    const double ex = (double(out_rows) / 2.0 - (r + 0.5)) * out.mpp_row;
    for (long c = 0; c < out_cols; ++c) {
      const double ey = (double(out_cols) / 2.0 - (c + 0.5)) * out.mpp_col;
      double lat, lon;
      ego_to_geo(pose, ex, ey, lat, lon);
      auto [tx, ty] = wgs84_to_tile(lat, lon, stitched.zoom);
      stitched.image.sample(ty * kTileSize - stitched.origin_px_y - 0.5,
                            tx * kTileSize - stitched.origin_px_x - 0.5, px);
      for (long ch = 0; ch < 3; ++ch)
        out.image.at(r, c, ch) =
            std::uint8_t(std::lround(std::clamp(px[ch], 0.0, 255.0)));
    }
  }
  return out;
}

}  // namespace smart::geo
