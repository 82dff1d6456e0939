#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "smart/geo/tiles.hpp"

using namespace smart::geo;
namespace fs = std::filesystem;

TEST_CASE("slippy forward projection anchors") {
  auto [x0, y0] = wgs84_to_tile(0.0, 0.0, 20);
  CHECK(x0 == doctest::Approx(524288.0));
  CHECK(y0 == doctest::Approx(524288.0));

  auto [x1, y1] = wgs84_to_tile(0.0, -180.0, 1);
  CHECK(x1 == doctest::Approx(0.0));
  CHECK(y1 == doctest::Approx(1.0));

  // independent high-precision evaluation of the slippy formulas
  const double lat = 41.0, lon = -81.5;
  const double n = std::pow(2.0, 20);
  const double ex = (lon + 180.0) / 360.0 * n;
  const double ey =
      (1.0 - std::asinh(std::tan(lat * M_PI / 180.0)) / M_PI) / 2.0 * n;
  auto [x2, y2] = wgs84_to_tile(lat, lon, 20);
  CHECK(x2 == doctest::Approx(ex).epsilon(1e-12));
  CHECK(y2 == doctest::Approx(ey).epsilon(1e-12));

  CHECK_THROWS_AS(wgs84_to_tile(86.0, 0.0, 10), smart::InputError);
}

TEST_CASE("tile round trip over 1000 random poses") {
  std::mt19937_64 rng(123);
  std::uniform_real_distribution<double> ulat(-85.0, 85.0), ulon(-180.0, 180.0);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const double lat = ulat(rng), lon = ulon(rng);
    auto [tx, ty] = wgs84_to_tile(lat, lon, 20);
    auto [lat2, lon2] = tile_to_wgs84(tx, ty, 20);
    worst = std::max({worst, std::fabs(lat - lat2), std::fabs(lon - lon2)});
  }
  CHECK(worst <= 1e-9);
}

TEST_CASE("ground resolution values and monotonicity") {
  CHECK(ground_resolution(0.0, 20) == doctest::Approx(0.14929).epsilon(1e-3));
  CHECK(std::fabs(ground_resolution(0.0, 20) - 40075016.686 / (256.0 * 1048576.0)) <
        1e-12);
  CHECK(ground_resolution(41.0, 20) == doctest::Approx(0.11268).epsilon(1e-3));
  CHECK(std::fabs(ground_resolution(60.0, 20) - 0.5 * ground_resolution(0.0, 20)) <
        1e-6);
  for (long z = 1; z <= 22; ++z) {
    CHECK(ground_resolution(30.0, z) ==
          doctest::Approx(ground_resolution(30.0, z - 1) / 2.0).epsilon(1e-12));
    CHECK(ground_resolution(-37.5, z) ==
          doctest::Approx(ground_resolution(37.5, z)).epsilon(1e-12));
  }
}

namespace {

std::string make_cache_with_tiles(const std::string& name) {
  const std::string dir = "/tmp/smart_geo_" + name;
  fs::remove_all(dir);
  // 2x2 block of distinct constant-color tiles at zoom 3, x in {2,3}, y in {1,2}
  const std::uint8_t colors[4][3] = {{255, 0, 0}, {0, 255, 0}, {0, 0, 255}, {255, 255, 0}};
  int k = 0;
  for (long y = 1; y <= 2; ++y) {
    for (long x = 2; x <= 3; ++x, ++k) {
      Image t(kTileSize, kTileSize);
      for (long r = 0; r < kTileSize; ++r)
        for (long c = 0; c < kTileSize; ++c)
          for (long ch = 0; ch < 3; ++ch) t.at(r, c, ch) = colors[k][ch];
      fs::create_directories(dir + "/3/" + std::to_string(x));
      t.save_png(dir + "/3/" + std::to_string(x) + "/" + std::to_string(y) + ".png");
    }
  }
  return dir;
}

}  // namespace

TEST_CASE("stitching assembles tiles in slippy order") {
  TileClientConfig cfg;
  cfg.cache_dir = make_cache_with_tiles("stitch");
  cfg.offline = true;
  TileClient client(cfg);

  SUBCASE("1x1 identity stitch from cache") {
    auto s = fetch_tiles(client, 3, 2, 1, 2, 1);
    CHECK(s.image.rows == 256);
    CHECK(s.image.cols == 256);
    CHECK(s.missing.empty());
    CHECK(s.image.at(10, 10, 0) == 255);
    CHECK(s.image.at(10, 10, 1) == 0);
  }

  SUBCASE("2x2 quadrants: x east, y south") {
    auto s = fetch_tiles(client, 3, 2, 1, 3, 2);
    CHECK(s.image.rows == 512);
    CHECK(s.image.cols == 512);
    // NW red, NE green, SW blue, SE yellow
    CHECK(s.image.at(0, 0, 0) == 255);
    CHECK(s.image.at(0, 300, 1) == 255);
    CHECK(s.image.at(300, 0, 2) == 255);
    CHECK(s.image.at(300, 300, 0) == 255);
    CHECK(s.image.at(300, 300, 1) == 255);
  }

  SUBCASE("missing tile yields fill block plus warning") {
    auto s = fetch_tiles(client, 3, 2, 1, 4, 1);  // x=4 absent from cache
    REQUIRE(s.missing.size() == 1);
    CHECK(s.missing[0] == TileIndex{3, 4, 1});
    CHECK(s.image.at(10, 2 * 256 + 10, 0) == 128);
    CHECK(s.image.at(10, 2 * 256 + 10, 1) == 128);
  }
}

namespace {

Stitched gradient_mosaic(const GeoPose& pose, long zoom) {
  auto range = covering_range(pose, Extent{}, zoom, 30.0);
  Stitched s;
  s.zoom = zoom;
  s.origin_px_x = double(range.x0) * kTileSize;
  s.origin_px_y = double(range.y0) * kTileSize;
  s.image = Image((range.y1 - range.y0 + 1) * kTileSize,
                  (range.x1 - range.x0 + 1) * kTileSize);
  std::mt19937_64 rng(77);
  std::uniform_int_distribution<int> u(0, 255);
  for (auto& p : s.image.pixels) p = std::uint8_t(u(rng));
  return s;
}

}  // namespace

TEST_CASE("crop at opposite headings differ by a 180 degree rotation") {
  const GeoPose pose = GeoPose::make(41.0, -81.5, 0.7);
  const GeoPose flipped = GeoPose::make(41.0, -81.5, 0.7 + M_PI);
  auto mosaic = gradient_mosaic(pose, 18);
  const Extent ext{60.0, 40.0};
  auto a = crop_satellite(mosaic, pose, ext, 120, 80);
  auto b = crop_satellite(mosaic, flipped, ext, 120, 80);
  long worst = 0;
  for (long r = 2; r < 118; ++r)
    for (long c = 2; c < 78; ++c)
      for (long ch = 0; ch < 3; ++ch) {
        const long diff = long(a.image.at(r, c, ch)) -
                          long(b.image.at(119 - r, 79 - c, ch));
        worst = std::max(worst, std::labs(diff));
      }
  CHECK(worst <= 2);
}

TEST_CASE("white pixel lands at the predicted ego-frame position") {
  const GeoPose pose = GeoPose::make(0.001, 0.002, M_PI / 3.0);
  const long zoom = 20;
  auto mosaic = gradient_mosaic(pose, zoom);
  // darken everything, then paint one white pixel at a known global position
  for (auto& p : mosaic.image.pixels) p /= 8;
  const long gr = mosaic.image.rows / 2 + 37, gc = mosaic.image.cols / 2 - 23;
  for (long ch = 0; ch < 3; ++ch) mosaic.image.at(gr, gc, ch) = 255;

  // forward-project that pixel's center into the ego frame by hand
  auto [plat, plon] = tile_to_wgs84((mosaic.origin_px_x + gc + 0.5) / kTileSize,
                                    (mosaic.origin_px_y + gr + 0.5) / kTileSize, zoom);
  const double rad = M_PI / 180.0;
  const double de = (plon - pose.lon) * rad * kEarthRadius * std::cos(pose.lat * rad);
  const double dn = (plat - pose.lat) * rad * kEarthRadius;
  const double ex = de * std::cos(pose.heading) + dn * std::sin(pose.heading);
  const double ey = -de * std::sin(pose.heading) + dn * std::cos(pose.heading);

  const Extent ext{100.0, 50.0};
  const long H = 500, W = 250;
  auto crop = crop_satellite(mosaic, pose, ext, H, W);
  const double pred_r = double(H) / 2.0 - ex / crop.mpp_row - 0.5;
  const double pred_c = double(W) / 2.0 - ey / crop.mpp_col - 0.5;
  REQUIRE(pred_r > 1);
  REQUIRE(pred_c > 1);

  long best_r = -1, best_c = -1;
  int best_v = -1;
  for (long r = 0; r < H; ++r)
    for (long c = 0; c < W; ++c)
      if (int(crop.image.at(r, c, 0)) + crop.image.at(r, c, 1) > best_v) {
        best_v = int(crop.image.at(r, c, 0)) + crop.image.at(r, c, 1);
        best_r = r;
        best_c = c;
      }
  CHECK(std::fabs(best_r - pred_r) <= 1.0);
  CHECK(std::fabs(best_c - pred_c) <= 1.0);
}

TEST_CASE("crop determinism and coverage error") {
  const GeoPose pose = GeoPose::make(41.0, -81.5, 0.3);
  auto mosaic = gradient_mosaic(pose, 18);
  auto a = crop_satellite(mosaic, pose, Extent{}, 100, 50);
  auto b = crop_satellite(mosaic, pose, Extent{}, 100, 50);
  CHECK(a.image.pixels == b.image.pixels);

  CHECK_THROWS_WITH_AS(
      crop_satellite(mosaic, pose, Extent{100000.0, 50000.0}, 10, 10),
      doctest::Contains("corner"), smart::InputError);
}

TEST_CASE("crop translation equivariance within one pixel") {
  const GeoPose pose = GeoPose::make(41.0, -81.5, M_PI / 2.0);  // +x = north
  auto mosaic = gradient_mosaic(pose, 18);
  const double mpp = ground_resolution(pose.lat, 18);
  // shift the pose north by exactly 4 output pixels
  const long H = 100, W = 50;
  const Extent ext{60.0, 30.0};
  const double step_m = 4.0 * ext.forward_m / H;
  const GeoPose shifted = GeoPose::make(
      pose.lat + step_m / kEarthRadius * 180.0 / M_PI, pose.lon, pose.heading);
  auto a = crop_satellite(mosaic, pose, ext, H, W);
  auto b = crop_satellite(mosaic, shifted, ext, H, W);
  (void)mpp;
  long worst = 0;
  for (long r = 8; r < H - 8; ++r)
    for (long c = 2; c < W - 2; ++c)
      for (long ch = 0; ch < 3; ++ch)
        worst = std::max(worst, std::labs(long(a.image.at(r, c, ch)) -
                                          long(b.image.at(r + 4, c, ch))));
  CHECK(worst <= 2);
}
