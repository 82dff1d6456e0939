#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "smart/geo/geo.hpp"

namespace smart::geo {

// 8-bit RGB raster, row-major, interleaved channels.
struct Image {
  long rows = 0;
  long cols = 0;
  std::vector<std::uint8_t> pixels;  // rows*cols*3

  Image() = default;
  Image(long rows, long cols, std::uint8_t fill = 0);

  std::uint8_t& at(long r, long c, long ch) { return pixels[(r * cols + c) * 3 + ch]; }
  std::uint8_t at(long r, long c, long ch) const { return pixels[(r * cols + c) * 3 + ch]; }
  bool empty() const { return pixels.empty(); }

  // Bilinear sample with border clamp; continuous (row, col).
  void sample(double r, double c, double out[3]) const;

  static Image load_png(const std::string& path);
  static Image decode(const std::vector<std::uint8_t>& bytes);
  void save_png(const std::string& path) const;  // atomic write
  std::vector<std::uint8_t> encode_png() const;

  Image resize_bilinear(long new_rows, long new_cols) const;
};

// Satellite raster in the ego frame: image "up" (decreasing row) is ego +x.
struct SatelliteImage {
  Image image;
  double mpp_row = 0.0;  // meters per pixel along rows
  double mpp_col = 0.0;
  GeoPose pose;
  Extent extent;
};

}  // namespace smart::geo
