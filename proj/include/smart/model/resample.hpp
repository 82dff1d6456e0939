#pragma once

#include <array>
#include <cmath>
#include <vector>

#include "smart/common.hpp"

namespace smart::model {

// Evenly arc-length-spaced resampling. Endpoints are preserved exactly;
// interior points sit at cumulative arc-length fractions k/(n-1). A single
// point or zero-length input repeats the point n times.
template <std::size_t Dim>
std::vector<std::array<double, Dim>> resample_polyline(
    const std::vector<std::array<double, Dim>>& pts, long n) {
  if (n < 2) throw InputError("resample_polyline: N must be >= 2");
  if (pts.empty()) throw InputError("resample_polyline: empty input");
  std::vector<double> cum(pts.size(), 0.0);
  for (std::size_t i = 1; i < pts.size(); ++i) {
    double sq = 0.0;
    for (std::size_t d = 0; d < Dim; ++d) {
      const double dd = pts[i][d] - pts[i - 1][d];
      sq += dd * dd;
    }
    cum[i] = cum[i - 1] + std::sqrt(sq);
  }
  const double total = cum.back();
  const std::size_t count = std::size_t(n);
  std::vector<std::array<double, Dim>> out(count);
  if (total <= 0.0) {
    for (auto& p : out) p = pts.front();
    return out;
  }
  out.front() = pts.front();
  out.back() = pts.back();
  std::size_t seg = 0;
  for (long k = 1; k < n - 1; ++k) {
    const double target = total * double(k) / double(n - 1);
    while (seg + 2 < pts.size() && cum[seg + 1] < target) ++seg;
    const double seg_len = cum[seg + 1] - cum[seg];
    const double t = seg_len > 0.0 ? (target - cum[seg]) / seg_len : 0.0;
    for (std::size_t d = 0; d < Dim; ++d)
      out[std::size_t(k)][d] = pts[seg][d] * (1.0 - t) + pts[seg + 1][d] * t;
  }
  return out;
}

}  // namespace smart::model
