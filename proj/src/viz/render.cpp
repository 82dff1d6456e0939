#include "smart/viz/render.hpp"

#include <algorithm>
#include <cmath>

namespace smart::viz {

namespace {

constexpr double kMpp = 0.2;  // plot resolution when no satellite is present

// distinct hues cycled by lane index
constexpr std::array<std::array<std::uint8_t, 3>, 6> kGtPalette = {{
    {0, 200, 80},
    {0, 160, 255},
    {180, 120, 255},
    {0, 230, 200},
    {120, 200, 0},
    {80, 130, 255},
}};
constexpr std::array<std::array<std::uint8_t, 3>, 6> kPredPalette = {{
    {255, 80, 80},
    {255, 150, 40},
    {255, 80, 180},
    {220, 60, 255},
    {255, 110, 110},
    {255, 190, 90},
}};

void put(geo::Image& img, long r, long c,
         const std::array<std::uint8_t, 3>& col) {
  if (r < 0 || r >= img.rows || c < 0 || c >= img.cols) return;
  for (long ch = 0; ch < 3; ++ch) img.at(r, c, ch) = col[std::size_t(ch)];
}

void draw_dot(geo::Image& img, double r, double c,
              const std::array<std::uint8_t, 3>& col, long radius) {
  const long r0 = long(std::llround(r)), c0 = long(std::llround(c));
  for (long dr = -radius; dr <= radius; ++dr)
    for (long dc = -radius; dc <= radius; ++dc)
      if (dr * dr + dc * dc <= radius * radius)
        put(img, r0 + dr, c0 + dc, col);
}

void draw_line(geo::Image& img, double r0, double c0, double r1, double c1,
               const std::array<std::uint8_t, 3>& col, long thickness = 0) {
  const double len = std::hypot(r1 - r0, c1 - c0);
  const int steps = std::max(1, int(std::ceil(len * 2.0)));
  for (int s = 0; s <= steps; ++s) {
    const double t = double(s) / steps;
    const double r = r0 + (r1 - r0) * t, c = c0 + (c1 - c0) * t;
    if (thickness > 0)
      draw_dot(img, r, c, col, thickness);
    else
      put(img, long(std::llround(r)), long(std::llround(c)), col);
  }
}

// arrowhead at (r1,c1) pointing along (r0,c0) -> (r1,c1)
void draw_arrow_head(geo::Image& img, double r0, double c0, double r1,
                     double c1, const std::array<std::uint8_t, 3>& col) {
  const double dr = r1 - r0, dc = c1 - c0;
  const double len = std::hypot(dr, dc);
  if (len < 1e-9) return;
  const double ur = dr / len, uc = dc / len;
  const double size = 5.0;
  // two barbs at +-150 degrees from the direction
  for (double sign : {1.0, -1.0}) {
    const double ang = sign * 2.617993877991494;  // 150 deg
    const double br = ur * std::cos(ang) - uc * std::sin(ang);
    const double bc = ur * std::sin(ang) + uc * std::cos(ang);
    draw_line(img, r1, c1, r1 + br * size, c1 + bc * size, col);
  }
}

void draw_lane(geo::Image& img, const scene::SceneBundle& b,
               const scene::LaneGraph::Lane& lane,
               const std::array<std::uint8_t, 3>& col) {
  const auto& pts = lane.points;
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    const auto a = plot_pixel(b, pts[i][0], pts[i][1]);
    const auto e = plot_pixel(b, pts[i + 1][0], pts[i + 1][1]);
    draw_line(img, a[0], a[1], e[0], e[1], col);
  }
  if (pts.size() >= 2) {
    const auto a = plot_pixel(b, pts[pts.size() - 2][0], pts[pts.size() - 2][1]);
    const auto e = plot_pixel(b, pts.back()[0], pts.back()[1]);
    draw_arrow_head(img, a[0], a[1], e[0], e[1], col);
  }
}

void draw_edges(geo::Image& img, const scene::SceneBundle& b,
                const scene::LaneGraph& g) {
  for (long i = 0; i < g.size(); ++i)
    for (long j = 0; j < g.size(); ++j) {
      if (i == j || g.adj(i, j) == 0) continue;
      const auto& pi = g.lanes[std::size_t(i)].points.back();
      const auto& pj = g.lanes[std::size_t(j)].points.front();
      const auto a = plot_pixel(b, pi[0], pi[1]);
      const auto e = plot_pixel(b, pj[0], pj[1]);
      draw_line(img, a[0], a[1], e[0], e[1], kEdgeColor);
      draw_dot(img, a[0], a[1], kEdgeColor, 1);
      draw_dot(img, e[0], e[1], kEdgeColor, 1);
    }
}

void draw_legend(geo::Image& img, bool with_prediction) {
  // swatch column: SD, GT lane, edge connector, optional predicted lane
  std::vector<std::array<std::uint8_t, 3>> rows = {kSdColor, kGtPalette[0],
                                                   kEdgeColor};
  if (with_prediction) rows.push_back(kPredPalette[0]);
  const long sw = 10, pad = 3;
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const long top = pad + long(k) * (sw + pad);
    for (long r = 0; r < sw; ++r)
      for (long c = 0; c < sw; ++c) {
        put(img, top + r, pad + c, rows[k]);
        if (r == 0 || r == sw - 1 || c == 0 || c == sw - 1)
          put(img, top + r, pad + c, {0, 0, 0});
      }
  }
}

}  // namespace

std::array<std::uint8_t, 3> lane_color(long index, bool predicted) {
  const auto& pal = predicted ? kPredPalette : kGtPalette;
  return pal[std::size_t(index) % pal.size()];
}

std::array<double, 2> plot_pixel(const scene::SceneBundle& b, double x,
                                 double y) {
  long rows, cols;
  double mr, mc;
  if (!b.satellite.image.empty()) {
    rows = b.satellite.image.rows;
    cols = b.satellite.image.cols;
    mr = b.satellite.mpp_row;
    mc = b.satellite.mpp_col;
  } else {
    rows = long(std::llround(b.extent.forward_m / kMpp));
    cols = long(std::llround(b.extent.lateral_m / kMpp));
    mr = mc = kMpp;
  }
  return {double(rows) / 2.0 - x / mr - 0.5,
          double(cols) / 2.0 - y / mc - 0.5};
}

geo::Image render_scene(const scene::SceneBundle& bundle,
                        const scene::LaneGraph* prediction) {
  geo::Image img;
  if (!bundle.satellite.image.empty()) {
    img = bundle.satellite.image;
    // dim the underlay so overlays stand out
    for (auto& p : img.pixels) p = std::uint8_t((unsigned(p) * 3) / 4);
  } else {
    img = geo::Image(long(std::llround(bundle.extent.forward_m / kMpp)),
                     long(std::llround(bundle.extent.lateral_m / kMpp)), 40);
  }

  for (const auto& pl : bundle.sd_map.polylines)
    for (std::size_t i = 0; i + 1 < pl.points.size(); ++i) {
      const auto a = plot_pixel(bundle, pl.points[i][0], pl.points[i][1]);
      const auto e =
          plot_pixel(bundle, pl.points[i + 1][0], pl.points[i + 1][1]);
      draw_line(img, a[0], a[1], e[0], e[1], kSdColor);
    }

  // connectors drawn after the lanes so edge endpoints stay visible
  if (bundle.gt_graph) {
    for (long i = 0; i < bundle.gt_graph->size(); ++i)
      draw_lane(img, bundle, bundle.gt_graph->lanes[std::size_t(i)],
                lane_color(i, false));
    draw_edges(img, bundle, *bundle.gt_graph);
  }
  if (prediction) {
    for (long i = 0; i < prediction->size(); ++i)
      draw_lane(img, bundle, prediction->lanes[std::size_t(i)],
                lane_color(i, true));
    draw_edges(img, bundle, *prediction);
  }

  draw_legend(img, prediction != nullptr);
  return img;
}

void render_to_file(const scene::SceneBundle& bundle,
                    const scene::LaneGraph* prediction,
                    const std::string& out_path) {
  render_scene(bundle, prediction).save_png(out_path);
}

}  // namespace smart::viz
