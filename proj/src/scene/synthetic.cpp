#include "smart/scene/synthetic.hpp"

#include <cmath>

#include "smart/model/resample.hpp"

namespace smart::scene {

const char* layout_name(Layout l) {
  static const char* names[] = {"straight", "curve", "tee", "crossroad"};
  return names[int(l)];
}

Layout layout_from_name(const std::string& name) {
  for (int i = 0; i < 4; ++i)
    if (name == layout_name(Layout(i))) return Layout(i);
  throw InputError("unknown layout: " + name);
}

void SyntheticSpec::validate() const {
  if (lanes_per_road < 1 || lanes_per_road > 3)
    throw InputError("SyntheticSpec.lanes_per_road must be in [1,3]");
  if (lane_width < 2.5 || lane_width > 5.0)
    throw InputError("SyntheticSpec.lane_width must be in [2.5,5.0]");
  if (std::fabs(curvature) > 0.03)
    throw InputError("SyntheticSpec.curvature must be in [-0.03,0.03]");
  if (texture_noise < 0.0 || texture_noise > 30.0)
    throw InputError("SyntheticSpec.texture_noise must be in [0,30]");
  if (n_points < 2) throw InputError("SyntheticSpec.n_points must be >= 2");
}

json SyntheticSpec::to_json() const {
  return json{{"seed", seed},           {"layout", layout_name(layout)},
              {"lanes_per_road", lanes_per_road}, {"lane_width", lane_width},
              {"curvature", curvature}, {"texture_noise", texture_noise},
              {"n_points", n_points},   {"extent", extent.to_json()}};
}

SyntheticSpec SyntheticSpec::from_json(const json& j) {
  SyntheticSpec s;
  s.seed = j.value("seed", 0ull);
  s.layout = layout_from_name(j.value("layout", "straight"));
  s.lanes_per_road = j.value("lanes_per_road", 1);
  s.lane_width = j.value("lane_width", 3.5);
  s.curvature = j.value("curvature", 0.0);
  s.texture_noise = j.value("texture_noise", 3.0);
  s.n_points = j.value("n_points", 11l);
  if (j.contains("extent")) s.extent = geo::Extent::from_json(j.at("extent"));
  s.validate();
  return s;
}

namespace {

using Pt2 = std::array<double, 2>;
using Pt3 = std::array<double, 3>;

struct Arm {
  Pt2 dir;     // unit vector pointing outward from the center
  double len;  // distance from center to the window boundary along dir
};

// Approach lane: boundary -> center, lateral offset tapering to zero near
// the center so every connected endpoint coincides at the origin.
std::vector<Pt3> arm_lane(const Arm& arm, double offset, bool toward_center,
                          double taper_len) {
  std::vector<Pt3> pts;
  const int steps = 24;
  for (int s = 0; s <= steps; ++s) {
    double d = arm.len * (toward_center ? (1.0 - double(s) / steps)
                                        : double(s) / steps);
    const double off = offset * std::min(1.0, d / taper_len);
    // left normal of the travel direction
    const double tx = toward_center ? -arm.dir[0] : arm.dir[0];
    const double ty = toward_center ? -arm.dir[1] : arm.dir[1];
    pts.push_back({arm.dir[0] * d - ty * off, arm.dir[1] * d + tx * off, 0.0});
  }
  return pts;
}

std::vector<double> lane_offsets(int n, double w) {
  std::vector<double> offs;
  for (int i = 0; i < n; ++i) offs.push_back((i - (n - 1) / 2.0) * w);
  return offs;
}

}  // namespace

SceneBundle generate_synthetic_scene(const SyntheticSpec& spec) {
  spec.validate();
  Rng rng(spec.seed * 6364136223846793005ull + 1442695040888963407ull);
  std::uniform_real_distribution<double> u01(0.0, 1.0);

  SceneBundle b;
  b.scene_id = std::string(layout_name(spec.layout)) + "-" + std::to_string(spec.seed);
  const double lat = 41.0 + (u01(rng) - 0.5) * 0.2;
  const double lon = -81.5 + (u01(rng) - 0.5) * 0.2;
  const double heading = (u01(rng) - 0.5) * 2.0 * M_PI;
  b.pose = geo::GeoPose::make(lat, lon, heading);
  b.extent = spec.extent;
  b.split_key = "region-" + std::to_string(spec.seed % 8);

  const double fx = spec.extent.forward_m / 2.0, fy = spec.extent.lateral_m / 2.0;
  const int n = spec.lanes_per_road;
  const double w = spec.lane_width;

  // Road skeletons (for the SD map and raster painting) and lanes.
  std::vector<std::vector<Pt2>> skeletons;
  std::vector<std::vector<Pt3>> lanes;
  std::vector<std::pair<long, long>> edges;

  switch (spec.layout) {
    case Layout::kStraight: {
      skeletons.push_back({{-fx, 0.0}, {fx, 0.0}});
      for (double off : lane_offsets(n, w))
        lanes.push_back({{-fx, off, 0.0}, {0.0, off, 0.0}, {fx, off, 0.0}});
      break;
    }
    case Layout::kCurve: {
      const double c = spec.curvature;
      std::vector<Pt2> skel;
      std::vector<std::vector<Pt3>> raw(n);
      const auto offs = lane_offsets(n, w);
      for (double s = -1.5 * fx; s <= 1.5 * fx + 1e-9; s += 2.0) {
        double x, y, nx, ny;  // position and left normal on the arc
        if (std::fabs(c) < 1e-9) {
          x = s; y = 0.0; nx = 0.0; ny = 1.0;
        } else {
          x = std::sin(c * s) / c;
          y = (1.0 - std::cos(c * s)) / c;
          nx = -std::sin(c * s);
          ny = std::cos(c * s);
        }
        skel.push_back({x, y});
        for (int i = 0; i < n; ++i)
          raw[i].push_back({x + nx * offs[i], y + ny * offs[i], 0.0});
      }
      skeletons.push_back(skel);
      // clip each lane to the window and keep the longest run
      for (auto& lane_pts : raw) {
        std::vector<Pt3> cur, best;
        for (const auto& p : lane_pts) {
          if (std::fabs(p[0]) <= fx && std::fabs(p[1]) <= fy) {
            cur.push_back(p);
          } else {
            if (cur.size() > best.size()) best = cur;
            cur.clear();
          }
        }
        if (cur.size() > best.size()) best = cur;
        if (best.size() >= 2) lanes.push_back(best);
      }
      break;
    }
    case Layout::kTee:
    case Layout::kCrossroad: {
      std::vector<Arm> arms = {{{-1.0, 0.0}, fx}, {{1.0, 0.0}, fx}, {{0.0, -1.0}, fy}};
      if (spec.layout == Layout::kCrossroad) arms.push_back({{0.0, 1.0}, fy});
      skeletons.push_back({{-fx, 0.0}, {fx, 0.0}});
      if (spec.layout == Layout::kCrossroad)
        skeletons.push_back({{0.0, -fy}, {0.0, fy}});
      else
        skeletons.push_back({{0.0, -fy}, {0.0, 0.0}});
      const double taper = 12.0;
      const auto offs = lane_offsets(n, w);
      std::vector<std::vector<long>> approach_ids(arms.size()), exit_ids(arms.size());
      for (std::size_t a = 0; a < arms.size(); ++a) {
        for (double off : offs) {
          approach_ids[a].push_back(long(lanes.size()));
          lanes.push_back(arm_lane(arms[a], off, true, taper));
          exit_ids[a].push_back(long(lanes.size()));
          lanes.push_back(arm_lane(arms[a], off, false, taper));
        }
      }
      // every approach connects to the exits of all other arms (no U-turn)
      for (std::size_t a = 0; a < arms.size(); ++a)
        for (std::size_t e = 0; e < arms.size(); ++e) {
          if (a == e) continue;
          for (long ai : approach_ids[a])
            for (long ei : exit_ids[e]) edges.emplace_back(ai, ei);
        }
      break;
    }
  }

  // Ground-truth graph.
  LaneGraph g;
  g.n_points = spec.n_points;
  for (const auto& lane_pts : lanes) {
    LaneGraph::Lane lane;
    lane.points = model::resample_polyline<3>(lane_pts, spec.n_points);
    lane.confidence = 1.0;
    g.lanes.push_back(std::move(lane));
  }
  g.adjacency.assign(std::size_t(g.size() * g.size()), 0);
  for (auto [i, j] : edges) g.set_adj(i, j, 1);
  g.validate(true);
  b.gt_graph = std::move(g);

  // SD map: skeleton polylines with attributes.
  b.sd_map.pose = b.pose;
  b.sd_map.extent = b.extent;
  for (const auto& skel : skeletons) {
    for (auto& run : geo::clip_polyline_to_rect(skel, fx, fy)) {
      geo::SDPolyline p;
      p.points = std::move(run);
      p.road_class = geo::RoadClass::kSecondary;
      p.lane_count = n;
      p.one_way = false;
      b.sd_map.polylines.push_back(std::move(p));
    }
  }

  // Satellite raster: painted corridors over a seeded background plus noise.
  const double mpp = 0.2;
  const long rows = long(std::llround(spec.extent.forward_m / mpp));
  const long cols = long(std::llround(spec.extent.lateral_m / mpp));
  geo::Image img(rows, cols);
  const std::uint8_t bg[3] = {std::uint8_t(55 + u01(rng) * 60),
                              std::uint8_t(80 + u01(rng) * 60),
                              std::uint8_t(45 + u01(rng) * 40)};
  for (long r = 0; r < rows; ++r)
    for (long c = 0; c < cols; ++c)
      for (long ch = 0; ch < 3; ++ch) img.at(r, c, ch) = bg[ch];

  auto to_px = [&](double x, double y, double& pr, double& pc) {
    pr = double(rows) / 2.0 - x / mpp - 0.5;
    pc = double(cols) / 2.0 - y / mpp - 0.5;
  };
  const double half_road = (n * w) / 2.0 + 0.75;
  const long rad = long(std::ceil(half_road / mpp));
  const std::uint8_t road_col[3] = {72, 72, 78};
  for (const auto& skel : skeletons) {
    for (std::size_t i = 0; i + 1 < skel.size(); ++i) {
      const double segdx = skel[i + 1][0] - skel[i][0];
      const double segdy = skel[i + 1][1] - skel[i][1];
      const double len = std::hypot(segdx, segdy);
      const int steps = std::max(1, int(len / (mpp * 0.5)));
      for (int s = 0; s <= steps; ++s) {
        const double t = double(s) / steps;
        double pr, pc;
        to_px(skel[i][0] + t * segdx, skel[i][1] + t * segdy, pr, pc);
        const long r0 = long(std::lround(pr)), c0 = long(std::lround(pc));
        for (long dr = -rad; dr <= rad; ++dr)
          for (long dc = -rad; dc <= rad; ++dc) {
            if (dr * dr + dc * dc > rad * rad) continue;
            const long r = r0 + dr, c = c0 + dc;
            if (r < 0 || c < 0 || r >= rows || c >= cols) continue;
            for (long ch = 0; ch < 3; ++ch) img.at(r, c, ch) = road_col[ch];
          }
      }
    }
  }
  // faint markings along each lane centerline
  for (const auto& lane : b.gt_graph->lanes) {
    const auto dense = model::resample_polyline<3>(lane.points, 160);
    for (std::size_t i = 0; i < dense.size(); i += 2) {
      double pr, pc;
      to_px(dense[i][0], dense[i][1], pr, pc);
      const long r = long(std::lround(pr)), c = long(std::lround(pc));
      if (r < 0 || c < 0 || r >= rows || c >= cols) continue;
      for (long ch = 0; ch < 3; ++ch) img.at(r, c, ch) = 205;
    }
  }
  if (spec.texture_noise > 0.0) {
    std::normal_distribution<double> noise(0.0, spec.texture_noise);
    for (auto& px : img.pixels)
      px = std::uint8_t(std::clamp(double(px) + noise(rng), 0.0, 255.0));
  }

  b.satellite.image = std::move(img);
  b.satellite.mpp_row = mpp;
  b.satellite.mpp_col = mpp;
  b.satellite.pose = b.pose;
  b.satellite.extent = b.extent;
  return b;
}

}  // namespace smart::scene
