#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "smart/model/resample.hpp"
#include "smart/scene/hdmap.hpp"
#include "smart/scene/synthetic.hpp"

using namespace smart::scene;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_CASE("resample_polyline contracts") {
  using smart::model::resample_polyline;
  // uniform segment
  auto seg = resample_polyline<2>({{0, 0}, {10, 0}}, 11);
  for (int i = 0; i < 11; ++i) {
    CHECK(seg[i][0] == doctest::Approx(double(i)).epsilon(1e-12));
    CHECK(seg[i][1] == 0.0);
  }
  // L-shape, total length 8, step 2
  auto ell = resample_polyline<2>({{0, 0}, {4, 0}, {4, 4}}, 5);
  const std::vector<std::array<double, 2>> expect = {
      {0, 0}, {2, 0}, {4, 0}, {4, 2}, {4, 4}};
  for (int i = 0; i < 5; ++i) {
    CHECK(ell[i][0] == doctest::Approx(expect[i][0]));
    CHECK(ell[i][1] == doctest::Approx(expect[i][1]));
  }
  // degenerate single point
  auto deg = resample_polyline<2>({{3, 3}}, 5);
  for (const auto& p : deg) {
    CHECK(p[0] == 3.0);
    CHECK(p[1] == 3.0);
  }
  CHECK_THROWS_AS(resample_polyline<2>({{0, 0}, {1, 1}}, 1), smart::InputError);
}

TEST_CASE("resampling preserves endpoints and arc length on gentle curves") {
  using smart::model::resample_polyline;
  const double c = 0.05;
  std::vector<std::array<double, 3>> arc;
  for (double s = 0.0; s <= 60.0; s += 0.5)
    arc.push_back({std::sin(c * s) / c, (1 - std::cos(c * s)) / c, 0.0});
  auto rs = resample_polyline<3>(arc, 11);
  CHECK(rs.front() == arc.front());
  CHECK(rs.back() == arc.back());
  auto arclen = [](const std::vector<std::array<double, 3>>& pts) {
    double t = 0.0;
    for (std::size_t i = 1; i < pts.size(); ++i)
      t += std::hypot(pts[i][0] - pts[i - 1][0], pts[i][1] - pts[i - 1][1]);
    return t;
  };
  CHECK(std::fabs(arclen(rs) - arclen(arc)) / arclen(arc) < 0.01);
}

TEST_CASE("hdmap: minimal chain keeps the successor edge") {
  HdRecord rec;
  rec.lanes.push_back({1, {{-20, 0, 0}, {0, 0, 0}}});
  rec.lanes.push_back({2, {{0, 0, 0}, {20, 0, 0}}});
  rec.successors[1] = {2};
  auto res = hdmap_to_lanegraph(rec, WorldPose{}, 100, 50);
  REQUIRE(res.graph.size() == 2);
  CHECK(res.graph.adj(0, 1) == 1);
  CHECK(res.graph.adj(1, 0) == 0);
  CHECK(res.graph.adj(0, 0) == 0);
}

TEST_CASE("hdmap: middle lane outside the window re-links pred to succ") {
  HdRecord rec;
  // Window is 40x20 around the origin; B lives entirely beyond x=20.
  rec.lanes.push_back({1, {{-15, 0, 0}, {19, 0, 0}}});          // A inside
  rec.lanes.push_back({2, {{25, 0, 0}, {60, 0, 0}}});           // B outside
  rec.lanes.push_back({3, {{-15, 5, 0}, {19, 5, 0}}});          // C inside
  rec.successors[1] = {2};
  rec.successors[2] = {3};
  auto res = hdmap_to_lanegraph(rec, WorldPose{}, 40, 20);
  REQUIRE(res.graph.size() == 2);
  // brute-force oracle: transitive closure over the removed node
  CHECK(res.graph.adj(0, 1) == 1);
  CHECK(res.graph.adj(1, 0) == 0);
}

TEST_CASE("hdmap: clipped lane endpoints stay inside the window") {
  HdRecord rec;
  rec.lanes.push_back({7, {{-100, -3, 0}, {100, 3, 1.0}}});
  auto res = hdmap_to_lanegraph(rec, WorldPose{}, 100, 50);
  REQUIRE(res.graph.size() == 1);
  for (const auto& p : res.graph.lanes[0].points) {
    CHECK(std::fabs(p[0]) <= 50.0 + 1e-6);
    CHECK(std::fabs(p[1]) <= 25.0 + 1e-6);
  }
  CHECK(res.graph.lanes[0].points.size() == 11);
}

TEST_CASE("hdmap: rotated pose transforms into the ego frame") {
  HdRecord rec;
  // A lane running north through world (5, 0): with the ego heading north,
  // it is the ego x-axis shifted by -5 in ego y... verify by construction.
  rec.lanes.push_back({1, {{5, -30, 0}, {5, 30, 0}}});
  auto res = hdmap_to_lanegraph(rec, WorldPose{0, 0, M_PI / 2}, 100, 50);
  REQUIRE(res.graph.size() == 1);
  for (const auto& p : res.graph.lanes[0].points)
    CHECK(p[1] == doctest::Approx(-5.0).epsilon(1e-9));
}

TEST_CASE("synthetic: straight minimal layout") {
  SyntheticSpec spec;
  spec.seed = 7;
  spec.layout = Layout::kStraight;
  auto b = generate_synthetic_scene(spec);
  REQUIRE(b.gt_graph);
  REQUIRE(b.gt_graph->size() == 1);
  for (const auto& p : b.gt_graph->lanes[0].points) CHECK(p[1] == 0.0);
  CHECK(b.gt_graph->adjacency == std::vector<std::uint8_t>{0});
  CHECK(b.sd_map.polylines.size() == 1);
}

TEST_CASE("synthetic: crossroad connectivity equals the turn table") {
  SyntheticSpec spec;
  spec.seed = 7;
  spec.layout = Layout::kCrossroad;
  auto b = generate_synthetic_scene(spec);
  REQUIRE(b.gt_graph->size() == 8);  // 4 approaches + 4 exits
  long edge_count = 0;
  for (auto v : b.gt_graph->adjacency) edge_count += v;
  CHECK(edge_count == 12);  // each approach turns left/straight/right
  // hand-enumerated: approaches are even indices, exits odd; approach of
  // arm a connects exactly to exits of the three other arms
  for (long a = 0; a < 4; ++a)
    for (long e = 0; e < 4; ++e)
      CHECK(int(b.gt_graph->adj(2 * a, 2 * e + 1)) == int(a != e));
  b.gt_graph->validate(true);  // includes the 0.5 m endpoint-gap invariant
}

TEST_CASE("synthetic: determinism and corridor agreement") {
  SyntheticSpec spec;
  spec.seed = 21;
  spec.layout = Layout::kTee;
  spec.lanes_per_road = 2;
  auto a = generate_synthetic_scene(spec);
  auto b = generate_synthetic_scene(spec);
  CHECK(a.satellite.image.pixels == b.satellite.image.pixels);
  CHECK(a.sd_map.to_json().dump() == b.sd_map.to_json().dump());
  CHECK(a.gt_graph->to_json().dump() == b.gt_graph->to_json().dump());

  // >= 95% of resampled centerline points land on painted-road pixels
  long on = 0, total = 0;
  const auto& img = a.satellite.image;
  for (const auto& lane : a.gt_graph->lanes)
    for (const auto& p : lane.points) {
      long r = long(std::lround(double(img.rows) / 2.0 - p[0] / a.satellite.mpp_row - 0.5));
      long c = long(std::lround(double(img.cols) / 2.0 - p[1] / a.satellite.mpp_col - 0.5));
      r = std::clamp(r, 0l, img.rows - 1);
      c = std::clamp(c, 0l, img.cols - 1);
      ++total;
      // road pixels are darker and grayer than the green background
      const int red = img.at(r, c, 0), green = img.at(r, c, 1);
      if (std::abs(red - green) < 40) ++on;
    }
  CHECK(double(on) / double(total) >= 0.95);
}

TEST_CASE("synthetic: invalid spec rejected with field name") {
  SyntheticSpec spec;
  spec.lanes_per_road = 9;
  CHECK_THROWS_WITH_AS(generate_synthetic_scene(spec),
                       doctest::Contains("lanes_per_road"), smart::InputError);
}

TEST_CASE("bundle persistence round trip and integrity errors") {
  const std::string root = "/tmp/smart_scene_ds";
  fs::remove_all(root);
  SyntheticSpec spec;
  spec.seed = 3;
  spec.layout = Layout::kCurve;
  spec.curvature = 0.01;
  auto b = generate_synthetic_scene(spec);
  save_bundle(b, root);
  auto loaded = load_bundle(root, b.scene_id);
  CHECK(loaded.scene_id == b.scene_id);
  CHECK(loaded.pose.lat == b.pose.lat);
  CHECK(loaded.pose.heading == b.pose.heading);
  CHECK(loaded.satellite.image.pixels == b.satellite.image.pixels);
  CHECK(loaded.sd_map.to_json() == b.sd_map.to_json());
  CHECK(loaded.gt_graph->to_json() == b.gt_graph->to_json());
  CHECK(loaded.split_key == b.split_key);

  // save twice -> byte-identical artifacts
  const std::string root2 = "/tmp/smart_scene_ds2";
  fs::remove_all(root2);
  save_bundle(b, root2);
  for (const char* f : {"sd_map.json", "satellite.png", "lane_graph.json", "meta.json"})
    CHECK(slurp(fs::path(root) / b.scene_id / f) == slurp(fs::path(root2) / b.scene_id / f));

  SUBCASE("missing satellite file") {
    fs::remove(fs::path(root) / b.scene_id / "satellite.png");
    CHECK_THROWS_WITH_AS(load_bundle(root, b.scene_id),
                         doctest::Contains("satellite"), smart::IntegrityError);
  }
  SUBCASE("schema version mismatch") {
    const fs::path meta = fs::path(root) / b.scene_id / "meta.json";
    auto j = smart::json::parse(slurp(meta));
    j["schema_version"] = 99;
    std::ofstream(meta) << j.dump(2);
    CHECK_THROWS_AS(load_bundle(root, b.scene_id), smart::VersionError);
  }
}

TEST_CASE("dataset split partitions by key") {
  const std::string root = "/tmp/smart_scene_split";
  fs::remove_all(root);
  std::vector<std::string> all_ids;
  for (std::uint64_t seed = 0; seed < 12; ++seed) {
    SyntheticSpec spec;
    spec.seed = seed;
    spec.layout = Layout(seed % 4);
    spec.curvature = spec.layout == Layout::kCurve ? 0.01 : 0.0;
    auto b = generate_synthetic_scene(spec);
    save_bundle(b, root);
    all_ids.push_back(b.scene_id);
  }
  auto [train, held] = split_dataset(root, {"region-0", "region-3"});
  std::vector<std::string> joined = train;
  joined.insert(joined.end(), held.begin(), held.end());
  std::sort(joined.begin(), joined.end());
  std::sort(all_ids.begin(), all_ids.end());
  CHECK(joined == all_ids);
  for (const auto& id : held) {
    auto b = load_bundle(root, id);
    CHECK((b.split_key == "region-0" || b.split_key == "region-3"));
  }
  for (const auto& id : train) {
    auto b = load_bundle(root, id);
    CHECK(b.split_key != "region-0");
    CHECK(b.split_key != "region-3");
  }
}
