#include "smart/scene/bundle.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

namespace smart::scene {

namespace fs = std::filesystem;

namespace {

void write_json_atomic(const std::string& path, const json& j) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    os << j.dump(2) << "\n";
    if (!os) throw FetchError("cannot write " + tmp);
  }
  fs::rename(tmp, path);
}

json read_json(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IntegrityError("missing file: " + path);
  return json::parse(is);
}

}  // namespace

void save_bundle(const SceneBundle& bundle, const std::string& root) {
  const fs::path dir = fs::path(root) / bundle.scene_id;
  fs::create_directories(dir);
  write_json_atomic((dir / "sd_map.json").string(), bundle.sd_map.to_json());
  bundle.satellite.image.save_png((dir / "satellite.png").string());
  if (bundle.gt_graph)
    write_json_atomic((dir / "lane_graph.json").string(), bundle.gt_graph->to_json());
  json meta{{"schema_version", kBundleSchemaVersion},
            {"scene_id", bundle.scene_id},
            {"pose", bundle.pose.to_json()},
            {"extent", bundle.extent.to_json()},
            {"split_key", bundle.split_key},
            {"has_gt", bool(bundle.gt_graph)},
            {"satellite", {{"rows", bundle.satellite.image.rows},
                           {"cols", bundle.satellite.image.cols},
                           {"mpp_row", bundle.satellite.mpp_row},
                           {"mpp_col", bundle.satellite.mpp_col}}}};
  write_json_atomic((dir / "meta.json").string(), meta);
}

SceneBundle load_bundle(const std::string& root, const std::string& scene_id) {
  const fs::path dir = fs::path(root) / scene_id;
  if (!fs::exists(dir / "meta.json"))
    throw IntegrityError("bundle " + scene_id + " is missing: meta");
  const json meta = read_json((dir / "meta.json").string());
  const int ver = meta.at("schema_version").get<int>();
  if (ver != kBundleSchemaVersion)
    throw VersionError("bundle " + scene_id + " has schema version " +
                       std::to_string(ver) + ", expected " +
                       std::to_string(kBundleSchemaVersion));
  std::vector<std::string> missing;
  const bool has_gt = meta.value("has_gt", true);
  for (const char* f : {"sd_map.json", "satellite.png"})
    if (!fs::exists(dir / f)) missing.emplace_back(f);
  if (has_gt && !fs::exists(dir / "lane_graph.json"))
    missing.emplace_back("lane_graph.json");
  if (!missing.empty()) {
    std::string list;
    for (const auto& m : missing) list += (list.empty() ? "" : ", ") + m;
    throw IntegrityError("bundle " + scene_id + " is missing: " + list);
  }

  SceneBundle b;
  b.scene_id = meta.at("scene_id").get<std::string>();
  b.pose = geo::GeoPose::from_json(meta.at("pose"));
  b.extent = geo::Extent::from_json(meta.at("extent"));
  b.split_key = meta.value("split_key", "");
  b.sd_map = geo::SDMap::from_json(read_json((dir / "sd_map.json").string()));
  b.satellite.image = geo::Image::load_png((dir / "satellite.png").string());
  b.satellite.pose = b.pose;
  b.satellite.extent = b.extent;
  b.satellite.mpp_row = meta.at("satellite").at("mpp_row").get<double>();
  b.satellite.mpp_col = meta.at("satellite").at("mpp_col").get<double>();
  if (has_gt) {
    b.gt_graph = LaneGraph::from_json(read_json((dir / "lane_graph.json").string()));
    b.gt_graph->validate(false);
  }
  return b;
}

std::vector<std::string> list_scenes(const std::string& root) {
  std::vector<std::string> out;
  if (!fs::exists(root)) return out;
  for (const auto& e : fs::directory_iterator(root))
    if (e.is_directory() && fs::exists(e.path() / "meta.json"))
      out.push_back(e.path().filename().string());
  std::sort(out.begin(), out.end());
  return out;
}

std::pair<std::vector<std::string>, std::vector<std::string>> split_dataset(
    const std::string& root, const std::vector<std::string>& held_out_keys,
    double min_displacement_m) {
  std::vector<std::string> train, held;
  std::optional<geo::GeoPose> last_pose;
  for (const auto& id : list_scenes(root)) {
    const json meta = read_json((fs::path(root) / id / "meta.json").string());
    if (min_displacement_m > 0.0) {
      const auto pose = geo::GeoPose::from_json(meta.at("pose"));
      if (last_pose) {
        const double rad = M_PI / 180.0;
        const double dn = (pose.lat - last_pose->lat) * rad * geo::kEarthRadius;
        const double de = (pose.lon - last_pose->lon) * rad * geo::kEarthRadius *
                          std::cos(pose.lat * rad);
        if (std::sqrt(dn * dn + de * de) < min_displacement_m) continue;  // still frame
      }
      last_pose = pose;
    }
    const std::string key = meta.value("split_key", "");
    const bool out = std::find(held_out_keys.begin(), held_out_keys.end(), key) !=
                     held_out_keys.end();
    (out ? held : train).push_back(id);
  }
  return {train, held};
}

}  // namespace smart::scene
