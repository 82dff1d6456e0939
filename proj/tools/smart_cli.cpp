// smart: command-line surface over ingestion, synthesis, training,
// evaluation, inference, prior export, and plot rendering.
//
// Exit codes: 0 success, 1 usage error, 2 invalid input (bad config, bad
// path, version mismatch), 3 runtime failure (fetch, integrity, I/O).

#include <CLI11.hpp>

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <thread>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "smart/eval/metrics.hpp"
#include "smart/geo/tiles.hpp"
#include "smart/model/model.hpp"
#include "smart/scene/hdmap.hpp"
#include "smart/scene/synthetic.hpp"
#include "smart/train/trainer.hpp"
#include "smart/viz/render.hpp"

namespace fs = std::filesystem;
using namespace smart;

namespace {

constexpr const char* kVersion = "0.1.0";
constexpr int kExitInput = 2;
constexpr int kExitRuntime = 3;

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

json load_json_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw InputError("cannot open " + path);
  try {
    return json::parse(is);
  } catch (const json::exception& e) {
    throw ParseError(path + ": " + e.what(), 0);
  }
}

void write_json_atomic(const std::string& path, const json& j) {
  const std::string tmp = path + ".tmp";
  std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
  os << j.dump(2) << "\n";
  if (!os) throw FetchError("cannot write " + tmp);
  os.close();
  fs::rename(tmp, path);
}

// Run record written into every artifact directory before heavy work starts
// and finalized with stage latencies afterwards.
struct Manifest {
  std::string command;
  std::string out_dir;
  json flags = json::object();
  json inputs = json::array();
  json outputs = json::array();
  std::uint64_t seed = 0;
  json stages_ms = json::object();

  std::string path() const { return out_dir + "/manifest.json"; }
  void write() const {
    fs::create_directories(out_dir);
    write_json_atomic(path(), json{{"command", command},
                                   {"version", kVersion},
                                   {"flags", flags},
                                   {"inputs", inputs},
                                   {"outputs", outputs},
                                   {"seed", seed},
                                   {"stages_ms", stages_ms}});
  }
};

struct TileFlags {
  std::string url, cache, suffix = ".png";
  bool offline = false;
  long zoom = 19;

  void attach(CLI::App* cmd) {
    cmd->add_option("--tiles-url", url, "satellite tile endpoint base URL");
    cmd->add_option("--tile-cache", cache, "tile cache directory");
    cmd->add_option("--tile-suffix", suffix, "tile URL suffix");
    cmd->add_option("--zoom", zoom, "tile zoom level");
    cmd->add_flag("--offline", offline, "forbid network, cache only");
  }
  geo::TileClientConfig client_config() const {
    geo::TileClientConfig c;
    c.base_url = url;
    c.suffix = suffix;
    c.cache_dir = cache;
    c.offline = offline;
    if (const char* tok = std::getenv("SMART_TILE_TOKEN")) c.token = tok;
    return c;
  }
};

// Pose-mode ingestion: SD from a road extract, satellite from the tile
// service. Offline gaps in coverage are a hard error.
scene::SceneBundle ingest_pose(const geo::GeoPose& pose,
                               const geo::Extent& extent,
                               const std::string& osm_path,
                               const TileFlags& tiles,
                               const std::string& scene_id) {
  scene::SceneBundle b;
  b.scene_id = scene_id;
  b.pose = pose;
  b.extent = extent;
  if (!osm_path.empty()) {
    auto extract = geo::parse_road_extract(osm_path);
    b.sd_map = geo::extract_local_sd(extract, pose, extent);
  } else {
    b.sd_map.pose = pose;
    b.sd_map.extent = extent;
  }
  if (!tiles.url.empty() || !tiles.cache.empty()) {
    geo::TileClient client(tiles.client_config());
    const auto range = geo::covering_range(pose, extent, tiles.zoom);
    auto stitched = geo::fetch_tiles(client, range.zoom, range.x0, range.y0,
                                     range.x1, range.y1);
    if (tiles.offline && !stitched.missing.empty())
      throw FetchError("missing tile coverage in offline mode: tile " +
                       stitched.missing.front().str());
    b.satellite = geo::crop_satellite(stitched, pose, extent);
  } else {
    b.satellite.pose = pose;
    b.satellite.extent = extent;
  }
  return b;
}

model::ModelConfig model_config_from(const std::string& config_path) {
  if (config_path.empty()) return model::ModelConfig{};
  const json j = load_json_file(config_path);
  return j.contains("model") ? model::ModelConfig::from_json(j.at("model"))
                             : model::ModelConfig{};
}

// Model restored from a checkpoint; the config comes from --config or the
// model_config.json written next to the checkpoint at training time.
model::SmartModel load_model(const std::string& checkpoint,
                             const std::string& config_path) {
  if (!fs::exists(checkpoint))
    throw InputError("no such checkpoint: " + checkpoint);
  std::string cp = config_path;
  if (cp.empty()) {
    const auto sibling = fs::path(checkpoint).parent_path() / "model_config.json";
    if (fs::exists(sibling)) cp = sibling.string();
  }
  model::ModelConfig cfg;
  if (!cp.empty()) {
    const json j = load_json_file(cp);
    cfg = model::ModelConfig::from_json(j.contains("model") ? j.at("model") : j);
  }
  model::SmartModel m(cfg, 0);
  nn::Checkpoint::load(checkpoint, m.params(), cfg.hash());
  return m;
}

std::vector<scene::SceneBundle> load_scene_list(
    const std::string& root, const std::vector<std::string>& ids) {
  std::vector<scene::SceneBundle> out;
  for (const auto& id : ids) out.push_back(scene::load_bundle(root, id));
  return out;
}

std::vector<std::string> split_csv(const std::string& s) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (pos <= s.size()) {
    const auto comma = s.find(',', pos);
    const auto end = comma == std::string::npos ? s.size() : comma;
    if (end > pos) out.push_back(s.substr(pos, end - pos));
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  return out;
}

// ---- subcommands -----------------------------------------------------------

struct SynthArgs {
  std::string out;
  long count = 8;
  std::uint64_t seed = 0;
  std::string layouts = "straight,curve,tee,crossroad";
  int lanes_per_road = 1;
  double noise = 3.0;
  int workers = 1;
};

int cmd_synth(const SynthArgs& a) {
  Manifest man{"synth", a.out};
  man.seed = a.seed;
  man.flags = {{"count", a.count},      {"layouts", a.layouts},
               {"lanes_per_road", a.lanes_per_road},
               {"noise", a.noise},      {"workers", a.workers}};
  man.write();
  const auto t0 = Clock::now();

  std::vector<scene::Layout> layouts;
  for (const auto& name : split_csv(a.layouts))
    layouts.push_back(scene::layout_from_name(name));
  if (layouts.empty()) throw InputError("synth: empty layout list");

  std::vector<scene::SyntheticSpec> specs;
  for (long i = 0; i < a.count; ++i) {
    scene::SyntheticSpec spec;
    spec.seed = a.seed + std::uint64_t(i);
    spec.layout = layouts[std::size_t(i) % layouts.size()];
    spec.lanes_per_road = a.lanes_per_road;
    spec.texture_noise = a.noise;
    if (spec.layout == scene::Layout::kCurve)
      spec.curvature = 0.01 + 0.02 * double(i % 2);
    spec.validate();
    specs.push_back(spec);
  }

  // scenes are independent; fan out across workers
  std::vector<std::string> ids(specs.size());
  const int nw = std::max(1, a.workers);
  std::vector<std::thread> pool;
  std::atomic<std::size_t> next{0};
  auto work = [&]() {
    for (std::size_t i = next.fetch_add(1); i < specs.size();
         i = next.fetch_add(1)) {
      auto b = scene::generate_synthetic_scene(specs[i]);
      scene::save_bundle(b, a.out);
      ids[i] = b.scene_id;
    }
  };
  for (int w = 0; w < nw; ++w) pool.emplace_back(work);
  for (auto& t : pool) t.join();

  for (const auto& id : ids) man.outputs.push_back(id);
  man.stages_ms["generate"] = ms_since(t0);
  man.write();
  std::cout << "synth: wrote " << specs.size() << " scenes to " << a.out << "\n";
  return 0;
}

struct SplitArgs {
  std::string root, out, held_out;
  double min_displacement = 0.0;
};

int cmd_split(const SplitArgs& a) {
  Manifest man{"split", a.out.empty() ? a.root : a.out};
  man.flags = {{"root", a.root},
               {"held_out", a.held_out},
               {"min_displacement", a.min_displacement}};
  man.inputs.push_back(a.root);
  man.write();
  const auto t0 = Clock::now();
  auto [train, val] =
      scene::split_dataset(a.root, split_csv(a.held_out), a.min_displacement);
  const std::string path = man.out_dir + "/split.json";
  write_json_atomic(path, json{{"train", train}, {"val", val}});
  man.outputs.push_back(path);
  man.stages_ms["split"] = ms_since(t0);
  man.write();
  std::cout << "split: " << train.size() << " train / " << val.size()
            << " held-out -> " << path << "\n";
  return 0;
}

struct TrainArgs {
  std::string root, out, config, resume, held_out;
  std::uint64_t seed = 0;
  long steps = -1;
  long epochs = -1;
};

int cmd_train(const TrainArgs& a) {
  json cfg_json = a.config.empty() ? json::object() : load_json_file(a.config);
  auto mcfg = model_config_from(a.config);
  auto tcfg = cfg_json.contains("train")
                  ? train::TrainConfig::from_json(cfg_json.at("train"))
                  : train::TrainConfig{};
  tcfg.seed = a.seed;
  if (a.steps >= 0) tcfg.max_steps = a.steps;
  if (a.epochs > 0) tcfg.epochs = a.epochs;
  tcfg.validate();

  Manifest man{"train", a.out};
  man.seed = a.seed;
  man.flags = {{"root", a.root},     {"config", a.config},
               {"resume", a.resume}, {"held_out", a.held_out},
               {"steps", a.steps},   {"epochs", a.epochs}};
  man.inputs.push_back(a.root);
  man.write();
  write_json_atomic(a.out + "/model_config.json", mcfg.to_json());
  write_json_atomic(a.out + "/train_config.json", tcfg.to_json());

  const auto t0 = Clock::now();
  auto [train_ids, val_ids] =
      scene::split_dataset(a.root, split_csv(a.held_out));
  if (train_ids.empty()) throw InputError("train: no scenes under " + a.root);
  auto scenes = load_scene_list(a.root, train_ids);
  auto held = load_scene_list(a.root, val_ids);
  man.stages_ms["load"] = ms_since(t0);

  model::SmartModel m(mcfg, a.seed);
  const auto t1 = Clock::now();
  auto res = train::train_model(m, scenes, tcfg, a.out, held, a.resume);
  man.stages_ms["train"] = ms_since(t1);
  man.outputs = {res.checkpoint_path, res.metrics_path};
  man.write();
  std::cout << "train: " << res.steps << " steps, loss " << res.initial_total
            << " -> " << res.final_total << ", checkpoint "
            << res.checkpoint_path << "\n";
  return 0;
}

struct EvalArgs {
  std::string root, out, checkpoint, config, scenes;
};

int cmd_eval(const EvalArgs& a) {
  Manifest man{"eval", a.out};
  man.flags = {{"root", a.root},
               {"checkpoint", a.checkpoint},
               {"config", a.config},
               {"scenes", a.scenes}};
  man.inputs = {a.root, a.checkpoint};
  man.write();

  auto t0 = Clock::now();
  auto m = load_model(a.checkpoint, a.config);
  man.stages_ms["load_model"] = ms_since(t0);

  auto ids = a.scenes.empty() ? scene::list_scenes(a.root) : split_csv(a.scenes);
  if (ids.empty()) throw InputError("eval: no scenes under " + a.root);

  t0 = Clock::now();
  std::vector<scene::LaneGraph> preds, gts;
  for (const auto& id : ids) {
    auto b = scene::load_bundle(a.root, id);
    if (!b.gt_graph)
      throw InputError("eval: scene '" + id + "' has no ground truth");
    gts.push_back(*b.gt_graph);
    preds.push_back(m.infer(b));
  }
  man.stages_ms["inference"] = ms_since(t0);

  t0 = Clock::now();
  auto report = eval::evaluate_dataset(preds, gts, eval::MetricConfig{});
  const std::string jp = a.out + "/report.json", cp = a.out + "/report.csv";
  eval::write_report(report, jp, cp);
  man.stages_ms["metrics"] = ms_since(t0);
  man.outputs = {jp, cp};
  man.write();
  std::cout << "eval: DET_l " << report.det_l << "  TOP_ll " << report.top_ll
            << " over " << ids.size() << " scenes -> " << jp << "\n";
  return 0;
}

struct InferArgs {
  std::string root, id, out, checkpoint, config, osm;
  double lat = 400.0, lon = 400.0, heading = 0.0;
  TileFlags tiles;
  bool save_plot = false;
};

scene::SceneBundle resolve_scene(const std::string& root, const std::string& id,
                                 double lat, double lon, double heading,
                                 const std::string& osm, const TileFlags& tiles,
                                 const std::string& scene_id) {
  if (!root.empty() && !id.empty()) return scene::load_bundle(root, id);
  if (lat <= 90.0 && lat >= -90.0)
    return ingest_pose(geo::GeoPose::make(lat, lon, heading), geo::Extent{},
                       osm, tiles, scene_id);
  throw InputError("provide --root/--id or --lat/--lon[/--heading]");
}

int cmd_infer(const InferArgs& a) {
  Manifest man{"infer", a.out};
  man.flags = {{"root", a.root}, {"id", a.id},
               {"checkpoint", a.checkpoint},
               {"lat", a.lat},   {"lon", a.lon},
               {"offline", a.tiles.offline}};
  man.inputs = {a.checkpoint};
  man.write();

  auto t0 = Clock::now();
  auto b = resolve_scene(a.root, a.id, a.lat, a.lon, a.heading, a.osm, a.tiles,
                         "pose-scene");
  man.stages_ms["ingest"] = ms_since(t0);

  t0 = Clock::now();
  auto m = load_model(a.checkpoint, a.config);
  man.stages_ms["load_model"] = ms_since(t0);

  t0 = Clock::now();
  auto prior = m.encode_prior(b);
  man.stages_ms["encode"] = ms_since(t0);
  t0 = Clock::now();
  auto graph = m.decode_prior(prior);
  man.stages_ms["decode"] = ms_since(t0);

  const std::string gp = a.out + "/lane_graph.json";
  write_json_atomic(gp, graph.to_json());
  man.outputs.push_back(gp);
  if (a.save_plot) {
    const std::string pp = a.out + "/plot.png";
    viz::render_to_file(b, &graph, pp);
    man.outputs.push_back(pp);
  }
  man.write();
  std::cout << "infer: " << graph.size() << " lanes -> " << gp << "\n";
  return 0;
}

struct ExportArgs {
  std::string root, id, out, checkpoint, config, poses, osm;
  TileFlags tiles;
};

int cmd_export_prior(const ExportArgs& a) {
  Manifest man{"export-prior", a.out};
  man.flags = {{"root", a.root}, {"id", a.id},
               {"checkpoint", a.checkpoint},
               {"poses", a.poses}};
  man.inputs = {a.checkpoint};
  man.write();

  auto m = load_model(a.checkpoint, a.config);
  const auto t0 = Clock::now();
  std::vector<scene::SceneBundle> scenes;
  if (!a.poses.empty()) {
    const json plist = load_json_file(a.poses);
    long k = 0;
    for (const auto& p : plist) {
      auto pose = geo::GeoPose::from_json(p);
      scenes.push_back(ingest_pose(pose, geo::Extent{}, a.osm, a.tiles,
                                   "pose-" + std::to_string(k++)));
    }
  } else if (!a.root.empty()) {
    for (const auto& id : a.id.empty() ? scene::list_scenes(a.root)
                                       : split_csv(a.id))
      scenes.push_back(scene::load_bundle(a.root, id));
  } else {
    throw InputError("provide --root or --poses");
  }
  man.stages_ms["ingest"] = ms_since(t0);

  const auto t1 = Clock::now();
  for (const auto& b : scenes) {
    auto prior = m.encode_prior(b);
    const std::string path = a.out + "/prior-" + b.scene_id + ".smpg";
    prior.save(path);
    man.outputs.push_back(path);
  }
  man.stages_ms["encode"] = ms_since(t1);
  man.write();
  std::cout << "export-prior: " << scenes.size() << " grids -> " << a.out
            << "\n";
  return 0;
}

struct PrepareArgs {
  std::string out, osm, poses, hd;
  TileFlags tiles;
  int workers = 1;
};

int cmd_prepare(const PrepareArgs& a) {
  Manifest man{"prepare", a.out};
  man.flags = {{"osm", a.osm}, {"poses", a.poses}, {"hd", a.hd},
               {"offline", a.tiles.offline}};
  man.inputs = {a.osm, a.poses};
  man.write();
  const auto t0 = Clock::now();

  const json plist = load_json_file(a.poses);
  std::optional<scene::HdRecord> hd;
  if (!a.hd.empty()) hd = scene::HdRecord::from_json(load_json_file(a.hd));

  long k = 0;
  for (const auto& entry : plist) {
    auto pose = geo::GeoPose::from_json(entry);
    const std::string id = entry.value("scene_id", "scene-" + std::to_string(k));
    auto b = ingest_pose(pose, geo::Extent{}, a.osm, a.tiles, id);
    b.split_key = entry.value("split_key", "");
    if (hd && entry.contains("world_pose")) {
      scene::WorldPose wp;
      wp.x = entry["world_pose"].value("x", 0.0);
      wp.y = entry["world_pose"].value("y", 0.0);
      wp.heading = entry["world_pose"].value("heading", 0.0);
      auto res = scene::hdmap_to_lanegraph(*hd, wp, b.extent.forward_m,
                                           b.extent.lateral_m);
      b.gt_graph = std::move(res.graph);
      for (const auto& w : res.warnings) std::cerr << id << ": " << w << "\n";
    }
    scene::save_bundle(b, a.out);
    man.outputs.push_back(id);
    ++k;
  }
  man.stages_ms["ingest"] = ms_since(t0);
  man.write();
  std::cout << "prepare: " << k << " scenes -> " << a.out << "\n";
  return 0;
}

struct RenderArgs {
  std::string root, id, prediction, out;
};

int cmd_render(const RenderArgs& a) {
  auto b = scene::load_bundle(a.root, a.id);
  std::optional<scene::LaneGraph> pred;
  if (!a.prediction.empty())
    pred = scene::LaneGraph::from_json(load_json_file(a.prediction));
  fs::create_directories(fs::path(a.out).parent_path().string().empty()
                             ? "."
                             : fs::path(a.out).parent_path().string());
  viz::render_to_file(b, pred ? &*pred : nullptr, a.out);
  std::cout << "render: " << a.out << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"SD + satellite map prior for lane-graph prediction"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  SynthArgs sy;
  auto* synth = app.add_subcommand("synth", "generate synthetic scenes");
  synth->add_option("--out", sy.out, "dataset root")->required();
  synth->add_option("--count", sy.count, "number of scenes");
  synth->add_option("--seed", sy.seed, "base seed");
  synth->add_option("--layouts", sy.layouts, "comma list of layouts");
  synth->add_option("--lanes-per-road", sy.lanes_per_road, "lanes per road");
  synth->add_option("--noise", sy.noise, "texture noise sigma");
  synth->add_option("--workers", sy.workers, "parallel scene workers");

  SplitArgs sp;
  auto* split = app.add_subcommand("split", "partition a dataset by region key");
  split->add_option("--root", sp.root, "dataset root")->required();
  split->add_option("--out", sp.out, "output directory (default: root)");
  split->add_option("--held-out", sp.held_out, "comma list of held-out keys");
  split->add_option("--min-displacement", sp.min_displacement,
                    "still-frame filter threshold, meters");

  TrainArgs tr;
  auto* train = app.add_subcommand("train", "optimize a model on a dataset");
  train->add_option("--root", tr.root, "dataset root")->required();
  train->add_option("--out", tr.out, "run directory")->required();
  train->add_option("--config", tr.config, "json config {model, train}");
  train->add_option("--seed", tr.seed, "training seed");
  train->add_option("--steps", tr.steps, "max optimization steps");
  train->add_option("--epochs", tr.epochs, "epoch budget");
  train->add_option("--resume", tr.resume, "checkpoint to resume from");
  train->add_option("--held-out", tr.held_out, "held-out split keys");

  EvalArgs ev;
  auto* evalc = app.add_subcommand("eval", "run metrics over a dataset");
  evalc->add_option("--root", ev.root, "dataset root")->required();
  evalc->add_option("--out", ev.out, "report directory")->required();
  evalc->add_option("--checkpoint", ev.checkpoint, "model checkpoint")->required();
  evalc->add_option("--config", ev.config, "model config override");
  evalc->add_option("--scenes", ev.scenes, "comma list of scene ids");

  InferArgs in;
  auto* infer = app.add_subcommand("infer", "single-scene inference");
  infer->add_option("--root", in.root, "dataset root (bundle mode)");
  infer->add_option("--id", in.id, "scene id (bundle mode)");
  infer->add_option("--lat", in.lat, "pose latitude (pose mode)");
  infer->add_option("--lon", in.lon, "pose longitude (pose mode)");
  infer->add_option("--heading", in.heading, "pose heading, radians");
  infer->add_option("--osm", in.osm, "road extract for pose mode");
  infer->add_option("--out", in.out, "output directory")->required();
  infer->add_option("--checkpoint", in.checkpoint, "model checkpoint")->required();
  infer->add_option("--config", in.config, "model config override");
  infer->add_flag("--plot", in.save_plot, "also render a plot.png");
  in.tiles.attach(infer);

  ExportArgs ex;
  auto* expc = app.add_subcommand("export-prior", "export fused BEV priors");
  expc->add_option("--root", ex.root, "dataset root (bundle mode)");
  expc->add_option("--id", ex.id, "comma list of scene ids");
  expc->add_option("--poses", ex.poses, "json pose list (route mode)");
  expc->add_option("--osm", ex.osm, "road extract for pose mode");
  expc->add_option("--out", ex.out, "output directory")->required();
  expc->add_option("--checkpoint", ex.checkpoint, "model checkpoint")->required();
  expc->add_option("--config", ex.config, "model config override");
  ex.tiles.attach(expc);

  PrepareArgs pr;
  auto* prep = app.add_subcommand("prepare", "ingest real scenes from sources");
  prep->add_option("--out", pr.out, "dataset root")->required();
  prep->add_option("--poses", pr.poses, "json pose list")->required();
  prep->add_option("--osm", pr.osm, "road extract path");
  prep->add_option("--hd", pr.hd, "hd-map record json for ground truth");
  prep->add_option("--workers", pr.workers, "parallel scene workers");
  pr.tiles.attach(prep);

  RenderArgs re;
  auto* rend = app.add_subcommand("render", "plot a scene bundle");
  rend->add_option("--root", re.root, "dataset root")->required();
  rend->add_option("--id", re.id, "scene id")->required();
  rend->add_option("--prediction", re.prediction, "predicted lane_graph.json");
  rend->add_option("--out", re.out, "output png path")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*synth) return cmd_synth(sy);
    if (*split) return cmd_split(sp);
    if (*train) return cmd_train(tr);
    if (*evalc) return cmd_eval(ev);
    if (*infer) return cmd_infer(in);
    if (*expc) return cmd_export_prior(ex);
    if (*prep) return cmd_prepare(pr);
    if (*rend) return cmd_render(re);
  } catch (const InputError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return kExitInput;
  } catch (const ParseError& e) {
    std::cerr << "parse error: " << e.what() << "\n";
    return kExitInput;
  } catch (const VersionError& e) {
    std::cerr << "version error: " << e.what() << "\n";
    return kExitInput;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return 0;
}
