#include "smart/scene/hdmap.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "smart/model/resample.hpp"

namespace smart::scene {

HdRecord HdRecord::from_json(const json& j) {
  HdRecord r;
  for (const auto& jl : j.at("lanes")) {
    HdRecord::HdLane lane;
    lane.id = jl.at("id").get<long long>();
    for (const auto& p : jl.at("points"))
      lane.points.push_back({p[0].get<double>(), p[1].get<double>(),
                             p.size() > 2 ? p[2].get<double>() : 0.0});
    r.lanes.push_back(std::move(lane));
  }
  if (j.contains("successors"))
    for (auto& [id, succ] : j.at("successors").items())
      r.successors[std::stoll(id)] = succ.get<std::vector<long long>>();
  return r;
}

json HdRecord::to_json() const {
  json jl = json::array();
  for (const auto& lane : lanes) {
    json pts = json::array();
    for (const auto& p : lane.points) pts.push_back({p[0], p[1], p[2]});
    jl.push_back({{"id", lane.id}, {"points", pts}});
  }
  json js = json::object();
  for (const auto& [id, succ] : successors) js[std::to_string(id)] = succ;
  return json{{"lanes", jl}, {"successors", js}};
}

namespace {

// Clips a 3-D polyline to |x|<=fx, |y|<=fy; z interpolates linearly.
// Returns maximal inside runs.
std::vector<std::vector<std::array<double, 3>>> clip3d(
    const std::vector<std::array<double, 3>>& pts, double fx, double fy) {
  std::vector<std::vector<std::array<double, 3>>> runs;
  std::vector<std::array<double, 3>> cur;
  auto push_point = [&](const std::array<double, 3>& p) {
    if (!cur.empty()) {
      const double dx = p[0] - cur.back()[0], dy = p[1] - cur.back()[1];
      if (std::sqrt(dx * dx + dy * dy) <= 1e-9) return;
    }
    cur.push_back(p);
  };
  auto close_run = [&]() {
    if (cur.size() >= 2) runs.push_back(cur);
    cur.clear();
  };
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    const auto& a = pts[i];
    const auto& b = pts[i + 1];
    const double dx = b[0] - a[0], dy = b[1] - a[1];
    double t0 = 0.0, t1 = 1.0;
    bool ok = true;
    const double p[4] = {-dx, dx, -dy, dy};
    const double q[4] = {a[0] + fx, fx - a[0], a[1] + fy, fy - a[1]};
    for (int e = 0; e < 4 && ok; ++e) {
      if (p[e] == 0.0) {
        if (q[e] < 0.0) ok = false;
      } else {
        const double t = q[e] / p[e];
        if (p[e] < 0.0)
          t0 = std::max(t0, t);
        else
          t1 = std::min(t1, t);
        if (t0 > t1) ok = false;
      }
    }
    if (!ok) {
      close_run();
      continue;
    }
    if (t0 > 0.0 && !cur.empty()) close_run();
    auto lerp = [&](double t) -> std::array<double, 3> {
      return {a[0] + t * dx, a[1] + t * dy, a[2] + t * (b[2] - a[2])};
    };
    push_point(lerp(t0));
    push_point(lerp(t1));
    if (t1 < 1.0) close_run();
  }
  close_run();
  return runs;
}

}  // namespace

HdToGraphResult hdmap_to_lanegraph(const HdRecord& record, const WorldPose& pose,
                                   double forward_m, double lateral_m,
                                   long n_points) {
  HdToGraphResult res;
  const double ch = std::cos(pose.heading), sh = std::sin(pose.heading);
  std::map<long long, long> kept_index;  // hd lane id -> graph index
  std::set<long long> all_ids, dropped;

  for (const auto& lane : record.lanes) {
    all_ids.insert(lane.id);
    if (lane.points.size() < 2) {
      res.warnings.push_back("lane " + std::to_string(lane.id) +
                             " has fewer than 2 points, dropped");
      dropped.insert(lane.id);
      continue;
    }
    std::vector<std::array<double, 3>> ego;
    ego.reserve(lane.points.size());
    for (const auto& p : lane.points) {
      const double wx = p[0] - pose.x, wy = p[1] - pose.y;
      ego.push_back({wx * ch + wy * sh, -wx * sh + wy * ch, p[2]});
    }
    auto runs = clip3d(ego, forward_m / 2.0, lateral_m / 2.0);
    if (runs.empty()) {
      dropped.insert(lane.id);
      continue;
    }
    if (runs.size() > 1)
      res.warnings.push_back("lane " + std::to_string(lane.id) +
                             " leaves and re-enters the window; keeping longest run");
    auto longest = std::max_element(runs.begin(), runs.end(),
                                    [](const auto& a, const auto& b) {
                                      return a.size() < b.size();
                                    });
    kept_index[lane.id] = long(res.graph.lanes.size());
    LaneGraph::Lane out;
    out.points = model::resample_polyline<3>(*longest, n_points);
    out.confidence = 1.0;
    res.graph.lanes.push_back(std::move(out));
  }

  res.graph.n_points = n_points;
  const long n = res.graph.size();
  res.graph.adjacency.assign(std::size_t(n * n), 0);

  // Edge i->j survives if a successor path from i reaches j through dropped
  // lanes only (the pass-through re-link contract).
  for (const auto& [src_id, src_idx] : kept_index) {
    std::set<long long> visited{src_id};
    std::vector<long long> frontier{src_id};
    while (!frontier.empty()) {
      const long long cur = frontier.back();
      frontier.pop_back();
      auto it = record.successors.find(cur);
      if (it == record.successors.end()) continue;
      for (long long nxt : it->second) {
        if (!visited.insert(nxt).second) continue;
        auto kept = kept_index.find(nxt);
        if (kept != kept_index.end()) {
          if (kept->second != src_idx)
            res.graph.set_adj(src_idx, kept->second, 1);
        } else if (dropped.count(nxt)) {
          frontier.push_back(nxt);  // bridge through the dropped lane
        }
      }
    }
  }
  return res;
}

}  // namespace smart::scene
