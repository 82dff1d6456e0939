#include "smart/scene/lane_graph.hpp"

#include <cmath>

namespace smart::scene {

void LaneGraph::validate(bool ground_truth) const {
  const long n = size();
  if (long(adjacency.size()) != n * n)
    throw IntegrityError("lane graph: adjacency size does not match lane count");
  if (edge_probs && long(edge_probs->size()) != n * n)
    throw IntegrityError("lane graph: edge_probs size does not match lane count");
  for (const auto& lane : lanes) {
    if (long(lane.points.size()) != n_points)
      throw IntegrityError("lane graph: lane point count != n_points");
    if (!(lane.confidence >= 0.0 && lane.confidence <= 1.0))
      throw IntegrityError("lane graph: confidence outside [0,1]");
  }
  for (long i = 0; i < n; ++i) {
    if (adj(i, i) != 0) throw IntegrityError("lane graph: nonzero diagonal");
    for (long j = 0; j < n; ++j) {
      if (!ground_truth || !adj(i, j)) continue;
      const auto& e = lanes[i].points.back();
      const auto& s = lanes[j].points.front();
      const double d = std::sqrt((e[0] - s[0]) * (e[0] - s[0]) +
                                 (e[1] - s[1]) * (e[1] - s[1]) +
                                 (e[2] - s[2]) * (e[2] - s[2]));
      if (d > 0.5)
        throw IntegrityError("lane graph: connected endpoint gap " +
                             std::to_string(d) + " m exceeds 0.5 m");
    }
  }
}

json LaneGraph::to_json() const {
  json jl = json::array();
  for (const auto& lane : lanes) {
    json pts = json::array();
    for (const auto& p : lane.points) pts.push_back({p[0], p[1], p[2]});
    jl.push_back({{"points", pts}, {"confidence", lane.confidence}});
  }
  json out{{"n_points", n_points},
           {"lanes", jl},
           {"adjacency", json::array()}};
  for (auto v : adjacency) out["adjacency"].push_back(int(v));
  if (edge_probs) out["edge_probs"] = *edge_probs;
  return out;
}

LaneGraph LaneGraph::from_json(const json& j) {
  LaneGraph g;
  g.n_points = j.at("n_points").get<long>();
  for (const auto& jl : j.at("lanes")) {
    Lane lane;
    for (const auto& p : jl.at("points"))
      lane.points.push_back({p[0].get<double>(), p[1].get<double>(), p[2].get<double>()});
    lane.confidence = jl.at("confidence").get<double>();
    g.lanes.push_back(std::move(lane));
  }
  for (const auto& v : j.at("adjacency"))
    g.adjacency.push_back(std::uint8_t(v.get<int>()));
  if (j.contains("edge_probs"))
    g.edge_probs = j.at("edge_probs").get<std::vector<double>>();
  return g;
}

}  // namespace smart::scene
