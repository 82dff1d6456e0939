#pragma once

#include <array>
#include <optional>
#include <vector>

#include "smart/common.hpp"

namespace smart::scene {

// Directed lane-centerline graph: N lanes of n_points 3-D points each, a
// confidence per lane, and an NxN connectivity matrix where (i,j)=1 means
// lane i's end connects to lane j's start.
struct LaneGraph {
  long n_points = 11;
  struct Lane {
    std::vector<std::array<double, 3>> points;
    double confidence = 1.0;
  };
  std::vector<Lane> lanes;
  std::vector<std::uint8_t> adjacency;  // row-major N*N, diagonal 0
  // Edge probabilities for predicted graphs; absent for ground truth.
  std::optional<std::vector<double>> edge_probs;

  long size() const { return long(lanes.size()); }
  std::uint8_t adj(long i, long j) const { return adjacency[i * size() + j]; }
  void set_adj(long i, long j, std::uint8_t v) { adjacency[i * size() + j] = v; }
  double edge_confidence(long i, long j) const {
    return edge_probs ? (*edge_probs)[i * size() + j] : double(adj(i, j));
  }

  // Checks shape invariants; for ground truth also the 0.5 m endpoint gap.
  void validate(bool ground_truth) const;

  json to_json() const;
  static LaneGraph from_json(const json& j);
};

}  // namespace smart::scene
