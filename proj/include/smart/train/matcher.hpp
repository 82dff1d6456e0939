#pragma once

#include "smart/model/decoder.hpp"
#include "smart/scene/lane_graph.hpp"

namespace smart::train {

struct MatchResult {
  std::vector<std::pair<long, long>> pairs;  // (prediction, ground truth)
  std::vector<long> unmatched_predictions;
};

// Ground truth in the decoder's normalized coordinate frame.
struct GtTargets {
  nn::Tensor points_norm;  // [N_gt, N_P*3], entries in [0,1]
  std::vector<std::uint8_t> adjacency;  // N_gt * N_gt row-major
  long n_gt = 0;
};

GtTargets make_targets(const scene::LaneGraph& gt, const geo::Extent& extent,
                       double z_min, double z_max);

// Exact minimum-cost assignment over an n x m cost matrix; matches
// min(n, m) pairs. Ties broken toward lower row/column indices.
std::vector<std::pair<long, long>> solve_assignment(const nn::Tensor& cost);

// cost[i][j] = w_cls * (-sigmoid(logit_i)) + w_reg * meanL1(pred_i, gt_j)
MatchResult match(const nn::Tensor& cls_logits, const nn::Tensor& reg_norm,
                  const GtTargets& gt, double w_cls, double w_reg);

}  // namespace smart::train
