#pragma once

#include "smart/train/matcher.hpp"

namespace smart::train {

struct LossWeights {
  double w_cls = 1.5;
  double w_reg = 2.5;  // applied on normalized coordinates
  double w_top = 5.0;
  double focal_alpha = 0.25;
  double focal_gamma = 2.0;
};

struct LossReport {
  double cls = 0.0, reg = 0.0, top = 0.0, total = 0.0;
  LossWeights weights;
};

// Elementwise binary focal loss of pre-sigmoid logits against 0/1 targets;
// same shape as the input.
nn::Var focal_loss(const nn::Var& logits, const nn::Tensor& targets,
                   double alpha, double gamma);

struct LossResult {
  nn::Var total;  // scalar, graph-connected for backward
  LossReport report;
  MatchResult final_match;  // assignment used for the last layer
};

// Matches and scores every decoder layer (deep supervision) and averages.
LossResult compute_losses(const std::vector<model::LayerOutput>& layers,
                          const GtTargets& gt, const LossWeights& w);

}  // namespace smart::train
