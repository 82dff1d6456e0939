#pragma once

#include <functional>

#include "smart/model/model.hpp"
#include "smart/train/loss.hpp"

namespace smart::train {

struct TrainConfig {
  long epochs = 8;
  long max_steps = 0;  // 0 -> epochs * dataset size
  double lr = 1e-4;    // cosine-decayed to min_lr
  double min_lr = 0.0;
  double weight_decay = 1e-2;
  double clip_norm = 35.0;
  LossWeights weights;
  std::uint64_t seed = 0;
  long checkpoint_every = 500;
  long log_every = 1;

  void validate() const;
  json to_json() const;
  static TrainConfig from_json(const json& j);
};

struct TrainResult {
  long steps = 0;
  double initial_total = 0.0;
  double final_total = 0.0;
  std::string checkpoint_path;
  std::string metrics_path;
};

// Optimization loop over preloaded scene bundles. Writes
// {out_dir}/checkpoint.bin and appends {out_dir}/metrics.jsonl. Optional
// held-out scenes get a mean-loss record per epoch. Resuming from a
// checkpoint with a different config hash is refused.
TrainResult train_model(model::SmartModel& m, const std::vector<scene::SceneBundle>& scenes,
                        const TrainConfig& cfg, const std::string& out_dir,
                        const std::vector<scene::SceneBundle>& held_out = {},
                        const std::string& resume_path = "");

}  // namespace smart::train
