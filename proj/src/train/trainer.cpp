#include "smart/train/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

namespace smart::train {

void TrainConfig::validate() const {
  if (epochs <= 0 || lr <= 0.0 || weight_decay < 0.0 || clip_norm <= 0.0 ||
      checkpoint_every <= 0 || log_every <= 0 || max_steps < 0 || min_lr < 0.0)
    throw InputError("TrainConfig: hyperparameters must be positive");
  if (weights.w_cls < 0 || weights.w_reg < 0 || weights.w_top < 0 ||
      weights.focal_alpha <= 0 || weights.focal_alpha >= 1 || weights.focal_gamma < 0)
    throw InputError("TrainConfig: invalid loss weights");
}

json TrainConfig::to_json() const {
  return json{{"epochs", epochs},
              {"max_steps", max_steps},
              {"lr", lr},
              {"min_lr", min_lr},
              {"weight_decay", weight_decay},
              {"clip_norm", clip_norm},
              {"w_cls", weights.w_cls},
              {"w_reg", weights.w_reg},
              {"w_top", weights.w_top},
              {"focal_alpha", weights.focal_alpha},
              {"focal_gamma", weights.focal_gamma},
              {"seed", seed},
              {"checkpoint_every", checkpoint_every},
              {"log_every", log_every}};
}

TrainConfig TrainConfig::from_json(const json& j) {
  TrainConfig c;
  c.epochs = j.value("epochs", c.epochs);
  c.max_steps = j.value("max_steps", c.max_steps);
  c.lr = j.value("lr", c.lr);
  c.min_lr = j.value("min_lr", c.min_lr);
  c.weight_decay = j.value("weight_decay", c.weight_decay);
  c.clip_norm = j.value("clip_norm", c.clip_norm);
  c.weights.w_cls = j.value("w_cls", c.weights.w_cls);
  c.weights.w_reg = j.value("w_reg", c.weights.w_reg);
  c.weights.w_top = j.value("w_top", c.weights.w_top);
  c.weights.focal_alpha = j.value("focal_alpha", c.weights.focal_alpha);
  c.weights.focal_gamma = j.value("focal_gamma", c.weights.focal_gamma);
  c.seed = j.value("seed", c.seed);
  c.checkpoint_every = j.value("checkpoint_every", c.checkpoint_every);
  c.log_every = j.value("log_every", c.log_every);
  c.validate();
  return c;
}

namespace {

GtTargets targets_for(const scene::SceneBundle& s, const model::SmartModel& m) {
  if (!s.gt_graph)
    throw InputError("training scene '" + s.scene_id + "' has no ground truth");
  const auto& dc = m.config().decoder;
  if (s.gt_graph->n_points != dc.n_points)
    throw InputError("scene '" + s.scene_id + "' has " +
                     std::to_string(s.gt_graph->n_points) +
                     " points per lane, model expects " +
                     std::to_string(dc.n_points));
  return make_targets(*s.gt_graph, s.extent, dc.z_min, dc.z_max);
}

}  // namespace

TrainResult train_model(model::SmartModel& m,
                        const std::vector<scene::SceneBundle>& scenes,
                        const TrainConfig& cfg, const std::string& out_dir,
                        const std::vector<scene::SceneBundle>& held_out,
                        const std::string& resume_path) {
  cfg.validate();
  if (scenes.empty()) throw InputError("train: empty dataset");
  std::filesystem::create_directories(out_dir);

  nn::AdamW opt(m.params(), cfg.lr, cfg.weight_decay);
  const std::string hash = m.config().hash();
  long start_step = 0;
  if (!resume_path.empty())
    start_step = nn::Checkpoint::load(resume_path, m.params(), hash, &opt);

  const long n = long(scenes.size());
  // the cosine schedule spans the epoch budget; max_steps only truncates the
  // run so a stopped-and-resumed session replays the same schedule
  const long schedule_steps = cfg.epochs * n;
  const long total_steps = cfg.max_steps > 0 ? cfg.max_steps : schedule_steps;

  std::vector<GtTargets> targets;
  for (const auto& s : scenes) targets.push_back(targets_for(s, m));
  std::vector<GtTargets> val_targets;
  for (const auto& s : held_out) val_targets.push_back(targets_for(s, m));

  TrainResult res;
  res.checkpoint_path = out_dir + "/checkpoint.bin";
  res.metrics_path = out_dir + "/metrics.jsonl";
  if (resume_path.empty()) std::filesystem::remove(res.metrics_path);
  std::ofstream log(res.metrics_path, std::ios::app);

  std::vector<long> order(std::size_t(n), 0);
  for (long i = 0; i < n; ++i) order[std::size_t(i)] = i;

  bool have_initial = false;
  for (long step = 0; step < total_steps; ++step) {
    if (step % n == 0) {
      // per-epoch deterministic shuffle, replayed identically on resume
      Rng erng(cfg.seed ^ (std::uint64_t(step / n) * 0x9E3779B97F4A7C15ull + 1));
      std::shuffle(order.begin(), order.end(), erng);
    }
    if (step < start_step) continue;

    const long idx = order[std::size_t(step % n)];
    m.params().zero_grads();
    LossResult loss;
    try {
      auto fwd = m.forward(scenes[std::size_t(idx)]);
      loss = compute_losses(fwd.decoded.layers, targets[std::size_t(idx)],
                            cfg.weights);
    } catch (const IntegrityError& e) {
      throw IntegrityError("step " + std::to_string(step) + " on scene '" +
                           scenes[std::size_t(idx)].scene_id + "': " + e.what());
    }
    const double total = loss.total->value[0];
    if (!std::isfinite(total))
      throw IntegrityError("loss diverged (non-finite) at step " +
                           std::to_string(step) +
                           "; last-good checkpoint preserved in " + out_dir);
    if (!have_initial) {
      res.initial_total = total;
      have_initial = true;
    }
    res.final_total = total;

    nn::backward(loss.total);
    opt.clip_grad_norm(cfg.clip_norm);
    const double lr = nn::cosine_lr(cfg.lr, step, schedule_steps, cfg.min_lr);
    opt.step(lr);

    if (step % cfg.log_every == 0 || step + 1 == total_steps) {
      json rec{{"step", step},
               {"cls", loss.report.cls},
               {"reg", loss.report.reg},
               {"top", loss.report.top},
               {"total", total},
               {"lr", lr}};
      log << rec.dump() << "\n";
      log.flush();
    }
    if ((step + 1) % cfg.checkpoint_every == 0 || step + 1 == total_steps)
      nn::Checkpoint::save(res.checkpoint_path, m.params(), hash, step + 1, &opt);

    if (!held_out.empty() && (step + 1) % n == 0) {
      nn::NoGradGuard ng;
      double acc = 0.0;
      for (std::size_t v = 0; v < held_out.size(); ++v) {
        auto fwd = m.forward(held_out[v]);
        acc += compute_losses(fwd.decoded.layers, val_targets[v], cfg.weights)
                   .report.total;
      }
      json rec{{"epoch", (step + 1) / n},
               {"val_total", acc / double(held_out.size())}};
      log << rec.dump() << "\n";
      log.flush();
    }
  }
  res.steps = total_steps;
  return res;
}

}  // namespace smart::train
