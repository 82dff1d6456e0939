#pragma once

#include <vector>

#include "smart/nn/modules.hpp"

namespace smart::nn {

// Adam with decoupled weight decay.
class AdamW {
 public:
  AdamW(ParamStore& params, double lr, double weight_decay, double beta1 = 0.9,
        double beta2 = 0.999, double eps = 1e-8);

  // Returns the pre-clip global gradient norm.
  double clip_grad_norm(double max_norm);
  void step(double lr_override = -1.0);

  long step_count() const { return step_; }
  void set_step_count(long s) { step_ = s; }

  std::vector<Tensor>& moments1() { return m_; }
  std::vector<Tensor>& moments2() { return v_; }

 private:
  ParamStore& params_;
  double lr_, wd_, beta1_, beta2_, eps_;
  long step_ = 0;
  std::vector<Tensor> m_, v_;
};

// Cosine decay from base_lr to min_lr over total_steps.
double cosine_lr(double base_lr, long step, long total_steps, double min_lr = 0.0);

}  // namespace smart::nn
