#include "smart/nn/optim.hpp"

#include <cmath>

namespace smart::nn {

AdamW::AdamW(ParamStore& params, double lr, double weight_decay, double beta1,
             double beta2, double eps)
    : params_(params), lr_(lr), wd_(weight_decay), beta1_(beta1), beta2_(beta2),
      eps_(eps) {
  for (const auto& [name, p] : params_.all()) {
    m_.emplace_back(p->value.shape, 0.0);
    v_.emplace_back(p->value.shape, 0.0);
  }
}

double AdamW::clip_grad_norm(double max_norm) {
  double sq = 0.0;
  for (const auto& [name, p] : params_.all()) {
    if (p->grad.data.empty()) continue;
    for (double g : p->grad.data) sq += g * g;
  }
  const double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0.0) {
    const double s = max_norm / norm;
    for (auto& [name, p] : params_.all()) {
      if (p->grad.data.empty()) continue;
      for (double& g : p->grad.data) g *= s;
    }
  }
  return norm;
}

void AdamW::step(double lr_override) {
  const double lr = lr_override >= 0.0 ? lr_override : lr_;
  ++step_;
  const double bc1 = 1.0 - std::pow(beta1_, double(step_));
  const double bc2 = 1.0 - std::pow(beta2_, double(step_));
  std::size_t idx = 0;
  for (auto& [name, p] : params_.all()) {
    Tensor& m = m_[idx];
    Tensor& v = v_[idx];
    ++idx;
    Tensor& pv = p->value;
    const bool has_grad = !p->grad.data.empty();
    for (std::size_t i = 0; i < pv.data.size(); ++i) {
      const double g = has_grad ? p->grad.data[i] : 0.0;
      m.data[i] = beta1_ * m.data[i] + (1.0 - beta1_) * g;
      v.data[i] = beta2_ * v.data[i] + (1.0 - beta2_) * g * g;
      const double mhat = m.data[i] / bc1;
      const double vhat = v.data[i] / bc2;
      pv.data[i] -= lr * (mhat / (std::sqrt(vhat) + eps_) + wd_ * pv.data[i]);
    }
  }
}

double cosine_lr(double base_lr, long step, long total_steps, double min_lr) {
  if (total_steps <= 0) return base_lr;
  const double t = std::min(1.0, double(step) / double(total_steps));
  return min_lr + 0.5 * (base_lr - min_lr) * (1.0 + std::cos(M_PI * t));
}

}  // namespace smart::nn
