#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "hsnd/error.hpp"
#include "hsnd/param_store.hpp"

namespace hsnd {

struct OneCycleSchedule {
  double pct_warmup = 0.3;
  double div_initial = 25.0;
  double div_final = 1e4;
};

// Linear ramp from max_lr/div_initial to max_lr over pct_warmup of the run,
// then cosine decay to max_lr/div_final at the final step.
inline double one_cycle_lr(std::size_t step, std::size_t total_steps, double max_lr,
                           const OneCycleSchedule& s = {}) {
  if (total_steps < 1) throw ArgumentError("one_cycle_lr: total_steps must be >= 1");
  if (step >= total_steps) throw ArgumentError("one_cycle_lr: step out of range");
  const auto warmup_steps = static_cast<std::size_t>(
      std::llround(s.pct_warmup * static_cast<double>(total_steps)));
  const double lr0 = max_lr / s.div_initial;
  const double lr_end = max_lr / s.div_final;
  if (step < warmup_steps) {
    const double t = static_cast<double>(step) / static_cast<double>(warmup_steps);
    return lr0 + (max_lr - lr0) * t;
  }
  const std::size_t decay_steps =
      total_steps > warmup_steps + 1 ? total_steps - 1 - warmup_steps : 1;
  const double t = static_cast<double>(step - warmup_steps) /
                   static_cast<double>(decay_steps);
  return lr_end + (max_lr - lr_end) * 0.5 * (1.0 + std::cos(M_PI * t));
}

// Adam with decoupled weight decay. Moments are kept in double; decay 0
// gives plain Adam.
template <typename T>
class AdamW {
 public:
  explicit AdamW(ParamStore<T>& params, double beta1 = 0.9, double beta2 = 0.999,
                 double eps = 1e-8, double weight_decay = 0.0)
      : params_(&params),
        beta1_(beta1),
        beta2_(beta2),
        eps_(eps),
        weight_decay_(weight_decay) {
    m_.resize(params.size());
    v_.resize(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
      m_[i].assign(params[i].value.numel(), 0.0);
      v_[i].assign(params[i].value.numel(), 0.0);
    }
  }

  void step(double lr) {
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (std::size_t p = 0; p < params_->size(); ++p) {
      auto& param = (*params_)[p];
      auto& m = m_[p];
      auto& v = v_[p];
      for (std::size_t i = 0; i < param.value.numel(); ++i) {
        const double g = static_cast<double>(param.grad[i]);
        m[i] = beta1_ * m[i] + (1.0 - beta1_) * g;
        v[i] = beta2_ * v[i] + (1.0 - beta2_) * g * g;
        const double mhat = m[i] / bc1;
        const double vhat = v[i] / bc2;
        double w = static_cast<double>(param.value[i]);
        w -= lr * weight_decay_ * w;
        w -= lr * mhat / (std::sqrt(vhat) + eps_);
        param.value[i] = static_cast<T>(w);
      }
    }
  }

  std::size_t steps_taken() const { return t_; }

 private:
  ParamStore<T>* params_;
  double beta1_, beta2_, eps_, weight_decay_;
  std::size_t t_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

}  // namespace hsnd
