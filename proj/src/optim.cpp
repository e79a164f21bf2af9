#include "medtag/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace medtag {

void OptimizerConfig::validate() const {
  if (beta1 <= 0.0 || beta1 >= 1.0) throw std::invalid_argument("OptimizerConfig: beta1 must be in (0,1)");
  if (beta2 <= 0.0 || beta2 >= 1.0) throw std::invalid_argument("OptimizerConfig: beta2 must be in (0,1)");
  if (warmup_fraction <= 0.0 || warmup_fraction >= 1.0) {
    throw std::invalid_argument("OptimizerConfig: warmup_fraction must be in (0,1)");
  }
  if (weight_decay < 0.0) throw std::invalid_argument("OptimizerConfig: negative weight_decay");
  if (dropout_prob < 0.0 || dropout_prob >= 1.0) throw std::invalid_argument("OptimizerConfig: dropout_prob must be in [0,1)");
  if (peak_lr < 0.0) throw std::invalid_argument("OptimizerConfig: negative peak_lr");
  if (batch_size < 1) throw std::invalid_argument("OptimizerConfig: batch_size must be >= 1");
  if (epochs < 1) throw std::invalid_argument("OptimizerConfig: epochs must be >= 1");
  if (epsilon <= 0.0) throw std::invalid_argument("OptimizerConfig: epsilon must be positive");
}

double lr_schedule(double step, double total_steps, double peak_lr, double warmup_fraction) {
  if (total_steps <= 0.0) throw std::invalid_argument("lr_schedule: total_steps must be positive");
  if (step < 0.0 || step > total_steps) {
    throw std::invalid_argument("lr_schedule: step " + std::to_string(step) + " outside [0, " +
                                std::to_string(total_steps) + "]");
  }
  if (warmup_fraction <= 0.0 || warmup_fraction >= 1.0) {
    throw std::invalid_argument("lr_schedule: warmup_fraction must be in (0,1)");
  }
  double warmup_end = warmup_fraction * total_steps;
  if (step <= warmup_end) return peak_lr * step / warmup_end;
  return peak_lr * (total_steps - step) / (total_steps - warmup_end);
}

AdamOptimizer::AdamOptimizer(OptimizerConfig cfg) : cfg_(cfg) { cfg_.validate(); }

void AdamOptimizer::step(ParamStore& params, double lr) {
  auto all = params.all();
  // reject non-finite gradients before any state changes so a halted run can
  // be inspected as-is
  for (const Parameter* p : all) {
    for (double g : p->grad.data) {
      if (!std::isfinite(g)) {
        throw std::runtime_error("adam: non-finite gradient in parameter " + p->name);
      }
    }
  }
  ++t_;
  double bc1 = 1.0 - std::pow(cfg_.beta1, t_);
  double bc2 = 1.0 - std::pow(cfg_.beta2, t_);
  for (Parameter* p : all) {
    auto it = moments_.find(p->name);
    if (it == moments_.end()) {
      it = moments_.emplace(p->name, std::make_pair(Tensor::zeros(p->value.shape), Tensor::zeros(p->value.shape))).first;
    }
    Tensor& m = it->second.first;
    Tensor& v = it->second.second;
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      double g = p->grad[i];
      m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g;
      v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g * g;
      double m_hat = m[i] / bc1;
      double v_hat = v[i] / bc2;
      p->value[i] -= lr * (m_hat / (std::sqrt(v_hat) + cfg_.epsilon) + cfg_.weight_decay * p->value[i]);
    }
  }
}

}  // namespace medtag
