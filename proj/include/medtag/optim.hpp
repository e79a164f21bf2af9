#pragma once

#include <map>
#include <string>
#include <utility>

#include "medtag/autodiff.hpp"

namespace medtag {

struct OptimizerConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double weight_decay = 0.01;
  double dropout_prob = 0.1;
  double peak_lr = 0.001;
  int batch_size = 32;
  int epochs = 10;
  double warmup_fraction = 0.10;
  double epsilon = 1e-8;

  void validate() const;
};

/// Linear warmup from 0 to peak_lr over the first warmup_fraction of steps,
/// then linear decay to 0 at total_steps. Continuous and piecewise linear;
/// the maximum is attained exactly once.
double lr_schedule(double step, double total_steps, double peak_lr, double warmup_fraction = 0.10);

/// Adam with decoupled weight decay: the decay term lr * wd * value is
/// subtracted from the parameter directly, outside the adaptive update.
class AdamOptimizer {
 public:
  explicit AdamOptimizer(OptimizerConfig cfg);

  /// One update over every parameter in the store using its accumulated
  /// gradient. Throws on non-finite gradients before touching any state.
  /// Does not zero gradients.
  void step(ParamStore& params, double lr);

  int steps_taken() const { return t_; }
  const OptimizerConfig& config() const { return cfg_; }

 private:
  OptimizerConfig cfg_;
  int t_ = 0;
  // first and second moment per parameter name
  std::map<std::string, std::pair<Tensor, Tensor>> moments_;
};

}  // namespace medtag
