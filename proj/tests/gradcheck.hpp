#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <string>

#include "medtag/autodiff.hpp"

namespace medtag::testing {

struct GradCheck {
  double max_rel_err = 0.0;
  std::string worst;
};

/// Independent gradient oracle: central finite differences over every value
/// of every parameter in the store, compared against one analytic
/// forward/backward pass. The relative error uses a 1e-3 floor in the
/// denominator so near-zero gradients compare absolutely.
///
/// A fresh Tape (and, when training, a fresh Rng reseeded with dropout_seed)
/// is constructed per evaluation, so stochastic ops draw identical masks on
/// every call and the function being differenced stays fixed.
inline GradCheck grad_check(ParamStore& params, const std::function<Var(Tape&)>& build_loss,
                            double h = 1e-5, bool training = false, std::uint64_t dropout_seed = 0) {
  auto eval = [&](bool want_grads) {
    Rng rng(dropout_seed);
    Tape tape(training, &rng);
    Var loss = build_loss(tape);
    double value = tape.val(loss)[0];
    if (want_grads) tape.backward(loss);
    return value;
  };

  params.zero_grads();
  eval(true);
  std::map<std::string, Tensor> analytic;
  for (auto* p : params.all()) analytic.emplace(p->name, p->grad);

  GradCheck res;
  for (auto* p : params.all()) {
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      double saved = p->value[i];
      p->value[i] = saved + h;
      double fp = eval(false);
      p->value[i] = saved - h;
      double fm = eval(false);
      p->value[i] = saved;
      double numeric = (fp - fm) / (2.0 * h);
      double a = analytic.at(p->name)[i];
      double denom = std::max({std::abs(a), std::abs(numeric), 1e-3});
      double rel = std::abs(a - numeric) / denom;
      if (rel > res.max_rel_err) {
        res.max_rel_err = rel;
        res.worst = p->name + "[" + std::to_string(i) + "]";
      }
    }
  }
  return res;
}

inline Tensor random_tensor(std::vector<int> shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t(std::move(shape));
  for (double& x : t.data) x = rng.uniform(lo, hi);
  return t;
}

}  // namespace medtag::testing
