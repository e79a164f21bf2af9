#include <doctest.h>

#include <cmath>
#include <limits>

#include "medtag/optim.hpp"

using namespace medtag;

TEST_SUITE_BEGIN("optim");

namespace {

OptimizerConfig base_config() {
  OptimizerConfig cfg;
  cfg.peak_lr = 0.1;
  cfg.weight_decay = 0.0;
  return cfg;
}

}  // namespace

TEST_CASE("zero gradient and zero decay is a fixed point") {
  ParamStore ps;
  Parameter& p = ps.create("w", Tensor::vec({1.5, -2.0, 0.25}));
  Tensor before = p.value;
  AdamOptimizer opt(base_config());
  for (int i = 0; i < 5; ++i) {
    ps.zero_grads();
    opt.step(ps, 0.05);
  }
  for (std::size_t i = 0; i < before.size(); ++i) CHECK(p.value[i] == before[i]);
}

TEST_CASE("first step with constant unit gradient moves by -lr") {
  // bias correction makes m_hat = v_hat = 1 at step 1, so the update is
  // lr / (1 + eps)
  ParamStore ps;
  Parameter& p = ps.create("w", Tensor::vec({0.7}));
  p.grad[0] = 1.0;
  AdamOptimizer opt(base_config());
  opt.step(ps, 0.1);
  CHECK(p.value[0] == doctest::Approx(0.7 - 0.1).epsilon(1e-8));
}

TEST_CASE("decoupled decay shrinks weights by lr*wd*value under zero gradient") {
  OptimizerConfig cfg = base_config();
  cfg.weight_decay = 0.01;
  ParamStore ps;
  Parameter& p = ps.create("w", Tensor::vec({2.0, -4.0}));
  AdamOptimizer opt(cfg);
  opt.step(ps, 0.1);
  CHECK(p.value[0] == doctest::Approx(2.0 - 0.1 * 0.01 * 2.0).epsilon(1e-14));
  CHECK(p.value[1] == doctest::Approx(-4.0 - 0.1 * 0.01 * -4.0).epsilon(1e-14));
}

TEST_CASE("non-finite gradient halts with state preserved") {
  ParamStore ps;
  Parameter& p = ps.create("w", Tensor::vec({1.0}));
  p.grad[0] = std::numeric_limits<double>::quiet_NaN();
  AdamOptimizer opt(base_config());
  CHECK_THROWS_WITH_AS(opt.step(ps, 0.1), doctest::Contains("w"), std::runtime_error);
  CHECK(p.value[0] == 1.0);
  CHECK(opt.steps_taken() == 0);
}

TEST_CASE("config invariants are enforced") {
  OptimizerConfig cfg;
  cfg.beta1 = 1.0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = OptimizerConfig{};
  cfg.warmup_fraction = 0.0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  CHECK_NOTHROW(OptimizerConfig{}.validate());
}

TEST_CASE("lr schedule endpoints and peak") {
  CHECK(lr_schedule(0, 100, 2.0) == 0.0);
  CHECK(lr_schedule(10, 100, 2.0) == doctest::Approx(2.0));
  CHECK(lr_schedule(100, 100, 2.0) == 0.0);
}

TEST_CASE("lr schedule is piecewise linear with a single maximum") {
  for (double total : {10.0, 100.0, 1000.0}) {
    double warmup_end = 0.1 * total;
    int peak_hits = 0;
    for (int s = 0; s <= static_cast<int>(total); ++s) {
      double lr = lr_schedule(s, total, 1.0);
      double expected = s <= warmup_end ? s / warmup_end : (total - s) / (total - warmup_end);
      CHECK(lr == doctest::Approx(expected).epsilon(1e-12));
      if (lr == doctest::Approx(1.0).epsilon(1e-12)) ++peak_hits;
    }
    CHECK(peak_hits == 1);
  }
}

TEST_CASE("lr schedule rejects bad arguments") {
  CHECK_THROWS_AS(lr_schedule(0, 0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(lr_schedule(-1, 10, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(lr_schedule(11, 10, 1.0), std::invalid_argument);
}

TEST_SUITE_END();
