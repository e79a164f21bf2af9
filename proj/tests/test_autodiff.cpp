#include <doctest.h>

#include <cmath>

#include "gradcheck.hpp"
#include "medtag/autodiff.hpp"

using namespace medtag;
using medtag::testing::grad_check;
using medtag::testing::random_tensor;

TEST_SUITE_BEGIN("autodiff");

TEST_CASE("softmax of equal scores is uniform") {
  Tape t;
  Var s = softmax(t.input(Tensor::vec({0.0, 0.0})));
  CHECK(t.val(s)[0] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(t.val(s)[1] == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("log_sum_exp is overflow-safe") {
  Tape t;
  Var v = log_sum_exp(t.input(Tensor::vec({1000.0, 1000.0})));
  CHECK(t.val(v)[0] == doctest::Approx(1000.0 + std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("matmul against hand-worked values") {
  Tape t;
  Var a = t.input(Tensor({2, 3}, {1, 2, 3, 4, 5, 6}));
  Var b = t.input(Tensor({3, 1}, {7, 8, 9}));
  Var c = matmul(a, b);
  CHECK(t.val(c).at(0, 0) == doctest::Approx(50.0));
  CHECK(t.val(c).at(1, 0) == doctest::Approx(122.0));
}

TEST_CASE("matmul transpose flags agree with explicit layouts") {
  Rng rng(3);
  Tape t;
  Tensor a = random_tensor({4, 3}, rng);
  Tensor at({3, 4});
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 3; ++j) at.at(j, i) = a.at(i, j);
  Tensor b = random_tensor({4, 5}, rng);
  Var plain = matmul(t.input(at), t.input(b));
  Var flagged = matmul(t.input(a), t.input(b), true, false);
  for (std::size_t i = 0; i < t.val(plain).size(); ++i) {
    CHECK(t.val(flagged)[i] == doctest::Approx(t.val(plain)[i]).epsilon(1e-12));
  }
}

TEST_CASE("shape mismatch names the operation") {
  Tape t;
  Var a = t.input(Tensor({2, 3}));
  Var b = t.input(Tensor({4, 1}));
  CHECK_THROWS_WITH_AS(matmul(a, b), doctest::Contains("matmul"), std::invalid_argument);
  CHECK_THROWS_WITH_AS(add(a, b), doctest::Contains("add"), std::invalid_argument);
}

TEST_CASE("gradient of sum is all ones") {
  ParamStore ps;
  Parameter& p = ps.create("p", Tensor({2, 3}, {1, 2, 3, 4, 5, 6}));
  Tape t;
  t.backward(sum(t.param(p)));
  for (double g : p.grad.data) CHECK(g == doctest::Approx(1.0));
}

TEST_CASE("gradient of tanh at zero is one") {
  ParamStore ps;
  Parameter& p = ps.create("p", Tensor::vec({0.0}));
  Tape t;
  t.backward(pick(tanh(t.param(p)), 0));
  CHECK(p.grad[0] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("unused parameters keep zero gradient") {
  ParamStore ps;
  Parameter& used = ps.create("used", Tensor::vec({1.0, 2.0}));
  Parameter& unused = ps.create("unused", Tensor::vec({3.0}));
  ps.zero_grads();
  Tape t;
  t.backward(sum(t.param(used)));
  CHECK(used.grad[0] == doctest::Approx(1.0));
  CHECK(unused.grad[0] == 0.0);
}

TEST_CASE("backward before any forward is an error") {
  Tape t;
  CHECK_THROWS_AS(t.backward(Var{}), std::logic_error);
}

TEST_CASE("backward rejects non-scalar loss") {
  Tape t;
  Var v = t.input(Tensor::vec({1.0, 2.0}));
  CHECK_THROWS_AS(t.backward(v), std::invalid_argument);
}

TEST_CASE("softmax rows sum to one") {
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    Tape t;
    Var m = softmax_rows(t.input(random_tensor({5, 7}, rng, -30.0, 30.0)));
    for (int r = 0; r < 5; ++r) {
      double s = 0.0;
      for (int c = 0; c < 7; ++c) s += t.val(m).at(r, c);
      CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
    }
  }
}

TEST_CASE("masked softmax zeroes dropped columns and renormalizes") {
  Tape t;
  std::vector<unsigned char> keep = {1, 1, 0};
  Var m = softmax_rows(t.input(Tensor({1, 3}, {0.0, 0.0, 100.0})), &keep);
  CHECK(t.val(m).at(0, 0) == doctest::Approx(0.5));
  CHECK(t.val(m).at(0, 1) == doctest::Approx(0.5));
  CHECK(t.val(m).at(0, 2) == 0.0);
}

TEST_CASE("dropout scales retained values and is inert in eval mode") {
  Rng rng(5);
  Tape train_tape(true, &rng);
  Tensor ones({1000});
  for (double& x : ones.data) x = 1.0;
  Var d = dropout(train_tape.input(ones), 0.25);
  int kept = 0;
  for (double x : train_tape.val(d).data) {
    if (x != 0.0) {
      CHECK(x == doctest::Approx(1.0 / 0.75));
      ++kept;
    }
  }
  CHECK(kept > 600);
  CHECK(kept < 900);

  Tape eval_tape(false);
  Var in = eval_tape.input(Tensor::vec({3.0}));
  Var same = dropout(in, 0.25);
  CHECK(same.id == in.id);
}

// -- finite-difference oracle over every differentiable kernel --

TEST_CASE("gradcheck: elementwise and reduction kernels") {
  Rng rng(21);
  ParamStore ps;
  ps.create("a", random_tensor({3, 4}, rng));
  ps.create("b", random_tensor({3, 4}, rng, 0.1, 1.0));
  auto build = [&](Tape& t) {
    Var a = t.param(ps.get("a"));
    Var b = t.param(ps.get("b"));
    Var x = mul(add(a, b), sub(a, scale(b, 0.5)));
    return sum(tanh(x));
  };
  auto res = grad_check(ps, build);
  CHECK(res.max_rel_err < 1e-4);
}

TEST_CASE("gradcheck: matmul and matvec") {
  Rng rng(22);
  ParamStore ps;
  ps.create("a", random_tensor({3, 4}, rng));
  ps.create("b", random_tensor({4, 2}, rng));
  ps.create("w", random_tensor({5, 3}, rng));
  ps.create("x", random_tensor({3}, rng));
  auto build = [&](Tape& t) {
    Var prod = matmul(t.param(ps.get("a")), t.param(ps.get("b")));
    Var tprod = matmul(t.param(ps.get("b")), t.param(ps.get("a")), true, true);
    Var mv = matvec(t.param(ps.get("w")), t.param(ps.get("x")));
    return add(add(sum(tanh(prod)), sum(sigmoid(tprod))), sum(tanh(mv)));
  };
  CHECK(grad_check(ps, build).max_rel_err < 1e-4);
}

TEST_CASE("gradcheck: shaping kernels") {
  Rng rng(23);
  ParamStore ps;
  ps.create("u", random_tensor({4}, rng));
  ps.create("v", random_tensor({3}, rng));
  ps.create("m", random_tensor({3, 4}, rng));
  auto build = [&](Tape& t) {
    Var u = t.param(ps.get("u"));
    Var v = t.param(ps.get("v"));
    Var m = t.param(ps.get("m"));
    Var joined = concat({u, v, slice(u, 1, 2)});
    Var grid = stack_rows({slice(joined, 0, 4), slice(joined, 3, 4), row(m, 2)});
    Var cols = concat_cols({grid, slice_cols(m, 1, 3), gather_rows(m, {2, 2, 0})});
    Var picked = add(pick(cols, 3), pick(col(m, 3), 1));
    return add(sum(tanh(cols)), picked);
  };
  CHECK(grad_check(ps, build).max_rel_err < 1e-4);
}

TEST_CASE("gradcheck: gather with repeated indices accumulates") {
  Rng rng(24);
  ParamStore ps;
  ps.create("table", random_tensor({6, 3}, rng));
  auto build = [&](Tape& t) {
    return sum(tanh(embedding_lookup(t.param(ps.get("table")), {1, 1, 1, 4})));
  };
  CHECK(grad_check(ps, build).max_rel_err < 1e-4);
}

TEST_CASE("gradcheck: softmax family") {
  Rng rng(25);
  ParamStore ps;
  ps.create("v", random_tensor({6}, rng));
  ps.create("m", random_tensor({3, 5}, rng));
  std::vector<unsigned char> keep = {1, 1, 1, 0, 0};
  auto build = [&](Tape& t) {
    Var v = t.param(ps.get("v"));
    Var m = t.param(ps.get("m"));
    Var a = sum(mul(softmax(v), v));
    Var b = log_sum_exp(slice(v, 0, 4));
    Var c = pick(softmax_rows(m, &keep), 2);
    Var d = pick(log_softmax_rows(m), 7);
    return add(add(a, b), add(c, d));
  };
  CHECK(grad_check(ps, build).max_rel_err < 1e-4);
}

TEST_CASE("gradcheck: gelu, add_rowwise, layer norm") {
  Rng rng(26);
  ParamStore ps;
  ps.create("x", random_tensor({4, 6}, rng));
  ps.create("bias", random_tensor({6}, rng));
  ps.create("gamma", random_tensor({6}, rng, 0.5, 1.5));
  ps.create("beta", random_tensor({6}, rng));
  auto build = [&](Tape& t) {
    Var x = t.param(ps.get("x"));
    Var shifted = add_rowwise(x, t.param(ps.get("bias")));
    Var normed = layer_norm_rows(gelu(shifted), t.param(ps.get("gamma")), t.param(ps.get("beta")));
    return sum(mul(normed, normed));
  };
  CHECK(grad_check(ps, build).max_rel_err < 1e-4);
}

TEST_CASE("gradcheck: dropout in training mode") {
  Rng rng(27);
  ParamStore ps;
  ps.create("x", random_tensor({40}, rng));
  auto build = [&](Tape& t) {
    return sum(tanh(dropout(t.param(ps.get("x")), 0.3)));
  };
  CHECK(grad_check(ps, build, 1e-5, /*training=*/true, /*dropout_seed=*/99).max_rel_err < 1e-4);
}

TEST_CASE("gradcheck: random small network vs finite differences") {
  Rng rng(28);
  ParamStore ps;
  ps.create("w1", random_tensor({8, 5}, rng));
  ps.create("b1", random_tensor({8}, rng));
  ps.create("w2", random_tensor({3, 8}, rng));
  ps.create("b2", random_tensor({3}, rng));
  ps.create("x", random_tensor({5}, rng));
  auto build = [&](Tape& t) {
    Var h = tanh(add(matvec(t.param(ps.get("w1")), t.param(ps.get("x"))), t.param(ps.get("b1"))));
    Var logits = add(matvec(t.param(ps.get("w2")), h), t.param(ps.get("b2")));
    return log_sum_exp(logits);
  };
  CHECK(grad_check(ps, build).max_rel_err < 1e-4);
}

TEST_SUITE_END();
