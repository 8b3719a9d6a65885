#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "vaedim/gradcheck.hpp"
#include "vaedim/graph.hpp"
#include "vaedim/rng.hpp"
#include "vaedim/tensor.hpp"

using namespace vaedim;

namespace {

Tensor rand_tensor(Rng& rng, Shape shape, double lo = -1.0, double hi = 1.0) {
  Tensor t(std::move(shape));
  for (std::size_t i = 0; i < t.numel(); ++i) t[i] = rng.uniform(lo, hi);
  return t;
}

}  // namespace

TEST_CASE("elementwise forward values") {
  Tape t;
  Var x = t.input(Tensor({3}, {0.0, 10.0, -10.0}));

  SECTION("sigmoid") {
    Var y = sigmoid(x);
    CHECK(t.value(y)[0] == 0.5);
    // 1/(1+exp(-10)) at extended precision
    CHECK(t.value(y)[1] == Catch::Approx(0.9999546021312976).epsilon(1e-14));
    CHECK(t.value(y)[2] < 1e-4);
    // saturated inputs stay finite and inside (0,1]
    Var big = sigmoid(t.input(Tensor({2}, {40.0, -40.0})));
    CHECK(std::isfinite(t.value(big)[0]));
    CHECK(std::isfinite(t.value(big)[1]));
    CHECK(t.value(big)[1] > 0.0);
  }
  SECTION("softplus matches the extended-precision value at 10") {
    Var y = softplus(x);
    // log(1 + exp(10)) evaluated at extended precision
    const double expected = 10.000045398899216870;
    CHECK(std::fabs(t.value(y)[1] - expected) < 1e-12);
    CHECK(std::fabs(t.value(y)[1] - 10.0) < 1e-4);
    // softplus(-x) = softplus(x) - x
    CHECK(t.value(y)[2] == Catch::Approx(expected - 10.0).epsilon(1e-10));
  }
}

TEST_CASE("matmul forward") {
  Tape t;
  SECTION("identity is a no-op") {
    Tensor eye({3, 3});
    for (int i = 0; i < 3; ++i) eye.at(i, i) = 1.0;
    Tensor v({3, 1}, {1.5, -2.0, 0.25});
    Var y = matmul(t.input(eye), t.input(v));
    for (int i = 0; i < 3; ++i) CHECK(t.value(y)[i] == v[i]);
  }
  SECTION("hand-computed 2x2 product") {
    Var a = t.input(Tensor({2, 2}, {1, 2, 3, 4}));
    Var b = t.input(Tensor({2, 2}, {5, 6, 7, 8}));
    Var y = matmul(a, b);
    const std::vector<double> expect{19, 22, 43, 50};
    for (int i = 0; i < 4; ++i) CHECK(t.value(y)[i] == expect[i]);
  }
}

TEST_CASE("simple exact gradients") {
  SECTION("sum of squares: d/dx = 2x") {
    Tape t;
    Var x = t.param(Tensor({4}, {1.0, -2.0, 3.0, 0.5}));
    t.backward(sum(square(x)));
    for (int i = 0; i < 4; ++i) CHECK(t.grad(x)[i] == 2.0 * t.value(x)[i]);
  }
  SECTION("sigmoid'(0) = 1/4") {
    Tape t;
    Var x = t.param(Tensor({1}, {0.0}));
    t.backward(sum(sigmoid(x)));
    CHECK(t.grad(x)[0] == 0.25);
  }
  SECTION("bias adjoint is the column sum over the batch axis") {
    Tape t;
    Rng rng(7);
    Var x = t.input(rand_tensor(rng, {5, 3}));
    Var b = t.param(Tensor({3}, {0.1, 0.2, 0.3}));
    t.backward(sum(add(x, b)));
    for (int j = 0; j < 3; ++j) CHECK(t.grad(b)[j] == 5.0);
  }
}

TEST_CASE("two-layer MLP gradient matches central differences") {
  Rng rng(31);
  Tensor x = rand_tensor(rng, {4, 3});
  Tensor w1 = rand_tensor(rng, {3, 5});
  Tensor b1 = rand_tensor(rng, {5});
  Tensor w2 = rand_tensor(rng, {5, 2});
  Tensor b2 = rand_tensor(rng, {2});
  TapeProgram mlp = [&x](Tape& t, const std::vector<Var>& p) {
    Var h = t.tanh(add(matmul(t.input(x), p[0]), p[1]));
    Var out = sigmoid(add(matmul(h, p[2]), p[3]));
    return mean(square(out));
  };
  CHECK(grad_check(mlp, {w1, b1, w2, b2}, 1e-5) < 1e-5);
}

TEST_CASE("corrupted gradients are detected") {
  Rng rng(55);
  Tensor x = rand_tensor(rng, {3, 3});
  TapeProgram f = [](Tape& t, const std::vector<Var>& p) {
    return sum(square(sigmoid(p[0])));
  };
  std::vector<Tensor> analytic = tape_gradient(f, {x});
  std::vector<Tensor> numeric = numeric_gradient(f, {x}, 1e-5);
  CHECK(max_rel_diff(analytic, numeric) < 1e-6);
  analytic[0][4] = 0.0;  // zero one adjoint entry
  CHECK(max_rel_diff(analytic, numeric) > 1e-2);
}

TEST_CASE("every primitive passes randomized finite-difference checks") {
  Rng rng(2024);
  const int trials = 100;
  for (int trial = 0; trial < trials; ++trial) {
    std::size_t rows = 1 + rng.index(4);
    std::size_t cols = 1 + rng.index(4);
    std::size_t k = 1 + rng.index(3);

    struct Case {
      const char* name;
      TapeProgram f;
      std::vector<Tensor> at;
    };
    std::vector<Case> cases;
    cases.push_back({"matmul",
                     [](Tape& t, const std::vector<Var>& p) {
                       return sum(square(matmul(p[0], p[1])));
                     },
                     {rand_tensor(rng, {rows, k}), rand_tensor(rng, {k, cols})}});
    cases.push_back({"bmatvec",
                     [](Tape& t, const std::vector<Var>& p) {
                       return sum(square(bmatvec(p[0], p[1])));
                     },
                     {rand_tensor(rng, {rows, k, k}), rand_tensor(rng, {rows, k})}});
    cases.push_back({"add_bcast",
                     [](Tape& t, const std::vector<Var>& p) {
                       return sum(square(add(p[0], p[1])));
                     },
                     {rand_tensor(rng, {rows, cols}), rand_tensor(rng, {cols})}});
    cases.push_back({"mul_bcast",
                     [](Tape& t, const std::vector<Var>& p) {
                       return sum(square(mul(p[0], p[1])));
                     },
                     {rand_tensor(rng, {rows, cols}), rand_tensor(rng, {cols})}});
    cases.push_back({"sub_mul",
                     [](Tape& t, const std::vector<Var>& p) {
                       return sum(mul(sub(p[0], p[1]), p[0]));
                     },
                     {rand_tensor(rng, {rows, cols}), rand_tensor(rng, {rows, cols})}});
    cases.push_back({"sigmoid_tanh_softplus",
                     [](Tape& t, const std::vector<Var>& p) {
                       return mean(softplus(t.tanh(sigmoid(p[0]))));
                     },
                     {rand_tensor(rng, {rows, cols}, -2.0, 2.0)}});
    cases.push_back({"exp_log_square",
                     [](Tape& t, const std::vector<Var>& p) {
                       return sum(t.log(add_const(square(t.exp(p[0])), 0.5)));
                     },
                     {rand_tensor(rng, {rows, cols})}});
    cases.push_back({"concat_slice",
                     [cols](Tape& t, const std::vector<Var>& p) {
                       Var c = concat(p[0], p[1]);
                       return sum(square(slice(c, 1, cols + 1)));
                     },
                     {rand_tensor(rng, {rows, cols}), rand_tensor(rng, {rows, 2})}});
    cases.push_back({"tril_diag_embed",
                     [k, rows](Tape& t, const std::vector<Var>& p) {
                       Var lower = tril_strict(reshape(p[0], {rows, k, k}));
                       Var l = add(lower, diag_embed(t.exp(p[1])));
                       return sum(square(bmatvec(l, p[2])));
                     },
                     {rand_tensor(rng, {rows, k * k}), rand_tensor(rng, {rows, k}),
                      rand_tensor(rng, {rows, k})}});
    cases.push_back({"scale_addc_mean",
                     [](Tape& t, const std::vector<Var>& p) {
                       return mean(square(add_const(scale(p[0], -1.5), 0.75)));
                     },
                     {rand_tensor(rng, {rows, cols})}});

    for (auto& c : cases) {
      INFO("primitive " << c.name << " trial " << trial);
      REQUIRE(grad_check(c.f, c.at, 1e-5) < 2e-6);
    }
  }
}

TEST_CASE("forward re-evaluation is pure") {
  Rng rng(99);
  Tape t;
  Var x = t.input(rand_tensor(rng, {4, 3}));
  Var w = t.param(rand_tensor(rng, {3, 6}));
  Var h = t.tanh(matmul(x, w));
  Var g = sigmoid(scale(h, 0.5));
  Var out = mean(square(sub(g, t.tanh(g))));
  std::vector<double> before = t.value(out).vec();
  std::vector<double> h_before = t.value(h).vec();
  t.recompute();
  CHECK(t.value(out).vec() == before);
  CHECK(t.value(h).vec() == h_before);
}

TEST_CASE("adjoints accumulate across backward calls") {
  Tape t;
  Var x = t.param(Tensor({2}, {3.0, -1.0}));
  Var root = sum(square(x));
  t.backward(root);
  t.backward(root);
  CHECK(t.grad(x)[0] == 2.0 * 2.0 * 3.0);
  CHECK(t.grad(x)[1] == 2.0 * 2.0 * -1.0);
}

TEST_CASE("structured errors") {
  Tape t;
  SECTION("shape mismatch names both shapes") {
    Var a = t.input(Tensor({2, 3}));
    Var b = t.input(Tensor({2, 3}));
    try {
      matmul(a, b);
      FAIL("expected shape_error");
    } catch (const shape_error& e) {
      std::string msg = e.what();
      CHECK(msg.find("(2,3)") != std::string::npos);
      CHECK(msg.find("matmul") != std::string::npos);
    }
  }
  SECTION("backward needs a scalar root") {
    Var a = t.param(Tensor({2, 2}, {1, 2, 3, 4}));
    CHECK_THROWS_AS(t.backward(square(a)), shape_error);
  }
  SECTION("log of a non-positive value names the node") {
    Var a = t.input(Tensor({2}, {1.0, -1.0}));
    CHECK_THROWS_AS(log(a), numeric_error);
  }
  SECTION("overflow to non-finite is reported") {
    Var a = t.input(Tensor({1}, {1000.0}));
    CHECK_THROWS_WITH(exp(a), Catch::Matchers::ContainsSubstring("exp"));
  }
  SECTION("slice bounds are validated") {
    Var a = t.input(Tensor({2, 3}));
    CHECK_THROWS_AS(slice(a, 2, 5), shape_error);
    CHECK_THROWS_AS(slice(a, 2, 2), shape_error);
  }
}
