#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "vaedim/optim.hpp"
#include "vaedim/rng.hpp"

using namespace vaedim;

namespace {

struct OneParam {
  Tensor p;
  Adam adam;
  explicit OneParam(Tensor init) : p(std::move(init)) {}
  void apply(const Tensor& g) {
    std::vector<Tensor*> ps{&p};
    std::vector<const Tensor*> gs{&g};
    adam.step(ps, gs, {"p"});
  }
};

}  // namespace

TEST_CASE("zero gradient leaves a fresh parameter unchanged") {
  OneParam s(Tensor({3}, {1.0, -2.0, 0.5}));
  Tensor g({3}, 0.0);
  for (int i = 0; i < 5; ++i) s.apply(g);
  CHECK(s.p[0] == 1.0);
  CHECK(s.p[1] == -2.0);
  CHECK(s.p[2] == 0.5);
}

TEST_CASE("first step matches the update formula evaluated by hand") {
  OneParam s(Tensor({1}, {1.0}));
  s.apply(Tensor({1}, {1.0}));
  // m=0.1, v=0.001; bias correction makes mhat=vhat=1 on step one, so the
  // move is lr / (1 + eps).
  const double expected = 1.0 - 1e-3 * (1.0 / (1.0 + 1e-8));
  CHECK(s.p[0] == expected);
}

TEST_CASE("identical gradient sequences give bitwise identical trajectories") {
  Rng rng(17);
  std::vector<Tensor> grads;
  for (int i = 0; i < 20; ++i) grads.push_back(rng.normal_tensor({4}));
  OneParam a(Tensor({4}, {0.1, 0.2, 0.3, 0.4}));
  OneParam b(Tensor({4}, {0.1, 0.2, 0.3, 0.4}));
  for (const Tensor& g : grads) {
    a.apply(g);
    b.apply(g);
  }
  CHECK(a.p.vec() == b.p.vec());
}

TEST_CASE("non-finite gradients are rejected with the parameter name") {
  OneParam s(Tensor({2}, {1.0, 2.0}));
  Tensor g({2}, {0.0, std::numeric_limits<double>::quiet_NaN()});
  try {
    s.apply(g);
    FAIL("expected numeric_error");
  } catch (const numeric_error& e) {
    CHECK(std::string(e.what()).find("p") != std::string::npos);
  }
}

TEST_CASE("shape drift is rejected") {
  OneParam s(Tensor({2}, {1.0, 2.0}));
  s.apply(Tensor({2}, {0.1, 0.1}));
  CHECK_THROWS_AS(s.apply(Tensor({3}, 0.0)), shape_error);
}
