#include <cmath>
#include <vector>

#include <doctest.h>

#include "genaug/errors.hpp"
#include "genaug/optim.hpp"
#include "genaug/tensor.hpp"
#include "helpers.hpp"

using namespace genaug;

TEST_SUITE("optim") {

TEST_CASE("linear lr scaling rule") {
  CHECK(scaled_lr(0.3, 256) == 0.3);
  CHECK(scaled_lr(0.3, 512) == doctest::Approx(0.6).epsilon(1e-15));
  CHECK(scaled_lr(0.3, 64) == doctest::Approx(0.075).epsilon(1e-15));
  CHECK(scaled_lr(0.0, 64) == 0.0);
  CHECK_THROWS_AS((void)scaled_lr(0.3, 0), ConfigError);
}

TEST_CASE("cosine schedule endpoints and midpoints") {
  const double peak = 0.4;
  CHECK(cosine_lr(0, 100, 10, peak) == 0.0);
  CHECK(cosine_lr(5, 100, 10, peak) == doctest::Approx(peak / 2).epsilon(1e-12));
  CHECK(cosine_lr(10, 100, 10, peak) == peak);
  CHECK(cosine_lr(55, 100, 10, peak) == doctest::Approx(peak / 2).epsilon(1e-12));
  CHECK(std::abs(cosine_lr(100, 100, 10, peak)) < 1e-15);

  // No warmup: starts at the peak.
  CHECK(cosine_lr(0, 50, 0, peak) == peak);

  // Monotone decay after warmup.
  double prev = peak + 1.0;
  for (std::size_t s = 10; s <= 100; ++s) {
    const double lr = cosine_lr(s, 100, 10, peak);
    CHECK(lr <= prev + 1e-15);
    prev = lr;
  }
}

TEST_CASE("cosine schedule contracts") {
  CHECK_THROWS_AS((void)cosine_lr(101, 100, 10, 0.1), ContractError);
  CHECK_THROWS_AS((void)cosine_lr(0, 100, 100, 0.1), ConfigError);
  CHECK_THROWS_AS((void)cosine_lr(0, 100, 150, 0.1), ConfigError);
}

TEST_CASE("lars trust ratio identities") {
  CHECK(lars_local_lr(3.7, 3.7, 0.0, 1.0, 0.0) == 1.0);
  CHECK(lars_local_lr(0.0, 1.0, 0.0, 1.0, 0.0) == 1.0);
  CHECK(lars_local_lr(1.0, 0.0, 0.0, 1.0, 0.0) == 1.0);
  // Scale invariance when eps = 0.
  const double a = lars_local_lr(0.8, 0.2, 1e-4, 0.001, 0.0);
  const double b = lars_local_lr(1.6, 0.4, 1e-4, 0.001, 0.0);
  CHECK(a == doctest::Approx(b).epsilon(1e-14));
  // Hand value: trust * p / (g + wd * p + eps).
  CHECK(lars_local_lr(2.0, 0.5, 0.25, 0.01, 0.0) ==
        doctest::Approx(0.01 * 2.0 / (0.5 + 0.5)).epsilon(1e-14));
}

TEST_CASE("sgd vanilla step") {
  Tensor w = Tensor::leaf({1, 3}, {1.0, 2.0, 3.0});
  OptimizerConfig cfg;
  cfg.kind = OptimizerKind::sgd;
  cfg.momentum = 0.0;
  Optimizer opt(cfg);
  const std::vector<ParamRef> params{{"w", &w, false}};
  opt.step(params, {Tensor({1, 3}, {0.5, -1.0, 0.0})}, 0.1);
  CHECK(w.at(0) == doctest::Approx(0.95).epsilon(1e-15));
  CHECK(w.at(1) == doctest::Approx(2.1).epsilon(1e-15));
  CHECK(w.at(2) == 3.0);
}

TEST_CASE("sgd momentum accumulates over two steps") {
  Tensor w = Tensor::leaf({1, 1}, {1.0});
  OptimizerConfig cfg;
  cfg.kind = OptimizerKind::sgd;
  cfg.momentum = 0.9;
  Optimizer opt(cfg);
  const std::vector<ParamRef> params{{"w", &w, false}};
  const Tensor g({1, 1}, {2.0});
  opt.step(params, {g}, 0.01);
  opt.step(params, {g}, 0.01);
  // v1 = g, v2 = 0.9 g + g -> total displacement 2.9 * lr * g.
  CHECK(w.at(0) == doctest::Approx(1.0 - 2.9 * 0.01 * 2.0).epsilon(1e-14));
}

TEST_CASE("weight decay enters through the velocity") {
  Tensor w = Tensor::leaf({1, 1}, {2.0});
  OptimizerConfig cfg;
  cfg.kind = OptimizerKind::sgd;
  cfg.momentum = 0.0;
  cfg.weight_decay = 0.1;
  Optimizer opt(cfg);
  const std::vector<ParamRef> params{{"w", &w, false}};
  opt.step(params, {Tensor({1, 1}, {0.0})}, 0.5);
  // v = g + wd * p = 0.2; p = 2 - 0.5 * 0.2.
  CHECK(w.at(0) == doctest::Approx(1.9).epsilon(1e-15));
}

TEST_CASE("zero learning rate leaves parameters bitwise unchanged") {
  SampleRng rng(71, RngStream::param_init);
  Tensor w = Tensor::leaf({4, 4}, testutil::rand_values(16, rng));
  const std::vector<double> before(w.values().begin(), w.values().end());
  OptimizerConfig cfg;
  cfg.kind = OptimizerKind::lars;
  cfg.weight_decay = 1e-4;
  Optimizer opt(cfg);
  const std::vector<ParamRef> params{{"w", &w, false}};
  opt.step(params, {testutil::rand_tensor({4, 4}, rng)}, 0.0);
  for (std::size_t i = 0; i < 16; ++i) CHECK(w.at(i) == before[i]);
}

TEST_CASE("lars with zero gradients and no decay is a no-op") {
  Tensor w = Tensor::leaf({2, 2}, {1.0, -2.0, 3.0, -4.0});
  OptimizerConfig cfg;
  cfg.kind = OptimizerKind::lars;
  cfg.momentum = 0.9;
  cfg.weight_decay = 0.0;
  Optimizer opt(cfg);
  const std::vector<ParamRef> params{{"w", &w, false}};
  opt.step(params, {Tensor::zeros({2, 2})}, 0.3);
  CHECK(w.at(0) == 1.0);
  CHECK(w.at(3) == -4.0);
}

TEST_CASE("lars applies the trust ratio to weights but not biases") {
  Tensor w = Tensor::leaf({1, 2}, {3.0, 4.0});  // norm 5
  Tensor b = Tensor::leaf({1, 2}, {3.0, 4.0});
  OptimizerConfig cfg;
  cfg.kind = OptimizerKind::lars;
  cfg.momentum = 0.0;
  cfg.weight_decay = 0.0;
  cfg.trust = 0.001;
  cfg.eps = 0.0;
  Optimizer opt(cfg);
  const std::vector<ParamRef> params{{"w", &w, false}, {"b", &b, true}};
  const Tensor g({1, 2}, {0.0, 1.0});  // norm 1
  opt.step(params, {g, g}, 1.0);
  // Weight: local = 0.001 * 5 / 1; bias: plain step.
  CHECK(w.at(1) == doctest::Approx(4.0 - 0.005).epsilon(1e-14));
  CHECK(b.at(1) == doctest::Approx(3.0).epsilon(1e-14));
}

TEST_CASE("bias parameters skip weight decay under lars") {
  Tensor b = Tensor::leaf({1, 1}, {2.0});
  OptimizerConfig cfg;
  cfg.kind = OptimizerKind::lars;
  cfg.momentum = 0.0;
  cfg.weight_decay = 0.5;
  Optimizer opt(cfg);
  const std::vector<ParamRef> params{{"b", &b, true}};
  opt.step(params, {Tensor({1, 1}, {0.0})}, 1.0);
  CHECK(b.at(0) == 2.0);  // decay would have moved it
}

TEST_CASE("optimizer state bookkeeping contracts") {
  Tensor w = Tensor::leaf({1, 2}, {1.0, 2.0});
  OptimizerConfig cfg;
  Optimizer opt(cfg);
  const std::vector<ParamRef> params{{"w", &w, false}};
  CHECK_THROWS_AS(opt.step(params, {}, 0.1), ShapeError);
  CHECK_THROWS_AS(opt.step(params, {Tensor({2, 1}, {1.0, 2.0})}, 0.1), ShapeError);

  opt.step(params, {Tensor({1, 2}, {1.0, 1.0})}, 0.1);
  REQUIRE(opt.velocities().size() == 1);
  CHECK(opt.velocities()[0].shape() == Shape{1, 2});

  Tensor extra = Tensor::leaf({1, 2}, {0.0, 0.0});
  const std::vector<ParamRef> grown{{"w", &w, false}, {"x", &extra, false}};
  CHECK_THROWS_AS(
      opt.step(grown, {Tensor({1, 2}, {1.0, 1.0}), Tensor({1, 2}, {1.0, 1.0})}, 0.1),
      ShapeError);
}

TEST_CASE("optimizer kind names round-trip") {
  CHECK(optimizer_kind_from_name("sgd") == OptimizerKind::sgd);
  CHECK(optimizer_kind_from_name("lars") == OptimizerKind::lars);
  CHECK(optimizer_kind_name(OptimizerKind::lars) == std::string("lars"));
  CHECK_THROWS_AS((void)optimizer_kind_from_name("adam"), ConfigError);
}

}  // TEST_SUITE
