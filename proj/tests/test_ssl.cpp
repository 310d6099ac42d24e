#include <cmath>
#include <vector>

#include <doctest.h>

#include "genaug/errors.hpp"
#include "genaug/ssl.hpp"
#include "genaug/tensor.hpp"
#include "helpers.hpp"

using namespace genaug;

namespace {

Tensor basis_rows(std::size_t d, std::initializer_list<std::size_t> axes) {
  std::vector<double> v;
  for (std::size_t axis : axes) {
    for (std::size_t j = 0; j < d; ++j) v.push_back(j == axis ? 1.0 : 0.0);
  }
  return Tensor({axes.size(), d}, std::move(v));
}

MocoState fixed_queue_state(const Tensor& queue) {
  MocoState state;
  state.queue = queue;
  state.next = 0;
  return state;
}

}  // namespace

TEST_SUITE("ssl") {

TEST_CASE("ntxent on identical embeddings is log(2N-1)") {
  const Tensor z({2, 4}, {1, 0, 0, 0, 1, 0, 0, 0});
  for (double tau : {0.1, 0.2, 1.0}) {
    CHECK(ntxent_loss(z, z, tau).scalar_value() ==
          doctest::Approx(std::log(3.0)).epsilon(1e-10));
  }
  const Tensor z4({4, 3}, {0, 1, 0, 0, 1, 0, 0, 1, 0, 0, 1, 0});
  CHECK(ntxent_loss(z4, z4, 0.5).scalar_value() ==
        doctest::Approx(std::log(7.0)).epsilon(1e-10));
}

TEST_CASE("ntxent hand value on an orthogonal pair") {
  // Anchors e1,e2 with positives e1,e2: positive sim 1, both negatives 0.
  const Tensor z1 = basis_rows(4, {0, 1});
  const Tensor z2 = basis_rows(4, {0, 1});
  const double expected = std::log(1.0 + 2.0 * std::exp(-5.0));
  CHECK(ntxent_loss(z1, z2, 0.2).scalar_value() ==
        doctest::Approx(expected).epsilon(1e-10));
}

TEST_CASE("ntxent is invariant to embedding scale") {
  SampleRng rng(51, RngStream::param_init);
  const Tensor z1 = testutil::rand_tensor({5, 6}, rng, -2.0, 2.0);
  const Tensor z2 = testutil::rand_tensor({5, 6}, rng, -2.0, 2.0);
  const double base = ntxent_loss(z1, z2, 0.2).scalar_value();
  const double scaled =
      ntxent_loss(scalar_mul(z1, 7.0), scalar_mul(z2, 7.0), 0.2).scalar_value();
  CHECK(std::abs(base - scaled) < 1e-12);
}

TEST_CASE("ntxent gradients match finite differences") {
  for (std::uint64_t seed : {61, 62, 63}) {
    SampleRng rng(seed, RngStream::param_init);
    const auto v1 = testutil::rand_values(4 * 6, rng, -1.5, 1.5);
    const auto v2 = testutil::rand_values(4 * 6, rng, -1.5, 1.5);
    const auto report = testutil::fd_check(
        [](const std::vector<Tensor>& leaves) {
          return ntxent_loss(leaves[0], leaves[1], 0.2);
        },
        {{4, 6}, {4, 6}}, {v1, v2});
    INFO(report.where);
    CHECK(report.max_rel_err < 1e-4);
  }
}

TEST_CASE("ntxent input contracts") {
  const Tensor ok = basis_rows(4, {0, 1});
  CHECK_THROWS_AS((void)ntxent_loss(ok, ok, 0.0), ConfigError);
  CHECK_THROWS_AS((void)ntxent_loss(ok, ok, -1.0), ConfigError);
  const Tensor one = basis_rows(4, {0});
  CHECK_THROWS_AS((void)ntxent_loss(one, one, 0.2), ConfigError);
  const Tensor other({2, 3}, {1, 0, 0, 0, 1, 0});
  CHECK_THROWS_AS((void)ntxent_loss(ok, other, 0.2), ShapeError);
  const Tensor zero_row({2, 4}, {1, 0, 0, 0, 0, 0, 0, 0});
  CHECK_THROWS_AS((void)ntxent_loss(zero_row, ok, 0.2), NormalizationError);
}

TEST_CASE("moco hand value against an orthogonal queue") {
  const Tensor query = basis_rows(8, {0, 1});
  const Tensor key = basis_rows(8, {0, 1});
  MocoState state = fixed_queue_state(basis_rows(8, {4, 5, 6, 7}));
  const Tensor loss = moco_step(query, key, state, 0.2);
  const double expected = std::log(1.0 + 4.0 * std::exp(-5.0));
  CHECK(loss.scalar_value() == doctest::Approx(expected).epsilon(1e-10));
}

TEST_CASE("moco queue is FIFO with constant size") {
  const Tensor query = basis_rows(8, {0, 1});
  MocoState state = fixed_queue_state(basis_rows(8, {4, 5, 6, 7}));

  (void)moco_step(query, basis_rows(8, {0, 1}), state, 0.2);
  REQUIRE(state.queue.shape() == Shape{4, 8});
  CHECK(state.next == 2);
  // Slots 0,1 now hold the new keys; 2,3 still hold e6, e7.
  CHECK(state.queue.at(0 * 8 + 0) == doctest::Approx(1.0));
  CHECK(state.queue.at(1 * 8 + 1) == doctest::Approx(1.0));
  CHECK(state.queue.at(2 * 8 + 6) == doctest::Approx(1.0));
  CHECK(state.queue.at(3 * 8 + 7) == doctest::Approx(1.0));

  (void)moco_step(query, basis_rows(8, {2, 3}), state, 0.2);
  CHECK(state.next == 0);
  CHECK(state.queue.at(2 * 8 + 2) == doctest::Approx(1.0));
  CHECK(state.queue.at(3 * 8 + 3) == doctest::Approx(1.0));
}

TEST_CASE("moco enqueues normalized detached keys") {
  const Tensor query = basis_rows(4, {0, 1});
  const Tensor key({2, 4}, {3, 0, 0, 0, 0, 5, 0, 0});  // unnormalized
  MocoState state = fixed_queue_state(basis_rows(4, {2, 3}));
  (void)moco_step(query, key, state, 0.2);
  CHECK(state.queue.at(0 * 4 + 0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(state.queue.at(1 * 4 + 1) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK_FALSE(state.queue.requires_grad());
}

TEST_CASE("moco gradients match finite differences on the query") {
  SampleRng rng(64, RngStream::param_init);
  const auto vq = testutil::rand_values(3 * 5, rng, -1.5, 1.5);
  const Tensor key = testutil::rand_unit_rows(3, 5, rng);
  const Tensor queue = testutil::rand_unit_rows(6, 5, rng);
  const auto report = testutil::fd_check(
      [&](const std::vector<Tensor>& leaves) {
        MocoState state = fixed_queue_state(queue);
        return moco_step(leaves[0], key, state, 0.2);
      },
      {{3, 5}}, {vq});
  INFO(report.where);
  CHECK(report.max_rel_err < 1e-4);
}

TEST_CASE("moco key side receives no gradient") {
  SampleRng rng(65, RngStream::param_init);
  const Tensor query = Tensor::leaf({2, 4}, testutil::rand_values(8, rng));
  const Tensor key = Tensor::leaf({2, 4}, testutil::rand_values(8, rng, 0.5, 1.5));
  MocoState state = fixed_queue_state(basis_rows(4, {2, 3}));
  const Tensor loss = moco_step(query, key, state, 0.2);
  const std::vector<Tensor> leaves{query, key};
  const auto grads = gradients(loss, std::span<const Tensor>(leaves));
  bool query_has_signal = false;
  for (std::size_t i = 0; i < grads[0].numel(); ++i) {
    if (std::abs(grads[0].at(i)) > 1e-9) query_has_signal = true;
  }
  CHECK(query_has_signal);
  for (std::size_t i = 0; i < grads[1].numel(); ++i) {
    CHECK(grads[1].at(i) == 0.0);
  }
}

TEST_CASE("moco state construction and contracts") {
  const MocoState state = make_moco_state(16, 6, 9);
  REQUIRE(state.queue.shape() == Shape{16, 6});
  for (std::size_t i = 0; i < 16; ++i) {
    double sq = 0.0;
    for (std::size_t j = 0; j < 6; ++j) {
      sq += state.queue.at(i * 6 + j) * state.queue.at(i * 6 + j);
    }
    CHECK(std::sqrt(sq) == doctest::Approx(1.0).epsilon(1e-12));
  }
  const MocoState again = make_moco_state(16, 6, 9);
  for (std::size_t i = 0; i < 16 * 6; ++i) {
    CHECK(state.queue.at(i) == again.queue.at(i));
  }
  CHECK_THROWS_AS((void)make_moco_state(0, 6, 9), ConfigError);
  CHECK_THROWS_AS((void)make_moco_state(16, 0, 9), ConfigError);

  const Tensor query = basis_rows(4, {0, 1});
  MocoState bad = fixed_queue_state(basis_rows(3, {0, 1}));
  CHECK_THROWS_AS((void)moco_step(query, query, bad, 0.2), ShapeError);
  MocoState fine = fixed_queue_state(basis_rows(4, {2, 3}));
  CHECK_THROWS_AS((void)moco_step(query, query, fine, -0.2), ConfigError);
}

TEST_CASE("byol endpoints") {
  const Tensor a = basis_rows(4, {0, 1});
  const Tensor b = basis_rows(4, {2, 3});
  CHECK(byol_loss(a, a, b, b).scalar_value() == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(byol_loss(a, b, b, a).scalar_value() == doctest::Approx(2.0).epsilon(1e-12));
  const Tensor neg = scalar_mul(a, -1.0);
  CHECK(byol_loss(a, neg, a, neg).scalar_value() ==
        doctest::Approx(4.0).epsilon(1e-12));
}

TEST_CASE("byol target side receives no gradient") {
  SampleRng rng(66, RngStream::param_init);
  const Tensor p1 = Tensor::leaf({3, 4}, testutil::rand_values(12, rng, 0.5, 1.5));
  const Tensor p2 = Tensor::leaf({3, 4}, testutil::rand_values(12, rng, 0.5, 1.5));
  const Tensor t1 = Tensor::leaf({3, 4}, testutil::rand_values(12, rng, 0.5, 1.5));
  const Tensor t2 = Tensor::leaf({3, 4}, testutil::rand_values(12, rng, 0.5, 1.5));
  const Tensor loss = byol_loss(p1, t2, p2, t1);
  const std::vector<Tensor> leaves{p1, p2, t1, t2};
  const auto grads = gradients(loss, std::span<const Tensor>(leaves));
  for (std::size_t i = 0; i < 12; ++i) {
    CHECK(grads[2].at(i) == 0.0);
    CHECK(grads[3].at(i) == 0.0);
  }
}

TEST_CASE("byol and simsiam are scale invariant") {
  SampleRng rng(67, RngStream::param_init);
  const Tensor p1 = testutil::rand_tensor({4, 5}, rng, 0.5, 1.5);
  const Tensor p2 = testutil::rand_tensor({4, 5}, rng, 0.5, 1.5);
  const Tensor t1 = testutil::rand_tensor({4, 5}, rng, 0.5, 1.5);
  const Tensor t2 = testutil::rand_tensor({4, 5}, rng, 0.5, 1.5);
  CHECK(std::abs(byol_loss(p1, t2, p2, t1).scalar_value() -
                 byol_loss(scalar_mul(p1, 7.0), t2, p2, scalar_mul(t1, 3.0))
                     .scalar_value()) < 1e-12);
  CHECK(std::abs(simsiam_loss(p1, t2, p2, t1).scalar_value() -
                 simsiam_loss(scalar_mul(p1, 7.0), t2, p2, scalar_mul(t1, 3.0))
                     .scalar_value()) < 1e-12);
}

TEST_CASE("byol gradients match finite differences on the predictors") {
  SampleRng rng(68, RngStream::param_init);
  const Tensor t1 = testutil::rand_unit_rows(3, 5, rng);
  const Tensor t2 = testutil::rand_unit_rows(3, 5, rng);
  const auto v1 = testutil::rand_values(3 * 5, rng, 0.5, 1.5);
  const auto v2 = testutil::rand_values(3 * 5, rng, 0.5, 1.5);
  const auto report = testutil::fd_check(
      [&](const std::vector<Tensor>& leaves) {
        return byol_loss(leaves[0], t2, leaves[1], t1);
      },
      {{3, 5}, {3, 5}}, {v1, v2});
  INFO(report.where);
  CHECK(report.max_rel_err < 1e-4);
}

TEST_CASE("simsiam endpoints") {
  const Tensor a = basis_rows(4, {0, 1});
  const Tensor b = basis_rows(4, {2, 3});
  CHECK(simsiam_loss(a, a, b, b).scalar_value() ==
        doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(simsiam_loss(a, b, b, a).scalar_value() ==
        doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("simsiam projector side receives no gradient") {
  SampleRng rng(69, RngStream::param_init);
  const Tensor p1 = Tensor::leaf({3, 4}, testutil::rand_values(12, rng, 0.5, 1.5));
  const Tensor p2 = Tensor::leaf({3, 4}, testutil::rand_values(12, rng, 0.5, 1.5));
  const Tensor j1 = Tensor::leaf({3, 4}, testutil::rand_values(12, rng, 0.5, 1.5));
  const Tensor j2 = Tensor::leaf({3, 4}, testutil::rand_values(12, rng, 0.5, 1.5));
  const Tensor loss = simsiam_loss(p1, j2, p2, j1);
  const std::vector<Tensor> leaves{p1, p2, j1, j2};
  const auto grads = gradients(loss, std::span<const Tensor>(leaves));
  for (std::size_t i = 0; i < 12; ++i) {
    CHECK(grads[2].at(i) == 0.0);
    CHECK(grads[3].at(i) == 0.0);
  }
  const auto report = testutil::fd_check(
      [&](const std::vector<Tensor>& leaves2) {
        return simsiam_loss(leaves2[0], j2, leaves2[1], j1);
      },
      {{3, 4}, {3, 4}},
      {std::vector<double>(p1.values().begin(), p1.values().end()),
       std::vector<double>(p2.values().begin(), p2.values().end())});
  INFO(report.where);
  CHECK(report.max_rel_err < 1e-4);
}

TEST_CASE("barlow twins hand values") {
  const Tensor z({4, 1}, {1, 2, 3, 4});
  CHECK(barlow_twins_loss(z, z).scalar_value() ==
        doctest::Approx(0.0).epsilon(1e-12));
  const Tensor neg = scalar_mul(z, -1.0);
  // Correlation -1 on the only dimension: loss = scale * (1-(-1))^2.
  CHECK(barlow_twins_loss(z, neg).scalar_value() ==
        doctest::Approx(0.048 * 4.0).epsilon(1e-10));
  CHECK(barlow_twins_loss(z, neg, 0.0051, 1.0).scalar_value() ==
        doctest::Approx(4.0).epsilon(1e-10));
}

TEST_CASE("barlow twins penalizes cross-dimension correlation") {
  // Two perfectly correlated dimensions: diagonal fits, off-diagonal is 1.
  const Tensor z({4, 2}, {1, 1, 2, 2, 3, 3, 4, 4});
  const double loss = barlow_twins_loss(z, z, 0.0051, 1.0).scalar_value();
  CHECK(loss == doctest::Approx(0.0051 * 2.0).epsilon(1e-9));
}

TEST_CASE("barlow twins gradients match finite differences") {
  SampleRng rng(70, RngStream::param_init);
  const auto v1 = testutil::rand_values(5 * 3, rng, -1.5, 1.5);
  const auto v2 = testutil::rand_values(5 * 3, rng, -1.5, 1.5);
  const auto report = testutil::fd_check(
      [](const std::vector<Tensor>& leaves) {
        return barlow_twins_loss(leaves[0], leaves[1]);
      },
      {{5, 3}, {5, 3}}, {v1, v2});
  INFO(report.where);
  CHECK(report.max_rel_err < 1e-4);
}

TEST_CASE("barlow twins zero-variance handling") {
  const Tensor flat({4, 2}, {1, 5, 1, 6, 1, 7, 1, 8});  // dim 0 constant
  const Tensor z({4, 2}, {1, 2, 3, 4, 5, 6, 7, 8});
  CHECK_THROWS_AS((void)barlow_twins_loss(flat, z), DegenerateInputError);
  CHECK_THROWS_AS((void)barlow_twins_loss(z, flat), DegenerateInputError);
  const double stabilized =
      barlow_twins_loss(flat, z, 0.0051, 0.048, 1e-3).scalar_value();
  CHECK(std::isfinite(stabilized));
  CHECK_THROWS_AS((void)barlow_twins_loss(z, z, 0.0051, 0.048, -1.0), ConfigError);
}

TEST_CASE("barlow twins shape and batch contracts") {
  const Tensor z({4, 2}, {1, 2, 3, 4, 5, 6, 7, 8});
  const Tensor other({4, 3}, std::vector<double>(12, 1.0));
  CHECK_THROWS_AS((void)barlow_twins_loss(z, other), ShapeError);
  const Tensor single({1, 2}, {1, 2});
  CHECK_THROWS_AS((void)barlow_twins_loss(single, single), ConfigError);
}

TEST_CASE("ema momentum cosine ramp") {
  CHECK(ema_momentum(0.0, 0.99, 0.999) == doctest::Approx(0.99).epsilon(1e-15));
  CHECK(ema_momentum(1.0, 0.99, 0.999) == doctest::Approx(0.999).epsilon(1e-15));
  CHECK(ema_momentum(0.5, 0.99, 0.999) ==
        doctest::Approx((0.99 + 0.999) / 2.0).epsilon(1e-12));
  CHECK(ema_momentum(0.25, 0.5, 0.5) == doctest::Approx(0.5).epsilon(1e-15));
  // Monotone non-decreasing ramp.
  double prev = -1.0;
  for (int i = 0; i <= 20; ++i) {
    const double m = ema_momentum(i / 20.0, 0.99, 1.0);
    CHECK(m >= prev);
    prev = m;
  }
  CHECK_THROWS_AS((void)ema_momentum(-0.1, 0.9, 1.0), ContractError);
  CHECK_THROWS_AS((void)ema_momentum(1.1, 0.9, 1.0), ContractError);
}

TEST_CASE("ema blend endpoints and midpoint") {
  const Tensor target({2, 2}, {1, 2, 3, 4});
  const Tensor online({2, 2}, {5, 6, 7, 8});
  const Tensor kept = ema_blend(target, online, 1.0);
  const Tensor swapped = ema_blend(target, online, 0.0);
  const Tensor mid = ema_blend(target, online, 0.5);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(kept.at(i) == target.at(i));
    CHECK(swapped.at(i) == online.at(i));
    CHECK(mid.at(i) == doctest::Approx((target.at(i) + online.at(i)) / 2.0));
  }
  const Tensor odd({1, 3}, {1, 2, 3});
  CHECK_THROWS_AS((void)ema_blend(target, odd, 0.5), ShapeError);
}

TEST_CASE("method names round-trip") {
  for (Method m : {Method::simclr, Method::moco, Method::byol, Method::simsiam,
                   Method::barlow_twins}) {
    CHECK(method_from_name(method_name(m)) == m);
  }
  CHECK(method_names().size() == 5);
  CHECK_THROWS_AS((void)method_from_name("dino"), ConfigError);
}

TEST_CASE("paper presets carry the published training settings") {
  const MethodPreset simclr = paper_preset(Method::simclr);
  CHECK(simclr.optimizer == "lars");
  CHECK(simclr.base_lr == 0.3);
  CHECK(simclr.weight_decay == 1e-6);
  CHECK(simclr.batch_size == 256);
  CHECK(simclr.heads == HeadsSpec{4096, 512, false, 0});
  CHECK(simclr.temperature == 0.2);

  const MethodPreset moco = paper_preset(Method::moco);
  CHECK(moco.optimizer == "sgd");
  CHECK(moco.base_lr == 0.3);
  CHECK(moco.weight_decay == 3e-5);
  CHECK(moco.batch_size == 64);
  CHECK(moco.heads == HeadsSpec{2048, 256, false, 0});
  CHECK(moco.m_base == 0.99);
  CHECK(moco.m_final == 0.999);
  CHECK(moco.queue_size == 65536);

  const MethodPreset byol = paper_preset(Method::byol);
  CHECK(byol.optimizer == "lars");
  CHECK(byol.base_lr == 0.2);
  CHECK(byol.weight_decay == 15e-7);
  CHECK(byol.batch_size == 256);
  CHECK(byol.heads == HeadsSpec{4096, 256, true, 4096});
  CHECK(byol.m_base == 0.99);
  CHECK(byol.m_final == 1.0);

  const MethodPreset simsiam = paper_preset(Method::simsiam);
  CHECK(simsiam.optimizer == "sgd");
  CHECK(simsiam.base_lr == 0.5);
  CHECK(simsiam.weight_decay == 1e-5);
  CHECK(simsiam.batch_size == 64);
  CHECK(simsiam.heads == HeadsSpec{4096, 4096, true, 512});

  const MethodPreset barlow = paper_preset(Method::barlow_twins);
  CHECK(barlow.optimizer == "lars");
  CHECK(barlow.base_lr == 0.8);
  CHECK(barlow.weight_decay == 1.5e-6);
  CHECK(barlow.batch_size == 64);
  CHECK(barlow.heads == HeadsSpec{4096, 4096, false, 0});
  CHECK(barlow.lambda_offdiag == 0.0051);
  CHECK(barlow.loss_scale == 0.048);

  for (Method m : {Method::simclr, Method::moco, Method::byol, Method::simsiam,
                   Method::barlow_twins}) {
    CHECK(paper_preset(m).warmup_epochs == 10);
  }
}

TEST_CASE("desk presets shrink heads 16x and use the desk protocol") {
  for (Method m : {Method::simclr, Method::moco, Method::byol, Method::simsiam,
                   Method::barlow_twins}) {
    const MethodPreset paper = paper_preset(m);
    const MethodPreset desk = desk_preset(m);
    CHECK(desk.heads.proj_hidden == paper.heads.proj_hidden / 16);
    CHECK(desk.heads.proj_out == paper.heads.proj_out / 16);
    if (paper.heads.has_predictor) {
      CHECK(desk.heads.pred_hidden == paper.heads.pred_hidden / 16);
    }
    CHECK(desk.batch_size == 64);
    CHECK(desk.epochs == 50);
    CHECK(desk.warmup_epochs == 5);
    CHECK(desk.optimizer == paper.optimizer);
    CHECK(desk.base_lr == paper.base_lr);
  }
  CHECK(desk_preset(Method::moco).queue_size == 1024);
}

}  // TEST_SUITE
