#include <cmath>
#include <vector>

#include <doctest.h>

#include "genaug/errors.hpp"
#include "genaug/model.hpp"
#include "genaug/tensor.hpp"
#include "helpers.hpp"

using namespace genaug;
using testutil::fd_check;
using testutil::rand_values;

TEST_SUITE("numerics") {

TEST_CASE("elementwise ops forward") {
  const Tensor a({2, 2}, {1.0, -2.0, 3.0, 0.5});
  const Tensor b({2, 2}, {2.0, 4.0, -1.0, 0.5});
  CHECK(add(a, b).values()[1] == 2.0);
  CHECK(sub(a, b).values()[2] == 4.0);
  CHECK(mul(a, b).values()[0] == 2.0);
  CHECK(div(a, b).values()[1] == -0.5);
  CHECK(neg(a).values()[0] == -1.0);
  CHECK(scalar_mul(a, 3.0).values()[2] == 9.0);
  CHECK(scalar_add(a, 1.0).values()[1] == -1.0);
  CHECK(relu(a).values()[1] == 0.0);
  CHECK(relu(a).values()[2] == 3.0);
  CHECK(exp_op(Tensor::scalar(0.0)).scalar_value() == 1.0);
  CHECK(log_op(Tensor::scalar(std::exp(1.0))).scalar_value() ==
        doctest::Approx(1.0).epsilon(1e-12));
  CHECK(sqrt_op(Tensor::scalar(9.0)).scalar_value() == 3.0);
}

TEST_CASE("matmul and reductions forward") {
  const Tensor a({2, 3}, {1, 2, 3, 4, 5, 6});
  const Tensor b({3, 2}, {1, 0, 0, 1, 1, 1});
  const Tensor c = matmul(a, b);
  CHECK(c.shape() == Shape{2, 2});
  CHECK(c.values()[0] == 4.0);   // 1 + 3
  CHECK(c.values()[3] == 11.0);  // 5 + 6
  CHECK(transpose(a).values()[1] == 4.0);
  CHECK(sum_all(a).scalar_value() == 21.0);
  CHECK(mean_all(a).scalar_value() == 3.5);
  CHECK(row_sum(a).values()[0] == 6.0);
  CHECK(col_sum(a).values()[2] == 9.0);
  CHECK(row_max_detached(a).values()[1] == 6.0);
  CHECK_FALSE(row_max_detached(a).requires_grad());
}

TEST_CASE("shape plumbing ops forward") {
  const Tensor col({2, 1}, {1.0, 2.0});
  CHECK(tile_cols(col, 3).values()[5] == 2.0);
  const Tensor row({1, 2}, {1.0, 2.0});
  CHECK(tile_rows(row, 3).values()[4] == 1.0);
  const Tensor m({2, 2}, {0, 0, 0, 0});
  CHECK(add_row_vector(m, row).values()[3] == 2.0);
  const Tensor a({1, 2}, {1, 2});
  const Tensor b({1, 2}, {3, 4});
  CHECK(concat_rows(a, b).shape() == Shape{2, 2});
  CHECK(concat_cols(a, b).shape() == Shape{1, 4});
  CHECK(concat_cols(a, b).values()[2] == 3.0);
  CHECK(reshape(a, {2, 1}).shape() == Shape{2, 1});
}

TEST_CASE("forward is deterministic") {
  SampleRng rng(11, RngStream::param_init);
  const Tensor a = testutil::rand_tensor({4, 4}, rng);
  const Tensor b = testutil::rand_tensor({4, 4}, rng);
  const Tensor c1 = matmul(a, b);
  const Tensor c2 = matmul(a, b);
  for (std::size_t i = 0; i < c1.numel(); ++i) CHECK(c1.at(i) == c2.at(i));
}

TEST_CASE("mlp identity layer") {
  SampleRng rng(1, RngStream::param_init);
  Mlp mlp({2, 2}, rng);
  mlp.layers()[0].w = Tensor({2, 2}, {1, 0, 0, 1});
  mlp.layers()[0].b = Tensor({1, 2}, {0, 0});
  const Tensor y = mlp.forward(Tensor({1, 2}, {1.0, 2.0}));
  CHECK(y.values()[0] == 1.0);
  CHECK(y.values()[1] == 2.0);
}

TEST_CASE("mlp relu layer") {
  SampleRng rng(1, RngStream::param_init);
  Mlp mlp({2, 2, 2}, rng);
  for (auto& layer : mlp.layers()) {
    layer.w = Tensor({2, 2}, {1, 0, 0, 1});
    layer.b = Tensor({1, 2}, {0, 0});
  }
  const Tensor y = mlp.forward(Tensor({1, 2}, {-1.0, 2.0}));
  CHECK(y.values()[0] == 0.0);
  CHECK(y.values()[1] == 2.0);
}

TEST_CASE("mlp forward matches independent recomputation") {
  SampleRng rng(7, RngStream::param_init);
  Mlp mlp({3, 4, 2}, rng);
  SampleRng xr(8, RngStream::param_init);
  const Tensor x = testutil::rand_tensor({5, 3}, xr);
  const Tensor y = mlp.forward(x);

  const auto& l0 = mlp.layers()[0];
  const auto& l1 = mlp.layers()[1];
  for (std::size_t i = 0; i < 5; ++i) {
    double hidden[4];
    for (std::size_t j = 0; j < 4; ++j) {
      double s = l0.b.at(j);
      for (std::size_t k = 0; k < 3; ++k) s += x.at(i * 3 + k) * l0.w.at(k * 4 + j);
      hidden[j] = s > 0.0 ? s : 0.0;
    }
    for (std::size_t j = 0; j < 2; ++j) {
      double s = l1.b.at(j);
      for (std::size_t k = 0; k < 4; ++k) s += hidden[k] * l1.w.at(k * 2 + j);
      CHECK(std::abs(y.at(i * 2 + j) - s) < 1e-12);
    }
  }
}

TEST_CASE("quadratic gradient") {
  const Tensor w = Tensor::leaf({1}, {3.0});
  const Tensor loss = sum_all(mul(w, w));
  const std::vector<Tensor> leaves{w};
  const auto grads = gradients(loss, leaves);
  CHECK(grads[0].at(0) == 6.0);
}

TEST_CASE("disconnected leaf gets zero gradient") {
  const Tensor w = Tensor::leaf({2}, {3.0, -1.0});
  const Tensor other = Tensor::leaf({1}, {2.0});
  const Tensor loss = sum_all(mul(other, other));
  const std::vector<Tensor> leaves{w, other};
  const auto grads = gradients(loss, leaves);
  CHECK(grads[0].at(0) == 0.0);
  CHECK(grads[0].at(1) == 0.0);
  CHECK(grads[1].at(0) == 4.0);
}

TEST_CASE("non-scalar loss is a contract error") {
  const Tensor w = Tensor::leaf({2}, {1.0, 2.0});
  const std::vector<Tensor> leaves{w};
  CHECK_THROWS_AS((void)gradients(mul(w, w), leaves), ContractError);
}

TEST_CASE("finite differences across the op set") {
  SampleRng rng(21, RngStream::param_init);
  const Shape s{3, 4};
  const auto vals = [&] { return rand_values(12, rng, 0.3, 1.7); };

  struct Case {
    const char* name;
    testutil::LossFn f;
  };
  const std::vector<Case> cases = {
      {"add", [](const auto& l) { return mean_all(add(l[0], l[1])); }},
      {"sub", [](const auto& l) { return mean_all(sub(l[0], l[1])); }},
      {"mul", [](const auto& l) { return mean_all(mul(l[0], l[1])); }},
      {"div", [](const auto& l) { return mean_all(div(l[0], l[1])); }},
      {"neg", [](const auto& l) { return sum_all(neg(mul(l[0], l[1]))); }},
      {"exp", [](const auto& l) { return mean_all(exp_op(mul(l[0], l[1]))); }},
      {"log", [](const auto& l) { return mean_all(log_op(mul(l[0], l[1]))); }},
      {"sqrt", [](const auto& l) { return mean_all(sqrt_op(mul(l[0], l[1]))); }},
      {"matmul",
       [](const auto& l) { return mean_all(matmul(l[0], transpose(l[1]))); }},
      {"rowsum_tile",
       [](const auto& l) {
         return mean_all(mul(tile_cols(row_sum(l[0]), 4), l[1]));
       }},
      {"colsum_tile",
       [](const auto& l) {
         return mean_all(mul(tile_rows(col_sum(l[0]), 3), l[1]));
       }},
      {"concat",
       [](const auto& l) {
         return mean_all(mul(concat_rows(l[0], l[1]), concat_rows(l[1], l[0])));
       }},
      {"reshape",
       [](const auto& l) {
         return mean_all(matmul(reshape(l[0], {4, 3}), reshape(l[1], {3, 4})));
       }},
      {"lse",
       [](const auto& l) {
         const Tensor z = mul(l[0], l[1]);
         const Tensor m = row_max_detached(z);
         return mean_all(add(m, log_op(row_sum(exp_op(sub(z, tile_cols(m, 4)))))));
       }},
  };
  for (const auto& c : cases) {
    CAPTURE(c.name);
    const auto report = fd_check(c.f, {s, s}, {vals(), vals()});
    CAPTURE(report.where);
    CHECK(report.max_rel_err < 1e-4);
  }
}

TEST_CASE("relu finite differences away from the kink") {
  SampleRng rng(5, RngStream::param_init);
  std::vector<double> v = rand_values(12, rng, 0.2, 1.0);
  for (std::size_t i = 0; i < v.size(); i += 2) v[i] = -v[i];
  const auto report = fd_check(
      [](const auto& l) { return mean_all(mul(relu(l[0]), l[1])); },
      {{3, 4}, {3, 4}}, {v, rand_values(12, rng, 0.5, 1.5)});
  CAPTURE(report.where);
  CHECK(report.max_rel_err < 1e-4);
}

TEST_CASE("add_row_vector bias finite differences") {
  SampleRng rng(6, RngStream::param_init);
  const auto report = fd_check(
      [](const auto& l) { return mean_all(mul(add_row_vector(l[0], l[1]), l[0])); },
      {{3, 4}, {1, 4}}, {rand_values(12, rng), rand_values(4, rng)});
  CAPTURE(report.where);
  CHECK(report.max_rel_err < 1e-4);
}

TEST_CASE("conv2d forward matches direct loops") {
  SampleRng rng(9, RngStream::param_init);
  const Tensor x = testutil::rand_tensor({2, 2, 5, 5}, rng);
  const Tensor w = testutil::rand_tensor({3, 2, 3, 3}, rng);
  const Tensor b = testutil::rand_tensor({3}, rng);
  const std::size_t stride = 2, pad = 1;
  const Tensor y = conv2d(x, w, b, stride, pad);
  REQUIRE(y.shape() == Shape{2, 3, 3, 3});
  for (std::size_t n = 0; n < 2; ++n) {
    for (std::size_t co = 0; co < 3; ++co) {
      for (std::size_t oy = 0; oy < 3; ++oy) {
        for (std::size_t ox = 0; ox < 3; ++ox) {
          double s = b.at(co);
          for (std::size_t ci = 0; ci < 2; ++ci) {
            for (std::size_t ky = 0; ky < 3; ++ky) {
              for (std::size_t kx = 0; kx < 3; ++kx) {
                const long iy = static_cast<long>(oy * stride + ky) - 1;
                const long ix = static_cast<long>(ox * stride + kx) - 1;
                if (iy < 0 || iy >= 5 || ix < 0 || ix >= 5) continue;
                s += x.at(((n * 2 + ci) * 5 + iy) * 5 + ix) *
                     w.at(((co * 2 + ci) * 3 + ky) * 3 + kx);
              }
            }
          }
          const double got = y.at(((n * 3 + co) * 3 + oy) * 3 + ox);
          CHECK(std::abs(got - s) < 1e-12);
        }
      }
    }
  }
}

TEST_CASE("conv2d finite differences") {
  SampleRng rng(10, RngStream::param_init);
  const auto report = fd_check(
      [](const auto& l) {
        return mean_all(conv2d(l[0], l[1], l[2], 2, 1));
      },
      {{1, 2, 4, 4}, {2, 2, 3, 3}, {2}},
      {rand_values(32, rng), rand_values(36, rng), rand_values(2, rng)});
  CAPTURE(report.where);
  CHECK(report.max_rel_err < 1e-4);
}

TEST_CASE("nan-producing ops error instead") {
  CHECK_THROWS_AS((void)div(Tensor::scalar(1.0), Tensor::scalar(0.0)), NumericError);
  CHECK_THROWS_AS((void)log_op(Tensor::scalar(0.0)), NumericError);
  CHECK_THROWS_AS((void)log_op(Tensor::scalar(-1.0)), NumericError);
  CHECK_THROWS_AS((void)sqrt_op(Tensor::scalar(-1.0)), NumericError);
  CHECK_THROWS_AS((void)exp_op(Tensor::scalar(1000.0)), NumericError);
}

TEST_CASE("shape errors") {
  const Tensor a({2, 3}, {1, 2, 3, 4, 5, 6});
  const Tensor b({2, 2}, {1, 2, 3, 4});
  CHECK_THROWS_AS((void)add(a, b), ShapeError);
  CHECK_THROWS_AS((void)matmul(a, b), ShapeError);
  CHECK_THROWS_AS((void)reshape(a, {4, 2}), ShapeError);
  CHECK_THROWS_AS((void)add_row_vector(a, Tensor({1, 2}, {1, 2})), ShapeError);
}

TEST_CASE("all_finite flags bad values") {
  CHECK(all_finite(Tensor({2}, {1.0, 2.0})));
  CHECK_FALSE(all_finite(Tensor({2}, {1.0, std::nan("")})));
  CHECK_FALSE(all_finite(Tensor({2}, {1.0, INFINITY})));
}

}  // TEST_SUITE
