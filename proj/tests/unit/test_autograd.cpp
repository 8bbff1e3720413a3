// Copyright 2026 The xtrans Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "support.hpp"
#include "xtrans/autograd.hpp"
#include "xtrans/error.hpp"
#include "xtrans/ops.hpp"

using namespace xtrans;
using xtrans::testing::gaussian;
using xtrans::testing::gradient_check;
using xtrans::testing::pattern;
using VarD = ag::Var<double>;
using Inputs = std::vector<VarD>;

namespace {

constexpr double kGradTol = 1e-4;

TensorD scaled(TensorD t, double k)
{
  for (auto& v : t.values())
    v *= k;
  return t;
}

// Contracts an arbitrary output with a fixed weight tensor so every output
// element contributes to the checked scalar.
VarD probe(const VarD& y, uint64_t seed)
{
  return ag::mean(ag::mul(y, VarD(gaussian<double>(y.shape(), seed))));
}

} // namespace

TEST_CASE("conv2d matches the reference forward and backward")
{
  VarD x(pattern<double>({2, 3, 7, 7}, 0.37, 0.11), true);
  VarD w(scaled(pattern<double>({4, 3, 3, 3}, 0.53, 0.7), 0.5), true);
  VarD b(pattern<double>({4}, 1.3, 0.2), true);
  const auto y = ag::conv2d(x, w, b, 2, 1);
  REQUIRE(y.shape() == Shape{2, 4, 4, 4});
  const auto& yv = y.value();
  CHECK(yv[0] == doctest::Approx(0.4569261797212898).epsilon(1e-9));
  CHECK(yv[37] == doctest::Approx(3.5689640537657468).epsilon(1e-9));
  CHECK(yv[yv.numel() - 1] == doctest::Approx(-1.2961782395900436).epsilon(1e-9));
  double sum = 0;
  for (auto v : yv.values())
    sum += v;
  CHECK(sum == doctest::Approx(20.029918564473654).epsilon(1e-9));

  const TensorD g = pattern<double>({2, 4, 4, 4}, 0.29, 0.4);
  // mean over 128 elements; scale the contraction back to a plain sum.
  ag::affine(ag::mean(ag::mul(y, VarD(g))), 128.0, 0.0).backward();
  CHECK(x.grad()[5] == doctest::Approx(1.2285848608473477).epsilon(1e-9));
  CHECK(x.grad()[100] == doctest::Approx(-0.8602483369334344).epsilon(1e-9));
  CHECK(w.grad()[7] == doctest::Approx(1.1596729896896558).epsilon(1e-9));
  CHECK(b.grad()[2] == doctest::Approx(-7.575287334620953).epsilon(1e-9));
}

TEST_CASE("conv_transpose2d matches the reference forward and backward")
{
  VarD x(pattern<double>({2, 4, 3, 3}, 0.41, 0.3), true);
  VarD w(scaled(pattern<double>({4, 3, 4, 4}, 0.23, 0.9), 0.5), true);
  VarD b(pattern<double>({3}, 0.7, 0.5), true);
  const auto y = ag::conv_transpose2d(x, w, b, 2, 1);
  REQUIRE(y.shape() == Shape{2, 3, 6, 6});
  const auto& yv = y.value();
  CHECK(yv[0] == doctest::Approx(0.27539808336675975).epsilon(1e-9));
  CHECK(yv[50] == doctest::Approx(1.2051512136221612).epsilon(1e-9));
  CHECK(yv[yv.numel() - 1] == doctest::Approx(1.555557771474608).epsilon(1e-9));
  double sum = 0;
  for (auto v : yv.values())
    sum += v;
  CHECK(sum == doctest::Approx(160.40245958056352).epsilon(1e-9));

  const TensorD g = pattern<double>({2, 3, 6, 6}, 0.31, 0.8);
  ag::affine(ag::mean(ag::mul(y, VarD(g))), 216.0, 0.0).backward();
  CHECK(x.grad()[3] == doctest::Approx(-1.2660706102315387).epsilon(1e-9));
  CHECK(x.grad()[60] == doctest::Approx(2.6669016629802242).epsilon(1e-9));
  CHECK(w.grad()[11] == doctest::Approx(-0.598224632691551).epsilon(1e-9));
  CHECK(b.grad()[1] == doctest::Approx(1.8016298990696669).epsilon(1e-9));
}

TEST_CASE("gradient checks of the primitives")
{
  const auto a = gaussian<double>({2, 3, 4, 4}, 1);
  const auto b = gaussian<double>({2, 3, 4, 4}, 2);

  SUBCASE("add, sub, mul, affine, reshape")
  {
    CHECK(gradient_check([](const Inputs& v) { return probe(ag::add(v[0], v[1]), 9); }, {a, b}) < kGradTol);
    CHECK(gradient_check([](const Inputs& v) { return probe(ag::sub(v[0], v[1]), 9); }, {a, b}) < kGradTol);
    CHECK(gradient_check([](const Inputs& v) { return probe(ag::mul(v[0], v[1]), 9); }, {a, b}) < kGradTol);
    CHECK(gradient_check([](const Inputs& v) { return probe(ag::affine(v[0], -1.5, 0.25), 9); }, {a}) < kGradTol);
    CHECK(gradient_check([](const Inputs& v) { return probe(ag::reshape(v[0], {6, 16}), 9); }, {a}) < kGradTol);
  }
  SUBCASE("activations")
  {
    CHECK(gradient_check([](const Inputs& v) { return probe(ag::relu(v[0]), 3); }, {a}) < kGradTol);
    CHECK(gradient_check([](const Inputs& v) { return probe(ag::leaky_relu(v[0], 0.2), 3); }, {a}) < kGradTol);
    CHECK(gradient_check([](const Inputs& v) { return probe(ag::tanh(v[0]), 3); }, {a}) < kGradTol);
    CHECK(gradient_check([](const Inputs& v) { return probe(ag::sigmoid(v[0]), 3); }, {a}) < kGradTol);
    CHECK(gradient_check([](const Inputs& v) { return probe(ag::clamp(v[0], -0.5, 0.7), 3); }, {a}) < kGradTol);
  }
  SUBCASE("convolutions and pooling")
  {
    const auto w = gaussian<double>({4, 3, 3, 3}, 4, 0.3);
    const auto bias = gaussian<double>({4}, 5);
    CHECK(gradient_check([](const Inputs& v) { return probe(ag::conv2d(v[0], v[1], v[2], 1, 1), 6); },
                         {a, w, bias}) < kGradTol);
    CHECK(gradient_check([](const Inputs& v) { return probe(ag::conv2d(v[0], v[1], v[2], 2, 1), 6); },
                         {a, w, bias}) < kGradTol);
    const auto wt = gaussian<double>({3, 2, 4, 4}, 7, 0.3);
    const auto bt = gaussian<double>({2}, 8);
    CHECK(gradient_check([](const Inputs& v) { return probe(ag::conv_transpose2d(v[0], v[1], v[2], 2, 1), 6); },
                         {a, wt, bt}) < kGradTol);
    CHECK(gradient_check([](const Inputs& v) { return probe(ag::max_pool2d(v[0], 2), 6); }, {a}) < kGradTol);
    CHECK(gradient_check(
            [](const Inputs& v) {
              return probe(ag::channel_affine_constant(v[0], std::vector<double>{2.0, -1.0, 0.5},
                                                       std::vector<double>{0.1, 0.2, 0.3}),
                           6);
            },
            {a}) < kGradTol);
  }
  SUBCASE("instance statistics")
  {
    CHECK(gradient_check([](const Inputs& v) { return probe(ag::channel_mean(v[0]), 11); }, {a}) < kGradTol);
    CHECK(gradient_check([](const Inputs& v) { return probe(ag::channel_std(v[0], 1e-5), 11); }, {a}) < kGradTol);
    CHECK(gradient_check([](const Inputs& v) { return probe(ag::instance_normalize(v[0], 1e-5), 11); }, {a}) <
          kGradTol);
    const auto g = gaussian<double>({2, 3}, 12);
    const auto s = gaussian<double>({2, 3}, 13);
    CHECK(gradient_check([](const Inputs& v) { return probe(ag::channel_scale_shift(v[0], v[1], v[2]), 11); },
                         {a, g, s}) < kGradTol);
    CHECK(gradient_check([](const Inputs& v) { return probe(ag::gram(v[0]), 11); }, {a}) < kGradTol);
  }
  SUBCASE("reductions and losses")
  {
    CHECK(gradient_check([](const Inputs& v) { return ag::mean(v[0]); }, {a}) < kGradTol);
    CHECK(gradient_check([](const Inputs& v) { return ag::l1_loss(v[0], v[1]); }, {a, b}) < kGradTol);
    CHECK(gradient_check([](const Inputs& v) { return ag::mean_square(v[0]); }, {a}) < kGradTol);
    CHECK(gradient_check([](const Inputs& v) { return ag::bce_with_logits(v[0], 1.0); }, {a}) < kGradTol);
    CHECK(gradient_check([](const Inputs& v) { return ag::bce_with_logits(v[0], 0.0); }, {a}) < kGradTol);
    CHECK(gradient_check(
            [](const Inputs& v) {
              return ag::weighted_sum<double>({ag::mean(v[0]), ag::mean_square(v[1])}, {2.0, -0.5});
            },
            {a, b}) < kGradTol);
  }
  SUBCASE("adaptive instance normalization")
  {
    const auto g = gaussian<double>({2, 3}, 14);
    const auto s = gaussian<double>({2, 3}, 15);
    CHECK(gradient_check([](const Inputs& v) { return probe(ops::adain(v[0], {v[1], v[2]}), 16); }, {a, g, s}) <
          kGradTol);
    CHECK(gradient_check(
            [](const Inputs& v) { return probe(ops::adain(v[0], ops::instance_stats(v[1])), 16); }, {a, b}) <
          kGradTol);
    CHECK(gradient_check(
            [](const Inputs& v) {
              return probe(ops::masked_adain(v[0], ops::feature_mask(v[1], 0.5), ops::instance_stats(v[2])), 16);
            },
            {a, b, gaussian<double>({2, 3, 4, 4}, 17)}) < kGradTol);
  }
}

TEST_CASE("gradients accumulate on leaves and stop under NoGradGuard")
{
  VarD x(TensorD({3}, std::vector<double>{1, 2, 3}), true);
  ag::mean(x).backward();
  ag::mean(x).backward();
  for (int i = 0; i < 3; ++i)
    CHECK(x.grad()[i] == doctest::Approx(2.0 / 3.0));
  {
    ag::NoGradGuard guard;
    CHECK_FALSE(ag::grad_enabled());
    const auto y = ag::mean(ag::mul(x, x));
    CHECK_FALSE(y.requires_grad());
  }
  CHECK(ag::grad_enabled());
}

TEST_CASE("binary ops reject mismatched shapes")
{
  CHECK_THROWS_AS(ag::add(VarD(TensorD({2, 3})), VarD(TensorD({3, 2}))), InvalidArgument);
}
