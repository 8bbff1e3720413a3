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

#include <cmath>
#include <cstdlib>
#include <set>

#include "support.hpp"
#include "xtrans/archive.hpp"
#include "xtrans/error.hpp"
#include "xtrans/losses.hpp"
#include "xtrans/nn.hpp"

using namespace xtrans;
using namespace xtrans::nn;
using xtrans::testing::gaussian;
using VarF = ag::Var<float>;

namespace {

ArchConfig small_arch(int resolution = 32)
{
  ArchConfig a;
  a.n1 = 1;
  a.n2 = 2;
  a.n3 = 3;
  a.base_width = 4;
  a.resolution = resolution;
  return a;
}

TensorF images(int n, int res, uint64_t seed)
{
  Rng rng(seed);
  TensorF t({n, 3, res, res});
  for (auto& v : t.values())
    v = static_cast<float>(uniform01(rng));
  return t;
}

ag::Var<float> find(const ParamList<float>& params, const std::string& name)
{
  for (const auto& p : params)
    if (p.name == name)
      return p.var;
  FAIL("no parameter " << name);
  return {};
}

bool all_finite(const TensorF& t)
{
  for (auto v : t.values())
    if (!std::isfinite(v))
      return false;
  return true;
}

} // namespace

TEST_CASE("architecture validation")
{
  auto a = small_arch();
  CHECK_NOTHROW(a.validate());
  a.n2 = 0;
  CHECK_THROWS_AS(a.validate(), ConfigError);
  a = small_arch(36);
  CHECK_THROWS_AS(a.validate(), ConfigError);
}

TEST_CASE("encoder output shapes and finiteness")
{
  ArchConfig a = small_arch(64);
  a.n3 = 5;
  Translator<float> t(a, 1);
  const auto latent = t.encode(VarF(images(2, 64, 3)), Domain::A);
  CHECK(latent.content.shape() == Shape{2, 4, 32, 32});
  CHECK(latent.z_mean.shape() == Shape{2, 4, 32, 32});
  CHECK(all_finite(latent.content.value()));
  const auto x = t.generate(latent.content, Domain::B);
  CHECK(x.shape() == Shape{2, 3, 64, 64});
  for (auto v : x.value().values()) {
    REQUIRE(v >= 0.0f);
    REQUIRE(v <= 1.0f);
  }
  CHECK_THROWS_AS(t.encode(VarF(images(1, 32, 3)), Domain::A), InvalidArgument);
}

TEST_CASE("training noise is unit Gaussian and absent in eval mode")
{
  Translator<float> t(small_arch(), 2);
  const VarF x(images(4, 32, 5));
  const auto l = t.encode(x, Domain::B);
  double s = 0, s2 = 0;
  const auto n = l.z.numel();
  for (int64_t i = 0; i < n; ++i) {
    const double d = l.z.value()[i] - l.z_mean.value()[i];
    s += d;
    s2 += d * d;
  }
  CHECK(std::abs(s / n) < 0.05);
  CHECK(std::abs(s2 / n - 1.0) < 0.05);

  t.set_training(false);
  const auto e1 = t.encode(x, Domain::B);
  const auto e2 = t.encode(x, Domain::B);
  CHECK(e1.z.value() == e1.z_mean.value());
  CHECK(e1.z.value() == e2.z.value());
}

TEST_CASE("weight sharing is by storage identity")
{
  Translator<float> t(small_arch(), 3);
  t.set_training(false);
  const VarF x(images(1, 32, 7));
  const auto params = t.all_parameters();

  std::set<const void*> storages;
  std::set<std::string> names;
  for (const auto& p : params) {
    storages.insert(p.var.node().get());
    names.insert(p.name);
  }
  CHECK(storages.size() == params.size());
  CHECK(names.size() == params.size());

  SUBCASE("encoder tail")
  {
    const auto before_b = t.encode(x, Domain::B).content.value();
    auto w = find(params, "enc_shared.c1.weight");
    w.mutable_value()[0] += 0.5f;
    CHECK_FALSE(t.encode(x, Domain::B).content.value() == before_b);
  }
  SUBCASE("generator head")
  {
    auto w = find(params, "gen_shared.c2.weight");
    const auto before_a = t.encode(x, Domain::A).content.value();
    const auto before_b = t.encode(x, Domain::B).content.value();
    w.mutable_value()[3] -= 0.5f;
    CHECK_FALSE(t.encode(x, Domain::A).content.value() == before_a);
    CHECK_FALSE(t.encode(x, Domain::B).content.value() == before_b);
  }
  SUBCASE("nothing else is shared")
  {
    int shared = 0;
    for (const auto& p : params)
      shared += p.name.rfind("enc_shared", 0) == 0 || p.name.rfind("gen_shared", 0) == 0;
    CHECK(shared == 8);
    for (const auto& p : t.feature_parameters())
      CHECK(p.name.find("shared") == std::string::npos);
  }
}

TEST_CASE("discriminator is fully convolutional")
{
  ArchConfig a = small_arch(32);
  Translator<float> t(a, 4);
  const auto d32 = t.discriminate(VarF(images(2, 32, 1)), Domain::A);
  const auto d64 = t.discriminate(VarF(images(2, 64, 1)), Domain::A);
  CHECK(d32.shape() == Shape{2, 1, 4, 4});
  CHECK(d64.shape() == Shape{2, 1, 8, 8});

  // Fresh weights give logits near zero, so both BCE terms sit near ln 2.
  const auto real = t.discriminate(VarF(images(4, 32, 2)), Domain::B);
  const auto fake = t.discriminate(VarF(images(4, 32, 3)), Domain::B);
  const auto g = losses::gan_losses(real, fake);
  CHECK(g.d_loss.item() == doctest::Approx(2 * std::log(2.0)).epsilon(0.01));
  CHECK(g.g_loss.item() == doctest::Approx(std::log(2.0)).epsilon(0.01));
}

TEST_CASE("guidance requires frozen feature nets")
{
  Translator<float> t(small_arch(), 5);
  const VarF x(images(2, 32, 9));
  CHECK_THROWS_AS(t.extract_guidance(x, Domain::A, x, Domain::B), StateError);
  CHECK_THROWS_AS(t.translate(x, x, Direction::AtoB), StateError);
  t.freeze_feature_nets();
  for (const auto& p : t.feature_parameters())
    CHECK_FALSE(p.var.requires_grad());

  const auto g = t.extract_guidance(x, Domain::A, x, Domain::B);
  const auto content = t.encode(x, Domain::A).content;
  CHECK(g.mask.shape() == content.shape());
  CHECK(g.affine.gamma.shape() == Shape{2, 4});
  const auto g2 = t.extract_guidance(x, Domain::A, x, Domain::B);
  CHECK(g.affine.gamma.value() == g2.affine.gamma.value());
  CHECK(g.affine.beta.value() == g2.affine.beta.value());
  for (auto v : g.mask.value().values()) {
    REQUIRE(v >= 0.5f);
    REQUIRE(v < 1.0f);
  }

  t.guidance_options().eta = 1.0;
  const auto ones = t.extract_guidance(x, Domain::A, x, Domain::B);
  for (auto v : ones.mask.value().values())
    REQUIRE(v == 1.0f);
}

TEST_CASE("guidance uses the source net for masks and the exemplar net for statistics")
{
  Translator<float> t(small_arch(), 6);
  t.freeze_feature_nets();
  const VarF src(images(1, 32, 10)), ex(images(1, 32, 11));
  const auto g = t.extract_guidance(src, Domain::A, ex, Domain::B);
  const auto f_src = t.feature_maps(src, Domain::A);
  const auto f_ex = t.feature_maps(ex, Domain::B);
  CHECK(g.mask.value() == ops::feature_mask(f_src, 0.5f).value());
  CHECK(g.affine.gamma.value() == ops::instance_stats(f_ex).gamma.value());

  t.guidance_options().self_affine = true;
  const auto self = t.extract_guidance(src, Domain::A, ex, Domain::B);
  CHECK(self.affine.gamma.value() == ops::instance_stats(f_src).gamma.value());
}

TEST_CASE("translation is deterministic in eval mode and keeps the shape")
{
  Translator<float> t(small_arch(), 7);
  t.freeze_feature_nets();
  t.set_training(false);
  const VarF src(images(2, 32, 12)), ex(images(2, 32, 13));
  for (auto dir : {Direction::AtoB, Direction::BtoA, Direction::AtoA, Direction::BtoB}) {
    const auto y1 = t.translate(src, ex, dir).value();
    const auto y2 = t.translate(src, ex, dir).value();
    CHECK(y1 == y2);
    CHECK(y1.shape() == src.shape());
  }
  CHECK_THROWS_AS(parse_direction("A2C"), InvalidArgument);
  CHECK(parse_direction("B2A") == Direction::BtoA);
  CHECK(to_string(Direction::AtoB) == "A2B");
}

TEST_CASE("random perceptual extractor")
{
  const auto ex = PerceptualExtractor<float>::random(1, 16);
  const VarF x(images(1, 32, 14));
  const auto f1 = ex(x);
  const auto f2 = ex(x);
  REQUIRE(f1.size() == 5);
  for (size_t i = 0; i < 5; ++i) {
    CHECK(f1[i].value() == f2[i].value());
    if (i > 0)
      CHECK(f1[i].dim(2) < f1[i - 1].dim(2));
  }
  CHECK(f1[0].shape() == Shape{1, 4, 32, 32});
  CHECK(f1[4].shape() == Shape{1, 32, 2, 2});
  for (const auto& p : ex.parameters())
    CHECK_FALSE(p.var.requires_grad());
  CHECK_THROWS_AS(PerceptualExtractor<float>::random(1, 3), ConfigError);
}

TEST_CASE("missing pretrained weights explain how to get them")
{
  try {
    PerceptualExtractor<float>::pretrained("/nonexistent/vgg19.xtar");
    FAIL("expected IoError");
  } catch (const IoError& e) {
    CHECK(std::string(e.what()).find("convert_vgg19.py") != std::string::npos);
  }
}

// Parity with a reference implementation: set XTRANS_VGG19_PROBE to an
// archive written by scripts/convert_vgg19.py --probe (the weights sit next to
// it without the ".probe" suffix).
TEST_CASE("pretrained extractor matches the reference probe" * doctest::skip(std::getenv("XTRANS_VGG19_PROBE") == nullptr))
{
  const std::string probe_path = std::getenv("XTRANS_VGG19_PROBE");
  const auto probe = archive::load(probe_path, "vgg19-probe");
  const auto weights = probe_path.substr(0, probe_path.size() - std::string(".probe").size());
  const auto ex = PerceptualExtractor<float>::pretrained(weights);
  const auto taps = ex(VarF(probe.get("input")));
  REQUIRE(taps.size() == 5);
  for (size_t i = 0; i < 5; ++i) {
    const auto& want = probe.get("tap" + std::to_string(i));
    REQUIRE(taps[i].shape() == want.shape());
    double scale = 1e-6;
    for (auto v : want.values())
      scale = std::max(scale, static_cast<double>(std::abs(v)));
    CHECK(testing::max_abs_diff(taps[i].value(), want) / scale < 1e-4);
  }
}
