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

#include <fstream>
#include <map>
#include <set>
#include <tuple>

#include "support.hpp"
#include "xtrans/data.hpp"
#include "xtrans/error.hpp"
#include "xtrans/glyphs.hpp"
#include "xtrans/image_io.hpp"
#include "xtrans/ops.hpp"

using namespace xtrans;
using namespace xtrans::data;
using namespace xtrans::data::palette;
using xtrans::testing::scratch_dir;

namespace {

const GlyphBank& bank()
{
  static const GlyphBank b = procedural_glyphs(8, 99);
  return b;
}

const TensorF& glyph(int digit, size_t i = 0) { return bank().by_digit[static_cast<size_t>(digit)][i]; }

bool is_primary(const Rgb& c) { return c == red || c == green || c == blue; }
bool is_black_or_white(const Rgb& c) { return c == black || c == white; }

// Pixel-level recoloring of a coverage map, independent of compose().
TensorF recolor(const TensorF& coverage, const ColorSpec& cs)
{
  const int64_t h = coverage.dim(0), w = coverage.dim(1);
  TensorF out({3, h, w});
  const float fg[3] = {cs.foreground.r, cs.foreground.g, cs.foreground.b};
  const float bg[3] = {cs.background.r, cs.background.g, cs.background.b};
  for (int c = 0; c < 3; ++c)
    for (int64_t i = 0; i < h * w; ++i)
      out[c * h * w + i] = coverage[i] * fg[c] + (1 - coverage[i]) * bg[c];
  return out;
}

// Flip and pad-crop of a (H, W) plane written out by hand.
TensorF transform_oracle(const TensorF& plane, const Transform& tr)
{
  const int h = static_cast<int>(plane.dim(0)), w = static_cast<int>(plane.dim(1));
  auto reflect = [](int i, int n) {
    if (i < 0)
      return -i;
    if (i >= n)
      return 2 * n - 2 - i;
    return i;
  };
  TensorF out({h, w});
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const int sy = reflect(y + tr.dy, h);
      int sx = reflect(x + tr.dx, w);
      if (tr.flip)
        sx = w - 1 - sx;
      out[y * w + x] = plane[sy * w + sx];
    }
  return out;
}

} // namespace

TEST_CASE("domain A colors are black and white and distinct")
{
  int white_fg = 0;
  const int n = 10000;
  for (int i = 0; i < n; ++i) {
    const auto c = gen_single_A(glyph(i % 10, i % 8), derive_seed(5, {static_cast<uint64_t>(i)}), 32);
    REQUIRE(c.colors.size() == 1);
    const auto& cs = c.colors[0];
    REQUIRE(is_black_or_white(cs.foreground));
    REQUIRE(is_black_or_white(cs.background));
    REQUIRE_FALSE(cs.foreground == cs.background);
    white_fg += cs.foreground == white;
  }
  const double p = static_cast<double>(white_fg) / n;
  CHECK(p >= 0.47);
  CHECK(p <= 0.53);
}

TEST_CASE("domain A rejects an empty stencil")
{
  CHECK_THROWS_AS(gen_single_A(TensorF({28, 28}), 1), InvalidArgument);
}

TEST_CASE("domain B train digits 5-9 are red on green, 0-4 cover every pair")
{
  std::set<std::pair<int, int>> pairs_low;
  auto code = [](const Rgb& c) { return c == red ? 0 : (c == green ? 1 : 2); };
  for (int i = 0; i < 1000; ++i) {
    const int digit = i % 10;
    const auto c = gen_single_B(glyph(digit, i % 8), digit, Split::Train, derive_seed(6, {static_cast<uint64_t>(i)}), 32);
    const auto& cs = c.colors[0];
    REQUIRE(is_primary(cs.foreground));
    REQUIRE(is_primary(cs.background));
    REQUIRE_FALSE(cs.foreground == cs.background);
    if (digit >= 5) {
      REQUIRE(cs.foreground == red);
      REQUIRE(cs.background == green);
    } else {
      pairs_low.insert({code(cs.foreground), code(cs.background)});
    }
  }
  CHECK(pairs_low.size() == 6);
}

TEST_CASE("domain B test split draws every ordered pair for digit 7")
{
  std::set<std::pair<float, float>> seen;
  for (int i = 0; i < 1000; ++i) {
    const auto c = gen_single_B(glyph(7), 7, Split::Test, derive_seed(7, {static_cast<uint64_t>(i)}), 32);
    const auto& cs = c.colors[0];
    REQUIRE(is_primary(cs.foreground));
    REQUIRE_FALSE(cs.foreground == cs.background);
    seen.insert({cs.foreground.r + 2 * cs.foreground.g + 4 * cs.foreground.b,
                 cs.background.r + 2 * cs.background.g + 4 * cs.background.b});
  }
  CHECK(seen.size() == 6);
  CHECK_THROWS_AS(gen_single_B(glyph(1), 10, Split::Test, 1, 32), InvalidArgument);
}

TEST_CASE("canvas reconstruction identity and mask threshold")
{
  const auto c = gen_single_B(glyph(3), 3, Split::Test, 42, 64);
  CHECK(c.image == compose(c.coverage, c.colors[0]));
  const auto& cs = c.colors[0];
  const float fg[3] = {cs.foreground.r, cs.foreground.g, cs.foreground.b};
  const float bg[3] = {cs.background.r, cs.background.g, cs.background.b};
  const int64_t plane = 64 * 64;
  double covered = 0;
  for (int64_t i = 0; i < plane; ++i) {
    CHECK(c.fg_mask[i] == (c.coverage[i] >= kMaskThreshold ? 1.0f : 0.0f));
    covered += c.fg_mask[i];
    if (c.coverage[i] == 0.0f || c.coverage[i] == 1.0f)
      for (int ch = 0; ch < 3; ++ch)
        REQUIRE(c.image[ch * plane + i] == (c.coverage[i] == 1.0f ? fg[ch] : bg[ch]));
  }
  CHECK(covered > 0);
  CHECK(covered < plane);
}

TEST_CASE("generation is bit-deterministic")
{
  const auto a1 = gen_single_A(glyph(7), 123);
  const auto a2 = gen_single_A(glyph(7), 123);
  CHECK(a1.image == a2.image);
  CHECK(a1.fg_mask == a2.fg_mask);

  DatasetConfig cfg;
  cfg.resolution = 32;
  cfg.train_size = 20;
  cfg.test_size = 5;
  cfg.glyphs_per_digit = 6;
  cfg.seed = 17;
  const auto s1 = generate_split(cfg, Domain::B, Split::Train);
  const auto s2 = generate_split(cfg, Domain::B, Split::Train);
  REQUIRE(s1.size() == 20);
  for (size_t i = 0; i < s1.size(); ++i) {
    CHECK(s1[i].image == s2[i].image);
    CHECK(s1[i].digit_labels == s2[i].digit_labels);
  }
  cfg.seed = 18;
  const auto s3 = generate_split(cfg, Domain::B, Split::Train);
  bool any_diff = false;
  for (size_t i = 0; i < s1.size(); ++i)
    any_diff = any_diff || !(s1[i].image == s3[i].image);
  CHECK(any_diff);
}

TEST_CASE("multi-digit canvases place each digit once")
{
  for (uint64_t s = 0; s < 200; ++s) {
    const auto dom = s % 2 ? Domain::A : Domain::B;
    const auto c = gen_multi(bank(), dom, s, 64, 0.1);
    REQUIRE(c.digit_labels.size() == 10);
    std::set<int> digits(c.digit_labels.begin(), c.digit_labels.end());
    std::set<int> cells(c.cells.begin(), c.cells.end());
    CHECK(digits.size() == 10);
    CHECK(*digits.begin() == 0);
    CHECK(*digits.rbegin() == 9);
    CHECK(cells.size() == 10);
    CHECK(*cells.rbegin() < 16);
    const auto& bg = c.colors[0].background;
    CHECK(is_black_or_white(bg));
    for (const auto& cs : c.colors) {
      CHECK(cs.background == bg);
      CHECK_FALSE(cs.foreground == cs.background);
      if (dom == Domain::A)
        CHECK(is_black_or_white(cs.foreground));
    }
  }
}

TEST_CASE("multi-digit domain B class colors and jitter")
{
  for (uint64_t s = 0; s < 20; ++s) {
    const auto c = gen_multi(bank(), Domain::B, s, 64, 0.0);
    for (size_t i = 0; i < c.digit_labels.size(); ++i)
      CHECK(c.colors[i].foreground == class_color(c.digit_labels[i]));
  }
  // Two jittered instances of a class stay close to the class color in HSL.
  const auto base = rgb_to_hsl(class_color(4));
  for (uint64_t s = 0; s < 20; ++s) {
    const auto c = gen_multi(bank(), Domain::B, 1000 + s, 64, 0.1);
    for (size_t i = 0; i < c.digit_labels.size(); ++i) {
      if (c.digit_labels[i] != 4)
        continue;
      const auto hsl = rgb_to_hsl(c.colors[i].foreground);
      CHECK(hsl[0] == doctest::Approx(base[0]).epsilon(1e-3));
      CHECK(std::abs(hsl[1] - base[1]) <= 0.1 + 1e-6);
      CHECK(std::abs(hsl[2] - base[2]) <= 0.1 + 1e-6);
    }
  }
  std::set<std::tuple<float, float, float>> palette;
  for (int d = 0; d < 10; ++d)
    palette.insert({class_color(d).r, class_color(d).g, class_color(d).b});
  CHECK(palette.size() == 10);

  GlyphBank partial = bank();
  partial.by_digit[6].clear();
  CHECK_THROWS_AS(gen_multi(partial, Domain::A, 1, 64), InvalidArgument);
}

TEST_CASE("reference translation recolors the source")
{
  const auto src = gen_single_A(glyph(5), 3, 64, Split::Test);
  auto ex = gen_single_B(glyph(2), 2, Split::Test, 4, 64);
  ex.colors = {ColorSpec{blue, red}};
  const auto ref = make_reference_translation(src, ex);
  CHECK(testing::max_abs_diff(ref.image, recolor(src.coverage, {blue, red})) < 1e-6);
  CHECK(ref.fg_mask == src.fg_mask);
  CHECK(ops::ssim(ref.image, ref.image) == 1.0);

  const auto self = make_reference_translation(src, src);
  CHECK(self.image == src.image);

  const auto multi = gen_multi(bank(), Domain::A, 1, 64);
  CHECK_THROWS_AS(make_reference_translation(multi, ex), InvalidArgument);
}

TEST_CASE("multi-digit reference takes the exemplar background and class colors")
{
  const auto src = gen_multi(bank(), Domain::A, 11, 64);
  const auto ex = gen_multi(bank(), Domain::B, 12, 64, 0.1);
  const auto ref = reference_translation(src, ex);
  std::map<int, Rgb> class_fg;
  for (size_t i = 0; i < ex.digit_labels.size(); ++i)
    class_fg[ex.digit_labels[i]] = ex.colors[i].foreground;
  REQUIRE(ref.colors.size() == 10);
  for (size_t i = 0; i < ref.colors.size(); ++i) {
    CHECK(ref.colors[i].background == ex.colors[0].background);
    CHECK(ref.colors[i].foreground == class_fg[src.digit_labels[i]]);
  }
  CHECK(ref.cells == src.cells);
}

TEST_CASE("augmentation laws")
{
  const auto c = gen_single_B(glyph(8), 8, Split::Train, 5, 32);
  SUBCASE("zero offset without flip is the identity")
  {
    CHECK(apply_transform(c.image, {}) == c.image);
  }
  SUBCASE("flip twice is the identity")
  {
    const Transform f{true, 0, 0};
    CHECK(apply_transform(apply_transform(c.image, f), f) == c.image);
  }
  SUBCASE("transform matches a hand-written oracle")
  {
    for (const Transform tr : {Transform{true, 3, -2}, Transform{false, -4, 4}, Transform{true, 0, 1}})
      CHECK(apply_transform(c.coverage, tr) == transform_oracle(c.coverage, tr));
  }
  SUBCASE("image and mask move together")
  {
    Rng rng(3);
    std::vector<LabeledCanvas> batch{c, c, c, c};
    augment(batch, rng);
    Rng replay(3);
    for (const auto& out : batch) {
      const auto tr = random_transform(replay);
      CHECK(out.fg_mask == apply_transform(c.fg_mask, tr));
      CHECK(out.image == apply_transform(c.image, tr));
      CHECK(out.coverage == apply_transform(c.coverage, tr));
      CHECK(out.image.shape() == c.image.shape());
    }
  }
  SUBCASE("offsets beyond the padding are rejected")
  {
    CHECK_THROWS_AS(apply_transform(c.image, Transform{false, 5, 0}), InvalidArgument);
  }
}

TEST_CASE("split round trip through disk")
{
  DatasetConfig cfg;
  cfg.resolution = 32;
  cfg.train_size = 6;
  cfg.test_size = 4;
  cfg.glyphs_per_digit = 4;
  const auto canvases = generate_split(cfg, Domain::B, Split::Test);
  const auto root = scratch_dir("split");
  const auto dir = write_split(root, canvases, DatasetKind::Single, Domain::B, Split::Test);
  CHECK(dir == root / "single" / "B" / "test");
  const auto back = read_split(dir);
  REQUIRE(back.size() == canvases.size());
  for (size_t i = 0; i < back.size(); ++i) {
    CHECK(testing::max_abs_diff(back[i].image, canvases[i].image) <= 0.5 / 255 + 1e-6);
    CHECK(back[i].fg_mask == canvases[i].fg_mask);
    CHECK(back[i].colors == canvases[i].colors);
    CHECK(back[i].digit_labels == canvases[i].digit_labels);
    CHECK(back[i].domain == Domain::B);
    CHECK(back[i].split == Split::Test);
  }
  CHECK_THROWS_AS(read_split(root), IoError);
}

TEST_CASE("image folder loading")
{
  const auto dir = scratch_dir("folder");
  CHECK_THROWS_AS(load_image_folder(dir, 32), IoError);
  const int sizes[3] = {20, 48, 32};
  const char* names[3] = {"c.png", "a.png", "b.png"};
  for (int i = 0; i < 3; ++i) {
    io::Raster r;
    r.width = r.height = sizes[i];
    r.channels = i == 1 ? 1 : 3;
    r.pixels.assign(static_cast<size_t>(r.width * r.height * r.channels), static_cast<uint8_t>(40 * i));
    io::write_png(dir / names[i], r);
  }
  { std::ofstream(dir / "broken.png") << "not a png"; }
  const auto folder = load_image_folder(dir, 32);
  REQUIRE(folder.size() == 3);
  CHECK(folder.files[0].filename() == "a.png");
  CHECK(folder.files[2].filename() == "c.png");
  for (const auto& img : folder.images)
    CHECK(img.shape() == Shape{3, 32, 32});
  const auto again = load_image_folder(dir, 32);
  CHECK(again.files == folder.files);
}

TEST_CASE("unpaired iterator is seed reproducible and resumable")
{
  std::vector<TensorF> a, b;
  for (int i = 0; i < 5; ++i) {
    a.emplace_back(Shape{3, 8, 8}, static_cast<float>(i));
    b.emplace_back(Shape{3, 8, 8}, static_cast<float>(10 + i));
  }
  UnpairedBatchIterator it1(a, b, 3, 9), it2(a, b, 3, 9);
  for (int k = 0; k < 4; ++k) {
    const auto [xa, xb] = it1.next();
    const auto [ya, yb] = it2.next();
    CHECK(xa == ya);
    CHECK(xb == yb);
    CHECK(xa.shape() == Shape{3, 3, 8, 8});
  }
  const auto saved = it1.state();
  const auto expected = it1.next();
  it2.set_state(saved);
  CHECK(it2.next() == expected);
  CHECK_THROWS_AS(UnpairedBatchIterator(a, b, 0, 1), InvalidArgument);
  CHECK_THROWS_AS(UnpairedBatchIterator({}, b, 1, 1), InvalidArgument);
}
