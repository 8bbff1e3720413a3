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

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>

#include "support.hpp"
#include "xtrans/error.hpp"
#include "xtrans/eval.hpp"
#include "xtrans/ops.hpp"

using namespace xtrans;
using namespace xtrans::eval;
using nn::Direction;

namespace {

struct Pools
{
  std::vector<data::LabeledCanvas> a, b;
};

const Pools& test_pools()
{
  static const Pools pools = [] {
    data::DatasetConfig c;
    c.resolution = 32;
    c.train_size = 1;
    c.test_size = 600;
    c.seed = 21;
    c.glyphs_per_digit = 12;
    return Pools{data::generate_split(c, data::Domain::A, data::Split::Test),
                 data::generate_split(c, data::Domain::B, data::Split::Test)};
  }();
  return pools;
}

TensorF identity(const TensorF& sources, const TensorF&, Direction) { return sources; }

// Paints every source red on green, whatever the exemplar.
TensorF red_on_green(const TensorF& sources, const TensorF&, Direction)
{
  TensorF out(sources.shape());
  const int64_t hw = sources.dim(2) * sources.dim(3);
  for (int64_t n = 0; n < sources.dim(0); ++n)
    for (int64_t k = 0; k < hw; ++k) {
      // Domain-A sources are white glyphs on black.
      const bool fg = sources[n * 3 * hw + k] >= 0.5f;
      out[n * 3 * hw + k] = fg ? 1.0f : 0.0f;
      out[n * 3 * hw + hw + k] = fg ? 0.0f : 1.0f;
      out[n * 3 * hw + 2 * hw + k] = 0.0f;
    }
  return out;
}

std::vector<TensorF> blobs(int n, double offset, uint64_t seed)
{
  Rng rng(seed);
  std::vector<TensorF> out;
  for (int i = 0; i < n; ++i) {
    TensorF t({3, 6, 6});
    for (auto& v : t.values())
      v = static_cast<float>(offset + 0.1 * normal(rng));
    out.push_back(t);
  }
  return out;
}

TsneOptions quick()
{
  TsneOptions o;
  o.pca_dims = 10;
  o.perplexity = 5;
  o.iterations = 300;
  o.exaggeration_iterations = 100;
  return o;
}

} // namespace

TEST_CASE("summary uses the population standard deviation")
{
  const auto r = summarize("A2B", {1.0, 2.0, 3.0, 4.0});
  CHECK(r.mean == doctest::Approx(2.5));
  CHECK(r.std == doctest::Approx(std::sqrt(1.25)));
  CHECK(r.n == 4);
}

TEST_CASE("the reference oracle scores one and weaker translators score less")
{
  const auto& p = test_pools();
  const auto oracle = reference_oracle(p.a, p.b);
  for (auto dir : {Direction::AtoB, Direction::BtoA, Direction::AtoA, Direction::BtoB}) {
    const auto r = eval_ssim(oracle, p.a, p.b, dir, 5, 100);
    CHECK(r.n == 100);
    CHECK(r.mean == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(r.std == doctest::Approx(0.0).epsilon(1e-9));
  }
  const auto id = eval_ssim(identity, p.a, p.b, Direction::AtoB, 5, 100);
  CHECK(id.mean < 0.9);

  const auto control = exemplar_control_score(oracle, p.a, p.b, Direction::AtoB, 5);
  CHECK(control.score == 1.0);
  CHECK(control.n == 600);
}

TEST_CASE("a translator that ignores the exemplar matches one colour pair in six")
{
  const auto& p = test_pools();
  const auto r = exemplar_control_score(red_on_green, p.a, p.b, Direction::AtoB, 5);
  CHECK(r.score == doctest::Approx(1.0 / 6.0).epsilon(0.3));
  CHECK(r.score > 0.1);
  CHECK(r.score < 0.25);
}

TEST_CASE("pairing is fixed by the seed and the direction")
{
  const auto p1 = evaluation_pairing(50, 40, Direction::AtoB, 3);
  CHECK(p1 == evaluation_pairing(50, 40, Direction::AtoB, 3));
  CHECK(p1 != evaluation_pairing(50, 40, Direction::BtoA, 3));
  CHECK(p1 != evaluation_pairing(50, 40, Direction::AtoB, 4));
  CHECK(p1.size() == 50);
  for (auto i : p1) {
    REQUIRE(i >= 0);
    REQUIRE(i < 40);
  }
  CHECK(evaluation_pairing(50, 40, Direction::AtoB, 3, 10).size() == 10);
}

TEST_CASE("palette classification")
{
  CHECK(nearest_palette_color({0.9, 0.1, 0.1}) == 0);
  CHECK(nearest_palette_color({0.1, 0.8, 0.2}) == 1);
  CHECK(nearest_palette_color({0.0, 0.1, 0.7}) == 2);
  CHECK(nearest_palette_color({0.1, 0.1, 0.1}) == 3);
  CHECK(nearest_palette_color({0.9, 0.9, 0.95}) == 4);
}

TEST_CASE("evaluation refuses data without ground truth")
{
  auto a = test_pools().a;
  a.resize(4);
  a[1].fg_mask = TensorF();
  const auto oracle = reference_oracle(a, test_pools().b);
  CHECK_THROWS_AS(eval_ssim(oracle, a, test_pools().b, Direction::AtoB, 1), InvalidArgument);
  CHECK_THROWS_AS(eval_ssim(oracle, {}, test_pools().b, Direction::AtoB, 1), InvalidArgument);
}

TEST_CASE("pca recovers a dominant direction with a fixed sign")
{
  Rng rng(4);
  std::vector<double> x;
  for (int i = 0; i < 200; ++i) {
    const double t = normal(rng);
    x.insert(x.end(), {-3 * t + 0.01 * normal(rng), 4 * t + 0.01 * normal(rng), 0.01 * normal(rng)});
  }
  const auto y = pca(x, 200, 3, 1);
  REQUIRE(y.size() == 200);
  // The largest loading (on the second axis) is positive, so y follows x[1].
  double corr = 0;
  for (int i = 0; i < 200; ++i)
    corr += y[static_cast<size_t>(i)] * x[static_cast<size_t>(3 * i + 1)];
  CHECK(corr > 0);
  CHECK_THROWS_AS(pca(x, 200, 3, 4), InvalidArgument);
}

TEST_CASE("t-SNE embedding is deterministic and order invariant")
{
  const auto real = blobs(20, 0.2, 1);
  const auto gen = blobs(20, 0.8, 2);
  const auto e1 = embed_tsne(real, gen, 9, quick());
  const auto e2 = embed_tsne(real, gen, 9, quick());
  CHECK(e1.points == e2.points);
  CHECK(e1.labels == e2.labels);

  auto shuffled_real = real;
  auto shuffled_gen = gen;
  std::reverse(shuffled_real.begin(), shuffled_real.end());
  std::rotate(shuffled_gen.begin(), shuffled_gen.begin() + 7, shuffled_gen.end());
  const auto e3 = embed_tsne(shuffled_real, shuffled_gen, 9, quick());
  // Points come back in input order, so compare sample by sample.
  for (size_t i = 0; i < 20; ++i) {
    CHECK(e3.points[19 - i] == e1.points[i]);
    CHECK(e3.points[20 + (i + 13) % 20] == e1.points[20 + i]);
  }
  CHECK(e3.labels == e1.labels);

  // Well-separated groups are detected.
  const auto sep = permutation_test(e1, 3, 199);
  CHECK(sep.p_value <= 0.01);

  const auto dir = testing::scratch_dir("tsne");
  write_embedding_csv(dir / "e.csv", e1);
  std::ifstream in(dir / "e.csv");
  std::string header;
  std::getline(in, header);
  CHECK(header == "x,y,label");
  int rows = 0;
  for (std::string line; std::getline(in, line);)
    ++rows;
  CHECK(rows == 40);
  render_scatter(dir / "e.png", e1, 128);
  const auto r = io::read_image(dir / "e.png");
  CHECK(r.width == 128);
  CHECK(r.height == 128);
}

TEST_CASE("identical sets are indistinguishable")
{
  const auto real = blobs(20, 0.5, 5);
  const auto e = embed_tsne(real, real, 9, quick());
  const auto t = permutation_test(e, 3, 199);
  CHECK(t.p_value > 0.01);
  CHECK(t.permutations == 199);
  CHECK_THROWS_AS(embed_tsne({}, real, 9, quick()), InvalidArgument);
}

TEST_CASE("grid layout")
{
  const auto dir = testing::scratch_dir("grid");
  TensorF red({3, 8, 8});
  for (int k = 0; k < 64; ++k)
    red[k] = 1.0f;

  render_grid({{red}}, dir / "one.png");
  auto r = io::read_image(dir / "one.png");
  CHECK(r.width == 2 + 10);
  CHECK(r.height == 2 + 10);
  CHECK(r.pixels[static_cast<size_t>((2 * r.width + 2) * 3)] == 255);
  CHECK(r.pixels[static_cast<size_t>((2 * r.width + 2) * 3 + 1)] == 0);

  std::vector<std::vector<TensorF>> rows(3, std::vector<TensorF>(4, red));
  render_grid(rows, dir / "grid.png");
  r = io::read_image(dir / "grid.png");
  CHECK(r.width == 2 + 4 * 10);
  CHECK(r.height == 2 + 3 * 10);
  // Cell (2, 3) starts at x = 2 + 3 * 10, y = 2 + 2 * 10.
  CHECK(r.pixels[static_cast<size_t>((22 * r.width + 32) * 3 + 1)] == 0);

  GridOptions labelled;
  labelled.row_labels = {"A", "B", "A2B"};
  labelled.col_labels = {"1", "2", "3", "4"};
  render_grid(rows, dir / "labels.png", labelled);
  render_grid(rows, dir / "labels2.png", labelled);
  auto bytes = [](const std::filesystem::path& f) {
    std::ifstream in(f, std::ios::binary);
    return std::vector<char>(std::istreambuf_iterator<char>(in), {});
  };
  CHECK(bytes(dir / "labels.png") == bytes(dir / "labels2.png"));
  r = io::read_image(dir / "labels.png");
  CHECK(r.width == text_width("A2B") + 2 + 2 + 4 * 10);
  CHECK(r.height == kGlyphHeight + 2 + 2 + 3 * 10);

  labelled.row_labels.pop_back();
  CHECK_THROWS_AS(render_grid(rows, dir / "bad.png", labelled), InvalidArgument);
  rows[1][2] = TensorF({3, 4, 4});
  CHECK_THROWS_AS(render_grid(rows, dir / "bad.png"), InvalidArgument);
}

TEST_CASE("ssim csv files")
{
  const auto dir = testing::scratch_dir("ssim_csv");
  const std::vector<SSIMReport> reports{summarize("A2B", {0.5, 0.7}), summarize("B2A", {0.25})};
  write_ssim_csv(dir / "s.csv", reports);
  write_ssim_samples_csv(dir / "p.csv", reports);
  std::ifstream s(dir / "s.csv"), p(dir / "p.csv");
  std::string line;
  std::getline(s, line);
  CHECK(line == "direction,mean,std,n");
  std::getline(s, line);
  CHECK(line == "A2B,0.59999999999999998,0.099999999999999978,2");
  int rows = 0;
  std::getline(p, line);
  CHECK(line == "direction,index,ssim");
  while (std::getline(p, line))
    ++rows;
  CHECK(rows == 3);
  CHECK(format_table(reports).find("A2B") != std::string::npos);
}
