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

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "xtrans/data.hpp"
#include "xtrans/image_io.hpp"
#include "xtrans/nn.hpp"
#include "xtrans/tensor.hpp"

namespace xtrans::eval {

/// Batched translation: (N,3,H,W) sources and exemplars to (N,3,H,W) outputs.
using TranslateFn = std::function<TensorF(const TensorF& sources, const TensorF& exemplars, nn::Direction)>;

/// Wraps a model in evaluation mode. The model must outlive the function.
TranslateFn model_translator(nn::Translator<float>& model, int64_t batch_size = 16);

/// The reference translation itself; scores 1.0 on every metric.
TranslateFn reference_oracle(const std::vector<data::LabeledCanvas>& pool_a,
                             const std::vector<data::LabeledCanvas>& pool_b);

/// Index of the opposite-domain exemplar for every evaluated source. Depends
/// only on the seed, the direction and the pool sizes, so every model sees
/// the same pairs.
std::vector<int64_t> evaluation_pairing(int64_t sources, int64_t exemplars, nn::Direction dir, uint64_t seed,
                                        int64_t pairs = 0);

struct SSIMReport
{
  std::string direction;
  double mean = 0;
  double std = 0; // population standard deviation
  int64_t n = 0;
  std::vector<double> per_sample;
};

SSIMReport summarize(const std::string& direction, std::vector<double> per_sample);

/// Cross-domain SSIM against reference translations. For AtoA/BtoB every
/// source is its own exemplar and the reference is the source image.
SSIMReport eval_ssim(const TranslateFn& translate, const std::vector<data::LabeledCanvas>& test_a,
                     const std::vector<data::LabeledCanvas>& test_b, nn::Direction dir, uint64_t seed,
                     int64_t pairs = 0);

struct ControlReport
{
  std::string direction;
  double score = 0;
  int64_t n = 0;
  std::vector<bool> matched;
};

/// Nearest of {red, green, blue, black, white} in RGB for a color.
int nearest_palette_color(const std::array<double, 3>& rgb);

/// Fraction of pairs whose output foreground and background colors, averaged
/// under the source mask, both classify to the exemplar's colors.
ControlReport exemplar_control_score(const TranslateFn& translate, const std::vector<data::LabeledCanvas>& test_a,
                                     const std::vector<data::LabeledCanvas>& test_b, nn::Direction dir,
                                     uint64_t seed, int64_t pairs = 0);

struct TsneOptions
{
  int pca_dims = 50;
  double perplexity = 30;
  int iterations = 1000;
  double learning_rate = 200;
  double early_exaggeration = 12;
  int exaggeration_iterations = 250;
};

struct EmbeddingSet
{
  std::vector<std::array<double, 2>> points;
  std::vector<int> labels; // 0 = real, 1 = generated
  uint64_t seed = 0;
};

/// Rows of `x` (n x d, row-major) projected onto their top `dims` principal
/// components. Component signs are fixed so the largest loading is positive.
std::vector<double> pca(const std::vector<double>& x, int64_t n, int64_t d, int dims);

/// Exact t-SNE of n points of dimension d.
std::vector<std::array<double, 2>> tsne(const std::vector<double>& x, int64_t n, int64_t d, uint64_t seed,
                                        const TsneOptions& options = {});

/// Flatten, PCA, t-SNE. Samples are processed in a content-defined order, so
/// the result does not depend on the input order.
EmbeddingSet embed_tsne(const std::vector<TensorF>& real, const std::vector<TensorF>& generated, uint64_t seed,
                        const TsneOptions& options = {});

struct PermutationTest
{
  double statistic = 0; // energy distance between the two groups
  double p_value = 1;
  int permutations = 0;
};

/// Two-sample permutation test on the energy distance between the real and
/// generated points of an embedding.
PermutationTest permutation_test(const EmbeddingSet& e, uint64_t seed, int permutations = 999);

void write_embedding_csv(const std::filesystem::path& path, const EmbeddingSet& e);
void render_scatter(const std::filesystem::path& path, const EmbeddingSet& e, int size = 512);

struct GridOptions
{
  std::vector<std::string> row_labels;
  std::vector<std::string> col_labels;
  int margin = 2;
};

/// Tiles equally sized (3,H,W) images into a PNG. Cell (r, c) starts at
/// x = label_w + margin + c (W + margin), y = label_h + margin + r (H + margin),
/// where label_w/label_h are zero when no row/column labels are given.
void render_grid(const std::vector<std::vector<TensorF>>& rows, const std::filesystem::path& path,
                 const GridOptions& options = {});

/// Draws text with the built-in 5x7 font (upper-case ASCII, digits and
/// common punctuation; lower case is drawn as upper case).
void draw_text(io::Raster& raster, int x, int y, const std::string& text, uint8_t value = 0);
int text_width(const std::string& text);
inline constexpr int kGlyphHeight = 7;

/// Summary rows: direction,mean,std,n.
void write_ssim_csv(const std::filesystem::path& path, const std::vector<SSIMReport>& reports);
/// One row per pair: direction,index,ssim.
void write_ssim_samples_csv(const std::filesystem::path& path, const std::vector<SSIMReport>& reports);
/// "direction  mean +- std  (n)" lines.
std::string format_table(const std::vector<SSIMReport>& reports);

} // namespace xtrans::eval
