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
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "xtrans/glyphs.hpp"
#include "xtrans/random.hpp"
#include "xtrans/tensor.hpp"

/// Two-domain digit benchmarks with ground-truth masks, reference
/// translations, augmentation, image-folder ingestion and unpaired batching.
namespace xtrans::data {

struct Rgb
{
  float r = 0, g = 0, b = 0;
  bool operator==(const Rgb&) const = default;
};

namespace palette {
inline constexpr Rgb black{0, 0, 0};
inline constexpr Rgb white{1, 1, 1};
inline constexpr Rgb red{1, 0, 0};
inline constexpr Rgb green{0, 1, 0};
inline constexpr Rgb blue{0, 0, 1};
} // namespace palette

struct ColorSpec
{
  Rgb foreground;
  Rgb background;
  bool operator==(const ColorSpec&) const = default;
};

enum class Domain { A, B };
enum class Split { Train, Test };
enum class DatasetKind { Single, Multi };

std::string to_string(Domain d);
std::string to_string(Split s);
std::string to_string(DatasetKind k);
Domain parse_domain(const std::string& s);
Split parse_split(const std::string& s);
DatasetKind parse_kind(const std::string& s);
inline Domain other(Domain d) { return d == Domain::A ? Domain::B : Domain::A; }

inline constexpr int kGridSide = 4;

/// A synthesized image with its ground truth. `coverage` is the glyph
/// alpha; fg_mask is coverage >= 0.5. For multi-digit canvases `colors`,
/// `digit_labels` and `cells` are parallel, one entry per placed digit, and
/// cells index the 4x4 grid row-major.
struct LabeledCanvas
{
  TensorF image;    // (3, H, W) in [0, 1]
  TensorF coverage; // (H, W) in [0, 1]
  TensorF fg_mask;  // (H, W), values 0 or 1
  std::vector<ColorSpec> colors;
  std::vector<int> digit_labels;
  std::vector<int> cells;
  Domain domain = Domain::A;
  Split split = Split::Train;
  DatasetKind kind = DatasetKind::Single;

  int height() const { return static_cast<int>(image.dim(1)); }
  int width() const { return static_cast<int>(image.dim(2)); }
  double mask_coverage() const;
};

struct DatasetConfig
{
  DatasetKind kind = DatasetKind::Single;
  int resolution = 64;
  int64_t train_size = 5000;
  int64_t test_size = 1000;
  uint64_t seed = 0;
  double jitter = 0.1;                // multi-digit domain-B saturation/lightness amplitude
  std::string mnist_dir;              // empty -> procedural stencils
  int64_t glyphs_per_digit = 600;     // procedural bank size per class and split
};

/// Binarization threshold applied to stencils and coverage.
inline constexpr float kMaskThreshold = 0.5f;

/// Single-digit domain A: fg/bg one of {black, white}, distinct.
LabeledCanvas gen_single_A(const TensorF& glyph, uint64_t seed, int resolution = 64, Split split = Split::Train);

/// Single-digit domain B: colors from {red, green, blue}, fg != bg. In the
/// train split digits 5-9 are always red on green.
LabeledCanvas gen_single_B(const TensorF& glyph, int digit_label, Split split, uint64_t seed, int resolution = 64);

/// Ten digits, each once, in 10 of the 16 grid cells.
LabeledCanvas gen_multi(const GlyphBank& bank, Domain domain, uint64_t seed, int resolution = 128,
                        double jitter = 0.1, Split split = Split::Train);

/// Fixed per-class base color for multi-digit domain B (hue 36 * d degrees).
Rgb class_color(int digit);
/// Class color with saturation and lightness shifted, clamped to [0, 1].
Rgb perturbed_class_color(int digit, double dsat, double dlight);

Rgb hsl_to_rgb(double h_deg, double s, double l);
std::array<double, 3> rgb_to_hsl(const Rgb& c);

/// coverage * fg + (1 - coverage) * bg.
TensorF compose(const TensorF& coverage, const ColorSpec& colors);

/// Source coverage recolored with the exemplar's colors (single-digit only).
LabeledCanvas make_reference_translation(const LabeledCanvas& source, const LabeledCanvas& exemplar);
/// Multi-digit rule: exemplar background; each source digit takes the
/// exemplar's color for the same class.
LabeledCanvas make_reference_translation_multi(const LabeledCanvas& source, const LabeledCanvas& exemplar);
/// Dispatches on the canvas kind.
LabeledCanvas reference_translation(const LabeledCanvas& source, const LabeledCanvas& exemplar);

/// Geometric augmentation: optional left-right flip, then a crop of the
/// 4-px reflect-padded image at offset (dy, dx) in [-4, 4] from center.
struct Transform
{
  bool flip = false;
  int dy = 0;
  int dx = 0;
};

inline constexpr int kCropPad = 4;

Transform random_transform(Rng& rng);
/// Applies to any (C, H, W) or (H, W) tensor.
TensorF apply_transform(const TensorF& t, const Transform& tr);
/// Flip with p = 0.5 and random crop, independently per canvas; image,
/// coverage and mask receive the same transform.
void augment(std::vector<LabeledCanvas>& batch, Rng& rng);
/// Same, on a batch tensor (N, C, H, W).
void augment(TensorF& batch, Rng& rng);

/// Dataset synthesis, pure in (config, domain, split, index).
LabeledCanvas generate_canvas(const DatasetConfig& config, const GlyphBank& bank, Domain domain, Split split,
                              int64_t index);
std::vector<LabeledCanvas> generate_split(const DatasetConfig& config, Domain domain, Split split);
/// The stencil bank used for a split (MNIST if configured, else procedural).
GlyphBank glyph_bank_for(const DatasetConfig& config, Split split);

/// Writes <root>/<kind>/<domain>/<split>/ with NNNNNN.png,
/// NNNNNN_mask.png and metadata.jsonl.
std::filesystem::path write_split(const std::filesystem::path& root, const std::vector<LabeledCanvas>& canvases,
                                  DatasetKind kind, Domain domain, Split split);
std::vector<LabeledCanvas> read_split(const std::filesystem::path& split_dir);

/// Images of a directory, sorted by file name, resized to resolution and
/// expanded to RGB. Undecodable files are skipped with a warning.
struct ImageFolder
{
  std::vector<std::filesystem::path> files;
  std::vector<TensorF> images;
  size_t size() const { return images.size(); }
};

ImageFolder load_image_folder(const std::filesystem::path& dir, int resolution);

std::vector<TensorF> images_of(const std::vector<LabeledCanvas>& canvases);
/// Stacks (C, H, W) images into (N, C, H, W).
TensorF stack(const std::vector<TensorF>& images);
TensorF stack(const std::vector<const TensorF*>& images);
/// Image n of an (N, C, H, W) batch.
TensorF unstack(const TensorF& batch, int64_t n);

/// Uniform independent sampling (with replacement) from two image sets.
class UnpairedBatchIterator
{
public:
  UnpairedBatchIterator(const std::vector<TensorF>& domain_a, const std::vector<TensorF>& domain_b, int batch_size,
                        uint64_t seed, bool augment = false);

  std::pair<TensorF, TensorF> next();

  std::string state() const { return rng_state(rng_); }
  void set_state(const std::string& s) { set_rng_state(rng_, s); }

private:
  TensorF draw(const std::vector<TensorF>& pool);

  const std::vector<TensorF>* a_;
  const std::vector<TensorF>* b_;
  int batch_size_;
  bool augment_;
  Rng rng_;
};

} // namespace xtrans::data
