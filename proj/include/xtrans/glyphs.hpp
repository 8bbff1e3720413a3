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
#include <vector>

#include "xtrans/random.hpp"
#include "xtrans/tensor.hpp"

namespace xtrans::data {

/// Grayscale digit stencils, (H, W) in [0, 1], grouped by class.
struct GlyphBank
{
  std::array<std::vector<TensorF>, 10> by_digit;

  size_t size() const;
  /// Throws InvalidArgument naming the first class without a stencil.
  void require_complete() const;
};

/// Reads MNIST IDX files (raw or gzip) from `dir`: train-images-idx3-ubyte
/// and train-labels-idx1-ubyte, or the t10k-* pair when `test` is set.
/// At most `max_per_digit` stencils per class are kept (0 = all).
GlyphBank load_mnist_idx(const std::filesystem::path& dir, bool test, size_t max_per_digit = 0);

/// Renders one handwriting-like digit at size x size from stroke templates
/// under a random affine warp, stroke wobble and thickness.
TensorF render_procedural_digit(int digit, Rng& rng, int size = 28);

/// `per_digit` procedural stencils for every class, fully determined by seed.
GlyphBank procedural_glyphs(size_t per_digit, uint64_t seed, int size = 28);

} // namespace xtrans::data
