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

#include <cstdint>
#include <filesystem>
#include <vector>

#include "xtrans/tensor.hpp"

namespace xtrans::io {

/// 8-bit interleaved raster (1 = gray, 3 = RGB).
struct Raster
{
  int width = 0;
  int height = 0;
  int channels = 0;
  std::vector<uint8_t> pixels;
};

void write_png(const std::filesystem::path& path, const Raster& raster);
/// Decodes PNG, binary PPM (P6) or PGM (P5). Throws IoError otherwise.
Raster read_image(const std::filesystem::path& path);

/// (C, H, W) float tensor in [0, 1] <-> raster. Values are clamped and
/// rounded to the nearest 8-bit level.
TensorF to_tensor(const Raster& raster);
Raster to_raster(const TensorF& chw);

/// Expands gray to RGB; RGBA is not produced by read_image.
TensorF to_rgb(const TensorF& chw);

/// Bilinear resampling of a (C, H, W) tensor, pixel-center aligned.
TensorF resize_bilinear(const TensorF& chw, int height, int width);

} // namespace xtrans::io
