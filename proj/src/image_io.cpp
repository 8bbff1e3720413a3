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

#include "xtrans/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <string>

namespace xtrans::io {

namespace {

struct FileCloser
{
  void operator()(std::FILE* f) const
  {
    if (f)
      std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

Raster read_png(const std::filesystem::path& path)
{
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.c_str()))
    throw IoError("cannot decode PNG " + path.string() + ": " + image.message);
  const bool gray = (image.format & PNG_FORMAT_FLAG_COLOR) == 0;
  image.format = gray ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
  Raster r;
  r.width = static_cast<int>(image.width);
  r.height = static_cast<int>(image.height);
  r.channels = gray ? 1 : 3;
  r.pixels.resize(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, r.pixels.data(), 0, nullptr)) {
    png_image_free(&image);
    throw IoError("cannot decode PNG " + path.string() + ": " + image.message);
  }
  return r;
}

Raster read_pnm(const std::filesystem::path& path)
{
  std::ifstream in(path, std::ios::binary);
  std::string magic;
  in >> magic;
  if (magic != "P5" && magic != "P6")
    throw IoError("unsupported image format: " + path.string());
  auto next_int = [&]() {
    int v = 0;
    while (in >> std::ws && in.peek() == '#')
      in.ignore(1 << 20, '\n');
    in >> v;
    return v;
  };
  Raster r;
  r.width = next_int();
  r.height = next_int();
  const int maxval = next_int();
  in.get();
  if (!in || r.width <= 0 || r.height <= 0 || maxval != 255)
    throw IoError("malformed PNM header: " + path.string());
  r.channels = magic == "P6" ? 3 : 1;
  r.pixels.resize(static_cast<size_t>(r.width) * r.height * r.channels);
  in.read(reinterpret_cast<char*>(r.pixels.data()), static_cast<std::streamsize>(r.pixels.size()));
  if (!in)
    throw IoError("truncated PNM data: " + path.string());
  return r;
}

} // namespace

void write_png(const std::filesystem::path& path, const Raster& raster)
{
  if (raster.channels != 1 && raster.channels != 3)
    throw InvalidArgument("write_png: only gray or RGB rasters are supported");
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(raster.width);
  image.height = static_cast<png_uint_32>(raster.height);
  image.format = raster.channels == 1 ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
  FilePtr f(std::fopen(path.c_str(), "wb"));
  if (!f)
    throw IoError("cannot open " + path.string() + " for writing");
  if (!png_image_write_to_stdio(&image, f.get(), 0, raster.pixels.data(), 0, nullptr))
    throw IoError("cannot encode PNG " + path.string() + ": " + image.message);
}

Raster read_image(const std::filesystem::path& path)
{
  std::ifstream probe(path, std::ios::binary);
  if (!probe)
    throw IoError("cannot open " + path.string());
  unsigned char sig[8] = {};
  probe.read(reinterpret_cast<char*>(sig), 8);
  if (probe.gcount() == 8 && png_sig_cmp(sig, 0, 8) == 0)
    return read_png(path);
  if (probe.gcount() >= 2 && sig[0] == 'P')
    return read_pnm(path);
  throw IoError("unrecognized image format: " + path.string());
}

TensorF to_tensor(const Raster& raster)
{
  const int C = raster.channels, H = raster.height, W = raster.width;
  TensorF out({C, H, W});
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x)
      for (int c = 0; c < C; ++c)
        out[(static_cast<int64_t>(c) * H + y) * W + x] =
          static_cast<float>(raster.pixels[(static_cast<size_t>(y) * W + x) * C + c]) / 255.0f;
  return out;
}

Raster to_raster(const TensorF& chw)
{
  if (chw.rank() != 3)
    throw InvalidArgument("to_raster: expected (C, H, W), got " + shape_str(chw.shape()));
  Raster r;
  r.channels = static_cast<int>(chw.dim(0));
  r.height = static_cast<int>(chw.dim(1));
  r.width = static_cast<int>(chw.dim(2));
  r.pixels.resize(static_cast<size_t>(chw.numel()));
  for (int y = 0; y < r.height; ++y)
    for (int x = 0; x < r.width; ++x)
      for (int c = 0; c < r.channels; ++c) {
        const float v = std::clamp(chw[(static_cast<int64_t>(c) * r.height + y) * r.width + x], 0.0f, 1.0f);
        r.pixels[(static_cast<size_t>(y) * r.width + x) * r.channels + c] =
          static_cast<uint8_t>(std::lround(v * 255.0f));
      }
  return r;
}

TensorF to_rgb(const TensorF& chw)
{
  if (chw.dim(0) == 3)
    return chw;
  if (chw.dim(0) != 1)
    throw InvalidArgument("to_rgb: expected 1 or 3 channels");
  const int64_t plane = chw.dim(1) * chw.dim(2);
  TensorF out({3, chw.dim(1), chw.dim(2)});
  for (int c = 0; c < 3; ++c)
    std::copy(chw.data(), chw.data() + plane, out.data() + c * plane);
  return out;
}

TensorF resize_bilinear(const TensorF& chw, int height, int width)
{
  const int C = static_cast<int>(chw.dim(0)), H = static_cast<int>(chw.dim(1)), W = static_cast<int>(chw.dim(2));
  if (H == height && W == width)
    return chw;
  TensorF out({C, height, width});
  const double sy = static_cast<double>(H) / height, sx = static_cast<double>(W) / width;
  for (int y = 0; y < height; ++y) {
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, static_cast<double>(H - 1));
    const int y0 = static_cast<int>(fy), y1 = std::min(y0 + 1, H - 1);
    const double wy = fy - y0;
    for (int x = 0; x < width; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, static_cast<double>(W - 1));
      const int x0 = static_cast<int>(fx), x1 = std::min(x0 + 1, W - 1);
      const double wx = fx - x0;
      for (int c = 0; c < C; ++c) {
        auto px = [&](int yy, int xx) { return static_cast<double>(chw[(static_cast<int64_t>(c) * H + yy) * W + xx]); };
        const double v = (1 - wy) * ((1 - wx) * px(y0, x0) + wx * px(y0, x1)) +
                         wy * ((1 - wx) * px(y1, x0) + wx * px(y1, x1));
        out[(static_cast<int64_t>(c) * height + y) * width + x] = static_cast<float>(v);
      }
    }
  }
  return out;
}

} // namespace xtrans::io
