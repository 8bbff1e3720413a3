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

#include "xtrans/glyphs.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace xtrans::data {

size_t GlyphBank::size() const
{
  size_t n = 0;
  for (const auto& v : by_digit)
    n += v.size();
  return n;
}

void GlyphBank::require_complete() const
{
  for (int d = 0; d < 10; ++d)
    if (by_digit[static_cast<size_t>(d)].empty())
      throw InvalidArgument("glyph bank has no stencil for digit " + std::to_string(d));
}

namespace {

struct GzFile
{
  gzFile handle = nullptr;
  explicit GzFile(const std::filesystem::path& p) : handle(gzopen(p.c_str(), "rb")) {}
  ~GzFile()
  {
    if (handle)
      gzclose(handle);
  }
  GzFile(const GzFile&) = delete;
  GzFile& operator=(const GzFile&) = delete;

  void read(void* dst, unsigned len, const std::filesystem::path& p)
  {
    if (gzread(handle, dst, len) != static_cast<int>(len))
      throw IoError("truncated IDX file " + p.string());
  }
  uint32_t read_be32(const std::filesystem::path& p)
  {
    unsigned char b[4];
    read(b, 4, p);
    return (uint32_t{b[0]} << 24) | (uint32_t{b[1]} << 16) | (uint32_t{b[2]} << 8) | uint32_t{b[3]};
  }
};

std::filesystem::path find_idx(const std::filesystem::path& dir, const std::string& stem)
{
  for (const auto& name : {stem, stem + ".gz"}) {
    auto p = dir / name;
    if (std::filesystem::exists(p))
      return p;
  }
  throw IoError("MNIST file " + stem + "[.gz] not found in " + dir.string());
}

struct Pt
{
  double x, y;
};
using Polyline = std::vector<Pt>;

Polyline arc(double cx, double cy, double rx, double ry, double a0, double a1, int n)
{
  Polyline out;
  for (int i = 0; i <= n; ++i) {
    const double a = (a0 + (a1 - a0) * i / n) * std::numbers::pi / 180.0;
    out.push_back({cx + rx * std::cos(a), cy + ry * std::sin(a)});
  }
  return out;
}

// Stroke skeletons in a unit box, y pointing down.
std::vector<Polyline> digit_template(int digit)
{
  switch (digit) {
  case 0:
    return {arc(0.5, 0.5, 0.26, 0.38, 0, 360, 28)};
  case 1:
    return {{{0.36, 0.26}, {0.52, 0.1}, {0.5, 0.9}}};
  case 2: {
    auto top = arc(0.5, 0.32, 0.24, 0.2, 190, 380, 14);
    top.push_back({0.24, 0.88});
    top.push_back({0.8, 0.88});
    return {top};
  }
  case 3: {
    auto upper = arc(0.48, 0.3, 0.22, 0.18, 200, 450, 14);
    auto lower = arc(0.48, 0.68, 0.25, 0.2, 270, 520, 14);
    upper.insert(upper.end(), lower.begin() + 1, lower.end());
    return {upper};
  }
  case 4:
    return {{{0.64, 0.9}, {0.64, 0.1}, {0.2, 0.62}, {0.82, 0.62}}};
  case 5: {
    Polyline stroke{{0.74, 0.12}, {0.34, 0.12}, {0.3, 0.46}};
    auto belly = arc(0.5, 0.66, 0.24, 0.22, 225, 500, 16);
    stroke.insert(stroke.end(), belly.begin(), belly.end());
    return {stroke};
  }
  case 6: {
    Polyline stroke{{0.7, 0.12}, {0.5, 0.22}, {0.34, 0.42}, {0.28, 0.64}};
    auto loop = arc(0.5, 0.67, 0.22, 0.21, 180, 540, 22);
    stroke.insert(stroke.end(), loop.begin(), loop.end());
    return {stroke};
  }
  case 7:
    return {{{0.2, 0.13}, {0.8, 0.13}, {0.42, 0.9}}};
  case 8:
    return {arc(0.5, 0.3, 0.19, 0.18, 0, 360, 20), arc(0.5, 0.68, 0.23, 0.21, 0, 360, 22)};
  case 9:
    return {arc(0.5, 0.33, 0.21, 0.2, 0, 360, 22), {{0.71, 0.35}, {0.64, 0.9}}};
  default:
    throw InvalidArgument("digit must be in 0..9, got " + std::to_string(digit));
  }
}

double segment_distance(Pt p, Pt a, Pt b)
{
  const double vx = b.x - a.x, vy = b.y - a.y;
  const double len2 = vx * vx + vy * vy;
  double t = len2 > 0 ? ((p.x - a.x) * vx + (p.y - a.y) * vy) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  const double dx = p.x - (a.x + t * vx), dy = p.y - (a.y + t * vy);
  return std::sqrt(dx * dx + dy * dy);
}

} // namespace

GlyphBank load_mnist_idx(const std::filesystem::path& dir, bool test, size_t max_per_digit)
{
  const std::string prefix = test ? "t10k" : "train";
  const auto img_path = find_idx(dir, prefix + "-images-idx3-ubyte");
  const auto lbl_path = find_idx(dir, prefix + "-labels-idx1-ubyte");
  GzFile imgs(img_path), lbls(lbl_path);
  if (!imgs.handle || !lbls.handle)
    throw IoError("cannot open MNIST files in " + dir.string());
  if (imgs.read_be32(img_path) != 0x00000803 || lbls.read_be32(lbl_path) != 0x00000801)
    throw IoError("bad IDX magic in " + dir.string());
  const uint32_t count = imgs.read_be32(img_path);
  const uint32_t rows = imgs.read_be32(img_path), cols = imgs.read_be32(img_path);
  if (lbls.read_be32(lbl_path) != count)
    throw IoError("MNIST image/label counts differ in " + dir.string());

  GlyphBank bank;
  std::vector<unsigned char> buf(static_cast<size_t>(rows) * cols);
  for (uint32_t i = 0; i < count; ++i) {
    unsigned char label = 0;
    imgs.read(buf.data(), static_cast<unsigned>(buf.size()), img_path);
    lbls.read(&label, 1, lbl_path);
    if (label > 9)
      throw IoError("MNIST label out of range in " + lbl_path.string());
    auto& slot = bank.by_digit[label];
    if (max_per_digit && slot.size() >= max_per_digit)
      continue;
    TensorF g({static_cast<int64_t>(rows), static_cast<int64_t>(cols)});
    for (size_t k = 0; k < buf.size(); ++k)
      g[static_cast<int64_t>(k)] = static_cast<float>(buf[k]) / 255.0f;
    slot.push_back(std::move(g));
  }
  return bank;
}

TensorF render_procedural_digit(int digit, Rng& rng, int size)
{
  auto strokes = digit_template(digit);

  const double theta = uniform(rng, -0.25, 0.25);
  const double sx = uniform(rng, 0.8, 1.05), sy = uniform(rng, 0.85, 1.05);
  const double shear = uniform(rng, -0.25, 0.25);
  const double tx = uniform(rng, -0.05, 0.05), ty = uniform(rng, -0.05, 0.05);
  const double half_width = uniform(rng, 0.045, 0.085);
  const double ct = std::cos(theta), st = std::sin(theta);

  // Unit box maps onto the central 20/28 of the canvas, like MNIST.
  const double box = size * 20.0 / 28.0, margin = size * 4.0 / 28.0;
  for (auto& line : strokes)
    for (auto& p : line) {
      double x = p.x - 0.5 + uniform(rng, -0.02, 0.02);
      double y = p.y - 0.5 + uniform(rng, -0.02, 0.02);
      x = sx * (x + shear * y);
      y = sy * y;
      const double rx = ct * x - st * y, ry = st * x + ct * y;
      p = {margin + box * (rx + 0.5 + tx), margin + box * (ry + 0.5 + ty)};
    }

  const double radius = half_width * box;
  TensorF out({size, size});
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) {
      const Pt c{x + 0.5, y + 0.5};
      double d = 1e9;
      for (const auto& line : strokes)
        for (size_t i = 0; i + 1 < line.size(); ++i)
          d = std::min(d, segment_distance(c, line[i], line[i + 1]));
      out[static_cast<int64_t>(y) * size + x] = static_cast<float>(std::clamp(radius - d + 0.5, 0.0, 1.0));
    }
  return out;
}

GlyphBank procedural_glyphs(size_t per_digit, uint64_t seed, int size)
{
  GlyphBank bank;
  for (int d = 0; d < 10; ++d) {
    auto& slot = bank.by_digit[static_cast<size_t>(d)];
    slot.reserve(per_digit);
    for (size_t i = 0; i < per_digit; ++i) {
      Rng rng(derive_seed(seed, {static_cast<uint64_t>(d), i}));
      slot.push_back(render_procedural_digit(d, rng, size));
    }
  }
  return bank;
}

} // namespace xtrans::data
