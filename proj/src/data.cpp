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

#include "xtrans/data.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <json.hpp>
#include <numeric>
#include <sstream>

#include "xtrans/image_io.hpp"

namespace xtrans::data {

using nlohmann::json;

std::string to_string(Domain d) { return d == Domain::A ? "A" : "B"; }
std::string to_string(Split s) { return s == Split::Train ? "train" : "test"; }
std::string to_string(DatasetKind k) { return k == DatasetKind::Single ? "single" : "multi"; }

Domain parse_domain(const std::string& s)
{
  if (s == "A" || s == "a")
    return Domain::A;
  if (s == "B" || s == "b")
    return Domain::B;
  throw InvalidArgument("unknown domain '" + s + "'");
}

Split parse_split(const std::string& s)
{
  if (s == "train")
    return Split::Train;
  if (s == "test")
    return Split::Test;
  throw InvalidArgument("unknown split '" + s + "'");
}

DatasetKind parse_kind(const std::string& s)
{
  if (s == "single")
    return DatasetKind::Single;
  if (s == "multi")
    return DatasetKind::Multi;
  throw InvalidArgument("unknown dataset kind '" + s + "'");
}

double LabeledCanvas::mask_coverage() const
{
  double on = 0;
  for (float v : fg_mask.values())
    on += v;
  return on / static_cast<double>(fg_mask.numel());
}

namespace {

TensorF resize_plane(const TensorF& hw, int side)
{
  auto chw = hw.reshaped({1, hw.dim(0), hw.dim(1)});
  auto out = io::resize_bilinear(chw, side, side);
  for (auto& v : out.values())
    v = std::clamp(v, 0.0f, 1.0f);
  return out.reshaped({side, side});
}

TensorF threshold(const TensorF& coverage)
{
  TensorF m(coverage.shape());
  for (int64_t i = 0; i < coverage.numel(); ++i)
    m[i] = coverage[i] >= kMaskThreshold ? 1.0f : 0.0f;
  return m;
}

void require_glyph(const TensorF& glyph)
{
  if (glyph.rank() != 2)
    throw InvalidArgument("glyph must be a (H, W) stencil, got " + shape_str(glyph.shape()));
  const bool empty = std::all_of(glyph.values().begin(), glyph.values().end(), [](float v) { return v <= 0.0f; });
  if (empty)
    throw InvalidArgument("glyph stencil is empty (all zeros)");
}

void finish_canvas(LabeledCanvas& c)
{
  c.fg_mask = threshold(c.coverage);
  const double cov = c.mask_coverage();
  if (!(cov > 0.0 && cov < 1.0))
    throw InvalidArgument("glyph mask covers " + std::to_string(cov) + " of the canvas; need strictly between 0 and 1");
}

ColorSpec black_white(Rng& rng)
{
  return coin(rng) ? ColorSpec{palette::white, palette::black} : ColorSpec{palette::black, palette::white};
}

ColorSpec distinct_primaries(Rng& rng)
{
  static constexpr std::array<Rgb, 3> prim{palette::red, palette::green, palette::blue};
  const auto pair = uniform_index(rng, 6);
  const auto fg = pair / 2;
  auto bg = pair % 2;
  if (bg >= fg)
    ++bg;
  return {prim[static_cast<size_t>(fg)], prim[static_cast<size_t>(bg)]};
}

json rgb_json(const Rgb& c) { return json::array({c.r, c.g, c.b}); }
Rgb rgb_from(const json& j) { return {j.at(0).get<float>(), j.at(1).get<float>(), j.at(2).get<float>()}; }

} // namespace

Rgb hsl_to_rgb(double h_deg, double s, double l)
{
  const double c = (1 - std::abs(2 * l - 1)) * s;
  const double hp = std::fmod(std::fmod(h_deg, 360.0) + 360.0, 360.0) / 60.0;
  const double x = c * (1 - std::abs(std::fmod(hp, 2.0) - 1));
  double r = 0, g = 0, b = 0;
  if (hp < 1)
    r = c, g = x;
  else if (hp < 2)
    r = x, g = c;
  else if (hp < 3)
    g = c, b = x;
  else if (hp < 4)
    g = x, b = c;
  else if (hp < 5)
    r = x, b = c;
  else
    r = c, b = x;
  const double m = l - c / 2;
  return {static_cast<float>(r + m), static_cast<float>(g + m), static_cast<float>(b + m)};
}

std::array<double, 3> rgb_to_hsl(const Rgb& c)
{
  const double r = c.r, g = c.g, b = c.b;
  const double mx = std::max({r, g, b}), mn = std::min({r, g, b});
  const double l = (mx + mn) / 2;
  const double d = mx - mn;
  if (d <= 0)
    return {0.0, 0.0, l};
  const double s = d / (1 - std::abs(2 * l - 1));
  double h;
  if (mx == r)
    h = 60 * std::fmod((g - b) / d, 6.0);
  else if (mx == g)
    h = 60 * ((b - r) / d + 2);
  else
    h = 60 * ((r - g) / d + 4);
  if (h < 0)
    h += 360;
  return {h, s, l};
}

namespace {
constexpr double kClassSaturation = 0.8;
constexpr double kClassLightness = 0.5;
} // namespace

Rgb class_color(int digit) { return perturbed_class_color(digit, 0.0, 0.0); }

Rgb perturbed_class_color(int digit, double dsat, double dlight)
{
  if (digit < 0 || digit > 9)
    throw InvalidArgument("digit must be in 0..9");
  return hsl_to_rgb(36.0 * digit, std::clamp(kClassSaturation + dsat, 0.0, 1.0),
                    std::clamp(kClassLightness + dlight, 0.0, 1.0));
}

TensorF compose(const TensorF& coverage, const ColorSpec& colors)
{
  const int64_t H = coverage.dim(0), W = coverage.dim(1), plane = H * W;
  TensorF out({3, H, W});
  const std::array<float, 3> fg{colors.foreground.r, colors.foreground.g, colors.foreground.b};
  const std::array<float, 3> bg{colors.background.r, colors.background.g, colors.background.b};
  for (int c = 0; c < 3; ++c)
    for (int64_t i = 0; i < plane; ++i) {
      const float a = coverage[i];
      out[c * plane + i] = a * fg[static_cast<size_t>(c)] + (1.0f - a) * bg[static_cast<size_t>(c)];
    }
  return out;
}

LabeledCanvas gen_single_A(const TensorF& glyph, uint64_t seed, int resolution, Split split)
{
  require_glyph(glyph);
  Rng rng(seed);
  LabeledCanvas c;
  c.kind = DatasetKind::Single;
  c.domain = Domain::A;
  c.split = split;
  c.coverage = resize_plane(glyph, resolution);
  finish_canvas(c);
  c.colors = {black_white(rng)};
  c.image = compose(c.coverage, c.colors[0]);
  return c;
}

LabeledCanvas gen_single_B(const TensorF& glyph, int digit_label, Split split, uint64_t seed, int resolution)
{
  if (digit_label < 0 || digit_label > 9)
    throw InvalidArgument("digit label must be in 0..9, got " + std::to_string(digit_label));
  require_glyph(glyph);
  Rng rng(seed);
  LabeledCanvas c;
  c.kind = DatasetKind::Single;
  c.domain = Domain::B;
  c.split = split;
  c.digit_labels = {digit_label};
  c.coverage = resize_plane(glyph, resolution);
  finish_canvas(c);
  if (split == Split::Train && digit_label >= 5)
    c.colors = {ColorSpec{palette::red, palette::green}};
  else
    c.colors = {distinct_primaries(rng)};
  c.image = compose(c.coverage, c.colors[0]);
  return c;
}

LabeledCanvas gen_multi(const GlyphBank& bank, Domain domain, uint64_t seed, int resolution, double jitter,
                        Split split)
{
  bank.require_complete();
  if (resolution % kGridSide != 0)
    throw InvalidArgument("multi-digit resolution must be divisible by 4");
  const int cell = resolution / kGridSide;
  Rng rng(seed);

  std::array<int, kGridSide * kGridSide> order{};
  std::iota(order.begin(), order.end(), 0);
  for (int i = 0; i < 10; ++i) {
    const auto j = i + static_cast<int>(uniform_index(rng, static_cast<int64_t>(order.size()) - i));
    std::swap(order[static_cast<size_t>(i)], order[static_cast<size_t>(j)]);
  }
  // digit d sits in cell order[d]; entries are stored sorted by cell.
  std::vector<std::pair<int, int>> placed;
  for (int d = 0; d < 10; ++d)
    placed.emplace_back(order[static_cast<size_t>(d)], d);
  std::sort(placed.begin(), placed.end());

  LabeledCanvas c;
  c.kind = DatasetKind::Multi;
  c.domain = domain;
  c.split = split;
  c.coverage = TensorF({resolution, resolution});

  ColorSpec canvas_colors = domain == Domain::A ? black_white(rng)
                                                : ColorSpec{palette::black, coin(rng) ? palette::white : palette::black};
  std::vector<TensorF> stencils;
  for (const auto& [cell_idx, digit] : placed) {
    const auto& pool = bank.by_digit[static_cast<size_t>(digit)];
    const auto& glyph = pool[static_cast<size_t>(uniform_index(rng, static_cast<int64_t>(pool.size())))];
    require_glyph(glyph);
    stencils.push_back(resize_plane(glyph, cell));
    ColorSpec spec = canvas_colors;
    if (domain == Domain::B) {
      const double ds = uniform(rng, -jitter, jitter);
      const double dl = uniform(rng, -jitter, jitter);
      spec.foreground = perturbed_class_color(digit, ds, dl);
    }
    c.cells.push_back(cell_idx);
    c.digit_labels.push_back(digit);
    c.colors.push_back(spec);
  }

  c.image = TensorF({3, resolution, resolution});
  const int64_t plane = static_cast<int64_t>(resolution) * resolution;
  for (int y = 0; y < resolution; ++y)
    for (int x = 0; x < resolution; ++x)
      for (int ch = 0; ch < 3; ++ch) {
        const Rgb& bg = canvas_colors.background;
        c.image[ch * plane + static_cast<int64_t>(y) * resolution + x] = ch == 0 ? bg.r : (ch == 1 ? bg.g : bg.b);
      }
  for (size_t i = 0; i < c.cells.size(); ++i) {
    const int cy = c.cells[i] / kGridSide, cx = c.cells[i] % kGridSide;
    const auto& fg = c.colors[i].foreground;
    const auto& bg = c.colors[i].background;
    for (int y = 0; y < cell; ++y)
      for (int x = 0; x < cell; ++x) {
        const float a = stencils[i][static_cast<int64_t>(y) * cell + x];
        const int64_t p = static_cast<int64_t>(cy * cell + y) * resolution + cx * cell + x;
        c.coverage[p] = a;
        c.image[p] = a * fg.r + (1.0f - a) * bg.r;
        c.image[plane + p] = a * fg.g + (1.0f - a) * bg.g;
        c.image[2 * plane + p] = a * fg.b + (1.0f - a) * bg.b;
      }
  }
  finish_canvas(c);
  return c;
}

LabeledCanvas make_reference_translation(const LabeledCanvas& source, const LabeledCanvas& exemplar)
{
  if (source.kind != DatasetKind::Single || exemplar.kind != DatasetKind::Single)
    throw InvalidArgument("make_reference_translation supports single-digit canvases only; "
                          "use make_reference_translation_multi");
  if (exemplar.colors.empty())
    throw InvalidArgument("exemplar has no color assignment");
  LabeledCanvas out = source;
  out.colors = {exemplar.colors[0]};
  out.domain = exemplar.domain;
  out.image = compose(source.coverage, exemplar.colors[0]);
  return out;
}

LabeledCanvas make_reference_translation_multi(const LabeledCanvas& source, const LabeledCanvas& exemplar)
{
  if (source.kind != DatasetKind::Multi || exemplar.kind != DatasetKind::Multi)
    throw InvalidArgument("make_reference_translation_multi expects multi-digit canvases");
  if (exemplar.colors.empty())
    throw InvalidArgument("exemplar has no color assignment");
  const int res = source.height();
  const int cell = res / kGridSide;
  const int64_t plane = static_cast<int64_t>(res) * res;
  const Rgb bg = exemplar.colors.front().background;

  LabeledCanvas out = source;
  out.domain = exemplar.domain;
  out.colors.clear();
  out.image = TensorF({3, res, res});
  for (int64_t p = 0; p < plane; ++p) {
    out.image[p] = bg.r;
    out.image[plane + p] = bg.g;
    out.image[2 * plane + p] = bg.b;
  }
  for (size_t i = 0; i < source.cells.size(); ++i) {
    const int digit = source.digit_labels[i];
    auto it = std::find(exemplar.digit_labels.begin(), exemplar.digit_labels.end(), digit);
    if (it == exemplar.digit_labels.end())
      throw InvalidArgument("exemplar lacks digit class " + std::to_string(digit));
    const Rgb fg = exemplar.colors[static_cast<size_t>(it - exemplar.digit_labels.begin())].foreground;
    out.colors.push_back({fg, bg});
    const int cy = source.cells[i] / kGridSide, cx = source.cells[i] % kGridSide;
    for (int y = 0; y < cell; ++y)
      for (int x = 0; x < cell; ++x) {
        const int64_t p = static_cast<int64_t>(cy * cell + y) * res + cx * cell + x;
        const float a = source.coverage[p];
        out.image[p] = a * fg.r + (1.0f - a) * bg.r;
        out.image[plane + p] = a * fg.g + (1.0f - a) * bg.g;
        out.image[2 * plane + p] = a * fg.b + (1.0f - a) * bg.b;
      }
  }
  return out;
}

LabeledCanvas reference_translation(const LabeledCanvas& source, const LabeledCanvas& exemplar)
{
  return source.kind == DatasetKind::Single ? make_reference_translation(source, exemplar)
                                            : make_reference_translation_multi(source, exemplar);
}

Transform random_transform(Rng& rng)
{
  Transform t;
  t.flip = coin(rng);
  t.dy = static_cast<int>(uniform_index(rng, 2 * kCropPad + 1)) - kCropPad;
  t.dx = static_cast<int>(uniform_index(rng, 2 * kCropPad + 1)) - kCropPad;
  return t;
}

TensorF apply_transform(const TensorF& t, const Transform& tr)
{
  if (t.rank() != 2 && t.rank() != 3)
    throw InvalidArgument("apply_transform expects (H, W) or (C, H, W)");
  const int64_t C = t.rank() == 3 ? t.dim(0) : 1;
  const int64_t H = t.dim(t.rank() - 2), W = t.dim(t.rank() - 1);
  if (std::abs(tr.dy) > kCropPad || std::abs(tr.dx) > kCropPad)
    throw InvalidArgument("crop offset exceeds padding");
  auto reflect = [](int64_t i, int64_t n) {
    if (i < 0)
      return -i;
    if (i >= n)
      return 2 * n - 2 - i;
    return i;
  };
  TensorF out(t.shape());
  for (int64_t c = 0; c < C; ++c)
    for (int64_t y = 0; y < H; ++y)
      for (int64_t x = 0; x < W; ++x) {
        const int64_t sy = reflect(y + tr.dy, H);
        int64_t sx = reflect(x + tr.dx, W);
        if (tr.flip)
          sx = W - 1 - sx;
        out[(c * H + y) * W + x] = t[(c * H + sy) * W + sx];
      }
  return out;
}

void augment(std::vector<LabeledCanvas>& batch, Rng& rng)
{
  for (auto& c : batch) {
    const auto tr = random_transform(rng);
    c.image = apply_transform(c.image, tr);
    c.coverage = apply_transform(c.coverage, tr);
    c.fg_mask = apply_transform(c.fg_mask, tr);
  }
}

void augment(TensorF& batch, Rng& rng)
{
  for (int64_t n = 0; n < batch.dim(0); ++n) {
    auto img = unstack(batch, n);
    img = apply_transform(img, random_transform(rng));
    std::copy(img.data(), img.data() + img.numel(), batch.data() + n * img.numel());
  }
}

GlyphBank glyph_bank_for(const DatasetConfig& config, Split split)
{
  if (!config.mnist_dir.empty())
    return load_mnist_idx(config.mnist_dir, split == Split::Test);
  const uint64_t tag = split == Split::Train ? 1 : 2;
  return procedural_glyphs(static_cast<size_t>(config.glyphs_per_digit), derive_seed(config.seed, {0x676c797068ULL, tag}));
}

LabeledCanvas generate_canvas(const DatasetConfig& config, const GlyphBank& bank, Domain domain, Split split,
                              int64_t index)
{
  Rng rng(derive_seed(config.seed, {static_cast<uint64_t>(config.kind), static_cast<uint64_t>(domain),
                                    static_cast<uint64_t>(split), static_cast<uint64_t>(index)}));
  if (config.kind == DatasetKind::Multi)
    return gen_multi(bank, domain, rng(), config.resolution, config.jitter, split);

  const int digit = static_cast<int>(uniform_index(rng, 10));
  const auto& pool = bank.by_digit[static_cast<size_t>(digit)];
  if (pool.empty())
    throw InvalidArgument("glyph bank has no stencil for digit " + std::to_string(digit));
  const auto& glyph = pool[static_cast<size_t>(uniform_index(rng, static_cast<int64_t>(pool.size())))];
  const uint64_t canvas_seed = rng();
  LabeledCanvas c = domain == Domain::A ? gen_single_A(glyph, canvas_seed, config.resolution, split)
                                        : gen_single_B(glyph, digit, split, canvas_seed, config.resolution);
  c.digit_labels = {digit};
  return c;
}

std::vector<LabeledCanvas> generate_split(const DatasetConfig& config, Domain domain, Split split)
{
  const auto bank = glyph_bank_for(config, split);
  const int64_t n = split == Split::Train ? config.train_size : config.test_size;
  std::vector<LabeledCanvas> out;
  out.reserve(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i)
    out.push_back(generate_canvas(config, bank, domain, split, i));
  return out;
}

std::filesystem::path write_split(const std::filesystem::path& root, const std::vector<LabeledCanvas>& canvases,
                                  DatasetKind kind, Domain domain, Split split)
{
  const auto dir = root / to_string(kind) / to_string(domain) / to_string(split);
  std::filesystem::create_directories(dir);
  std::ofstream meta(dir / "metadata.jsonl");
  if (!meta)
    throw IoError("cannot write " + (dir / "metadata.jsonl").string());
  for (size_t i = 0; i < canvases.size(); ++i) {
    const auto& c = canvases[i];
    std::ostringstream stem;
    stem << std::setw(6) << std::setfill('0') << i;
    const std::string image_name = stem.str() + ".png", mask_name = stem.str() + "_mask.png";
    io::write_png(dir / image_name, io::to_raster(c.image));
    io::write_png(dir / mask_name, io::to_raster(c.coverage.reshaped({1, c.coverage.dim(0), c.coverage.dim(1)})));
    json colors = json::array();
    for (const auto& spec : c.colors)
      colors.push_back({{"fg", rgb_json(spec.foreground)}, {"bg", rgb_json(spec.background)}});
    json line = {{"file", image_name},       {"mask", mask_name},         {"digit_labels", c.digit_labels},
                 {"colors", colors},         {"cells", c.cells},          {"domain", to_string(c.domain)},
                 {"split", to_string(c.split)}, {"kind", to_string(c.kind)}, {"resolution", c.height()}};
    meta << line.dump() << "\n";
  }
  return dir;
}

std::vector<LabeledCanvas> read_split(const std::filesystem::path& split_dir)
{
  std::ifstream meta(split_dir / "metadata.jsonl");
  if (!meta)
    throw IoError("no metadata.jsonl in " + split_dir.string() + "; ground-truth masks are required");
  std::vector<LabeledCanvas> out;
  std::string line;
  while (std::getline(meta, line)) {
    if (line.empty())
      continue;
    const auto j = json::parse(line);
    LabeledCanvas c;
    c.image = io::to_rgb(io::to_tensor(io::read_image(split_dir / j.at("file").get<std::string>())));
    auto cov = io::to_tensor(io::read_image(split_dir / j.at("mask").get<std::string>()));
    c.coverage = cov.reshaped({cov.dim(1), cov.dim(2)});
    c.fg_mask = threshold(c.coverage);
    for (const auto& spec : j.at("colors"))
      c.colors.push_back({rgb_from(spec.at("fg")), rgb_from(spec.at("bg"))});
    c.digit_labels = j.at("digit_labels").get<std::vector<int>>();
    c.cells = j.at("cells").get<std::vector<int>>();
    c.domain = parse_domain(j.at("domain").get<std::string>());
    c.split = parse_split(j.at("split").get<std::string>());
    c.kind = parse_kind(j.at("kind").get<std::string>());
    out.push_back(std::move(c));
  }
  return out;
}

ImageFolder load_image_folder(const std::filesystem::path& dir, int resolution)
{
  if (!std::filesystem::is_directory(dir))
    throw IoError("not a directory: " + dir.string());
  std::vector<std::filesystem::path> entries;
  for (const auto& e : std::filesystem::directory_iterator(dir))
    if (e.is_regular_file())
      entries.push_back(e.path());
  std::sort(entries.begin(), entries.end(),
            [](const auto& a, const auto& b) { return a.filename().string() < b.filename().string(); });
  ImageFolder folder;
  for (const auto& p : entries) {
    try {
      auto img = io::to_rgb(io::to_tensor(io::read_image(p)));
      folder.images.push_back(io::resize_bilinear(img, resolution, resolution));
      folder.files.push_back(p);
    } catch (const IoError& e) {
      spdlog::warn("skipping {}: {}", p.string(), e.what());
    }
  }
  if (folder.images.empty())
    throw IoError("no decodable images in " + dir.string());
  return folder;
}

std::vector<TensorF> images_of(const std::vector<LabeledCanvas>& canvases)
{
  std::vector<TensorF> out;
  out.reserve(canvases.size());
  for (const auto& c : canvases)
    out.push_back(c.image);
  return out;
}

TensorF stack(const std::vector<const TensorF*>& images)
{
  if (images.empty())
    throw InvalidArgument("stack: no images");
  const Shape& s = images.front()->shape();
  if (s.size() != 3)
    throw InvalidArgument("stack: expected (C, H, W) images");
  TensorF out({static_cast<int64_t>(images.size()), s[0], s[1], s[2]});
  const int64_t each = images.front()->numel();
  for (size_t i = 0; i < images.size(); ++i) {
    if (images[i]->shape() != s)
      throw InvalidArgument("stack: inconsistent image shapes");
    std::copy(images[i]->data(), images[i]->data() + each, out.data() + static_cast<int64_t>(i) * each);
  }
  return out;
}

TensorF stack(const std::vector<TensorF>& images)
{
  std::vector<const TensorF*> ptrs;
  for (const auto& i : images)
    ptrs.push_back(&i);
  return stack(ptrs);
}

TensorF unstack(const TensorF& batch, int64_t n)
{
  const int64_t each = batch.numel() / batch.dim(0);
  TensorF out({batch.dim(1), batch.dim(2), batch.dim(3)});
  std::copy(batch.data() + n * each, batch.data() + (n + 1) * each, out.data());
  return out;
}

UnpairedBatchIterator::UnpairedBatchIterator(const std::vector<TensorF>& domain_a, const std::vector<TensorF>& domain_b,
                                             int batch_size, uint64_t seed, bool augment)
  : a_(&domain_a), b_(&domain_b), batch_size_(batch_size), augment_(augment), rng_(seed)
{
  if (batch_size < 1)
    throw InvalidArgument("batch size must be at least 1");
  if (domain_a.empty() || domain_b.empty())
    throw InvalidArgument("both domains need at least one image");
}

TensorF UnpairedBatchIterator::draw(const std::vector<TensorF>& pool)
{
  std::vector<const TensorF*> picks;
  for (int i = 0; i < batch_size_; ++i)
    picks.push_back(&pool[static_cast<size_t>(uniform_index(rng_, static_cast<int64_t>(pool.size())))]);
  auto batch = stack(picks);
  if (augment_)
    augment(batch, rng_);
  return batch;
}

std::pair<TensorF, TensorF> UnpairedBatchIterator::next()
{
  auto a = draw(*a_);
  auto b = draw(*b_);
  return {std::move(a), std::move(b)};
}

} // namespace xtrans::data
