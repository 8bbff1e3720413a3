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

#include "xtrans/eval.hpp"

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <numeric>
#include <unordered_map>

#include "xtrans/error.hpp"
#include "xtrans/ops.hpp"
#include "xtrans/random.hpp"

namespace xtrans::eval {

using data::LabeledCanvas;
using nn::Direction;

namespace {

uint64_t content_hash(const TensorF& t)
{
  uint64_t h = 0xcbf29ce484222325ULL;
  const auto* bytes = reinterpret_cast<const unsigned char*>(t.data());
  for (size_t i = 0; i < static_cast<size_t>(t.numel()) * sizeof(float); ++i) {
    h ^= bytes[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

bool is_reconstruction(Direction dir) { return dir == Direction::AtoA || dir == Direction::BtoB; }

const std::vector<LabeledCanvas>& pool_of(data::Domain d, const std::vector<LabeledCanvas>& a,
                                          const std::vector<LabeledCanvas>& b)
{
  return d == data::Domain::A ? a : b;
}

void require_masks(const std::vector<LabeledCanvas>& pool)
{
  for (const auto& c : pool)
    if (c.coverage.numel() == 0 || c.fg_mask.numel() == 0 || c.colors.empty())
      throw InvalidArgument("evaluation needs ground-truth masks and colors; this dataset has none");
}

TensorF row(const TensorF& batch, int64_t i)
{
  const Shape s{batch.dim(1), batch.dim(2), batch.dim(3)};
  TensorF out(s);
  const int64_t each = out.numel();
  std::copy(batch.data() + i * each, batch.data() + (i + 1) * each, out.data());
  return out;
}

TensorF slice(const TensorF& batch, int64_t start, int64_t end)
{
  Shape s = batch.shape();
  s[0] = end - start;
  TensorF out(s);
  const int64_t each = batch.numel() / batch.dim(0);
  std::copy(batch.data() + start * each, batch.data() + end * each, out.data());
  return out;
}

struct Pairs
{
  const std::vector<LabeledCanvas>* sources;
  const std::vector<LabeledCanvas>* exemplars;
  std::vector<int64_t> exemplar_index; // per source i in [0, n)
};

Pairs make_pairs(const std::vector<LabeledCanvas>& test_a, const std::vector<LabeledCanvas>& test_b, Direction dir,
                 uint64_t seed, int64_t pairs)
{
  Pairs p;
  p.sources = &pool_of(nn::source_of(dir), test_a, test_b);
  p.exemplars = &pool_of(nn::target_of(dir), test_a, test_b);
  if (p.sources->empty() || p.exemplars->empty())
    throw InvalidArgument("evaluation needs non-empty test sets for both domains involved");
  require_masks(*p.sources);
  require_masks(*p.exemplars);
  if (is_reconstruction(dir)) {
    const int64_t n = pairs > 0 ? std::min<int64_t>(pairs, static_cast<int64_t>(p.sources->size()))
                                : static_cast<int64_t>(p.sources->size());
    p.exemplar_index.resize(static_cast<size_t>(n));
    std::iota(p.exemplar_index.begin(), p.exemplar_index.end(), 0);
  } else {
    p.exemplar_index = evaluation_pairing(static_cast<int64_t>(p.sources->size()),
                                          static_cast<int64_t>(p.exemplars->size()), dir, seed, pairs);
  }
  return p;
}

/// Runs the translation over all pairs in chunks and hands each output to `visit`.
template <class Visit>
void for_each_output(const TranslateFn& translate, const Pairs& p, Direction dir, Visit&& visit)
{
  constexpr int64_t kChunk = 64;
  const int64_t n = static_cast<int64_t>(p.exemplar_index.size());
  for (int64_t start = 0; start < n; start += kChunk) {
    const int64_t end = std::min(n, start + kChunk);
    std::vector<const TensorF*> src, ex;
    for (int64_t i = start; i < end; ++i) {
      src.push_back(&(*p.sources)[static_cast<size_t>(i)].image);
      ex.push_back(&(*p.exemplars)[static_cast<size_t>(p.exemplar_index[static_cast<size_t>(i)])].image);
    }
    const TensorF out = translate(data::stack(src), data::stack(ex), dir);
    if (out.rank() != 4 || out.dim(0) != end - start)
      throw InvalidArgument("translation returned " + shape_str(out.shape()) + " for a batch of " +
                            std::to_string(end - start));
    for (int64_t i = start; i < end; ++i)
      visit(i, row(out, i - start));
  }
}

std::array<double, 3> as_array(const data::Rgb& c) { return {c.r, c.g, c.b}; }

} // namespace

TranslateFn model_translator(nn::Translator<float>& model, int64_t batch_size)
{
  if (batch_size < 1)
    throw InvalidArgument("translation batch size must be positive");
  return [&model, batch_size](const TensorF& sources, const TensorF& exemplars, Direction dir) {
    ag::NoGradGuard guard;
    const bool was_training = model.training();
    model.set_training(false);
    const int64_t n = sources.dim(0);
    Shape shape = sources.shape();
    TensorF out(shape);
    const int64_t each = sources.numel() / n;
    for (int64_t start = 0; start < n; start += batch_size) {
      const int64_t end = std::min(n, start + batch_size);
      const auto y = model.translate(ag::Var<float>(slice(sources, start, end)),
                                     ag::Var<float>(slice(exemplars, start, end)), dir);
      std::copy(y.value().data(), y.value().data() + y.numel(), out.data() + start * each);
    }
    model.set_training(was_training);
    return out;
  };
}

TranslateFn reference_oracle(const std::vector<LabeledCanvas>& pool_a, const std::vector<LabeledCanvas>& pool_b)
{
  using Index = std::unordered_multimap<uint64_t, const LabeledCanvas*>;
  auto index = std::make_shared<std::array<Index, 2>>();
  for (const auto& c : pool_a)
    (*index)[0].emplace(content_hash(c.image), &c);
  for (const auto& c : pool_b)
    (*index)[1].emplace(content_hash(c.image), &c);
  auto find = [index](const TensorF& image, data::Domain d) -> const LabeledCanvas& {
    const auto& m = (*index)[static_cast<size_t>(d)];
    auto [lo, hi] = m.equal_range(content_hash(image));
    for (auto it = lo; it != hi; ++it)
      if (it->second->image == image)
        return *it->second;
    throw InvalidArgument("reference oracle: image is not in the " + data::to_string(d) + " pool");
  };
  return [find](const TensorF& sources, const TensorF& exemplars, Direction dir) {
    TensorF out(sources.shape());
    const int64_t each = sources.numel() / sources.dim(0);
    for (int64_t i = 0; i < sources.dim(0); ++i) {
      const auto& src = find(row(sources, i), nn::source_of(dir));
      const TensorF y = is_reconstruction(dir)
                          ? src.image
                          : data::reference_translation(src, find(row(exemplars, i), nn::target_of(dir))).image;
      std::copy(y.data(), y.data() + each, out.data() + i * each);
    }
    return out;
  };
}

std::vector<int64_t> evaluation_pairing(int64_t sources, int64_t exemplars, Direction dir, uint64_t seed,
                                        int64_t pairs)
{
  if (sources < 1 || exemplars < 1)
    throw InvalidArgument("evaluation pairing needs non-empty pools");
  const int64_t n = pairs > 0 ? std::min(pairs, sources) : sources;
  Rng rng(derive_seed(seed, {0x70616972ULL, static_cast<uint64_t>(dir)}));
  std::vector<int64_t> out(static_cast<size_t>(n));
  for (auto& e : out)
    e = uniform_index(rng, exemplars);
  return out;
}

SSIMReport summarize(const std::string& direction, std::vector<double> per_sample)
{
  SSIMReport r;
  r.direction = direction;
  r.n = static_cast<int64_t>(per_sample.size());
  if (r.n > 0) {
    r.mean = std::accumulate(per_sample.begin(), per_sample.end(), 0.0) / static_cast<double>(r.n);
    double ss = 0;
    for (double v : per_sample)
      ss += (v - r.mean) * (v - r.mean);
    r.std = std::sqrt(ss / static_cast<double>(r.n));
  }
  r.per_sample = std::move(per_sample);
  return r;
}

SSIMReport eval_ssim(const TranslateFn& translate, const std::vector<LabeledCanvas>& test_a,
                     const std::vector<LabeledCanvas>& test_b, Direction dir, uint64_t seed, int64_t pairs)
{
  const auto p = make_pairs(test_a, test_b, dir, seed, pairs);
  std::vector<double> scores(p.exemplar_index.size());
  for_each_output(translate, p, dir, [&](int64_t i, const TensorF& y) {
    const auto& src = (*p.sources)[static_cast<size_t>(i)];
    const TensorF reference =
      is_reconstruction(dir)
        ? src.image
        : data::reference_translation(src, (*p.exemplars)[static_cast<size_t>(p.exemplar_index[static_cast<size_t>(i)])])
            .image;
    scores[static_cast<size_t>(i)] = ops::ssim(y, reference);
  });
  return summarize(nn::to_string(dir), std::move(scores));
}

int nearest_palette_color(const std::array<double, 3>& rgb)
{
  static const std::array<data::Rgb, 5> colors{data::palette::red, data::palette::green, data::palette::blue,
                                               data::palette::black, data::palette::white};
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (int k = 0; k < 5; ++k) {
    const auto c = as_array(colors[static_cast<size_t>(k)]);
    const double d = (rgb[0] - c[0]) * (rgb[0] - c[0]) + (rgb[1] - c[1]) * (rgb[1] - c[1]) +
                     (rgb[2] - c[2]) * (rgb[2] - c[2]);
    if (d < best_d) {
      best_d = d;
      best = k;
    }
  }
  return best;
}

ControlReport exemplar_control_score(const TranslateFn& translate, const std::vector<LabeledCanvas>& test_a,
                                     const std::vector<LabeledCanvas>& test_b, Direction dir, uint64_t seed,
                                     int64_t pairs)
{
  for (const auto* pool : {&test_a, &test_b})
    for (const auto& c : *pool)
      if (c.kind != data::DatasetKind::Single)
        throw InvalidArgument("the exemplar control score is defined for single-digit test sets only");
  const auto p = make_pairs(test_a, test_b, dir, seed, pairs);
  ControlReport r;
  r.direction = nn::to_string(dir);
  r.matched.assign(p.exemplar_index.size(), false);
  for_each_output(translate, p, dir, [&](int64_t i, const TensorF& y) {
    const auto& src = (*p.sources)[static_cast<size_t>(i)];
    const auto& ex = (*p.exemplars)[static_cast<size_t>(p.exemplar_index[static_cast<size_t>(i)])];
    const int64_t hw = src.fg_mask.numel();
    std::array<double, 3> fg{}, bg{};
    int64_t nf = 0;
    for (int64_t k = 0; k < hw; ++k) {
      const bool is_fg = src.fg_mask[k] > 0.5f;
      auto& acc = is_fg ? fg : bg;
      for (int ch = 0; ch < 3; ++ch)
        acc[static_cast<size_t>(ch)] += y[ch * hw + k];
      nf += is_fg ? 1 : 0;
    }
    const int64_t nb = hw - nf;
    if (nf == 0 || nb == 0)
      return;
    for (int ch = 0; ch < 3; ++ch) {
      fg[static_cast<size_t>(ch)] /= static_cast<double>(nf);
      bg[static_cast<size_t>(ch)] /= static_cast<double>(nb);
    }
    r.matched[static_cast<size_t>(i)] = nearest_palette_color(fg) == nearest_palette_color(as_array(ex.colors[0].foreground)) &&
                                         nearest_palette_color(bg) == nearest_palette_color(as_array(ex.colors[0].background));
  });
  r.n = static_cast<int64_t>(r.matched.size());
  r.score = r.n == 0 ? 0.0 : static_cast<double>(std::count(r.matched.begin(), r.matched.end(), true)) /
                               static_cast<double>(r.n);
  return r;
}

std::vector<double> pca(const std::vector<double>& x, int64_t n, int64_t d, int dims)
{
  if (n < 1 || d < 1 || static_cast<int64_t>(x.size()) != n * d)
    throw InvalidArgument("pca: data size does not match n x d");
  if (dims < 1 || dims > std::min(n, d))
    throw InvalidArgument(fmt::format("pca: cannot keep {} components of {} samples in {} dimensions", dims, n, d));
  using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  Mat xc = Eigen::Map<const Mat>(x.data(), n, d);
  xc.rowwise() -= xc.colwise().mean();

  // Top components via whichever of the two Gram matrices is smaller.
  Mat loadings(d, dims);
  if (n <= d) {
    const Eigen::MatrixXd k = xc * xc.transpose();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(k);
    for (int j = 0; j < dims; ++j) {
      const int64_t col = n - 1 - j;
      const double lambda = es.eigenvalues()(col);
      if (lambda <= 1e-12 * std::max(1.0, es.eigenvalues()(n - 1))) {
        loadings.col(j).setZero();
        continue;
      }
      loadings.col(j) = xc.transpose() * es.eigenvectors().col(col) / std::sqrt(lambda);
    }
  } else {
    const Eigen::MatrixXd c = xc.transpose() * xc;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(c);
    for (int j = 0; j < dims; ++j)
      loadings.col(j) = es.eigenvectors().col(d - 1 - j);
  }
  for (int j = 0; j < dims; ++j) {
    Eigen::Index at = 0;
    loadings.col(j).cwiseAbs().maxCoeff(&at);
    if (loadings(at, j) < 0)
      loadings.col(j) = -loadings.col(j);
  }
  const Mat proj = xc * loadings;
  return {proj.data(), proj.data() + proj.size()};
}

std::vector<std::array<double, 2>> tsne(const std::vector<double>& x, int64_t n, int64_t d, uint64_t seed,
                                        const TsneOptions& options)
{
  if (n < 2)
    throw InvalidArgument("t-SNE needs at least two points");
  double perplexity = options.perplexity;
  if (3 * perplexity > static_cast<double>(n - 1)) {
    perplexity = std::max(1.0, static_cast<double>(n - 1) / 3.0);
    spdlog::warn("t-SNE perplexity {} is too large for {} points; using {:.3g}", options.perplexity, n, perplexity);
  }
  const auto N = static_cast<size_t>(n);

  std::vector<double> dist(N * N, 0.0);
  for (size_t i = 0; i < N; ++i)
    for (size_t j = i + 1; j < N; ++j) {
      double s = 0;
      for (int64_t k = 0; k < d; ++k) {
        const double diff = x[i * static_cast<size_t>(d) + static_cast<size_t>(k)] -
                            x[j * static_cast<size_t>(d) + static_cast<size_t>(k)];
        s += diff * diff;
      }
      dist[i * N + j] = dist[j * N + i] = s;
    }

  // Conditional affinities with a per-point bandwidth matching the perplexity.
  std::vector<double> p(N * N, 0.0);
  const double target = std::log(perplexity);
  for (size_t i = 0; i < N; ++i) {
    double beta = 1.0, lo = -std::numeric_limits<double>::infinity(), hi = std::numeric_limits<double>::infinity();
    double dmin = std::numeric_limits<double>::infinity();
    for (size_t j = 0; j < N; ++j)
      if (j != i)
        dmin = std::min(dmin, dist[i * N + j]);
    for (int iter = 0; iter < 100; ++iter) {
      double sum = 0, dot = 0;
      for (size_t j = 0; j < N; ++j) {
        if (j == i)
          continue;
        const double w = std::exp(-beta * (dist[i * N + j] - dmin));
        p[i * N + j] = w;
        sum += w;
        dot += w * (dist[i * N + j] - dmin);
      }
      const double entropy = std::log(sum) + beta * dot / sum;
      for (size_t j = 0; j < N; ++j)
        p[i * N + j] /= sum;
      const double diff = entropy - target;
      if (std::abs(diff) < 1e-5)
        break;
      if (diff > 0) {
        lo = beta;
        beta = std::isinf(hi) ? beta * 2 : (beta + hi) / 2;
      } else {
        hi = beta;
        beta = std::isinf(lo) ? beta / 2 : (beta + lo) / 2;
      }
    }
  }
  for (size_t i = 0; i < N; ++i)
    for (size_t j = i + 1; j < N; ++j) {
      const double v = std::max((p[i * N + j] + p[j * N + i]) / (2.0 * static_cast<double>(n)), 1e-12);
      p[i * N + j] = p[j * N + i] = v;
    }

  Rng rng(derive_seed(seed, {0x74736e65ULL}));
  std::vector<std::array<double, 2>> y(N), velocity(N, {0, 0}), gains(N, {1, 1}), grad(N);
  for (auto& pt : y)
    pt = {1e-4 * normal(rng), 1e-4 * normal(rng)};

  std::vector<double> num(N * N);
  for (int iter = 0; iter < options.iterations; ++iter) {
    const double exaggeration = iter < options.exaggeration_iterations ? options.early_exaggeration : 1.0;
    const double momentum = iter < options.exaggeration_iterations ? 0.5 : 0.8;
    double z = 0;
    for (size_t i = 0; i < N; ++i)
      for (size_t j = i + 1; j < N; ++j) {
        const double dx = y[i][0] - y[j][0], dy = y[i][1] - y[j][1];
        const double q = 1.0 / (1.0 + dx * dx + dy * dy);
        num[i * N + j] = num[j * N + i] = q;
        z += 2 * q;
      }
    for (size_t i = 0; i < N; ++i) {
      double gx = 0, gy = 0;
      for (size_t j = 0; j < N; ++j) {
        if (j == i)
          continue;
        const double q = num[i * N + j];
        const double m = (exaggeration * p[i * N + j] - q / z) * q;
        gx += m * (y[i][0] - y[j][0]);
        gy += m * (y[i][1] - y[j][1]);
      }
      grad[i] = {4 * gx, 4 * gy};
    }
    std::array<double, 2> mean{0, 0};
    for (size_t i = 0; i < N; ++i) {
      for (size_t k = 0; k < 2; ++k) {
        const bool same_sign = (grad[i][k] > 0) == (velocity[i][k] > 0);
        gains[i][k] = std::max(0.01, same_sign ? gains[i][k] * 0.8 : gains[i][k] + 0.2);
        velocity[i][k] = momentum * velocity[i][k] - options.learning_rate * gains[i][k] * grad[i][k];
        y[i][k] += velocity[i][k];
        mean[k] += y[i][k];
      }
    }
    for (auto& pt : y)
      for (size_t k = 0; k < 2; ++k)
        pt[k] -= mean[k] / static_cast<double>(n);
  }
  return y;
}

EmbeddingSet embed_tsne(const std::vector<TensorF>& real, const std::vector<TensorF>& generated, uint64_t seed,
                        const TsneOptions& options)
{
  if (real.empty() || generated.empty())
    throw InvalidArgument("embed_tsne needs non-empty real and generated sets");
  struct Sample
  {
    const TensorF* image;
    int label;
    uint64_t hash;
  };
  std::vector<Sample> samples;
  for (const auto& t : real)
    samples.push_back({&t, 0, content_hash(t)});
  for (const auto& t : generated)
    samples.push_back({&t, 1, content_hash(t)});
  const int64_t d = real.front().numel();
  for (const auto& s : samples)
    if (s.image->numel() != d)
      throw InvalidArgument("embed_tsne: all images must have the same size");

  std::vector<size_t> order(samples.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    const auto &sa = samples[a], &sb = samples[b];
    if (sa.hash != sb.hash)
      return sa.hash < sb.hash;
    if (sa.label != sb.label)
      return sa.label < sb.label;
    return std::lexicographical_compare(sa.image->data(), sa.image->data() + d, sb.image->data(),
                                        sb.image->data() + d);
  });

  const auto n = static_cast<int64_t>(samples.size());
  std::vector<double> x(static_cast<size_t>(n * d));
  for (int64_t r = 0; r < n; ++r) {
    const float* src = samples[order[static_cast<size_t>(r)]].image->data();
    std::copy(src, src + d, x.begin() + r * d);
  }
  int dims = options.pca_dims;
  const int max_dims = static_cast<int>(std::min<int64_t>(n, d));
  if (dims > max_dims) {
    spdlog::warn("only {} samples for PCA to {} dimensions; using {}", n, dims, max_dims);
    dims = max_dims;
  }
  const auto reduced = pca(x, n, d, dims);
  const auto y = tsne(reduced, n, dims, seed, options);

  EmbeddingSet e;
  e.seed = seed;
  e.points.resize(samples.size());
  e.labels.resize(samples.size());
  for (size_t r = 0; r < order.size(); ++r) {
    e.points[order[r]] = y[r];
    e.labels[order[r]] = samples[order[r]].label;
  }
  return e;
}

PermutationTest permutation_test(const EmbeddingSet& e, uint64_t seed, int permutations)
{
  const size_t n = e.points.size();
  if (n != e.labels.size())
    throw InvalidArgument("embedding points and labels differ in length");
  const auto n_gen = static_cast<size_t>(std::count(e.labels.begin(), e.labels.end(), 1));
  if (n_gen == 0 || n_gen == n)
    throw InvalidArgument("permutation test needs both real and generated points");
  if (permutations < 1)
    throw InvalidArgument("permutation test needs at least one permutation");

  std::vector<double> dist(n * n);
  for (size_t i = 0; i < n; ++i)
    for (size_t j = 0; j < n; ++j)
      dist[i * n + j] = std::hypot(e.points[i][0] - e.points[j][0], e.points[i][1] - e.points[j][1]);

  const double nx = static_cast<double>(n - n_gen), ny = static_cast<double>(n_gen);
  auto energy = [&](const std::vector<int>& labels) {
    double xy = 0, xx = 0, yy = 0;
    for (size_t i = 0; i < n; ++i)
      for (size_t j = i + 1; j < n; ++j) {
        const double v = dist[i * n + j];
        if (labels[i] != labels[j])
          xy += v;
        else if (labels[i] == 0)
          xx += 2 * v;
        else
          yy += 2 * v;
      }
    return 2 * xy / (nx * ny) - xx / (nx * nx) - yy / (ny * ny);
  };

  PermutationTest t;
  t.permutations = permutations;
  t.statistic = energy(e.labels);
  Rng rng(derive_seed(seed, {0x7065726dULL}));
  std::vector<int> labels = e.labels;
  int at_least = 0;
  const double tol = 1e-12 * std::max(1.0, std::abs(t.statistic));
  for (int k = 0; k < permutations; ++k) {
    for (size_t i = n - 1; i > 0; --i)
      std::swap(labels[i], labels[static_cast<size_t>(uniform_index(rng, static_cast<int64_t>(i + 1)))]);
    if (energy(labels) >= t.statistic - tol)
      ++at_least;
  }
  t.p_value = (1.0 + at_least) / (1.0 + permutations);
  return t;
}

void write_embedding_csv(const std::filesystem::path& path, const EmbeddingSet& e)
{
  std::ofstream out(path);
  if (!out)
    throw IoError("cannot write " + path.string());
  out << "x,y,label\n";
  for (size_t i = 0; i < e.points.size(); ++i)
    out << fmt::format("{:.17g},{:.17g},{}\n", e.points[i][0], e.points[i][1],
                       e.labels[i] == 0 ? "real" : "generated");
  if (!out)
    throw IoError("failed writing " + path.string());
}

namespace {

void put_pixel(io::Raster& r, int x, int y, std::array<uint8_t, 3> rgb)
{
  if (x < 0 || y < 0 || x >= r.width || y >= r.height)
    return;
  for (int c = 0; c < r.channels; ++c)
    r.pixels[static_cast<size_t>((y * r.width + x) * r.channels + c)] = rgb[static_cast<size_t>(std::min(c, 2))];
}

io::Raster blank(int width, int height, uint8_t value = 255)
{
  io::Raster r;
  r.width = width;
  r.height = height;
  r.channels = 3;
  r.pixels.assign(static_cast<size_t>(width) * static_cast<size_t>(height) * 3, value);
  return r;
}

// 5x7 bitmaps, one byte per row, bit 4 is the leftmost column.
const std::map<char, std::array<uint8_t, 7>>& font()
{
  static const std::map<char, std::array<uint8_t, 7>> glyphs{
    {' ', {0, 0, 0, 0, 0, 0, 0}},
    {'0', {0x0E, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0E}},
    {'1', {0x04, 0x0C, 0x04, 0x04, 0x04, 0x04, 0x0E}},
    {'2', {0x0E, 0x11, 0x01, 0x02, 0x04, 0x08, 0x1F}},
    {'3', {0x1F, 0x02, 0x04, 0x02, 0x01, 0x11, 0x0E}},
    {'4', {0x02, 0x06, 0x0A, 0x12, 0x1F, 0x02, 0x02}},
    {'5', {0x1F, 0x10, 0x1E, 0x01, 0x01, 0x11, 0x0E}},
    {'6', {0x06, 0x08, 0x10, 0x1E, 0x11, 0x11, 0x0E}},
    {'7', {0x1F, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08}},
    {'8', {0x0E, 0x11, 0x11, 0x0E, 0x11, 0x11, 0x0E}},
    {'9', {0x0E, 0x11, 0x11, 0x0F, 0x01, 0x02, 0x0C}},
    {'A', {0x0E, 0x11, 0x11, 0x11, 0x1F, 0x11, 0x11}},
    {'B', {0x1E, 0x11, 0x11, 0x1E, 0x11, 0x11, 0x1E}},
    {'C', {0x0E, 0x11, 0x10, 0x10, 0x10, 0x11, 0x0E}},
    {'D', {0x1C, 0x12, 0x11, 0x11, 0x11, 0x12, 0x1C}},
    {'E', {0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x1F}},
    {'F', {0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x10}},
    {'G', {0x0E, 0x11, 0x10, 0x17, 0x11, 0x11, 0x0F}},
    {'H', {0x11, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11}},
    {'I', {0x0E, 0x04, 0x04, 0x04, 0x04, 0x04, 0x0E}},
    {'J', {0x07, 0x02, 0x02, 0x02, 0x02, 0x12, 0x0C}},
    {'K', {0x11, 0x12, 0x14, 0x18, 0x14, 0x12, 0x11}},
    {'L', {0x10, 0x10, 0x10, 0x10, 0x10, 0x10, 0x1F}},
    {'M', {0x11, 0x1B, 0x15, 0x15, 0x11, 0x11, 0x11}},
    {'N', {0x11, 0x11, 0x19, 0x15, 0x13, 0x11, 0x11}},
    {'O', {0x0E, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E}},
    {'P', {0x1E, 0x11, 0x11, 0x1E, 0x10, 0x10, 0x10}},
    {'Q', {0x0E, 0x11, 0x11, 0x11, 0x15, 0x12, 0x0D}},
    {'R', {0x1E, 0x11, 0x11, 0x1E, 0x14, 0x12, 0x11}},
    {'S', {0x0F, 0x10, 0x10, 0x0E, 0x01, 0x01, 0x1E}},
    {'T', {0x1F, 0x04, 0x04, 0x04, 0x04, 0x04, 0x04}},
    {'U', {0x11, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E}},
    {'V', {0x11, 0x11, 0x11, 0x11, 0x11, 0x0A, 0x04}},
    {'W', {0x11, 0x11, 0x11, 0x15, 0x15, 0x15, 0x0A}},
    {'X', {0x11, 0x11, 0x0A, 0x04, 0x0A, 0x11, 0x11}},
    {'Y', {0x11, 0x11, 0x11, 0x0A, 0x04, 0x04, 0x04}},
    {'Z', {0x1F, 0x01, 0x02, 0x04, 0x08, 0x10, 0x1F}},
    {'-', {0, 0, 0, 0x1F, 0, 0, 0}},
    {'_', {0, 0, 0, 0, 0, 0, 0x1F}},
    {'.', {0, 0, 0, 0, 0, 0x0C, 0x0C}},
    {',', {0, 0, 0, 0, 0x0C, 0x04, 0x08}},
    {':', {0, 0x0C, 0x0C, 0, 0x0C, 0x0C, 0}},
    {'+', {0, 0x04, 0x04, 0x1F, 0x04, 0x04, 0}},
    {'/', {0, 0x01, 0x02, 0x04, 0x08, 0x10, 0}},
    {'=', {0, 0, 0x1F, 0, 0x1F, 0, 0}},
    {'(', {0x02, 0x04, 0x08, 0x08, 0x08, 0x04, 0x02}},
    {')', {0x08, 0x04, 0x02, 0x02, 0x02, 0x04, 0x08}},
    {'>', {0x08, 0x04, 0x02, 0x01, 0x02, 0x04, 0x08}},
    {'<', {0x02, 0x04, 0x08, 0x10, 0x08, 0x04, 0x02}},
    {'?', {0x0E, 0x11, 0x01, 0x02, 0x04, 0, 0x04}},
  };
  return glyphs;
}

constexpr int kAdvance = 6;

} // namespace

int text_width(const std::string& text)
{
  return text.empty() ? 0 : static_cast<int>(text.size()) * kAdvance - 1;
}

void draw_text(io::Raster& raster, int x, int y, const std::string& text, uint8_t value)
{
  const auto& glyphs = font();
  for (char ch : text) {
    const char up = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
    auto it = glyphs.find(up);
    if (it == glyphs.end())
      it = glyphs.find('?');
    for (int r = 0; r < kGlyphHeight; ++r)
      for (int c = 0; c < 5; ++c)
        if (it->second[static_cast<size_t>(r)] & (0x10 >> c))
          put_pixel(raster, x + c, y + r, {value, value, value});
    x += kAdvance;
  }
}

void render_scatter(const std::filesystem::path& path, const EmbeddingSet& e, int size)
{
  if (e.points.empty())
    throw InvalidArgument("nothing to plot");
  double x0 = e.points[0][0], x1 = x0, y0 = e.points[0][1], y1 = y0;
  for (const auto& p : e.points) {
    x0 = std::min(x0, p[0]);
    x1 = std::max(x1, p[0]);
    y0 = std::min(y0, p[1]);
    y1 = std::max(y1, p[1]);
  }
  const double span = std::max({x1 - x0, y1 - y0, 1e-12});
  const int pad = size / 20;
  auto raster = blank(size, size);
  const std::array<std::array<uint8_t, 3>, 2> colors{{{31, 119, 180}, {214, 39, 40}}};
  for (int label : {0, 1})
    for (size_t i = 0; i < e.points.size(); ++i) {
      if (e.labels[i] != label)
        continue;
      const int px = pad + static_cast<int>((e.points[i][0] - x0) / span * (size - 2 * pad - 1));
      const int py = size - 1 - pad - static_cast<int>((e.points[i][1] - y0) / span * (size - 2 * pad - 1));
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx)
          put_pixel(raster, px + dx, py + dy, colors[static_cast<size_t>(label)]);
    }
  draw_text(raster, 4, 4, "REAL", 0);
  for (int dy = 0; dy < 5; ++dy)
    for (int dx = 0; dx < 5; ++dx)
      put_pixel(raster, 4 + text_width("REAL") + 3 + dx, 5 + dy, colors[0]);
  draw_text(raster, 4, 14, "GENERATED", 0);
  for (int dy = 0; dy < 5; ++dy)
    for (int dx = 0; dx < 5; ++dx)
      put_pixel(raster, 4 + text_width("GENERATED") + 3 + dx, 15 + dy, colors[1]);
  io::write_png(path, raster);
}

void render_grid(const std::vector<std::vector<TensorF>>& rows, const std::filesystem::path& path,
                 const GridOptions& options)
{
  if (rows.empty() || rows.front().empty())
    throw InvalidArgument("render_grid needs at least one image");
  if (options.margin < 0)
    throw InvalidArgument("grid margin must be non-negative");
  const auto& first = rows.front().front();
  if (first.rank() != 3 || (first.dim(0) != 3 && first.dim(0) != 1))
    throw InvalidArgument("grid images must be (3, H, W) or (1, H, W)");
  size_t cols = 0;
  for (const auto& r : rows) {
    cols = std::max(cols, r.size());
    for (const auto& img : r)
      if (img.shape() != first.shape())
        throw InvalidArgument("grid image of shape " + shape_str(img.shape()) + " differs from " +
                              shape_str(first.shape()));
  }
  if (!options.row_labels.empty() && options.row_labels.size() != rows.size())
    throw InvalidArgument("row label count does not match the number of rows");
  if (!options.col_labels.empty() && options.col_labels.size() != cols)
    throw InvalidArgument("column label count does not match the number of columns");

  const int h = static_cast<int>(first.dim(1)), w = static_cast<int>(first.dim(2)), m = options.margin;
  int label_w = 0, label_h = 0;
  for (const auto& s : options.row_labels)
    label_w = std::max(label_w, text_width(s) + m);
  if (!options.col_labels.empty())
    label_h = kGlyphHeight + m;
  auto raster = blank(label_w + m + static_cast<int>(cols) * (w + m), label_h + m + static_cast<int>(rows.size()) * (h + m));

  for (size_t r = 0; r < rows.size(); ++r)
    for (size_t c = 0; c < rows[r].size(); ++c) {
      const auto tile = io::to_raster(first.dim(0) == 1 ? io::to_rgb(rows[r][c]) : rows[r][c]);
      const int ox = label_w + m + static_cast<int>(c) * (w + m), oy = label_h + m + static_cast<int>(r) * (h + m);
      for (int y = 0; y < h; ++y)
        std::memcpy(&raster.pixels[static_cast<size_t>(((oy + y) * raster.width + ox) * 3)],
                    &tile.pixels[static_cast<size_t>(y * w * 3)], static_cast<size_t>(w) * 3);
    }
  for (size_t r = 0; r < options.row_labels.size(); ++r)
    draw_text(raster, m, label_h + m + static_cast<int>(r) * (h + m) + (h - kGlyphHeight) / 2, options.row_labels[r]);
  for (size_t c = 0; c < options.col_labels.size(); ++c) {
    // Labels wider than a column are cut to fit it.
    std::string label = options.col_labels[c];
    while (!label.empty() && text_width(label) > w)
      label.pop_back();
    draw_text(raster, label_w + m + static_cast<int>(c) * (w + m) + (w - text_width(label)) / 2, m, label);
  }
  io::write_png(path, raster);
}

void write_ssim_csv(const std::filesystem::path& path, const std::vector<SSIMReport>& reports)
{
  std::ofstream out(path);
  if (!out)
    throw IoError("cannot write " + path.string());
  out << "direction,mean,std,n\n";
  for (const auto& r : reports)
    out << fmt::format("{},{:.17g},{:.17g},{}\n", r.direction, r.mean, r.std, r.n);
  if (!out)
    throw IoError("failed writing " + path.string());
}

void write_ssim_samples_csv(const std::filesystem::path& path, const std::vector<SSIMReport>& reports)
{
  std::ofstream out(path);
  if (!out)
    throw IoError("cannot write " + path.string());
  out << "direction,index,ssim\n";
  for (const auto& r : reports)
    for (size_t i = 0; i < r.per_sample.size(); ++i)
      out << fmt::format("{},{},{:.17g}\n", r.direction, i, r.per_sample[i]);
  if (!out)
    throw IoError("failed writing " + path.string());
}

std::string format_table(const std::vector<SSIMReport>& reports)
{
  std::string s = fmt::format("{:<10} {:>18} {:>8}\n", "direction", "SSIM mean +- std", "n");
  for (const auto& r : reports)
    s += fmt::format("{:<10} {:>8.4f} +- {:<6.4f} {:>8}\n", r.direction, r.mean, r.std, r.n);
  return s;
}

} // namespace xtrans::eval
