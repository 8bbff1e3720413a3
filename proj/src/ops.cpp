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

#include "xtrans/ops.hpp"

#include <cmath>
#include <limits>
#include <vector>

namespace xtrans::ops {

template <class T>
AffineParams<T> instance_stats(const ag::Var<T>& features)
{
  return {ag::channel_std(features, static_cast<T>(kStatEps)), ag::channel_mean(features)};
}

template <class T>
ag::Var<T> adain(const ag::Var<T>& content, const AffineParams<T>& params)
{
  return ag::channel_scale_shift(ag::instance_normalize(content, static_cast<T>(kStatEps)), params.gamma,
                                 params.beta);
}

template <class T>
ag::Var<T> feature_mask(const ag::Var<T>& features, T eta)
{
  if (!(eta >= T(0) && eta <= T(1)))
    throw InvalidArgument("feature_mask: eta must lie in [0, 1]");
  if (eta == T(1))
    return ag::Var<T>(Tensor<T>(features.shape(), T(1)));
  auto mask = ag::affine(ag::sigmoid(features), T(1) - eta, eta);
  return ag::clamp(mask, eta, std::nextafter(T(1), T(0)));
}

template <class T>
ag::Var<T> masked_adain(const ag::Var<T>& content, const ag::Var<T>& mask, const AffineParams<T>& params)
{
  return adain(ag::mul(mask, content), params);
}

template <class T>
ag::Var<T> gram_matrix(const ag::Var<T>& features)
{
  return ag::gram(features);
}

namespace {

std::vector<double> gaussian_window(int size, double sigma)
{
  std::vector<double> w(static_cast<size_t>(size));
  const double center = (size - 1) / 2.0;
  double sum = 0;
  for (int i = 0; i < size; ++i) {
    const double d = i - center;
    w[static_cast<size_t>(i)] = std::exp(-(d * d) / (2 * sigma * sigma));
    sum += w[static_cast<size_t>(i)];
  }
  for (auto& v : w)
    v /= sum;
  return w;
}

// Separable "valid" filtering of an H x W plane.
std::vector<double> filter_valid(const std::vector<double>& plane, int H, int W, const std::vector<double>& win)
{
  const int k = static_cast<int>(win.size());
  const int Ho = H - k + 1, Wo = W - k + 1;
  std::vector<double> rows(static_cast<size_t>(H) * Wo);
  for (int i = 0; i < H; ++i)
    for (int j = 0; j < Wo; ++j) {
      double acc = 0;
      for (int t = 0; t < k; ++t)
        acc += win[static_cast<size_t>(t)] * plane[static_cast<size_t>(i) * W + j + t];
      rows[static_cast<size_t>(i) * Wo + j] = acc;
    }
  std::vector<double> out(static_cast<size_t>(Ho) * Wo);
  for (int i = 0; i < Ho; ++i)
    for (int j = 0; j < Wo; ++j) {
      double acc = 0;
      for (int t = 0; t < k; ++t)
        acc += win[static_cast<size_t>(t)] * rows[static_cast<size_t>(i + t) * Wo + j];
      out[static_cast<size_t>(i) * Wo + j] = acc;
    }
  return out;
}

} // namespace

double ssim(const TensorF& x, const TensorF& y, const SsimOptions& options)
{
  if (x.shape() != y.shape())
    throw InvalidArgument("ssim: shape mismatch " + shape_str(x.shape()) + " vs " + shape_str(y.shape()));
  Shape s = x.shape();
  if (s.size() == 4 && s[0] == 1)
    s.erase(s.begin());
  if (s.size() != 3)
    throw InvalidArgument("ssim: expected (C, H, W) image, got " + shape_str(x.shape()));
  const int C = static_cast<int>(s[0]), H = static_cast<int>(s[1]), W = static_cast<int>(s[2]);
  if (H < options.window || W < options.window)
    throw InvalidArgument("ssim: image smaller than the " + std::to_string(options.window) + "px window");

  const auto win = gaussian_window(options.window, options.sigma);
  const double c1 = std::pow(options.k1 * options.dynamic_range, 2);
  const double c2 = std::pow(options.k2 * options.dynamic_range, 2);
  const size_t plane = static_cast<size_t>(H) * W;

  double total = 0;
  for (int c = 0; c < C; ++c) {
    std::vector<double> a(plane), b(plane), aa(plane), bb(plane), ab(plane);
    for (size_t i = 0; i < plane; ++i) {
      a[i] = x[static_cast<int64_t>(c * plane + i)];
      b[i] = y[static_cast<int64_t>(c * plane + i)];
      aa[i] = a[i] * a[i];
      bb[i] = b[i] * b[i];
      ab[i] = a[i] * b[i];
    }
    const auto mu_a = filter_valid(a, H, W, win);
    const auto mu_b = filter_valid(b, H, W, win);
    const auto e_aa = filter_valid(aa, H, W, win);
    const auto e_bb = filter_valid(bb, H, W, win);
    const auto e_ab = filter_valid(ab, H, W, win);
    double sum = 0;
    for (size_t i = 0; i < mu_a.size(); ++i) {
      const double var_a = e_aa[i] - mu_a[i] * mu_a[i];
      const double var_b = e_bb[i] - mu_b[i] * mu_b[i];
      const double cov = e_ab[i] - mu_a[i] * mu_b[i];
      const double num = (2 * mu_a[i] * mu_b[i] + c1) * (2 * cov + c2);
      const double den = (mu_a[i] * mu_a[i] + mu_b[i] * mu_b[i] + c1) * (var_a + var_b + c2);
      sum += num / den;
    }
    total += sum / static_cast<double>(mu_a.size());
  }
  return total / C;
}

double poly_lr(int64_t step, int64_t total_steps, double base_lr, double power)
{
  if (step < 0)
    throw InvalidArgument("poly_lr: negative step");
  if (step >= total_steps)
    return 0.0;
  return base_lr * std::pow(1.0 - static_cast<double>(step) / static_cast<double>(total_steps), power);
}

#define XTRANS_OPS_INSTANTIATE(T)                                                                             \
  template AffineParams<T> instance_stats(const ag::Var<T>&);                                                 \
  template ag::Var<T> adain(const ag::Var<T>&, const AffineParams<T>&);                                       \
  template ag::Var<T> feature_mask(const ag::Var<T>&, T);                                                     \
  template ag::Var<T> masked_adain(const ag::Var<T>&, const ag::Var<T>&, const AffineParams<T>&);             \
  template ag::Var<T> gram_matrix(const ag::Var<T>&);

XTRANS_OPS_INSTANTIATE(float)
XTRANS_OPS_INSTANTIATE(double)

} // namespace xtrans::ops
