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

#include "xtrans/autograd.hpp"

/// Numeric primitives of exemplar-guided translation: instance statistics,
/// adaptive instance normalization, feature masks, Gram matrices, plus the
/// SSIM metric and the polynomial learning-rate schedule.
namespace xtrans::ops {

/// Epsilon inside the instance standard deviation.
inline constexpr double kStatEps = 1e-5;

/// Per-(sample, channel) scale and shift, each shaped (N, C).
template <class T>
struct AffineParams
{
  ag::Var<T> gamma;
  ag::Var<T> beta;
};

/// gamma = sqrt(spatial population variance + eps), beta = spatial mean.
template <class T>
AffineParams<T> instance_stats(const ag::Var<T>& features);

/// gamma * (c - mean(c)) / std(c) + beta, statistics per channel.
template <class T>
ag::Var<T> adain(const ag::Var<T>& content, const AffineParams<T>& params);

/// (1 - eta) * sigmoid(f) + eta. For eta < 1 the result stays strictly
/// below 1; eta == 1 yields a mask of ones.
template <class T>
ag::Var<T> feature_mask(const ag::Var<T>& features, T eta);

/// adain(mask ⊙ content, params): masking precedes normalization.
template <class T>
ag::Var<T> masked_adain(const ag::Var<T>& content, const ag::Var<T>& mask, const AffineParams<T>& params);

/// (N, C, H, W) -> (N, C, C) normalized by C*H*W.
template <class T>
ag::Var<T> gram_matrix(const ag::Var<T>& features);

/// Structural similarity parameters. Defaults: 11x11 Gaussian window with
/// sigma 1.5, K1 = 0.01, K2 = 0.03, dynamic range 1.
struct SsimOptions
{
  int window = 11;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
  double dynamic_range = 1.0;
};

/// Mean local SSIM over the valid window positions, averaged over channels.
/// Images are (C, H, W) or (1, C, H, W).
double ssim(const TensorF& x, const TensorF& y, const SsimOptions& options = {});

/// base_lr * (1 - step / total_steps)^0.9, zero once step >= total_steps.
double poly_lr(int64_t step, int64_t total_steps, double base_lr, double power = 0.9);

} // namespace xtrans::ops
