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

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "xtrans/autograd.hpp"
#include "xtrans/config.hpp"
#include "xtrans/random.hpp"
#include "xtrans/tensor.hpp"

namespace xtrans::testing {

/// float(sin(a * i + b)) over the flat index; the reference scripts build the
/// same tensors, so frozen values can be compared element by element.
template <class T>
Tensor<T> pattern(const Shape& shape, double a, double b)
{
  Tensor<T> t(shape);
  for (int64_t i = 0; i < t.numel(); ++i)
    t[i] = static_cast<T>(static_cast<float>(std::sin(a * static_cast<double>(i) + b)));
  return t;
}

template <class T>
Tensor<T> gaussian(const Shape& shape, uint64_t seed, double scale = 1.0)
{
  Rng rng(seed);
  Tensor<T> t(shape);
  for (auto& v : t.values())
    v = static_cast<T>(scale * normal(rng));
  return t;
}

template <class T>
double max_abs_diff(const Tensor<T>& a, const Tensor<T>& b)
{
  double m = 0;
  for (int64_t i = 0; i < a.numel(); ++i)
    m = std::max(m, std::abs(static_cast<double>(a[i]) - static_cast<double>(b[i])));
  return m;
}

/// Largest relative error between analytic and central-difference gradients
/// of a scalar function, measured per input tensor as |a - n| / max(|a|, |n|)
/// in the 2-norm.
inline double gradient_check(const std::function<ag::Var<double>(const std::vector<ag::Var<double>>&)>& f,
                             const std::vector<TensorD>& inputs, double step = 1e-3)
{
  std::vector<ag::Var<double>> vars;
  for (const auto& t : inputs)
    vars.emplace_back(t, true);
  auto out = f(vars);
  out.backward();

  double worst = 0;
  for (size_t k = 0; k < inputs.size(); ++k) {
    const TensorD analytic = vars[k].has_grad() ? vars[k].grad() : TensorD(inputs[k].shape());
    TensorD numeric(inputs[k].shape());
    for (int64_t i = 0; i < inputs[k].numel(); ++i) {
      auto eval_at = [&](double delta) {
        std::vector<ag::Var<double>> probe;
        for (size_t j = 0; j < inputs.size(); ++j) {
          TensorD t = inputs[j];
          if (j == k)
            t[i] += delta;
          probe.emplace_back(std::move(t), false);
        }
        ag::NoGradGuard guard;
        return f(probe).item();
      };
      numeric[i] = (eval_at(step) - eval_at(-step)) / (2 * step);
    }
    double diff = 0, na = 0, nn = 0;
    for (int64_t i = 0; i < numeric.numel(); ++i) {
      diff += (analytic[i] - numeric[i]) * (analytic[i] - numeric[i]);
      na += analytic[i] * analytic[i];
      nn += numeric[i] * numeric[i];
    }
    const double scale = std::max({std::sqrt(na), std::sqrt(nn), 1e-12});
    worst = std::max(worst, std::sqrt(diff) / scale);
  }
  return worst;
}

/// A fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name)
{
  const auto dir = std::filesystem::temp_directory_path() / ("xtrans_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

/// Small, fast experiment: 32 px canvases, width-4 networks, a random
/// perceptual extractor and a few dozen images per split.
inline config::ExperimentConfig tiny_config(uint64_t seed = 1)
{
  auto cfg = config::preset("single-digit");
  cfg.seed = seed;
  cfg.data.resolution = 32;
  cfg.data.train_size = 24;
  cfg.data.test_size = 12;
  cfg.data.glyphs_per_digit = 12;
  cfg.arch.n2 = 2;
  cfg.arch.n3 = 3;
  cfg.arch.base_width = 4;
  cfg.perceptual.mode = "random";
  cfg.perceptual.width_divisor = 16;
  cfg.train.batch_size = 2;
  cfg.train.iterations = 40;
  cfg.train.pretrain_iterations = 2;
  cfg.train.checkpoint_interval = 0;
  cfg.train.log_interval = 1;
  cfg.train.lr = 1e-4;
  return cfg;
}

} // namespace xtrans::testing
