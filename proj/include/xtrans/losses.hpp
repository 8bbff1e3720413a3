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
#include <fstream>
#include <string>
#include <vector>

#include "xtrans/autograd.hpp"
#include "xtrans/nn.hpp"

namespace xtrans::losses {

struct LossWeights
{
  double lambda_c = 1e1;
  double lambda_s = 1e3;
  double gan = 10;
  double kl = 0.1;
  double recon = 100;
  double cyc_kl = 0.1;
  double cyc_recon = 100;

  void validate() const;
  bool operator==(const LossWeights&) const = default;
};

/// kl * mean(z_mean^2) + recon * L1(x, x_recon).
template <class T>
ag::Var<T> vae_loss(const ag::Var<T>& x, const ag::Var<T>& x_recon, const ag::Var<T>& z_mean, const LossWeights& w);

template <class T>
struct GanLosses
{
  ag::Var<T> d_loss;
  ag::Var<T> g_loss;
};

/// BCE(d_real -> 1) + BCE(d_fake -> 0).
template <class T>
ag::Var<T> discriminator_loss(const ag::Var<T>& d_real, const ag::Var<T>& d_fake);
/// Non-saturating BCE(d_fake -> 1).
template <class T>
ag::Var<T> generator_loss(const ag::Var<T>& d_fake);
template <class T>
GanLosses<T> gan_losses(const ag::Var<T>& d_real, const ag::Var<T>& d_fake);

/// cyc_recon * L1(x, x_cycled) + cyc_kl * mean(z_cycle_mean^2).
template <class T>
ag::Var<T> cycle_consistency_loss(const ag::Var<T>& x, const ag::Var<T>& x_cycled, const ag::Var<T>& z_cycle_mean,
                                  const LossWeights& w);

/// Content weights l / 15 for layers l = 1..5.
std::array<double, 5> content_layer_weights();

template <class T>
struct PerceptualTerms
{
  ag::Var<T> content;
  ag::Var<T> style;
};

/// content = sum_l w_l L1(phi_l(out), phi_l(src));
/// style = sum_l L1(Gram(phi_l(out)), Gram(phi_l(exemplar))). Unweighted by
/// lambda_c / lambda_s.
template <class T>
PerceptualTerms<T> perceptual_loss(const nn::FeatureMapSet<T>& out, const nn::FeatureMapSet<T>& src,
                                   const nn::FeatureMapSet<T>& exemplar);

struct LossReport
{
  double vae_A = 0, vae_B = 0, gan_A = 0, gan_B = 0, cc_A = 0, cc_B = 0;
  double content_A = 0, style_A = 0, content_B = 0, style_B = 0;
  double total = 0;

  /// Re-evaluates the weighted sum from the per-term fields.
  double weighted_sum(const LossWeights& w) const;
  static const std::vector<std::string>& columns();
  std::vector<double> values() const;
  bool operator==(const LossReport&) const = default;
};

/// Per-flow terms. gan_* are unweighted generator losses; vae_* and cc_*
/// already carry their UNIT weights.
template <class T>
struct FlowTerms
{
  ag::Var<T> vae_A, vae_B, gan_A, gan_B, cc_A, cc_B;
  ag::Var<T> content_A, style_A, content_B, style_B;
};

template <class T>
struct TotalLoss
{
  ag::Var<T> total;
  LossReport report;
};

/// vae + gan * gan_terms + cc + lambda_c * content + lambda_s * style.
/// Throws InvalidArgument naming any flow term left unset.
template <class T>
TotalLoss<T> total_loss(const FlowTerms<T>& terms, const LossWeights& w);

/// One row per logged step: step, lr, every LossReport column, d_loss.
class MetricsCsv
{
public:
  MetricsCsv(const std::filesystem::path& path, bool append);
  void write(int64_t step, double lr, const LossReport& report, double d_loss);
  static std::string header();

private:
  std::ofstream out_;
};

} // namespace xtrans::losses
