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

#include "xtrans/losses.hpp"

#include <fmt/format.h>

namespace xtrans::losses {

using ag::Var;

void LossWeights::validate() const
{
  const std::array<std::pair<const char*, double>, 7> all{{{"lambda_c", lambda_c},
                                                           {"lambda_s", lambda_s},
                                                           {"gan", gan},
                                                           {"kl", kl},
                                                           {"recon", recon},
                                                           {"cyc_kl", cyc_kl},
                                                           {"cyc_recon", cyc_recon}}};
  for (const auto& [name, v] : all)
    if (!(v >= 0.0) || !std::isfinite(v))
      throw ConfigError(std::string("loss.") + name + " must be a finite non-negative number");
}

template <class T>
Var<T> vae_loss(const Var<T>& x, const Var<T>& x_recon, const Var<T>& z_mean, const LossWeights& w)
{
  return ag::weighted_sum<T>({ag::mean_square(z_mean), ag::l1_loss(x, x_recon)},
                             {static_cast<T>(w.kl), static_cast<T>(w.recon)});
}

template <class T>
Var<T> discriminator_loss(const Var<T>& d_real, const Var<T>& d_fake)
{
  return ag::add(ag::bce_with_logits(d_real, T(1)), ag::bce_with_logits(d_fake, T(0)));
}

template <class T>
Var<T> generator_loss(const Var<T>& d_fake)
{
  return ag::bce_with_logits(d_fake, T(1));
}

template <class T>
GanLosses<T> gan_losses(const Var<T>& d_real, const Var<T>& d_fake)
{
  return {discriminator_loss(d_real, d_fake), generator_loss(d_fake)};
}

template <class T>
Var<T> cycle_consistency_loss(const Var<T>& x, const Var<T>& x_cycled, const Var<T>& z_cycle_mean, const LossWeights& w)
{
  return ag::weighted_sum<T>({ag::l1_loss(x, x_cycled), ag::mean_square(z_cycle_mean)},
                             {static_cast<T>(w.cyc_recon), static_cast<T>(w.cyc_kl)});
}

std::array<double, 5> content_layer_weights()
{
  return {1.0 / 15, 2.0 / 15, 3.0 / 15, 4.0 / 15, 5.0 / 15};
}

template <class T>
PerceptualTerms<T> perceptual_loss(const nn::FeatureMapSet<T>& out, const nn::FeatureMapSet<T>& src,
                                   const nn::FeatureMapSet<T>& exemplar)
{
  if (out.size() != 5 || src.size() != 5 || exemplar.size() != 5)
    throw InvalidArgument("perceptual_loss expects five feature maps per image");
  const auto wl = content_layer_weights();
  std::vector<Var<T>> content, style;
  std::vector<T> content_w, style_w;
  for (size_t l = 0; l < 5; ++l) {
    content.push_back(ag::l1_loss(out[l], src[l]));
    content_w.push_back(static_cast<T>(wl[l]));
    style.push_back(ag::l1_loss(ag::gram(out[l]), ag::gram(exemplar[l])));
    style_w.push_back(T(1));
  }
  return {ag::weighted_sum(content, content_w), ag::weighted_sum(style, style_w)};
}

double LossReport::weighted_sum(const LossWeights& w) const
{
  return vae_A + vae_B + w.gan * (gan_A + gan_B) + cc_A + cc_B + w.lambda_c * (content_A + content_B) +
         w.lambda_s * (style_A + style_B);
}

const std::vector<std::string>& LossReport::columns()
{
  static const std::vector<std::string> cols{"vae_A",     "vae_B",   "gan_A",     "gan_B",   "cc_A", "cc_B",
                                             "content_A", "style_A", "content_B", "style_B", "total"};
  return cols;
}

std::vector<double> LossReport::values() const
{
  return {vae_A, vae_B, gan_A, gan_B, cc_A, cc_B, content_A, style_A, content_B, style_B, total};
}

template <class T>
TotalLoss<T> total_loss(const FlowTerms<T>& t, const LossWeights& w)
{
  const std::array<std::pair<const char*, const Var<T>*>, 10> named{{{"vae_A", &t.vae_A},
                                                                     {"vae_B", &t.vae_B},
                                                                     {"gan_A", &t.gan_A},
                                                                     {"gan_B", &t.gan_B},
                                                                     {"cc_A", &t.cc_A},
                                                                     {"cc_B", &t.cc_B},
                                                                     {"content_A", &t.content_A},
                                                                     {"style_A", &t.style_A},
                                                                     {"content_B", &t.content_B},
                                                                     {"style_B", &t.style_B}}};
  for (const auto& [name, v] : named)
    if (!v->defined())
      throw InvalidArgument(std::string("total_loss: flow term ") + name + " was not evaluated");

  const T g = static_cast<T>(w.gan), lc = static_cast<T>(w.lambda_c), ls = static_cast<T>(w.lambda_s);
  TotalLoss<T> out;
  out.total = ag::weighted_sum<T>(
    {t.vae_A, t.vae_B, t.gan_A, t.gan_B, t.cc_A, t.cc_B, t.content_A, t.content_B, t.style_A, t.style_B},
    {T(1), T(1), g, g, T(1), T(1), lc, lc, ls, ls});
  auto& r = out.report;
  r.vae_A = t.vae_A.item();
  r.vae_B = t.vae_B.item();
  r.gan_A = t.gan_A.item();
  r.gan_B = t.gan_B.item();
  r.cc_A = t.cc_A.item();
  r.cc_B = t.cc_B.item();
  r.content_A = t.content_A.item();
  r.style_A = t.style_A.item();
  r.content_B = t.content_B.item();
  r.style_B = t.style_B.item();
  r.total = r.weighted_sum(w);
  return out;
}

MetricsCsv::MetricsCsv(const std::filesystem::path& path, bool append)
{
  const bool fresh = !append || !std::filesystem::exists(path) || std::filesystem::file_size(path) == 0;
  out_.open(path, append ? std::ios::app : std::ios::trunc);
  if (!out_)
    throw IoError("cannot open metrics file " + path.string());
  if (fresh)
    out_ << header() << "\n";
}

std::string MetricsCsv::header()
{
  std::string h = "step,lr";
  for (const auto& c : LossReport::columns())
    h += "," + c;
  return h + ",d_loss";
}

void MetricsCsv::write(int64_t step, double lr, const LossReport& report, double d_loss)
{
  out_ << step << fmt::format(",{:.17g}", lr);
  for (double v : report.values())
    out_ << fmt::format(",{:.17g}", v);
  out_ << fmt::format(",{:.17g}", d_loss) << "\n";
  out_.flush();
}

#define XTRANS_LOSSES_INSTANTIATE(T)                                                                              \
  template Var<T> vae_loss(const Var<T>&, const Var<T>&, const Var<T>&, const LossWeights&);                      \
  template Var<T> discriminator_loss(const Var<T>&, const Var<T>&);                                               \
  template Var<T> generator_loss(const Var<T>&);                                                                  \
  template GanLosses<T> gan_losses(const Var<T>&, const Var<T>&);                                                 \
  template Var<T> cycle_consistency_loss(const Var<T>&, const Var<T>&, const Var<T>&, const LossWeights&);        \
  template PerceptualTerms<T> perceptual_loss(const nn::FeatureMapSet<T>&, const nn::FeatureMapSet<T>&,           \
                                              const nn::FeatureMapSet<T>&);                                       \
  template TotalLoss<T> total_loss(const FlowTerms<T>&, const LossWeights&);

XTRANS_LOSSES_INSTANTIATE(float)
XTRANS_LOSSES_INSTANTIATE(double)

} // namespace xtrans::losses
