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

#include "xtrans/nn.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>

#include "xtrans/archive.hpp"

namespace xtrans::nn {

using ag::Var;

void ArchConfig::validate() const
{
  if (n1 < 1 || n2 < 1 || n3 < 1)
    throw ConfigError("arch: n1, n2 and n3 must all be at least 1");
  if (base_width < 1)
    throw ConfigError("arch: base_width must be positive");
  if (n1 > 8 || n3 > 10)
    throw ConfigError("arch: n1 or n3 unreasonably large");
  const int step = 1 << std::max(n1, n3);
  if (resolution < step || resolution % step != 0)
    throw ConfigError("arch: resolution " + std::to_string(resolution) + " must be a positive multiple of 2^max(n1, n3) = " +
                      std::to_string(step));
}

namespace {

template <class T>
Tensor<T> gaussian(Shape shape, double std, Rng& rng)
{
  Tensor<T> t(std::move(shape));
  for (auto& v : t.values())
    v = static_cast<T>(normal(rng) * std);
  return t;
}

template <class T>
Var<T> to_signed(const Var<T>& x)
{
  return ag::affine(x, T(2), T(-1));
}

template <class T>
void append(ParamList<T>& out, const std::string& name, const Var<T>& v)
{
  out.push_back({name, v});
}

} // namespace

template <class T>
Conv2d<T>::Conv2d(int in, int out, int kernel, int stride_, int pad_, Rng& rng, double init_std)
  : weight(gaussian<T>({out, in, kernel, kernel}, init_std, rng), true), bias(Tensor<T>({out}), true), stride(stride_),
    pad(pad_)
{}

template <class T>
Var<T> Conv2d<T>::operator()(const Var<T>& x) const
{
  return ag::conv2d(x, weight, bias, stride, pad);
}

template <class T>
void Conv2d<T>::collect(const std::string& prefix, ParamList<T>& out) const
{
  append(out, prefix + ".weight", weight);
  append(out, prefix + ".bias", bias);
}

template <class T>
ConvTranspose2d<T>::ConvTranspose2d(int in, int out, int kernel, int stride_, int pad_, Rng& rng, double init_std)
  : weight(gaussian<T>({in, out, kernel, kernel}, init_std, rng), true), bias(Tensor<T>({out}), true), stride(stride_),
    pad(pad_)
{}

template <class T>
Var<T> ConvTranspose2d<T>::operator()(const Var<T>& x) const
{
  return ag::conv_transpose2d(x, weight, bias, stride, pad);
}

template <class T>
void ConvTranspose2d<T>::collect(const std::string& prefix, ParamList<T>& out) const
{
  append(out, prefix + ".weight", weight);
  append(out, prefix + ".bias", bias);
}

template <class T>
ResBlock<T>::ResBlock(int channels, Rng& rng) : c1_(channels, channels, 3, 1, 1, rng), c2_(channels, channels, 3, 1, 1, rng)
{}

template <class T>
Var<T> ResBlock<T>::operator()(const Var<T>& x) const
{
  const T eps = static_cast<T>(ops::kStatEps);
  auto h = ag::relu(ag::instance_normalize(c1_(x), eps));
  h = ag::instance_normalize(c2_(h), eps);
  return ag::add(x, h);
}

template <class T>
void ResBlock<T>::collect(const std::string& prefix, ParamList<T>& out) const
{
  c1_.collect(prefix + ".c1", out);
  c2_.collect(prefix + ".c2", out);
}

template <class T>
Encoder<T>::Encoder(const ArchConfig& arch, int private_blocks, uint64_t seed, std::shared_ptr<ResBlock<T>> shared_tail)
  : shared_tail_(std::move(shared_tail)), resolution_(arch.resolution)
{
  Rng rng(seed);
  int in = 3;
  for (int i = 0; i < arch.n1; ++i) {
    const int out = arch.base_width << i;
    downs_.emplace_back(in, out, 4, 2, 1, rng);
    in = out;
  }
  for (int b = 0; b < private_blocks; ++b)
    blocks_.push_back(std::make_shared<ResBlock<T>>(in, rng));
}

template <class T>
Var<T> Encoder<T>::operator()(const Var<T>& x) const
{
  if (x.value().rank() != 4 || x.dim(1) != 3 || x.dim(2) != resolution_ || x.dim(3) != resolution_)
    throw InvalidArgument("encoder expects (N, 3, " + std::to_string(resolution_) + ", " + std::to_string(resolution_) +
                          ") input, got " + shape_str(x.shape()));
  auto h = to_signed(x);
  for (const auto& d : downs_)
    h = ag::relu(d(h));
  for (const auto& b : blocks_)
    h = (*b)(h);
  if (shared_tail_)
    h = (*shared_tail_)(h);
  return h;
}

template <class T>
void Encoder<T>::collect(const std::string& prefix, ParamList<T>& out, bool include_shared) const
{
  for (size_t i = 0; i < downs_.size(); ++i)
    downs_[i].collect(prefix + ".down" + std::to_string(i), out);
  for (size_t i = 0; i < blocks_.size(); ++i)
    blocks_[i]->collect(prefix + ".res" + std::to_string(i), out);
  if (include_shared && shared_tail_)
    shared_tail_->collect(prefix + ".shared", out);
}

template <class T>
Decoder<T>::Decoder(const ArchConfig& arch, int blocks, uint64_t seed)
{
  Rng rng(seed);
  const int channels = arch.content_channels();
  for (int b = 0; b < blocks; ++b)
    blocks_.emplace_back(channels, rng);
  for (int i = 0; i < arch.n1; ++i) {
    const int in = arch.base_width << (arch.n1 - 1 - i);
    const int out = i == arch.n1 - 1 ? 3 : arch.base_width << (arch.n1 - 2 - i);
    ups_.emplace_back(in, out, 4, 2, 1, rng);
  }
}

template <class T>
Var<T> Decoder<T>::operator()(const Var<T>& c) const
{
  auto h = c;
  for (const auto& b : blocks_)
    h = b(h);
  for (size_t i = 0; i < ups_.size(); ++i) {
    h = ups_[i](h);
    h = i + 1 < ups_.size() ? ag::relu(h) : ag::tanh(h);
  }
  return ag::affine(h, T(0.5), T(0.5));
}

template <class T>
void Decoder<T>::collect(const std::string& prefix, ParamList<T>& out) const
{
  for (size_t i = 0; i < blocks_.size(); ++i)
    blocks_[i].collect(prefix + ".res" + std::to_string(i), out);
  for (size_t i = 0; i < ups_.size(); ++i)
    ups_[i].collect(prefix + ".up" + std::to_string(i), out);
}

template <class T>
Discriminator<T>::Discriminator(const ArchConfig& arch, uint64_t seed)
{
  Rng rng(seed);
  int in = 3;
  for (int i = 0; i < arch.n3; ++i) {
    const int out = i == arch.n3 - 1 ? 1 : std::min(arch.base_width << i, arch.base_width * 8);
    layers_.emplace_back(in, out, 4, 2, 1, rng);
    in = out;
  }
}

template <class T>
Var<T> Discriminator<T>::operator()(const Var<T>& x) const
{
  auto h = to_signed(x);
  for (size_t i = 0; i < layers_.size(); ++i) {
    h = layers_[i](h);
    if (i + 1 < layers_.size())
      h = ag::leaky_relu(h, T(0.2));
  }
  return h;
}

template <class T>
void Discriminator<T>::collect(const std::string& prefix, ParamList<T>& out) const
{
  for (size_t i = 0; i < layers_.size(); ++i)
    layers_[i].collect(prefix + ".conv" + std::to_string(i), out);
}

namespace {

struct VggConv
{
  int index;
  int in, out;
  bool pool_before;
  bool tap;
};

// torchvision vgg19().features up to relu5_1.
constexpr VggConv kVgg[] = {
  {0, 3, 64, false, true},      {2, 64, 64, false, false},    {5, 64, 128, true, true},
  {7, 128, 128, false, false},  {10, 128, 256, true, true},   {12, 256, 256, false, false},
  {14, 256, 256, false, false}, {16, 256, 256, false, false}, {19, 256, 512, true, true},
  {21, 512, 512, false, false}, {23, 512, 512, false, false}, {25, 512, 512, false, false},
  {28, 512, 512, true, true},
};

} // namespace

std::filesystem::path resolve_vgg_weights(const std::string& configured)
{
  if (!configured.empty())
    return configured;
  if (const char* env = std::getenv("XTRANS_VGG19_WEIGHTS"); env && *env)
    return env;
  return {};
}

std::string vgg_download_instructions()
{
  return "Pretrained VGG-19 weights are required for perceptual.mode=pretrained. On a machine with network access run\n"
         "  python3 scripts/convert_vgg19.py --out vgg19_features.xtar\n"
         "(downloads torchvision's ImageNet VGG-19), then pass the file via perceptual.weights or the\n"
         "XTRANS_VGG19_WEIGHTS environment variable. perceptual.mode=random uses frozen random filters instead.";
}

template <class T>
PerceptualExtractor<T> PerceptualExtractor<T>::pretrained(const std::filesystem::path& weights)
{
  if (weights.empty() || !std::filesystem::exists(weights))
    throw IoError("VGG-19 weight file '" + weights.string() + "' not found.\n" + vgg_download_instructions());
  const auto ar = archive::load(weights, "vgg19-features");
  PerceptualExtractor ex;
  ex.pretrained_ = true;
  for (const auto& spec : kVgg) {
    const std::string base = "features." + std::to_string(spec.index);
    const auto& w = ar.get(base + ".weight");
    const auto& b = ar.get(base + ".bias");
    if (w.shape() != Shape{spec.out, spec.in, 3, 3} || b.shape() != Shape{spec.out})
      throw IoError("VGG-19 tensor " + base + " has shape " + shape_str(w.shape()) + ", expected (" +
                    std::to_string(spec.out) + ", " + std::to_string(spec.in) + ", 3, 3)");
    Conv2d<T> conv;
    conv.weight = Var<T>(w.template cast<T>(), false);
    conv.bias = Var<T>(b.template cast<T>(), false);
    conv.stride = 1;
    conv.pad = 1;
    ex.layers_.push_back({spec.index, std::move(conv), spec.pool_before, spec.tap});
  }
  return ex;
}

template <class T>
PerceptualExtractor<T> PerceptualExtractor<T>::random(uint64_t seed, int width_divisor)
{
  if (width_divisor < 1 || 64 % width_divisor != 0)
    throw ConfigError("perceptual.width_divisor must divide 64");
  PerceptualExtractor ex;
  ex.width_divisor_ = width_divisor;
  Rng rng(seed);
  for (const auto& spec : kVgg) {
    const int in = spec.in == 3 ? 3 : spec.in / width_divisor;
    const int out = spec.out / width_divisor;
    Conv2d<T> conv(in, out, 3, 1, 1, rng, std::sqrt(2.0 / (in * 9.0)));
    conv.weight.set_requires_grad(false);
    conv.bias.set_requires_grad(false);
    ex.layers_.push_back({spec.index, std::move(conv), spec.pool_before, spec.tap});
  }
  return ex;
}

template <class T>
FeatureMapSet<T> PerceptualExtractor<T>::operator()(const Var<T>& x) const
{
  static const std::vector<T> mean{T(0.485), T(0.456), T(0.406)};
  static const std::vector<T> stdev{T(0.229), T(0.224), T(0.225)};
  std::vector<T> scale(3), shift(3);
  for (int c = 0; c < 3; ++c) {
    scale[static_cast<size_t>(c)] = T(1) / stdev[static_cast<size_t>(c)];
    shift[static_cast<size_t>(c)] = -mean[static_cast<size_t>(c)] / stdev[static_cast<size_t>(c)];
  }
  auto h = ag::channel_affine_constant(x, scale, shift);
  FeatureMapSet<T> taps;
  for (const auto& layer : layers_) {
    if (layer.pool_before)
      h = ag::max_pool2d(h, 2);
    h = ag::relu(layer.conv(h));
    if (layer.tap)
      taps.push_back(h);
  }
  return taps;
}

template <class T>
ParamList<T> PerceptualExtractor<T>::parameters() const
{
  ParamList<T> out;
  for (const auto& layer : layers_)
    layer.conv.collect("features." + std::to_string(layer.index), out);
  return out;
}

std::string to_string(Direction d)
{
  switch (d) {
  case Direction::AtoB:
    return "A2B";
  case Direction::BtoA:
    return "B2A";
  case Direction::AtoA:
    return "A2A";
  case Direction::BtoB:
    return "B2B";
  }
  return "?";
}

Direction parse_direction(const std::string& s)
{
  if (s == "A2B" || s == "a2b" || s == "AtoB")
    return Direction::AtoB;
  if (s == "B2A" || s == "b2a" || s == "BtoA")
    return Direction::BtoA;
  if (s == "A2A" || s == "a2a" || s == "AtoA")
    return Direction::AtoA;
  if (s == "B2B" || s == "b2b" || s == "BtoB")
    return Direction::BtoB;
  throw InvalidArgument("invalid direction '" + s + "' (expected A2B, B2A, A2A or B2B)");
}

Domain source_of(Direction d) { return d == Direction::AtoB || d == Direction::AtoA ? Domain::A : Domain::B; }
Domain target_of(Direction d) { return d == Direction::AtoB || d == Direction::BtoB ? Domain::B : Domain::A; }

namespace {
template <class T>
std::shared_ptr<ResBlock<T>> make_block(int channels, uint64_t seed)
{
  Rng rng(seed);
  return std::make_shared<ResBlock<T>>(channels, rng);
}

const ArchConfig& validated(const ArchConfig& arch)
{
  arch.validate();
  return arch;
}
} // namespace

template <class T>
Translator<T>::Translator(const ArchConfig& arch, uint64_t seed)
  : arch_(validated(arch)), noise_rng_(derive_seed(seed, {7})),
    enc_shared_(make_block<T>(arch.content_channels(), derive_seed(seed, {1}))),
    gen_shared_(make_block<T>(arch.content_channels(), derive_seed(seed, {2}))),
    enc_a_(arch, arch.n2 - 1, derive_seed(seed, {3, 0}), enc_shared_),
    enc_b_(arch, arch.n2 - 1, derive_seed(seed, {3, 1}), enc_shared_), gen_a_(arch, arch.n2 - 1, derive_seed(seed, {4, 0})),
    gen_b_(arch, arch.n2 - 1, derive_seed(seed, {4, 1})), dis_a_(arch, derive_seed(seed, {5, 0})),
    dis_b_(arch, derive_seed(seed, {5, 1})), f_a_(arch, arch.n2, derive_seed(seed, {6, 0})),
    f_b_(arch, arch.n2, derive_seed(seed, {6, 1}))
{}

template <class T>
void Translator<T>::check_input(const Var<T>& x, const char* what) const
{
  if (!x.defined() || x.value().rank() != 4 || x.dim(1) != 3 || x.dim(2) != arch_.resolution ||
      x.dim(3) != arch_.resolution)
    throw InvalidArgument(std::string(what) + ": expected (N, 3, " + std::to_string(arch_.resolution) + ", " +
                          std::to_string(arch_.resolution) + ") images, got " +
                          (x.defined() ? shape_str(x.shape()) : std::string("nothing")));
}

template <class T>
Latent<T> Translator<T>::encode(const Var<T>& x, Domain d)
{
  check_input(x, "encode");
  Latent<T> out;
  out.z_mean = d == Domain::A ? enc_a_(x) : enc_b_(x);
  if (training_) {
    Tensor<T> noise(out.z_mean.shape());
    for (auto& v : noise.values())
      v = static_cast<T>(normal(noise_rng_));
    out.z = ag::add_constant(out.z_mean, noise);
  } else {
    out.z = out.z_mean;
  }
  out.content = (*gen_shared_)(out.z);
  return out;
}

template <class T>
Var<T> Translator<T>::feature_maps(const Var<T>& x, Domain d) const
{
  check_input(x, "feature_maps");
  return d == Domain::A ? f_a_(x) : f_b_(x);
}

template <class T>
Guidance<T> Translator<T>::guidance_from_features(const Var<T>& f_source, const Var<T>& f_exemplar) const
{
  Guidance<T> g;
  g.mask = ops::feature_mask(f_source, static_cast<T>(options_.eta));
  g.affine = ops::instance_stats(options_.self_affine ? f_source : f_exemplar);
  return g;
}

template <class T>
Guidance<T> Translator<T>::extract_guidance(const Var<T>& source, Domain src, const Var<T>& exemplar, Domain ex) const
{
  if (!frozen_)
    throw StateError("feature nets are not pretrained; run pretraining or load a checkpoint first");
  const auto f_src = feature_maps(source, src);
  const auto f_ex = options_.self_affine ? f_src : feature_maps(exemplar, ex);
  return guidance_from_features(f_src, f_ex);
}

template <class T>
Var<T> Translator<T>::generate(const Var<T>& c_tilde, Domain d) const
{
  const Shape want{c_tilde.defined() ? c_tilde.dim(0) : 0, arch_.content_channels(), arch_.content_side(),
                   arch_.content_side()};
  if (!c_tilde.defined() || c_tilde.shape() != want)
    throw InvalidArgument("generate: content code must have shape " + shape_str(want));
  return d == Domain::A ? gen_a_(c_tilde) : gen_b_(c_tilde);
}

template <class T>
Var<T> Translator<T>::discriminate(const Var<T>& x, Domain d) const
{
  if (x.value().rank() != 4 || x.dim(1) != 3)
    throw InvalidArgument("discriminate: expected (N, 3, H, W) images");
  return d == Domain::A ? dis_a_(x) : dis_b_(x);
}

template <class T>
Var<T> Translator<T>::translate(const Var<T>& source, const Var<T>& exemplar, Direction dir)
{
  const Domain src = source_of(dir), tgt = target_of(dir);
  check_input(source, "translate source");
  check_input(exemplar, "translate exemplar");
  if (source.dim(0) != exemplar.dim(0))
    throw InvalidArgument("translate: source and exemplar batches differ in size");
  const auto latent = encode(source, src);
  const auto g = extract_guidance(source, src, exemplar, tgt);
  return generate(ops::masked_adain(latent.content, g.mask, g.affine), tgt);
}

template <class T>
void Translator<T>::freeze_feature_nets()
{
  set_trainable(feature_parameters(), false);
  frozen_ = true;
}

template <class T>
ParamList<T> Translator<T>::generator_parameters() const
{
  ParamList<T> out;
  enc_a_.collect("enc_a", out, false);
  enc_b_.collect("enc_b", out, false);
  enc_shared_->collect("enc_shared", out);
  gen_shared_->collect("gen_shared", out);
  gen_a_.collect("gen_a", out);
  gen_b_.collect("gen_b", out);
  return out;
}

template <class T>
ParamList<T> Translator<T>::discriminator_parameters() const
{
  ParamList<T> out;
  dis_a_.collect("dis_a", out);
  dis_b_.collect("dis_b", out);
  return out;
}

template <class T>
ParamList<T> Translator<T>::feature_parameters(Domain d) const
{
  ParamList<T> out;
  if (d == Domain::A)
    f_a_.collect("f_a", out, false);
  else
    f_b_.collect("f_b", out, false);
  return out;
}

template <class T>
ParamList<T> Translator<T>::feature_parameters() const
{
  auto out = feature_parameters(Domain::A);
  auto b = feature_parameters(Domain::B);
  out.insert(out.end(), b.begin(), b.end());
  return out;
}

template <class T>
ParamList<T> Translator<T>::all_parameters() const
{
  auto out = generator_parameters();
  auto d = discriminator_parameters();
  auto f = feature_parameters();
  out.insert(out.end(), d.begin(), d.end());
  out.insert(out.end(), f.begin(), f.end());
  return out;
}

template <class T>
void set_trainable(const ParamList<T>& params, bool on)
{
  for (const auto& p : params) {
    auto v = p.var;
    v.set_requires_grad(on);
    if (!on)
      v.zero_grad();
  }
}

template <class T>
std::map<std::string, Tensor<T>> snapshot(const ParamList<T>& params)
{
  std::map<std::string, Tensor<T>> out;
  for (const auto& p : params)
    out.emplace(p.name, p.var.value());
  return out;
}

#define XTRANS_NN_INSTANTIATE(T)                                                                                  \
  template class Conv2d<T>;                                                                                       \
  template class ConvTranspose2d<T>;                                                                              \
  template class ResBlock<T>;                                                                                     \
  template class Encoder<T>;                                                                                      \
  template class Decoder<T>;                                                                                      \
  template class Discriminator<T>;                                                                                \
  template class PerceptualExtractor<T>;                                                                          \
  template class Translator<T>;                                                                                   \
  template void set_trainable(const ParamList<T>&, bool);                                                         \
  template std::map<std::string, Tensor<T>> snapshot(const ParamList<T>&);

XTRANS_NN_INSTANTIATE(float)
XTRANS_NN_INSTANTIATE(double)

} // namespace xtrans::nn
