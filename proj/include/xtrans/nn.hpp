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

#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "xtrans/autograd.hpp"
#include "xtrans/data.hpp"
#include "xtrans/ops.hpp"
#include "xtrans/random.hpp"

namespace xtrans::nn {

using data::Domain;

struct ArchConfig
{
  int n1 = 1;          // strided down/up-sampling layers
  int n2 = 4;          // residual blocks per encoder / generator, one shared
  int n3 = 5;          // discriminator conv layers
  int base_width = 64; // channels after the first strided conv, doubling per stride
  int resolution = 64;

  /// Throws ConfigError on any violated invariant.
  void validate() const;
  int content_channels() const { return base_width << (n1 - 1); }
  int content_side() const { return resolution >> n1; }
  bool operator==(const ArchConfig&) const = default;
};

template <class T>
struct NamedParam
{
  std::string name;
  ag::Var<T> var;
};

template <class T>
using ParamList = std::vector<NamedParam<T>>;

/// Gaussian(0, 0.02) kernels, zero bias.
template <class T>
class Conv2d
{
public:
  Conv2d() = default;
  Conv2d(int in, int out, int kernel, int stride, int pad, Rng& rng, double init_std = 0.02);
  ag::Var<T> operator()(const ag::Var<T>& x) const;
  void collect(const std::string& prefix, ParamList<T>& out) const;

  ag::Var<T> weight, bias;
  int stride = 1, pad = 0;
};

template <class T>
class ConvTranspose2d
{
public:
  ConvTranspose2d() = default;
  ConvTranspose2d(int in, int out, int kernel, int stride, int pad, Rng& rng, double init_std = 0.02);
  ag::Var<T> operator()(const ag::Var<T>& x) const;
  void collect(const std::string& prefix, ParamList<T>& out) const;

  ag::Var<T> weight, bias;
  int stride = 1, pad = 0;
};

/// x + IN(conv3(relu(IN(conv3(x))))).
template <class T>
class ResBlock
{
public:
  ResBlock(int channels, Rng& rng);
  ag::Var<T> operator()(const ag::Var<T>& x) const;
  void collect(const std::string& prefix, ParamList<T>& out) const;

private:
  Conv2d<T> c1_, c2_;
};

/// n1 strided convs then residual blocks. Blocks are held by shared_ptr so
/// two encoders can hold the very same block.
template <class T>
class Encoder
{
public:
  Encoder(const ArchConfig& arch, int private_blocks, uint64_t seed, std::shared_ptr<ResBlock<T>> shared_tail = nullptr);
  /// x in [0, 1].
  ag::Var<T> operator()(const ag::Var<T>& x) const;
  void collect(const std::string& prefix, ParamList<T>& out, bool include_shared) const;

private:
  std::vector<Conv2d<T>> downs_;
  std::vector<std::shared_ptr<ResBlock<T>>> blocks_;
  std::shared_ptr<ResBlock<T>> shared_tail_;
  int resolution_;
};

/// Residual blocks then n1 transposed convs; output mapped to [0, 1].
template <class T>
class Decoder
{
public:
  Decoder(const ArchConfig& arch, int blocks, uint64_t seed);
  ag::Var<T> operator()(const ag::Var<T>& c) const;
  void collect(const std::string& prefix, ParamList<T>& out) const;

private:
  std::vector<ResBlock<T>> blocks_;
  std::vector<ConvTranspose2d<T>> ups_;
};

/// n3 convs (k4 s2 p1), LeakyReLU 0.2 between; one logit channel per patch.
template <class T>
class Discriminator
{
public:
  Discriminator(const ArchConfig& arch, uint64_t seed);
  ag::Var<T> operator()(const ag::Var<T>& x) const;
  void collect(const std::string& prefix, ParamList<T>& out) const;

private:
  std::vector<Conv2d<T>> layers_;
};

/// Five feature maps, one per extractor block.
template <class T>
using FeatureMapSet = std::vector<ag::Var<T>>;

/// VGG-19 up to relu5_1. Returns relu1_1 ... relu5_1 on ImageNet-normalized
/// input. Weights never require gradients.
template <class T>
class PerceptualExtractor
{
public:
  /// Loads "features.<i>.weight/bias" tensors from a tensor archive.
  static PerceptualExtractor pretrained(const std::filesystem::path& weights);
  /// Frozen He-initialized filters with every width divided by `width_divisor`.
  static PerceptualExtractor random(uint64_t seed, int width_divisor = 1);

  FeatureMapSet<T> operator()(const ag::Var<T>& x) const;
  bool is_pretrained() const { return pretrained_; }
  int width_divisor() const { return width_divisor_; }
  ParamList<T> parameters() const;

private:
  PerceptualExtractor() = default;
  struct Layer
  {
    int index; // torchvision features index
    Conv2d<T> conv;
    bool pool_before;
    bool tap;
  };
  std::vector<Layer> layers_;
  bool pretrained_ = false;
  int width_divisor_ = 1;
};

/// Path of the pretrained extractor from an explicit value, else the
/// XTRANS_VGG19_WEIGHTS environment variable; empty if neither is set.
std::filesystem::path resolve_vgg_weights(const std::string& configured);

/// Human-readable instructions for obtaining the pretrained extractor.
std::string vgg_download_instructions();

template <class T>
struct Latent
{
  ag::Var<T> z_mean;
  ag::Var<T> z;       // z_mean + N(0, I) in training mode, z_mean in eval mode
  ag::Var<T> content; // shared generator layer applied to z
};

template <class T>
struct Guidance
{
  ag::Var<T> mask;
  ops::AffineParams<T> affine;
};

enum class Direction { AtoB, BtoA, AtoA, BtoB };

std::string to_string(Direction d);
Direction parse_direction(const std::string& s);
Domain source_of(Direction d);
Domain target_of(Direction d);

struct GuidanceOptions
{
  double eta = 0.5;
  /// Ablation: affine parameters come from the source instead of the exemplar.
  bool self_affine = false;
  bool operator==(const GuidanceOptions&) const = default;
};

/// The full translation model: E_A, E_B with a shared last block; G_A, G_B
/// with a shared first block; D_A, D_B; feature nets F_A, F_B.
template <class T>
class Translator
{
public:
  Translator(const ArchConfig& arch, uint64_t seed);

  const ArchConfig& arch() const { return arch_; }
  GuidanceOptions& guidance_options() { return options_; }
  const GuidanceOptions& guidance_options() const { return options_; }

  void set_training(bool on) { training_ = on; }
  bool training() const { return training_; }
  Rng& noise_rng() { return noise_rng_; }

  Latent<T> encode(const ag::Var<T>& x, Domain d);
  /// F_d(x): maps shaped like the content code.
  ag::Var<T> feature_maps(const ag::Var<T>& x, Domain d) const;
  /// Mask from F_src(source); affine parameters from F_ex(exemplar).
  Guidance<T> extract_guidance(const ag::Var<T>& source, Domain src, const ag::Var<T>& exemplar, Domain ex) const;
  Guidance<T> guidance_from_features(const ag::Var<T>& f_source, const ag::Var<T>& f_exemplar) const;
  /// Generator after its shared first block; output in [0, 1].
  ag::Var<T> generate(const ag::Var<T>& c_tilde, Domain d) const;
  ag::Var<T> discriminate(const ag::Var<T>& x, Domain d) const;
  ag::Var<T> translate(const ag::Var<T>& source, const ag::Var<T>& exemplar, Direction dir);

  /// Marks F_A/F_B pretrained and frozen; guidance is refused before this.
  void freeze_feature_nets();
  bool feature_nets_frozen() const { return frozen_; }

  /// Encoders and generators, shared blocks once.
  ParamList<T> generator_parameters() const;
  ParamList<T> discriminator_parameters() const;
  ParamList<T> feature_parameters(Domain d) const;
  ParamList<T> feature_parameters() const;
  /// Everything, each storage exactly once, with stable names.
  ParamList<T> all_parameters() const;

  Encoder<T>& feature_net(Domain d) { return d == Domain::A ? f_a_ : f_b_; }
  const ResBlock<T>& shared_encoder_block() const { return *enc_shared_; }
  const ResBlock<T>& shared_generator_block() const { return *gen_shared_; }

private:
  void check_input(const ag::Var<T>& x, const char* what) const;

  ArchConfig arch_;
  GuidanceOptions options_;
  bool training_ = true;
  bool frozen_ = false;
  Rng noise_rng_;
  std::shared_ptr<ResBlock<T>> enc_shared_;
  std::shared_ptr<ResBlock<T>> gen_shared_;
  Encoder<T> enc_a_, enc_b_;
  Decoder<T> gen_a_, gen_b_;
  Discriminator<T> dis_a_, dis_b_;
  Encoder<T> f_a_, f_b_;
};

/// Sets requires_grad on every parameter of a list.
template <class T>
void set_trainable(const ParamList<T>& params, bool on);

/// name -> tensor copies of the current values.
template <class T>
std::map<std::string, Tensor<T>> snapshot(const ParamList<T>& params);

} // namespace xtrans::nn
