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

#include "xtrans/config.hpp"

#include <fstream>
#include <functional>
#include <map>

namespace xtrans::config {

using nlohmann::json;

std::string to_string(Ablation a)
{
  switch (a) {
  case Ablation::None:
    return "none";
  case Ablation::NoMask:
    return "no_mask";
  case Ablation::NoAdain:
    return "no_adain";
  case Ablation::NoPerceptual:
    return "no_perceptual";
  }
  return "none";
}

Ablation parse_ablation(const std::string& s)
{
  if (s == "none" || s.empty())
    return Ablation::None;
  if (s == "no_mask")
    return Ablation::NoMask;
  if (s == "no_adain")
    return Ablation::NoAdain;
  if (s == "no_perceptual")
    return Ablation::NoPerceptual;
  throw ConfigError("unknown ablation variant '" + s + "' (expected no_mask, no_adain or no_perceptual)");
}

namespace {

struct WrongType
{};

struct Field
{
  std::function<json(const ExperimentConfig&)> get;
  std::function<void(ExperimentConfig&, const json&)> set;
};

template <class V>
V typed(const json& v)
{
  bool ok;
  if constexpr (std::is_same_v<V, bool>)
    ok = v.is_boolean();
  else if constexpr (std::is_same_v<V, std::string>)
    ok = v.is_string();
  else if constexpr (std::is_unsigned_v<V>)
    ok = v.is_number_unsigned() || (v.is_number_integer() && v.get<int64_t>() >= 0);
  else if constexpr (std::is_integral_v<V>)
    ok = v.is_number_integer();
  else
    ok = v.is_number();
  if (!ok)
    throw WrongType{};
  return v.get<V>();
}

template <class V>
Field field_of(V ExperimentConfig::*member)
{
  return {[member](const ExperimentConfig& c) { return json(c.*member); },
          [member](ExperimentConfig& c, const json& v) { c.*member = typed<V>(v); }};
}

template <class S, class V>
Field field_of(S ExperimentConfig::*section, V S::*member)
{
  return {[section, member](const ExperimentConfig& c) { return json(c.*section.*member); },
          [section, member](ExperimentConfig& c, const json& v) { c.*section.*member = typed<V>(v); }};
}

const std::map<std::string, Field>& fields()
{
  using C = ExperimentConfig;
  static const std::map<std::string, Field> table = [] {
    std::map<std::string, Field> f;
    f["preset"] = field_of(&C::preset);
    f["seed"] = field_of(&C::seed);
    f["out"] = field_of(&C::out);

    f["data.dataset"] = {[](const C& c) { return json(data::to_string(c.data.kind)); },
                         [](C& c, const json& v) {
                           try {
                             c.data.kind = data::parse_kind(typed<std::string>(v));
                           } catch (const InvalidArgument& e) {
                             throw ConfigError(std::string("data.dataset: ") + e.what());
                           }
                         }};
    f["data.resolution"] = field_of(&C::data, &data::DatasetConfig::resolution);
    f["data.train_size"] = field_of(&C::data, &data::DatasetConfig::train_size);
    f["data.test_size"] = field_of(&C::data, &data::DatasetConfig::test_size);
    f["data.jitter"] = field_of(&C::data, &data::DatasetConfig::jitter);
    f["data.mnist_dir"] = field_of(&C::data, &data::DatasetConfig::mnist_dir);
    f["data.glyphs_per_digit"] = field_of(&C::data, &data::DatasetConfig::glyphs_per_digit);
    f["data.root"] = field_of(&C::data_root);
    f["data.folder_a"] = field_of(&C::folder_a);
    f["data.folder_b"] = field_of(&C::folder_b);

    f["arch.n1"] = field_of(&C::arch, &nn::ArchConfig::n1);
    f["arch.n2"] = field_of(&C::arch, &nn::ArchConfig::n2);
    f["arch.n3"] = field_of(&C::arch, &nn::ArchConfig::n3);
    f["arch.base_width"] = field_of(&C::arch, &nn::ArchConfig::base_width);

    f["train.batch_size"] = field_of(&C::train, &TrainConfig::batch_size);
    f["train.lr"] = field_of(&C::train, &TrainConfig::lr);
    f["train.iterations"] = field_of(&C::train, &TrainConfig::iterations);
    f["train.beta1"] = field_of(&C::train, &TrainConfig::beta1);
    f["train.beta2"] = field_of(&C::train, &TrainConfig::beta2);
    f["train.adam_eps"] = field_of(&C::train, &TrainConfig::adam_eps);
    f["train.updates_per_d"] = field_of(&C::train, &TrainConfig::updates_per_d);
    f["train.eta"] = field_of(&C::train, &TrainConfig::eta);
    f["train.pretrain_iterations"] = field_of(&C::train, &TrainConfig::pretrain_iterations);
    f["train.checkpoint_interval"] = field_of(&C::train, &TrainConfig::checkpoint_interval);
    f["train.log_interval"] = field_of(&C::train, &TrainConfig::log_interval);
    f["train.augment"] = field_of(&C::train, &TrainConfig::augment);

    f["loss.lambda_c"] = field_of(&C::loss, &losses::LossWeights::lambda_c);
    f["loss.lambda_s"] = field_of(&C::loss, &losses::LossWeights::lambda_s);
    f["loss.gan"] = field_of(&C::loss, &losses::LossWeights::gan);
    f["loss.kl"] = field_of(&C::loss, &losses::LossWeights::kl);
    f["loss.recon"] = field_of(&C::loss, &losses::LossWeights::recon);
    f["loss.cyc_kl"] = field_of(&C::loss, &losses::LossWeights::cyc_kl);
    f["loss.cyc_recon"] = field_of(&C::loss, &losses::LossWeights::cyc_recon);

    f["perceptual.mode"] = field_of(&C::perceptual, &PerceptualConfig::mode);
    f["perceptual.weights"] = field_of(&C::perceptual, &PerceptualConfig::weights);
    f["perceptual.width_divisor"] = field_of(&C::perceptual, &PerceptualConfig::width_divisor);

    f["eval.pairs"] = field_of(&C::eval, &EvalConfig::pairs);
    f["eval.seed"] = field_of(&C::eval, &EvalConfig::seed);
    f["eval.tsne_samples"] = field_of(&C::eval, &EvalConfig::tsne_samples);
    f["eval.perplexity"] = field_of(&C::eval, &EvalConfig::perplexity);
    f["eval.pca_dims"] = field_of(&C::eval, &EvalConfig::pca_dims);
    f["eval.grid_rows"] = field_of(&C::eval, &EvalConfig::grid_rows);

    f["ablation.variant"] = {[](const C& c) { return json(to_string(c.ablation)); },
                             [](C& c, const json& v) { c.ablation = parse_ablation(typed<std::string>(v)); }};
    return f;
  }();
  return table;
}

} // namespace

void ExperimentConfig::set(const std::string& key, const json& value)
{
  const auto& table = fields();
  const auto it = table.find(key);
  if (it == table.end())
    throw ConfigError("unknown config key '" + key + "'");
  try {
    it->second.set(*this, value);
  } catch (const WrongType&) {
    throw ConfigError("config key '" + key + "' has a value of the wrong type: " + value.dump());
  }
}

void ExperimentConfig::set_from_string(const std::string& assignment)
{
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0)
    throw ConfigError("expected key=value, got '" + assignment + "'");
  const std::string key = assignment.substr(0, eq), raw = assignment.substr(eq + 1);
  json value;
  try {
    value = json::parse(raw);
  } catch (const json::exception&) {
    value = raw;
  }
  if (value.is_string() || fields().count(key) == 0) {
    set(key, value);
    return;
  }
  // Strings that happen to parse as numbers (e.g. a directory named "1").
  const json current = fields().at(key).get(*this);
  if (current.is_string() && !value.is_string())
    value = raw;
  set(key, value);
}

void ExperimentConfig::validate() const
{
  if (data.resolution < 8)
    throw ConfigError("data.resolution must be at least 8");
  if (data.train_size < 1 || data.test_size < 1)
    throw ConfigError("data.train_size and data.test_size must be positive");
  if (data.jitter < 0 || data.jitter > 0.5)
    throw ConfigError("data.jitter must lie in [0, 0.5]");
  if (data.glyphs_per_digit < 1)
    throw ConfigError("data.glyphs_per_digit must be positive");
  if (data.kind == data::DatasetKind::Multi && data.resolution % data::kGridSide != 0)
    throw ConfigError("multi-digit data.resolution must be divisible by 4");
  if (folder_a.empty() != folder_b.empty())
    throw ConfigError("data.folder_a and data.folder_b must be given together");

  nn::ArchConfig a = arch;
  a.resolution = data.resolution;
  a.validate();

  if (train.batch_size < 1)
    throw ConfigError("train.batch_size must be at least 1");
  if (!(train.lr > 0))
    throw ConfigError("train.lr must be positive");
  if (train.iterations < 0 || train.pretrain_iterations < 0)
    throw ConfigError("iteration counts must be non-negative");
  if (!(train.beta1 >= 0 && train.beta1 < 1) || !(train.beta2 >= 0 && train.beta2 < 1))
    throw ConfigError("train.beta1 and train.beta2 must lie in [0, 1)");
  if (!(train.adam_eps > 0))
    throw ConfigError("train.adam_eps must be positive");
  if (train.updates_per_d < 1)
    throw ConfigError("train.updates_per_d must be at least 1");
  if (!(train.eta >= 0 && train.eta <= 1))
    throw ConfigError("train.eta must lie in [0, 1]");
  if (train.checkpoint_interval < 0 || train.log_interval < 1)
    throw ConfigError("train.checkpoint_interval must be >= 0 and train.log_interval >= 1");

  loss.validate();

  if (perceptual.mode != "pretrained" && perceptual.mode != "random")
    throw ConfigError("perceptual.mode must be 'pretrained' or 'random'");
  if (perceptual.width_divisor < 1 || 64 % perceptual.width_divisor != 0)
    throw ConfigError("perceptual.width_divisor must divide 64");
  if (perceptual.mode == "pretrained" && perceptual.width_divisor != 1)
    throw ConfigError("perceptual.width_divisor applies to random mode only");

  if (eval.pairs < 0 || eval.tsne_samples < 2 || eval.pca_dims < 1 || eval.grid_rows < 1)
    throw ConfigError("eval settings out of range");
  if (!(eval.perplexity > 0))
    throw ConfigError("eval.perplexity must be positive");
  if (out.empty())
    throw ConfigError("out must name a directory");
}

json ExperimentConfig::to_json() const
{
  json j = json::object();
  for (const auto& [key, field] : fields())
    j[key] = field.get(*this);
  return j;
}

void ExperimentConfig::apply_ablation(Ablation a)
{
  ablation = a;
  if (a == Ablation::NoMask)
    train.eta = 1.0;
  if (a == Ablation::NoPerceptual) {
    loss.lambda_c = 0.0;
    loss.lambda_s = 0.0;
  }
}

nn::GuidanceOptions ExperimentConfig::guidance() const
{
  nn::GuidanceOptions g;
  g.eta = ablation == Ablation::NoMask ? 1.0 : train.eta;
  g.self_affine = ablation == Ablation::NoAdain;
  return g;
}

data::DatasetConfig ExperimentConfig::dataset() const
{
  data::DatasetConfig d = data;
  d.seed = seed;
  return d;
}

std::vector<std::string> preset_names() { return {"single-digit", "multi-digit"}; }

ExperimentConfig preset(const std::string& name)
{
  ExperimentConfig c;
  c.preset = name;
  if (name == "single-digit") {
    c.data.kind = data::DatasetKind::Single;
    c.data.resolution = 64;
    c.arch = {1, 4, 5, 64, 64};
    c.loss.lambda_s = 1e3;
    c.loss.lambda_c = 1e1;
  } else if (name == "multi-digit") {
    c.data.kind = data::DatasetKind::Multi;
    c.data.resolution = 128;
    c.arch = {3, 4, 5, 64, 128};
    c.loss.lambda_s = 1e4;
    c.loss.lambda_c = 1e2;
  } else {
    throw ConfigError("unknown preset '" + name + "' (available: single-digit, multi-digit)");
  }
  c.train.batch_size = 8;
  c.train.lr = 1e-5;
  c.train.iterations = 60000;
  return c;
}

ExperimentConfig from_json(const json& j)
{
  if (!j.is_object())
    throw ConfigError("config must be a JSON object of dotted keys");
  std::string base = "single-digit";
  if (j.contains("preset")) {
    if (!j.at("preset").is_string())
      throw ConfigError("config key 'preset' must be a string");
    base = j.at("preset").get<std::string>();
  }
  ExperimentConfig c = preset(base);
  for (const auto& [key, value] : j.items()) {
    if (key == "preset")
      continue;
    c.set(key, value);
  }
  if (c.ablation != Ablation::None)
    c.apply_ablation(c.ablation);
  return c;
}

ExperimentConfig load(const std::filesystem::path& path)
{
  std::ifstream is(path);
  if (!is)
    throw ConfigError("cannot read config file " + path.string());
  json j;
  try {
    j = json::parse(is, nullptr, true, true);
  } catch (const json::exception& e) {
    throw ConfigError("config file " + path.string() + " is not valid JSON: " + e.what());
  }
  return from_json(j);
}

json design_register(const ExperimentConfig& cfg)
{
  return {
    {"canvas_resolution", cfg.data.resolution},
    {"mask_threshold", data::kMaskThreshold},
    {"primaries", "pure channel primaries red=(1,0,0) green=(0,1,0) blue=(0,0,1)"},
    {"multi_digit_palette", "HSL hue 36*d degrees, saturation 0.8, lightness 0.5"},
    {"multi_digit_jitter", cfg.data.jitter},
    {"multi_digit_placement", "10 distinct cells of a 4x4 grid, uniform without replacement"},
    {"augmentation", "p=0.5 left-right flip, then 4 px reflect pad and random crop"},
    {"glyph_source", cfg.data.mnist_dir.empty() ? "procedural stroke stencils" : "MNIST IDX files"},
    {"stat_epsilon", ops::kStatEps},
    {"variance", "population"},
    {"affine_gamma", "standard deviation"},
    {"gram_normalization", "C*H*W"},
    {"ssim", {{"window", 11}, {"sigma", 1.5}, {"k1", 0.01}, {"k2", 0.03}, {"data_range", 1.0}, {"color", "channel mean"}}},
    {"lr_schedule", "base * (1 - t/T)^0.9"},
    {"base_width", cfg.arch.base_width},
    {"width_growth", "doubling per stride, discriminator capped at 8x"},
    {"resampling_layers", "kernel 4 stride 2 padding 1"},
    {"residual_layers", "kernel 3 stride 1 padding 1, instance norm"},
    {"activations", "ReLU in encoders/generators, LeakyReLU 0.2 in discriminators, tanh output"},
    {"shared_layers", "last encoder residual block; first generator residual block"},
    {"content_code", "shared generator block applied to the latent sample"},
    {"latent_noise", "z = mean + N(0, I) in training, z = mean in evaluation"},
    {"feature_nets", "separate F_A, F_B with the encoder architecture and no shared layers"},
    {"guidance_wiring", "mask from F_source(source), affine from F_target(exemplar)"},
    {"eta", cfg.guidance().eta},
    {"self_affine", cfg.guidance().self_affine},
    {"perceptual_extractor", cfg.perceptual.mode},
    {"perceptual_width_divisor", cfg.perceptual.width_divisor},
    {"perceptual_layers", "relu1_1 relu2_1 relu3_1 relu4_1 relu5_1, ImageNet input normalization"},
    {"content_layer_weights", losses::content_layer_weights()},
    {"style_layer_weights", "uniform"},
    {"perceptual_flows", "translation outputs x_AB and x_BA only"},
    {"unit_weights", {{"gan", cfg.loss.gan}, {"kl", cfg.loss.kl}, {"recon", cfg.loss.recon},
                      {"cyc_kl", cfg.loss.cyc_kl}, {"cyc_recon", cfg.loss.cyc_recon}}},
    {"reductions", "means over batch and elements"},
    {"gan_objective", "non-saturating BCE on patch logits"},
    {"update_schedule", "updates_per_d E/G steps (fresh batch each) per D step"},
    {"pretrain_schedule", "1:1 VAE-GAN updates per domain"},
    {"pretrain_iterations", cfg.train.pretrain_iterations},
    {"exemplar_pairing_train", "uniform with replacement from the other domain's batch"},
    {"exemplar_pairing_eval", "one seeded uniform exemplar from the opposite test set per source"},
    {"init", "N(0, 0.02) kernels, zero bias"},
    {"color_classifier", "nearest of black, white, red, green, blue in RGB under the source mask"},
    {"tsne", {{"pca_dims", cfg.eval.pca_dims}, {"perplexity", cfg.eval.perplexity}}},
  };
}

} // namespace xtrans::config
