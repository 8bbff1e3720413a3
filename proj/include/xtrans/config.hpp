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
#include <filesystem>
#include <json.hpp>
#include <string>
#include <vector>

#include "xtrans/data.hpp"
#include "xtrans/losses.hpp"
#include "xtrans/nn.hpp"

namespace xtrans::config {

struct TrainConfig
{
  int batch_size = 8;
  double lr = 1e-5;
  int64_t iterations = 60000;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  int updates_per_d = 5;
  double eta = 0.5;
  int64_t pretrain_iterations = 10000;
  int64_t checkpoint_interval = 5000;
  int64_t log_interval = 10;
  bool augment = true;
};

struct PerceptualConfig
{
  std::string mode = "pretrained"; // pretrained | random
  std::string weights;             // empty -> XTRANS_VGG19_WEIGHTS
  int width_divisor = 1;           // random mode only
};

struct EvalConfig
{
  int64_t pairs = 0; // 0 -> every test source once
  uint64_t seed = 2024;
  int64_t tsne_samples = 500;
  double perplexity = 30;
  int pca_dims = 50;
  int64_t grid_rows = 6;
};

enum class Ablation { None, NoMask, NoAdain, NoPerceptual };

std::string to_string(Ablation a);
Ablation parse_ablation(const std::string& s);

struct ExperimentConfig
{
  std::string preset = "single-digit";
  uint64_t seed = 0;
  std::string out = "runs/default";

  data::DatasetConfig data;
  std::string data_root;  // read synthesized splits from here instead of generating in memory
  std::string folder_a;   // generic image folders (no masks)
  std::string folder_b;
  nn::ArchConfig arch;
  TrainConfig train;
  losses::LossWeights loss;
  PerceptualConfig perceptual;
  EvalConfig eval;
  Ablation ablation = Ablation::None;

  /// Sets one dotted key; ConfigError on an unknown key or a mistyped value.
  void set(const std::string& key, const nlohmann::json& value);
  /// Parses "key=value", inferring the JSON type of the value.
  void set_from_string(const std::string& assignment);
  /// Whole-config validation; nothing runs before this passes.
  void validate() const;
  /// Every key with its resolved value, sorted.
  nlohmann::json to_json() const;
  /// Applies an ablation variant: no_mask -> eta = 1, no_perceptual ->
  /// lambda_c = lambda_s = 0, no_adain -> self-statistics guidance.
  void apply_ablation(Ablation a);

  nn::GuidanceOptions guidance() const;
  /// Dataset config with the experiment seed folded in.
  data::DatasetConfig dataset() const;
};

std::vector<std::string> preset_names();
/// Values mirror the per-experiment training table rows.
ExperimentConfig preset(const std::string& name);
/// JSON object of flat dotted keys. An optional "preset" key selects the base
/// preset; all other keys override it.
ExperimentConfig load(const std::filesystem::path& path);
ExperimentConfig from_json(const nlohmann::json& j);

/// Every gap-filling choice in effect, for the run manifest.
nlohmann::json design_register(const ExperimentConfig& cfg);

} // namespace xtrans::config
