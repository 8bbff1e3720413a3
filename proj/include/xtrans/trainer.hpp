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
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "xtrans/archive.hpp"
#include "xtrans/config.hpp"
#include "xtrans/data.hpp"
#include "xtrans/losses.hpp"
#include "xtrans/nn.hpp"

namespace xtrans::train {

inline constexpr int kCheckpointVersion = 1;

using Model = nn::Translator<float>;

/// Adam with bias correction. step() updates every parameter that received
/// a gradient and then clears all gradients.
class Adam
{
public:
  Adam() = default;
  Adam(nn::ParamList<float> params, double beta1, double beta2, double eps);

  void step(double lr);
  void zero_grad();
  int64_t steps() const { return t_; }

  void save(archive::Archive& ar, const std::string& prefix) const;
  /// Checks every moment tensor before touching any state.
  void validate(const archive::Archive& ar, const std::string& prefix) const;
  void load(const archive::Archive& ar, const std::string& prefix);

private:
  nn::ParamList<float> params_;
  std::vector<TensorF> m_, v_;
  double beta1_ = 0.9, beta2_ = 0.999, eps_ = 1e-8;
  int64_t t_ = 0;
};

/// Image pools for both domains. Test pools double as held-out data.
struct DataPools
{
  std::vector<TensorF> train_a, train_b, test_a, test_b;
};

/// Synthesizes in memory, reads a synthesized tree, or loads image folders,
/// depending on the config.
DataPools build_pools(const config::ExperimentConfig& cfg);

struct StepInfo
{
  int64_t step = 0; // index of the step just taken
  double lr = 0;
  bool d_updated = false;
  double d_loss = 0; // last discriminator loss (0 before the first update)
  losses::LossReport report;
};

struct PretrainRecord
{
  int64_t step;
  data::Domain domain;
  double lr;
  double vae;
  double g_loss;
  double d_loss;
  double heldout_recon_l1; // NaN when not evaluated at this step
};

struct PretrainResult
{
  std::array<double, 2> heldout_before{};
  std::array<double, 2> heldout_after{};
  std::vector<PretrainRecord> log;
};

/// Owns the model, the fixed perceptual extractor, both optimizers, the data
/// stream and every RNG, so a checkpoint captures the full training state.
class Trainer
{
public:
  /// Validates the config. The pretrained extractor is loaded only if a
  /// perceptual term is active.
  explicit Trainer(config::ExperimentConfig cfg);

  const config::ExperimentConfig& config() const { return cfg_; }
  Model& model() { return *model_; }
  const Model& model() const { return *model_; }
  bool has_extractor() const { return extractor_.has_value(); }
  const nn::PerceptualExtractor<float>& extractor() const;

  /// Takes the pools and starts the seeded unpaired batch stream.
  void set_data(DataPools pools);
  const DataPools& data() const { return pools_; }
  std::pair<TensorF, TensorF> next_batch();

  /// Trains F_A and F_B, each inside its own VAE-GAN, then freezes them.
  PretrainResult pretrain_feature_nets(int64_t iterations, const std::filesystem::path& log_csv = {});

  /// One encoder/generator update over the four flows plus cycles; a
  /// discriminator update every updates_per_d calls.
  StepInfo train_step(const TensorF& batch_a, const TensorF& batch_b);
  StepInfo step_on_next_batch();

  int64_t step() const { return step_; }
  int64_t d_updates() const { return d_updates_; }
  double lr_at(int64_t step) const;

  void save_checkpoint(const std::filesystem::path& path) const;
  /// All-or-nothing: on any mismatch the trainer is left untouched.
  void load_checkpoint(const std::filesystem::path& path);

  /// Where the most recent checkpoint was written (empty if none).
  const std::filesystem::path& last_checkpoint() const { return last_checkpoint_; }

  /// Pretrain if needed, then run the main loop to train.iterations with
  /// metrics and periodic checkpoints under `dir`. Returns the final
  /// checkpoint path.
  std::filesystem::path run(const std::filesystem::path& dir,
                            const std::function<void(const StepInfo&)>& on_step = nullptr);

private:
  double heldout_recon(data::Domain d, const nn::Encoder<float>& f, const nn::Decoder<float>& dec) const;

  config::ExperimentConfig cfg_;
  std::unique_ptr<Model> model_;
  std::optional<nn::PerceptualExtractor<float>> extractor_;
  nn::ParamList<float> g_params_, d_params_;
  Adam g_opt_, d_opt_;
  Rng rng_;
  DataPools pools_;
  std::unique_ptr<data::UnpairedBatchIterator> iterator_;
  int64_t step_ = 0;
  int64_t d_updates_ = 0;
  double last_d_loss_ = 0;
  std::filesystem::path last_checkpoint_;
};

/// Model and the config it was trained with, from a checkpoint, in
/// evaluation mode.
struct LoadedModel
{
  config::ExperimentConfig config;
  std::unique_ptr<Model> model;
  int64_t step = 0;
};

LoadedModel load_model(const std::filesystem::path& checkpoint);

/// Rows of an (N, C, H, W) batch picked by index.
TensorF take(const TensorF& batch, const std::vector<int64_t>& index);

} // namespace xtrans::train
