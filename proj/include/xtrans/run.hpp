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
#include <json.hpp>
#include <set>
#include <string>

#include "xtrans/config.hpp"
#include "xtrans/nn.hpp"

/// Pipeline stages as used by the command line: every stage validates its
/// config, takes the output directory lock and writes a manifest before any
/// other side effect.
namespace xtrans::run {

std::string version();

/// Exclusive ownership of an output directory for the lifetime of the
/// object. A lock left by a dead process is taken over with a warning.
class DirectoryLock
{
public:
  explicit DirectoryLock(const std::filesystem::path& dir);
  ~DirectoryLock();
  DirectoryLock(const DirectoryLock&) = delete;
  DirectoryLock& operator=(const DirectoryLock&) = delete;

private:
  std::filesystem::path path_;
};

/// Writes manifest-<command>.json (or -2, -3, ... if present; manifests are
/// never overwritten) and returns its path.
std::filesystem::path write_manifest(const std::filesystem::path& dir, const std::string& command,
                                     const config::ExperimentConfig& cfg, const nlohmann::json& extra = {});

/// Writes the synthesized splits of both domains under `out`.
nlohmann::json synth(const config::ExperimentConfig& cfg, const std::filesystem::path& out);

/// Feature-net pretraining only. Returns the checkpoint holding the frozen nets.
std::filesystem::path pretrain(const config::ExperimentConfig& cfg, const std::filesystem::path& out);

/// Main training, optionally resuming from a checkpoint (which may be the
/// output of pretrain). Returns the final checkpoint.
std::filesystem::path train(const config::ExperimentConfig& cfg, const std::filesystem::path& out,
                            const std::filesystem::path& resume = {});

/// Reads an image file as a (1, 3, resolution, resolution) batch, expanding
/// gray to RGB and resampling if needed.
TensorF read_input(const std::filesystem::path& path, int resolution);

/// Single translation of image files to a PNG.
void translate(const std::filesystem::path& checkpoint, const std::filesystem::path& source,
               const std::filesystem::path& exemplar, nn::Direction dir, const std::filesystem::path& output);

/// Metric names accepted by evaluate.
std::set<std::string> parse_metrics(const std::string& list);

/// Writes the requested reports under `out` and returns their numbers.
/// `eval` supplies the evaluation options; dataset settings come from the
/// checkpoint's config.
nlohmann::json evaluate(const std::filesystem::path& checkpoint, const std::set<std::string>& metrics,
                        const std::filesystem::path& out, const config::EvalConfig& eval);

/// Applies the variant, trains under out/<variant> and evaluates SSIM and
/// exemplar control.
nlohmann::json ablate(config::ExperimentConfig cfg, config::Ablation variant, const std::filesystem::path& out);

} // namespace xtrans::run
