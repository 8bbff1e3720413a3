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

// Command-line front end over the xtrans C API.
//
// Exit codes: 0 success, 2 configuration error (including bad arguments),
// 3 training divergence, 1 anything else.

#include <CLI11.hpp>
#include <cstdio>
#include <json.hpp>
#include <memory>
#include <string>
#include <vector>

#include "xtrans/xtrans.h"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitDiverged = 3;

int exit_code(xt_status s)
{
  switch (s) {
  case XT_OK: return 0;
  case XT_ERR_CONFIG:
  case XT_ERR_INVALID_ARGUMENT: return kExitConfig;
  case XT_ERR_DIVERGED: return kExitDiverged;
  default: return 1;
  }
}

struct Failure
{
  int code;
};

void check(xt_status s)
{
  if (s == XT_OK)
    return;
  std::fprintf(stderr, "xtrans: %s: %s\n", xt_status_name(s), xt_last_error());
  throw Failure{exit_code(s)};
}

using ConfigPtr = std::unique_ptr<xt_config, decltype(&xt_config_free)>;

std::string take_string(char* s)
{
  std::string out = s ? s : "";
  xt_string_free(s);
  return out;
}

struct CommonOptions
{
  std::string config_path;
  std::string preset = "single-digit";
  std::string seed;
  std::string out;
  std::vector<std::string> overrides;

  void add_to(CLI::App* cmd, bool with_out = true)
  {
    cmd->add_option("--config", config_path, "Config file (JSON with flat dotted keys)")->check(CLI::ExistingFile);
    cmd->add_option("--preset", preset, "Base preset when no --config is given");
    cmd->add_option("--seed", seed, "Experiment seed");
    if (with_out)
      cmd->add_option("--out", out, "Output directory (defaults to the config's 'out')");
    cmd->add_option("overrides", overrides, "key=value config overrides");
  }

  ConfigPtr build() const
  {
    xt_config* raw = nullptr;
    if (!config_path.empty())
      check(xt_config_load(config_path.c_str(), &raw));
    else
      check(xt_config_new(preset.c_str(), &raw));
    ConfigPtr cfg(raw, &xt_config_free);
    for (const auto& o : overrides)
      check(xt_config_set(cfg.get(), o.c_str()));
    if (!seed.empty())
      check(xt_config_set(cfg.get(), ("seed=" + seed).c_str()));
    if (!out.empty())
      check(xt_config_set(cfg.get(), ("out=" + nlohmann::json(out).dump()).c_str()));
    check(xt_config_validate(cfg.get()));
    return cfg;
  }
};

std::string out_dir_of(const xt_config* cfg)
{
  char* json = nullptr;
  check(xt_config_to_json(cfg, &json));
  return nlohmann::json::parse(take_string(json)).at("out").get<std::string>();
}

} // namespace

int main(int argc, char** argv)
{
  CLI::App app{"xtrans: exemplar-guided unpaired image translation"};
  app.set_version_flag("--version", std::string(xt_version()));
  app.require_subcommand(1);

  CommonOptions synth_opt, pretrain_opt, train_opt, ablate_opt, eval_opt, show_opt;
  std::string resume, variant, checkpoint, metrics = "all", source, exemplar, direction = "A2B", output;

  auto* synth = app.add_subcommand("synth", "Generate the synthetic datasets to disk");
  synth_opt.add_to(synth);

  auto* pretrain = app.add_subcommand("pretrain", "Pretrain and freeze the feature-mask networks");
  pretrain_opt.add_to(pretrain);

  auto* train = app.add_subcommand("train", "Run main training with checkpointing");
  train_opt.add_to(train);
  train->add_option("--checkpoint", resume, "Resume from this checkpoint (e.g. the pretrain output)")
    ->check(CLI::ExistingFile);

  auto* translate = app.add_subcommand("translate", "Translate one image guided by an exemplar");
  translate->add_option("--checkpoint", checkpoint, "Trained checkpoint")->required()->check(CLI::ExistingFile);
  translate->add_option("--source", source, "Source image")->required()->check(CLI::ExistingFile);
  translate->add_option("--exemplar", exemplar, "Exemplar image")->required()->check(CLI::ExistingFile);
  translate->add_option("--direction", direction, "A2B, B2A, A2A or B2B");
  translate->add_option("--output", output, "Output PNG")->required();

  auto* evaluate = app.add_subcommand("eval", "Evaluate a checkpoint");
  eval_opt.add_to(evaluate);
  evaluate->add_option("--checkpoint", checkpoint, "Trained checkpoint")->required()->check(CLI::ExistingFile);
  evaluate->add_option("--metrics", metrics, "Comma list of ssim, control, tsne, grid or all");

  auto* ablate = app.add_subcommand("ablate", "Train and evaluate an ablation variant");
  ablate_opt.add_to(ablate);
  ablate->add_option("--variant", variant, "no_mask, no_adain or no_perceptual")->required();

  auto* config = app.add_subcommand("config", "Configuration utilities");
  config->require_subcommand(1);
  auto* show = config->add_subcommand("show", "Print the resolved config");
  show_opt.add_to(show, false);
  bool show_register = false;
  show->add_flag("--design", show_register, "Print the design-decision register instead");
  auto* presets = config->add_subcommand("presets", "List the built-in presets");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (synth->parsed()) {
      auto cfg = synth_opt.build();
      check(xt_synth(cfg.get(), out_dir_of(cfg.get()).c_str()));
    } else if (pretrain->parsed()) {
      auto cfg = pretrain_opt.build();
      char* path = nullptr;
      check(xt_pretrain(cfg.get(), out_dir_of(cfg.get()).c_str(), &path));
      std::printf("%s\n", take_string(path).c_str());
    } else if (train->parsed()) {
      auto cfg = train_opt.build();
      char* path = nullptr;
      check(xt_train(cfg.get(), out_dir_of(cfg.get()).c_str(), resume.empty() ? nullptr : resume.c_str(), &path));
      std::printf("%s\n", take_string(path).c_str());
    } else if (translate->parsed()) {
      xt_model* raw = nullptr;
      check(xt_model_load(checkpoint.c_str(), &raw));
      std::unique_ptr<xt_model, decltype(&xt_model_free)> model(raw, &xt_model_free);
      check(xt_model_translate_file(model.get(), source.c_str(), exemplar.c_str(), direction.c_str(), output.c_str()));
    } else if (evaluate->parsed()) {
      auto cfg = eval_opt.build();
      char* report = nullptr;
      check(xt_eval(checkpoint.c_str(), metrics.c_str(), out_dir_of(cfg.get()).c_str(), cfg.get(), &report));
      std::printf("%s\n", take_string(report).c_str());
    } else if (ablate->parsed()) {
      auto cfg = ablate_opt.build();
      char* report = nullptr;
      check(xt_ablate(cfg.get(), variant.c_str(), out_dir_of(cfg.get()).c_str(), &report));
      std::printf("%s\n", take_string(report).c_str());
    } else if (show->parsed()) {
      auto cfg = show_opt.build();
      char* json = nullptr;
      check(show_register ? xt_config_design_register(cfg.get(), &json) : xt_config_to_json(cfg.get(), &json));
      std::printf("%s\n", take_string(json).c_str());
    } else if (presets->parsed()) {
      char* json = nullptr;
      check(xt_preset_names(&json));
      std::printf("%s\n", take_string(json).c_str());
    }
  } catch (const Failure& f) {
    return f.code;
  }
  return 0;
}
