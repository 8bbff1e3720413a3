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

#include "xtrans/xtrans.h"

#include <cstdlib>
#include <cstring>
#include <new>
#include <string>

#include "xtrans/config.hpp"
#include "xtrans/error.hpp"
#include "xtrans/eval.hpp"
#include "xtrans/image_io.hpp"
#include "xtrans/run.hpp"
#include "xtrans/trainer.hpp"

struct xt_config
{
  xtrans::config::ExperimentConfig cfg;
};

struct xt_model
{
  xtrans::train::LoadedModel loaded;
};

namespace {

thread_local std::string g_last_error;

xt_status fail(xt_status status, const std::string& message)
{
  g_last_error = message;
  return status;
}

template <class F>
xt_status guarded(F&& body)
{
  try {
    body();
    g_last_error.clear();
    return XT_OK;
  } catch (const xtrans::DivergenceError& e) {
    std::string msg = e.what();
    if (!e.last_good_checkpoint().empty())
      msg += "; last good checkpoint: " + e.last_good_checkpoint();
    return fail(XT_ERR_DIVERGED, msg);
  } catch (const xtrans::ConfigError& e) {
    return fail(XT_ERR_CONFIG, e.what());
  } catch (const xtrans::InvalidArgument& e) {
    return fail(XT_ERR_INVALID_ARGUMENT, e.what());
  } catch (const xtrans::IoError& e) {
    return fail(XT_ERR_IO, e.what());
  } catch (const xtrans::VersionError& e) {
    return fail(XT_ERR_VERSION, e.what());
  } catch (const xtrans::StateError& e) {
    return fail(XT_ERR_STATE, e.what());
  } catch (const std::filesystem::filesystem_error& e) {
    return fail(XT_ERR_IO, e.what());
  } catch (const std::bad_alloc&) {
    return fail(XT_ERR_RUNTIME, "out of memory");
  } catch (const std::exception& e) {
    return fail(XT_ERR_RUNTIME, e.what());
  } catch (...) {
    return fail(XT_ERR_RUNTIME, "unknown error");
  }
}

char* dup(const std::string& s)
{
  auto* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out)
    throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void require(const void* p, const char* what)
{
  if (!p)
    throw xtrans::InvalidArgument(std::string(what) + " must not be NULL");
}

} // namespace

extern "C" {

const char* xt_version(void)
{
  static const std::string v = xtrans::run::version();
  return v.c_str();
}

const char* xt_status_name(xt_status status)
{
  switch (status) {
  case XT_OK: return "ok";
  case XT_ERR_INVALID_ARGUMENT: return "invalid argument";
  case XT_ERR_CONFIG: return "configuration error";
  case XT_ERR_DIVERGED: return "training diverged";
  case XT_ERR_IO: return "i/o error";
  case XT_ERR_VERSION: return "version mismatch";
  case XT_ERR_STATE: return "invalid state";
  case XT_ERR_RUNTIME: return "runtime error";
  }
  return "unknown status";
}

const char* xt_last_error(void) { return g_last_error.c_str(); }

void xt_string_free(char* s) { std::free(s); }

xt_status xt_preset_names(char** out_json)
{
  return guarded([&] {
    require(out_json, "out_json");
    *out_json = dup(nlohmann::json(xtrans::config::preset_names()).dump());
  });
}

xt_status xt_config_new(const char* preset, xt_config** out)
{
  return guarded([&] {
    require(out, "out");
    *out = nullptr;
    auto cfg = preset ? xtrans::config::preset(preset) : xtrans::config::ExperimentConfig{};
    *out = new xt_config{std::move(cfg)};
  });
}

xt_status xt_config_load(const char* path, xt_config** out)
{
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    *out = nullptr;
    *out = new xt_config{xtrans::config::load(path)};
  });
}

void xt_config_free(xt_config* config) { delete config; }

xt_status xt_config_set(xt_config* config, const char* assignment)
{
  return guarded([&] {
    require(config, "config");
    require(assignment, "assignment");
    config->cfg.set_from_string(assignment);
  });
}

xt_status xt_config_validate(const xt_config* config)
{
  return guarded([&] {
    require(config, "config");
    config->cfg.validate();
  });
}

xt_status xt_config_to_json(const xt_config* config, char** out_json)
{
  return guarded([&] {
    require(config, "config");
    require(out_json, "out_json");
    *out_json = dup(config->cfg.to_json().dump(2));
  });
}

xt_status xt_config_design_register(const xt_config* config, char** out_json)
{
  return guarded([&] {
    require(config, "config");
    require(out_json, "out_json");
    *out_json = dup(xtrans::config::design_register(config->cfg).dump(2));
  });
}

xt_status xt_synth(const xt_config* config, const char* out_dir)
{
  return guarded([&] {
    require(config, "config");
    require(out_dir, "out_dir");
    xtrans::run::synth(config->cfg, out_dir);
  });
}

xt_status xt_pretrain(const xt_config* config, const char* out_dir, char** out_checkpoint)
{
  return guarded([&] {
    require(config, "config");
    require(out_dir, "out_dir");
    const auto path = xtrans::run::pretrain(config->cfg, out_dir);
    if (out_checkpoint)
      *out_checkpoint = dup(path.string());
  });
}

xt_status xt_train(const xt_config* config, const char* out_dir, const char* resume_checkpoint, char** out_checkpoint)
{
  return guarded([&] {
    require(config, "config");
    require(out_dir, "out_dir");
    const auto path =
      xtrans::run::train(config->cfg, out_dir, resume_checkpoint ? resume_checkpoint : std::filesystem::path{});
    if (out_checkpoint)
      *out_checkpoint = dup(path.string());
  });
}

xt_status xt_ablate(const xt_config* config, const char* variant, const char* out_dir, char** out_report_json)
{
  return guarded([&] {
    require(config, "config");
    require(variant, "variant");
    require(out_dir, "out_dir");
    const auto report = xtrans::run::ablate(config->cfg, xtrans::config::parse_ablation(variant), out_dir);
    if (out_report_json)
      *out_report_json = dup(report.dump(2));
  });
}

xt_status xt_eval(const char* checkpoint, const char* metrics, const char* out_dir, const xt_config* config,
                  char** out_report_json)
{
  return guarded([&] {
    require(checkpoint, "checkpoint");
    require(metrics, "metrics");
    require(out_dir, "out_dir");
    const auto eval_cfg = config ? config->cfg.eval : xtrans::config::EvalConfig{};
    const auto report = xtrans::run::evaluate(checkpoint, xtrans::run::parse_metrics(metrics), out_dir, eval_cfg);
    if (out_report_json)
      *out_report_json = dup(report.dump(2));
  });
}

xt_status xt_model_load(const char* checkpoint, xt_model** out)
{
  return guarded([&] {
    require(checkpoint, "checkpoint");
    require(out, "out");
    *out = nullptr;
    *out = new xt_model{xtrans::train::load_model(checkpoint)};
  });
}

void xt_model_free(xt_model* model) { delete model; }

int xt_model_resolution(const xt_model* model) { return model ? model->loaded.config.data.resolution : 0; }

xt_status xt_model_translate_file(xt_model* model, const char* source_path, const char* exemplar_path,
                                  const char* direction, const char* out_png)
{
  return guarded([&] {
    require(model, "model");
    require(source_path, "source_path");
    require(exemplar_path, "exemplar_path");
    require(direction, "direction");
    require(out_png, "out_png");
    const int res = model->loaded.config.data.resolution;
    const auto dir = xtrans::nn::parse_direction(direction);
    const auto fn = xtrans::eval::model_translator(*model->loaded.model);
    const auto y = fn(xtrans::run::read_input(source_path, res), xtrans::run::read_input(exemplar_path, res), dir);
    const std::filesystem::path out(out_png);
    if (!out.parent_path().empty())
      std::filesystem::create_directories(out.parent_path());
    xtrans::io::write_png(out, xtrans::io::to_raster(y.reshaped({3, res, res})));
  });
}

xt_status xt_model_translate(xt_model* model, const float* sources, const float* exemplars, int n,
                             const char* direction, float* out)
{
  return guarded([&] {
    require(model, "model");
    require(sources, "sources");
    require(exemplars, "exemplars");
    require(direction, "direction");
    require(out, "out");
    if (n < 1)
      throw xtrans::InvalidArgument("n must be positive");
    const int64_t res = model->loaded.config.data.resolution;
    const xtrans::Shape shape{n, 3, res, res};
    xtrans::TensorF src(shape), ex(shape);
    std::memcpy(src.data(), sources, static_cast<size_t>(src.numel()) * sizeof(float));
    std::memcpy(ex.data(), exemplars, static_cast<size_t>(ex.numel()) * sizeof(float));
    const auto fn = xtrans::eval::model_translator(*model->loaded.model);
    const auto y = fn(src, ex, xtrans::nn::parse_direction(direction));
    std::memcpy(out, y.data(), static_cast<size_t>(y.numel()) * sizeof(float));
  });
}

} // extern "C"
