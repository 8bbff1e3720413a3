/* Copyright 2026 The xtrans Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef XTRANS_XTRANS_H
#define XTRANS_XTRANS_H

/* C interface to the xtrans library. Every fallible call returns an
 * xt_status; on failure xt_last_error() describes the problem for the
 * calling thread. Strings returned through char** are owned by the caller
 * and released with xt_string_free. */

#if defined(_WIN32)
#define XT_API __declspec(dllexport)
#else
#define XT_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum xt_status {
  XT_OK = 0,
  XT_ERR_INVALID_ARGUMENT = 1,
  XT_ERR_CONFIG = 2,
  XT_ERR_DIVERGED = 3,
  XT_ERR_IO = 4,
  XT_ERR_VERSION = 5,
  XT_ERR_STATE = 6,
  XT_ERR_RUNTIME = 7
} xt_status;

typedef struct xt_config xt_config;
typedef struct xt_model xt_model;

XT_API const char* xt_version(void);
XT_API const char* xt_status_name(xt_status status);
/* Message of the last failed call on this thread ("" if none). */
XT_API const char* xt_last_error(void);
XT_API void xt_string_free(char* s);

/* Preset names as a JSON array. */
XT_API xt_status xt_preset_names(char** out_json);

XT_API xt_status xt_config_new(const char* preset, xt_config** out);
/* Flat dotted-key JSON file; an optional "preset" key picks the base. */
XT_API xt_status xt_config_load(const char* path, xt_config** out);
XT_API void xt_config_free(xt_config* config);
/* "key=value"; the value is parsed as JSON when possible, else as a string. */
XT_API xt_status xt_config_set(xt_config* config, const char* assignment);
XT_API xt_status xt_config_validate(const xt_config* config);
/* Every resolved key, pretty-printed JSON. */
XT_API xt_status xt_config_to_json(const xt_config* config, char** out_json);
/* Design decisions in effect for this config, as JSON. */
XT_API xt_status xt_config_design_register(const xt_config* config, char** out_json);

XT_API xt_status xt_synth(const xt_config* config, const char* out_dir);
XT_API xt_status xt_pretrain(const xt_config* config, const char* out_dir, char** out_checkpoint);
/* resume_checkpoint may be NULL. */
XT_API xt_status xt_train(const xt_config* config, const char* out_dir, const char* resume_checkpoint,
                          char** out_checkpoint);
/* variant: "no_mask", "no_adain" or "no_perceptual". */
XT_API xt_status xt_ablate(const xt_config* config, const char* variant, const char* out_dir, char** out_report_json);
/* metrics: comma list of ssim, control, tsne, grid or all. Evaluation
 * options are taken from config (NULL for defaults); everything else comes
 * from the checkpoint. */
XT_API xt_status xt_eval(const char* checkpoint, const char* metrics, const char* out_dir, const xt_config* config,
                         char** out_report_json);

XT_API xt_status xt_model_load(const char* checkpoint, xt_model** out);
XT_API void xt_model_free(xt_model* model);
XT_API int xt_model_resolution(const xt_model* model);
/* direction: "A2B", "B2A", "A2A" or "B2B". */
XT_API xt_status xt_model_translate_file(xt_model* model, const char* source_path, const char* exemplar_path,
                                         const char* direction, const char* out_png);
/* Planar float RGB in [0, 1], n images of resolution^2 pixels each. */
XT_API xt_status xt_model_translate(xt_model* model, const float* sources, const float* exemplars, int n,
                                    const char* direction, float* out);

#ifdef __cplusplus
}
#endif

#endif /* XTRANS_XTRANS_H */
