/**
 * Copyright 2026 The kgfusion Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#ifndef KGF_KGF_H_
#define KGF_KGF_H_

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(_WIN32)
#define KGF_API __declspec(dllexport)
#else
#define KGF_API __attribute__((visibility("default")))
#endif

/* Status codes. The numeric values double as process exit codes. */
typedef enum kgf_status {
  KGF_OK = 0,
  KGF_ERR_USAGE = 1,
  KGF_ERR_DATA = 2,
  KGF_ERR_NUMERIC = 3,
  KGF_ERR_INTERNAL = 4
} kgf_status;

typedef struct kgf_config kgf_config;
typedef struct kgf_dataset kgf_dataset;
typedef struct kgf_model kgf_model;

/* Called once per training epoch with a one-line JSON record. */
typedef void (*kgf_epoch_callback)(const char *json_line, void *user);

KGF_API const char *kgf_version(void);

/* Message of the last failed call on this thread; never NULL. */
KGF_API const char *kgf_last_error(void);

/* Frees strings returned through char** out-parameters. */
KGF_API void kgf_string_free(char *s);

/* ---- configuration ---------------------------------------------------- */

KGF_API kgf_status kgf_config_new(kgf_config **out);
KGF_API void kgf_config_free(kgf_config *config);
KGF_API kgf_status kgf_config_set(kgf_config *config, const char *key, const char *value);
KGF_API kgf_status kgf_config_load(kgf_config *config, const char *path);
KGF_API kgf_status kgf_config_text(const kgf_config *config, char **out);
/* Newline-separated range warnings; empty when none. */
KGF_API kgf_status kgf_config_warnings(const kgf_config *config, char **out);

/* ---- datasets --------------------------------------------------------- */

/* Reads background/train/valid/test.txt from dir (train.txt required). */
KGF_API kgf_status kgf_dataset_load(const char *dir, kgf_dataset **out);
/* Same, with ids aligned to a model's vocabularies. */
KGF_API kgf_status kgf_dataset_load_for_model(const kgf_model *model, const char *dir, kgf_dataset **out);
KGF_API void kgf_dataset_free(kgf_dataset *dataset);
/* JSON: entity/relation counts and split sizes. */
KGF_API kgf_status kgf_dataset_summary(const kgf_dataset *dataset, char **json_out);

/* ---- models ----------------------------------------------------------- */

/* Freshly initialized, untrained model. */
KGF_API kgf_status kgf_model_init(const kgf_dataset *dataset, const kgf_config *config, kgf_model **out);
/* Trains and returns the checkpoint with the best validation MRR. */
KGF_API kgf_status kgf_train(const kgf_dataset *dataset, const kgf_config *config, size_t eval_threads,
                             kgf_epoch_callback on_epoch, void *user, kgf_model **out);
KGF_API void kgf_model_free(kgf_model *model);
KGF_API kgf_status kgf_model_save(const kgf_model *model, const char *path);
KGF_API kgf_status kgf_model_load(const char *path, kgf_model **out);
/* JSON: config, parameter count, best validation MRR and epoch. */
KGF_API kgf_status kgf_model_info(const kgf_model *model, char **json_out);

/* JSON: mrr, hit1, hit10, ranks, seconds. split is background, train,
   valid or test. reverse_queries < 0 takes the model's setting. */
KGF_API kgf_status kgf_evaluate(const kgf_model *model, const kgf_dataset *dataset, const char *split,
                                int reverse_queries, size_t threads, char **json_out);

/* JSON array of {rank, entity, score}, best first, ties by entity id. With
   filter != 0 every known fact (head, relation, t) is left out. */
KGF_API kgf_status kgf_predict(const kgf_model *model, const kgf_dataset *dataset, const char *head,
                               const char *relation, size_t top_n, int filter, char **json_out);

/* Attention paths from head to target as a text table and a DOT graph.
   An unreached target is reported in the text, not as an error. */
KGF_API kgf_status kgf_explain(const kgf_model *model, const kgf_dataset *dataset, const char *head,
                               const char *relation, const char *target, size_t beam, char **text_out,
                               char **dot_out);

/* ---- tools ------------------------------------------------------------ */

/* Finite-difference check on a seeded 10-entity graph with D=4, L=2, K=4.
   ablation, normalizer, lambda, temperature, separate_query_cell and seed
   are taken from config (may be NULL). JSON report with a group list;
   returns KGF_ERR_NUMERIC when a group fails. */
KGF_API kgf_status kgf_gradcheck(const kgf_config *config, double tolerance, int corrupt_selection,
                                 char **json_out);

/* Trains once per value of key (values: comma-separated, or NULL for the
   built-in grid). JSON array of rows. */
KGF_API kgf_status kgf_sweep(const kgf_dataset *dataset, const kgf_config *config, const char *key,
                             const char *values, size_t eval_threads, kgf_epoch_callback on_epoch, void *user,
                             char **json_out);

KGF_API kgf_status kgf_generate_synthetic(size_t n_entities, size_t n_relations, size_t n_facts, uint64_t seed,
                                          double background, double valid, double test, const char *out_dir);

/* Splits a triple file into k folds written as fold_1.txt .. fold_k.txt. */
KGF_API kgf_status kgf_kfold(const char *input_path, size_t k, uint64_t seed, const char *out_dir);

#ifdef __cplusplus
}
#endif

#endif /* KGF_KGF_H_ */
