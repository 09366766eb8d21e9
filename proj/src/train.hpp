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
#ifndef KGF_TRAIN_HPP_
#define KGF_TRAIN_HPP_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "model.hpp"
#include "store.hpp"

namespace kgf {

struct TrainConfig {
  double lr = 5e-3;
  std::size_t batch_size = 16;
  std::size_t max_epochs = 100;
  std::size_t pretrain_epochs = 0;  // phi-only epochs before joint training
  std::uint64_t seed = 1;
  bool reverse_queries = true;
  ModelOptions model;
};

// Keys: lr, batch_size, D, K, lambda, gamma, L, temperature, max_epochs,
// seed, ablation, normalizer, separate_query_cell, reverse_queries,
// init_scale, relation_init, message_init, readout_init, pretrain_epochs.
// Unknown keys and malformed values are usage errors. A rejected value
// leaves the config unchanged.
void set_config_value(TrainConfig &config, std::string_view key, std::string_view value);
std::vector<std::pair<std::string, std::string>> config_items(const TrainConfig &config);
std::string config_to_text(const TrainConfig &config);
// Flat key=value file; '#' starts a comment line.
void apply_config_file(TrainConfig &config, const std::filesystem::path &path);
// One message per value outside the tuned hyperparameter ranges.
std::vector<std::string> config_warnings(const TrainConfig &config);

// Grid of one hyperparameter for the sensitivity sweep.
std::vector<std::string> sweep_grid(std::string_view key);

// ---------------------------------------------------------------------------

// 1 + #{kept t : s_t > s_a} + ceil(#{kept t != a : s_t == s_a} / 2).
// `filtered[t]` marks candidates removed before ranking; the answer itself
// must not be marked.
std::size_t filtered_rank(std::span<const double> scores, EntityId answer, std::span<const std::uint8_t> filtered);
// Filters every other known tail of (q.entity, q.relation).
std::size_t filtered_rank(const TripleStore &store, const Query &q, std::span<const double> scores);

struct EvalReport {
  double mrr = 0.0;
  double hit1 = 0.0;
  double hit10 = 0.0;
  std::vector<std::size_t> ranks;
  double seconds = 0.0;
};

EvalReport report_from_ranks(std::vector<std::size_t> ranks);

std::vector<Query> make_queries(const TripleStore &store, std::span<const Triple> triples, bool reverse);

struct EvalOptions {
  bool reverse_queries = true;
  std::size_t threads = 1;
};

// Inference-mode filtered ranking over the inference graph.
EvalReport evaluate(const Model &model, const TripleStore &store, Split split, const EvalOptions &options = {});
EvalReport evaluate(const Model &model, const TripleStore &store, std::span<const Query> queries,
                    std::size_t threads = 1);

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double valid_mrr = 0.0;
  double valid_hit1 = 0.0;
  double valid_hit10 = 0.0;
  double seconds = 0.0;
};
std::string epoch_record_json(const EpochRecord &r);

struct TrainResult {
  Model best;
  double best_valid_mrr = 0.0;
  std::size_t best_epoch = 0;
  std::size_t epochs_run = 0;
  std::vector<EpochRecord> history;
};

struct TrainHooks {
  std::function<void(const EpochRecord &)> on_epoch;
  std::size_t eval_threads = 1;
};

Model make_model(const TrainConfig &config, const TripleStore &store);
TrainResult train(const TrainConfig &config, const TripleStore &store, const TrainHooks &hooks = {});

struct SweepRow {
  std::string value;
  double valid_mrr = 0.0;
  double valid_hit1 = 0.0;
  double valid_hit10 = 0.0;
  double test_mrr = 0.0;
  std::size_t best_epoch = 0;
};

std::vector<SweepRow> sweep(const TrainConfig &base, const TripleStore &store, std::string_view key,
                            std::span<const std::string> values, const TrainHooks &hooks = {},
                            const std::function<void(const SweepRow &)> &on_row = {});

}  // namespace kgf

#endif  // KGF_TRAIN_HPP_
