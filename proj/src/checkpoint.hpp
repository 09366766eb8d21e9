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
#ifndef KGF_CHECKPOINT_HPP_
#define KGF_CHECKPOINT_HPP_

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "model.hpp"
#include "store.hpp"
#include "train.hpp"

namespace kgf {

inline constexpr char kCheckpointMagic[8] = {'K', 'G', 'F', 'C', 'K', 'P', 'T', '\0'};
inline constexpr int kCheckpointVersion = 1;

struct Checkpoint {
  int version = kCheckpointVersion;
  TrainConfig config;
  std::vector<std::string> entities;
  std::vector<std::string> relations;  // original relations only
  ModelParams params;
  std::uint64_t rng_seed = 0;
  std::uint64_t epochs_completed = 0;
  double best_valid_mrr = 0.0;
  std::uint64_t best_epoch = 0;
};

Checkpoint make_checkpoint(const TrainConfig &config, const TripleStore &store, const Model &model,
                           std::uint64_t epochs_completed, double best_valid_mrr, std::uint64_t best_epoch);

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint &ckpt);
Checkpoint decode_checkpoint(const std::vector<std::uint8_t> &bytes);

void save_checkpoint(const Checkpoint &ckpt, const std::filesystem::path &path);
Checkpoint load_checkpoint(const std::filesystem::path &path);

Model model_from_checkpoint(const Checkpoint &ckpt);

// Loads a dataset directory with the checkpoint's vocabularies pre-registered
// so ids line up. Labels absent from the checkpoint are a data error.
TripleStore load_dataset_for(const Checkpoint &ckpt, const std::filesystem::path &dir);

}  // namespace kgf

#endif  // KGF_CHECKPOINT_HPP_
