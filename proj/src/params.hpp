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
#ifndef KGF_PARAMS_HPP_
#define KGF_PARAMS_HPP_

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "embed.hpp"
#include "gate_cell.hpp"
#include "linalg.hpp"

namespace kgf {

enum class Ablation { kFull, kNoGsp, kRandomQuery, kNoCrr, kNoPhi };
enum class Normalizer { kAll, kSubgraph };

std::string_view ablation_name(Ablation a);
Ablation parse_ablation(std::string_view name);
std::string_view normalizer_name(Normalizer n);
Normalizer parse_normalizer(std::string_view name);

// The part of the training configuration that shapes the forward pass.
struct ModelOptions {
  std::size_t dim = 32;
  std::size_t layers = 6;
  std::size_t top_k = 100;
  double lambda = 0.7;
  double gamma = 0.001;
  double temperature = 1.0;
  double init_scale = 0.1;
  double relation_init = 1.0;  // multiplier on init_scale for E_r
  double message_init = 1.0;  // multiplier on the Glorot bound of W^l
  double readout_init = 1.0;  // multiplier on the Glorot bound of w; 0 starts f at zero
  Ablation ablation = Ablation::kFull;
  Normalizer normalizer = Normalizer::kAll;
  bool separate_query_cell = false;

  // Fusion weight after ablation wiring: no_gsp forces 0, no_phi forces 1.
  double effective_lambda() const;
  bool propagates() const { return ablation != Ablation::kNoGsp; }
  bool refines() const { return ablation != Ablation::kNoCrr; }
};

// Per-layer propagation weights: message transform W, attention transform
// W_a and attention projection w_a. No biases.
struct LayerParams {
  Matrix message;
  Matrix attention;
  Matrix attention_vector;  // 1 x D

  LayerParams() = default;
  explicit LayerParams(std::size_t dim) : message(dim, dim), attention(dim, dim), attention_vector(1, dim) {}
};

struct SelectionParams {
  Matrix weights;  // 1 x D
  SelectionParams() = default;
  explicit SelectionParams(std::size_t dim) : weights(1, dim) {}
};

struct ModelParams {
  CpEmbeddings emb;
  GateCell cell;
  std::optional<GateCell> query_cell;
  std::vector<LayerParams> layers;
  SelectionParams selection;
  Matrix readout;  // 1 x D, the structural score vector w

  const GateCell &query_gate() const { return query_cell ? *query_cell : cell; }
  GateCell &query_gate() { return query_cell ? *query_cell : cell; }
};

ModelParams init_params(const EmbeddingSizes &sizes, const ModelOptions &opts, std::uint64_t seed);
ModelParams zeros_like(const ModelParams &p);

// Visits every tensor with a stable name and the family it is reported
// under by the gradient checker.
void for_each_tensor(ModelParams &p, const std::function<void(const std::string &name, const std::string &family,
                                                                Matrix &m)> &fn);
void for_each_tensor(const ModelParams &p,
                     const std::function<void(const std::string &name, const std::string &family,
                                              const Matrix &m)> &fn);

struct ParamEntry {
  std::string name;
  std::string family;
  Matrix *value = nullptr;
  Matrix *grad = nullptr;
};

// Non-owning view pairing each value tensor with its gradient slot.
// Rebuild it after copying or moving either argument.
std::vector<ParamEntry> make_registry(ModelParams &values, ModelParams &grads);

void zero_grads(ModelParams &grads);
std::size_t parameter_count(const ModelParams &p);

// Fixed, non-learned query encodings for the random_query ablation.
struct RandomQueryEncoding {
  Matrix entity;
  Matrix relation;
};
RandomQueryEncoding make_random_query_encoding(const EmbeddingSizes &sizes, std::size_t dim, std::uint64_t seed,
                                               double scale);

}  // namespace kgf

#endif  // KGF_PARAMS_HPP_
