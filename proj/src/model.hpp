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
#ifndef KGF_MODEL_HPP_
#define KGF_MODEL_HPP_

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "params.hpp"
#include "propagate.hpp"
#include "store.hpp"

namespace kgf {

// Scores of one query against every entity.
struct QueryScores {
  Vec hybrid;
  Vec structural;  // f, zero for entities outside the final subgraph
  Vec semantic;    // phi
  std::vector<EntityId> reached;  // final-layer candidates
};

struct BatchStats {
  double loss = 0.0;      // log_loss + gamma * reg
  double log_loss = 0.0;  // mean over queries
  double reg = 0.0;       // mean N3 term
  std::size_t queries = 0;
};

class Model {
 public:
  Model(const ModelOptions &options, const EmbeddingSizes &sizes, std::uint64_t seed);
  Model(const ModelOptions &options, ModelParams params, std::uint64_t seed);

  const ModelOptions &options() const { return options_; }
  const ModelParams &params() const { return params_; }
  ModelParams &params() { return params_; }
  const ModelParams &grads() const { return grads_; }
  ModelParams &grads() { return grads_; }
  std::uint64_t seed() const { return seed_; }
  std::size_t n_entities() const { return params_.emb.head.rows; }
  const RandomQueryEncoding *random_query() const { return random_query_ ? &*random_query_ : nullptr; }
  QueryInputs inputs() const { return {params_, options_, random_query()}; }

  QueryScores score(RelationCache &cache, const Query &q, Mode mode, std::uint64_t noise_seed,
                    PropagationTrace *trace_out = nullptr, const SelectionProbe *probe = nullptr) const;

  // Mean loss over `queries`. With compute_grads, zeroes and fills grads().
  // Queries run in order; query i draws its noise from (noise_seed, i).
  // A non-null `probes` of the batch size freezes the selections; any
  // other non-null `probes` is refilled from this pass.
  BatchStats forward_backward(const Graph &graph, std::span<const Query> queries, Mode mode, std::uint64_t noise_seed,
                              bool compute_grads, bool corrupt_selection_adjoint = false,
                              std::vector<SelectionProbe> *probes = nullptr);

 private:
  ModelOptions options_;
  ModelParams params_;
  ModelParams grads_;
  std::uint64_t seed_;
  std::optional<RandomQueryEncoding> random_query_;
};

}  // namespace kgf

#endif  // KGF_MODEL_HPP_
