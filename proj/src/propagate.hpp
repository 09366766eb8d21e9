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
#ifndef KGF_PROPAGATE_HPP_
#define KGF_PROPAGATE_HPP_

#include <cstdint>
#include <memory>
#include <mutex>
#include <span>
#include <vector>

#include "linalg.hpp"
#include "params.hpp"
#include "store.hpp"

namespace kgf {

enum class Mode { kTrain, kInfer };

struct Query {
  EntityId entity = 0;
  RelationId relation = 0;
  EntityId answer = 0;
};

// ---------------------------------------------------------------------------
// Building blocks of one propagation round.

struct Expansion {
  std::vector<Triple> edges;          // in frontier order, then (relation, tail)
  std::vector<EntityId> candidates;   // sorted, distinct tails
};

Expansion expand(const Graph &graph, std::span<const EntityId> frontier);

// sigma(w_a . ReLU(W_a (h_head + e_r + e_qr)))
double attention_weight(ConstSpan head_hidden, ConstSpan relation, ConstSpan query_relation,
                        const LayerParams &layer);

struct Message {
  double alpha = 0.0;
  ConstSpan head_hidden;
  ConstSpan relation;
};

// tanh(W * sum alpha (h_head + e_r)); no messages gives the zero vector.
Vec aggregate_node(std::span<const Message> messages, const LayerParams &layer);

double importance(ConstSpan hidden, const SelectionParams &sel);

struct Selection {
  std::vector<EntityId> selected;   // sorted by entity id
  std::vector<std::uint8_t> mask;   // aligned with the input nodes
  std::vector<double> soft_scores;  // the input scores, unchanged
};

// Gumbel noise for one candidate, a pure function of (seed, entity).
double gumbel_noise(std::uint64_t seed, EntityId entity);

// Inference: top-K by score, ties to the smaller id. Training: top-K of
// score + temperature * Gumbel(0, 1).
Selection select_topk(std::span<const EntityId> nodes, std::span<const double> scores, std::size_t k, Mode mode,
                      double temperature, std::uint64_t seed);

// Straight-through mask h * (hard - stop_grad(soft) + soft). The forward
// value is h * hard exactly.
Vec apply_hard_mask(ConstSpan hidden, std::uint8_t hard, double soft);

struct HardMaskGrad {
  Vec hidden;   // hard * g
  double soft;  // h . g
};
HardMaskGrad apply_hard_mask_backward(ConstSpan hidden, std::uint8_t hard, ConstSpan upstream);

// ---------------------------------------------------------------------------
// Query-independent relation refinements shared by every query evaluated
// against one parameter snapshot.
//
// The refined embedding of edge pair (h, r) after its k-th visit depends
// only on E_r[r], E_h[h] and the cell, so it is computed once per snapshot.
// W_a^l * e_r is cached per (layer, visit, pair) for the attention term.
// Lookups are thread-safe; adjoint accumulation is not.
class RelationCache {
 public:
  RelationCache(const Graph &graph, const ModelParams &params, const ModelOptions &opts, bool track_gradients);
  ~RelationCache();
  RelationCache(const RelationCache &) = delete;
  RelationCache &operator=(const RelationCache &) = delete;

  // Slot of the refined embedding of `pair` after visit `step` (>= 1).
  std::uint32_t chain_slot(std::uint32_t pair, std::uint32_t step);
  ConstSpan chain_value(std::uint32_t slot) const;
  // Slot of W_a^layer * chain_value(chain_slot(pair, step)); layer >= 1.
  std::uint32_t projection_slot(std::uint32_t layer, std::uint32_t step, std::uint32_t pair);
  ConstSpan projection_value(std::uint32_t slot) const;

  MutSpan chain_adjoint(std::uint32_t slot);
  MutSpan projection_adjoint(std::uint32_t slot);

  // Pushes accumulated adjoints into parameter gradients.
  void backward(ModelParams &grads);

  const Graph &graph() const { return graph_; }
  std::size_t n_chain_slots() const;
  std::size_t n_projection_slots() const;

 private:
  struct Impl;
  const Graph &graph_;
  std::unique_ptr<Impl> impl_;
};

// ---------------------------------------------------------------------------
// Full record of one query's propagation.

struct TraceEdge {
  std::uint32_t head_index = 0;       // into PropagationLayer::frontier
  RelationId relation = 0;
  EntityId tail = 0;
  std::uint32_t candidate_index = 0;  // into PropagationLayer::candidates
  std::uint32_t chain_slot = 0;
  std::uint32_t projection_slot = 0;
};

struct PropagationLayer {
  std::vector<EntityId> frontier;  // V^(l-1)
  Matrix frontier_hidden;          // masked hidden states of the frontier
  Matrix frontier_projection;      // W_a * frontier_hidden rows
  Vec query_relation;              // e_qr^l
  Vec query_projection;            // W_a * e_qr^l
  std::vector<TraceEdge> edges;
  std::vector<double> alpha;
  std::vector<EntityId> candidates;  // C^(l)
  Matrix aggregate;                  // sum of messages per candidate
  Matrix hidden;                     // h_t^l before masking
  std::vector<double> scores;        // s_t
  std::vector<std::uint8_t> mask;    // hard selection
  std::vector<double> gate;          // multiplier applied to hidden; equals mask unless probed
};

struct PropagationTrace {
  Query query;
  Vec query_entity;                 // e_qe as seen by the model
  Vec query_relation_init;          // e_qr^0
  Vec query_hidden_projection;      // U_q e_qe + b_q
  std::vector<CellTape> query_chain;
  std::vector<PropagationLayer> layers;

  // e_qr^L, or e_qr^0 when nothing was propagated.
  ConstSpan final_query_relation() const;
};

// Selections and stop-gradient scores frozen from an earlier pass. Under a
// probe the masked hidden state is h * (hard - frozen + s), which keeps the
// forward value while exposing the straight-through path to finite
// differences.
struct SelectionProbe {
  std::vector<std::vector<std::uint8_t>> masks;
  std::vector<std::vector<double>> frozen_scores;

  static SelectionProbe record(const PropagationTrace &trace);
};

struct QueryInputs {
  const ModelParams &params;
  const ModelOptions &options;
  const RandomQueryEncoding *random_query = nullptr;  // required for that ablation
};

// Query encoding and query-relation chain only (no graph work).
PropagationTrace start_trace(const QueryInputs &in, const Query &q);

// L rounds of expand -> refine -> attend -> aggregate -> score -> select ->
// mask. noise_seed feeds the Gumbel draws in training mode.
PropagationTrace run_propagation(const QueryInputs &in, RelationCache &cache, const Query &q, Mode mode,
                                 std::uint64_t noise_seed, const SelectionProbe *probe = nullptr);

// Adjoint of the masked final-layer hidden states, one row per final
// candidate, plus the adjoint of e_qr^L and of the query entity vector.
struct TraceAdjoint {
  Matrix final_hidden;
  Vec final_query_relation;
  Vec query_entity;
};

// Reverse pass over a trace. Parameter adjoints go into `grads`, shared
// relation adjoints into `cache`. Returns nothing; the caller owns the
// readout side.
void backward_propagation(const QueryInputs &in, RelationCache &cache, const PropagationTrace &trace,
                          TraceAdjoint adjoint, ModelParams &grads, bool corrupt_selection_adjoint = false);

}  // namespace kgf

#endif  // KGF_PROPAGATE_HPP_
