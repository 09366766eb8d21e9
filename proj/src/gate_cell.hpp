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
#ifndef KGF_GATE_CELL_HPP_
#define KGF_GATE_CELL_HPP_

#include <cstdint>
#include <map>
#include <random>

#include "common.hpp"
#include "embed.hpp"
#include "linalg.hpp"

namespace kgf {

// LSTM cell used to refine relation embeddings. The four gates are stacked
// row-wise in the order forget, input, candidate, output, so
// input_weights and hidden_weights are (4D x D) and bias is (1 x 4D).
struct GateCell {
  Matrix input_weights;
  Matrix hidden_weights;
  Matrix bias;

  GateCell() = default;
  explicit GateCell(std::size_t dim) : input_weights(4 * dim, dim), hidden_weights(4 * dim, dim), bias(1, 4 * dim) {}
  std::size_t dim() const { return input_weights.cols; }
};

GateCell init_gate_cell(std::size_t dim, std::mt19937_64 &rng, double scale);

struct CellState {
  Vec hidden;
  Vec cell;
};

// Everything the backward pass needs from one step.
struct CellTape {
  Vec x;
  Vec c_prev;
  Vec forget, input, candidate, output;
  Vec c;
  Vec tanh_c;
  Vec h;
};

// U * hidden + b, the part of the gate pre-activation that does not depend
// on the step input.
Vec hidden_projection(const GateCell &cell, ConstSpan hidden);

void cell_forward(const GateCell &cell, ConstSpan x, ConstSpan hidden_proj, ConstSpan c_prev, CellTape &tape);

// Flat tape of 7*D doubles: forget, input, candidate, output, c, tanh(c), h.
inline constexpr std::size_t kCellTapeBlocks = 7;
void cell_forward_flat(const GateCell &cell, ConstSpan x, ConstSpan hidden_proj, ConstSpan c_prev, MutSpan tape);
void cell_backward_flat(const GateCell &cell, ConstSpan x, ConstSpan c_prev, ConstSpan tape, ConstSpan dh,
                        ConstSpan dc, GateCell &grad, MutSpan dx, MutSpan dproj, MutSpan dc_prev);

CellState cell_step(const GateCell &cell, ConstSpan x, ConstSpan hidden, ConstSpan c_prev);

// Reverse of cell_forward. dh / dc are the adjoints of the step outputs.
// Accumulates into grad.input_weights and writes dx, dproj (adjoint of the
// hidden projection) and dc_prev.
void cell_backward(const GateCell &cell, const CellTape &tape, ConstSpan dh, ConstSpan dc, GateCell &grad,
                   MutSpan dx, MutSpan dproj, MutSpan dc_prev);

// Pushes dproj through U * hidden + b into grad.hidden_weights, grad.bias
// and dhidden.
void hidden_projection_backward(const GateCell &cell, ConstSpan hidden, ConstSpan dproj, GateCell &grad,
                                MutSpan dhidden);

// Per-query relation state. Edge chains are keyed by (head, relation),
// the query chain by (query entity, query relation). An absent key reads
// as the base relation embedding with a zero cell.
class RelationStateTable {
 public:
  struct Key {
    bool query = false;
    EntityId entity = 0;
    RelationId relation = 0;
    auto operator<=>(const Key &) const = default;
  };

  CellState read(const Key &key, const CpEmbeddings &emb) const;
  void write(const Key &key, CellState state) { states_[key] = std::move(state); }
  std::size_t size() const { return states_.size(); }
  void clear() { states_.clear(); }

 private:
  std::map<Key, CellState> states_;
};

Vec refine_edge_relation(RelationStateTable &table, const GateCell &cell, EntityId head, RelationId relation,
                         const CpEmbeddings &emb);

Vec refine_query_relation(RelationStateTable &table, const GateCell &cell, RelationId query_relation,
                          EntityId query_entity, const CpEmbeddings &emb);

}  // namespace kgf

#endif  // KGF_GATE_CELL_HPP_
