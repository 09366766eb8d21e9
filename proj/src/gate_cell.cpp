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
#include "gate_cell.hpp"

#include <cmath>
#include <string>

namespace kgf {

GateCell init_gate_cell(std::size_t dim, std::mt19937_64 &rng, double scale) {
  GateCell cell(dim);
  fill_uniform(cell.input_weights, rng, scale);
  fill_uniform(cell.hidden_weights, rng, scale);
  fill_uniform(cell.bias, rng, scale);
  return cell;
}

Vec hidden_projection(const GateCell &cell, ConstSpan hidden) {
  require(hidden.size() == cell.dim(), ErrorKind::kUsage, "gate cell: hidden state has wrong dimension");
  Vec proj(4 * cell.dim());
  matvec(cell.hidden_weights, hidden, proj);
  for (std::size_t i = 0; i < proj.size(); ++i) proj[i] += cell.bias.data[i];
  return proj;
}

void cell_forward_flat(const GateCell &cell, ConstSpan x, ConstSpan hidden_proj, ConstSpan c_prev, MutSpan tape) {
  const std::size_t d = cell.dim();
  require(x.size() == d && c_prev.size() == d && hidden_proj.size() == 4 * d && tape.size() == kCellTapeBlocks * d,
          ErrorKind::kUsage, "gate cell: dimension mismatch (expected " + std::to_string(d) + ")");
  double *z = tape.data();  // the four gate blocks double as pre-activation scratch
  matvec(cell.input_weights, x, tape.first(4 * d));
  for (std::size_t i = 0; i < 4 * d; ++i) z[i] += hidden_proj[i];
  double *c = z + 4 * d;
  double *tanh_c = z + 5 * d;
  double *h = z + 6 * d;
  for (std::size_t j = 0; j < d; ++j) {
    const double f = sigmoid(z[j]);
    const double in = sigmoid(z[d + j]);
    const double g = std::tanh(z[2 * d + j]);
    const double o = sigmoid(z[3 * d + j]);
    z[j] = f;
    z[d + j] = in;
    z[2 * d + j] = g;
    z[3 * d + j] = o;
    c[j] = f * c_prev[j] + in * g;
    tanh_c[j] = std::tanh(c[j]);
    h[j] = o * tanh_c[j];
  }
}

void cell_backward_flat(const GateCell &cell, ConstSpan x, ConstSpan c_prev, ConstSpan tape, ConstSpan dh,
                        ConstSpan dc, GateCell &grad, MutSpan dx, MutSpan dproj, MutSpan dc_prev) {
  const std::size_t d = cell.dim();
  const double *gates = tape.data();
  const double *tanh_c = gates + 5 * d;
  for (std::size_t j = 0; j < d; ++j) {
    const double f = gates[j];
    const double in = gates[d + j];
    const double g = gates[2 * d + j];
    const double o = gates[3 * d + j];
    const double tc = tanh_c[j];
    const double dct = dc[j] + dh[j] * o * (1.0 - tc * tc);
    dproj[j] = dct * c_prev[j] * f * (1.0 - f);
    dproj[d + j] = dct * g * in * (1.0 - in);
    dproj[2 * d + j] = dct * in * (1.0 - g * g);
    dproj[3 * d + j] = dh[j] * tc * o * (1.0 - o);
    dc_prev[j] = dct * f;
  }
  // The input and hidden projections feed the same pre-activation.
  outer_acc(grad.input_weights, dproj, x);
  std::fill(dx.begin(), dx.end(), 0.0);
  matvec_t_acc(cell.input_weights, dproj, dx);
}

void cell_forward(const GateCell &cell, ConstSpan x, ConstSpan hidden_proj, ConstSpan c_prev, CellTape &tape) {
  const std::size_t d = cell.dim();
  Vec flat(kCellTapeBlocks * d);
  cell_forward_flat(cell, x, hidden_proj, c_prev, flat);
  auto block = [&](std::size_t b) { return Vec(flat.begin() + b * d, flat.begin() + (b + 1) * d); };
  tape.x.assign(x.begin(), x.end());
  tape.c_prev.assign(c_prev.begin(), c_prev.end());
  tape.forget = block(0);
  tape.input = block(1);
  tape.candidate = block(2);
  tape.output = block(3);
  tape.c = block(4);
  tape.tanh_c = block(5);
  tape.h = block(6);
}

CellState cell_step(const GateCell &cell, ConstSpan x, ConstSpan hidden, ConstSpan c_prev) {
  CellTape tape;
  cell_forward(cell, x, hidden_projection(cell, hidden), c_prev, tape);
  return {std::move(tape.h), std::move(tape.c)};
}

void cell_backward(const GateCell &cell, const CellTape &tape, ConstSpan dh, ConstSpan dc, GateCell &grad,
                   MutSpan dx, MutSpan dproj, MutSpan dc_prev) {
  Vec flat;
  flat.reserve(kCellTapeBlocks * cell.dim());
  for (const Vec *v : {&tape.forget, &tape.input, &tape.candidate, &tape.output, &tape.c, &tape.tanh_c, &tape.h})
    flat.insert(flat.end(), v->begin(), v->end());
  cell_backward_flat(cell, tape.x, tape.c_prev, flat, dh, dc, grad, dx, dproj, dc_prev);
}

void hidden_projection_backward(const GateCell &cell, ConstSpan hidden, ConstSpan dproj, GateCell &grad,
                                MutSpan dhidden) {
  outer_acc(grad.hidden_weights, dproj, hidden);
  axpy(1.0, dproj, grad.bias.data);
  matvec_t_acc(cell.hidden_weights, dproj, dhidden);
}

CellState RelationStateTable::read(const Key &key, const CpEmbeddings &emb) const {
  auto it = states_.find(key);
  if (it != states_.end()) return it->second;
  const auto row = emb.relation.row(key.relation);
  return {Vec(row.begin(), row.end()), Vec(emb.dim(), 0.0)};
}

namespace {

Vec refine(RelationStateTable &table, const RelationStateTable::Key &key, const GateCell &cell, EntityId context,
           const CpEmbeddings &emb) {
  require(context < emb.head.rows, ErrorKind::kUsage, "entity id " + std::to_string(context) + " out of range");
  require(key.relation < emb.relation.rows, ErrorKind::kUsage,
          "relation id " + std::to_string(key.relation) + " out of range");
  CellState prev = table.read(key, emb);
  CellState next = cell_step(cell, prev.hidden, emb.head.row(context), prev.cell);
  Vec out = next.hidden;
  table.write(key, std::move(next));
  return out;
}

}  // namespace

Vec refine_edge_relation(RelationStateTable &table, const GateCell &cell, EntityId head, RelationId relation,
                         const CpEmbeddings &emb) {
  return refine(table, {false, head, relation}, cell, head, emb);
}

Vec refine_query_relation(RelationStateTable &table, const GateCell &cell, RelationId query_relation,
                          EntityId query_entity, const CpEmbeddings &emb) {
  return refine(table, {true, query_entity, query_relation}, cell, query_entity, emb);
}

}  // namespace kgf
