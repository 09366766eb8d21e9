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
#include "params.hpp"

#include <cmath>
#include <random>

#include "common.hpp"

namespace kgf {

std::string_view ablation_name(Ablation a) {
  switch (a) {
    case Ablation::kFull: return "full";
    case Ablation::kNoGsp: return "no_gsp";
    case Ablation::kRandomQuery: return "random_query";
    case Ablation::kNoCrr: return "no_crr";
    case Ablation::kNoPhi: return "no_phi";
  }
  return "?";
}

Ablation parse_ablation(std::string_view name) {
  for (Ablation a : {Ablation::kFull, Ablation::kNoGsp, Ablation::kRandomQuery, Ablation::kNoCrr, Ablation::kNoPhi})
    if (ablation_name(a) == name) return a;
  fail(ErrorKind::kUsage, "unknown ablation variant '" + std::string(name) +
                              "' (expected full, no_gsp, random_query, no_crr or no_phi)");
}

std::string_view normalizer_name(Normalizer n) { return n == Normalizer::kAll ? "all" : "subgraph"; }

Normalizer parse_normalizer(std::string_view name) {
  if (name == "all") return Normalizer::kAll;
  if (name == "subgraph") return Normalizer::kSubgraph;
  fail(ErrorKind::kUsage, "unknown normalizer '" + std::string(name) + "' (expected all or subgraph)");
}

double ModelOptions::effective_lambda() const {
  if (ablation == Ablation::kNoGsp) return 0.0;
  if (ablation == Ablation::kNoPhi) return 1.0;
  return lambda;
}

namespace {

double glorot(std::size_t fan_in, std::size_t fan_out) {
  return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
}

}  // namespace

ModelParams init_params(const EmbeddingSizes &sizes, const ModelOptions &opts, std::uint64_t seed) {
  require(opts.layers >= 1, ErrorKind::kUsage, "need at least one propagation layer");
  const std::size_t d = opts.dim;
  ModelParams p;
  p.emb = init_embeddings(sizes, d, seed, opts.init_scale);
  for (double &v : p.emb.relation.data) v *= opts.relation_init;

  // Separate stream so embedding draws do not depend on the layer count.
  std::mt19937_64 rng(hash_combine(seed, 0x6b67665f6e6e));
  const double cell_scale = glorot(d, 4 * d);
  p.cell = GateCell(d);
  fill_uniform(p.cell.input_weights, rng, cell_scale);
  fill_uniform(p.cell.hidden_weights, rng, cell_scale);
  if (opts.separate_query_cell) {
    p.query_cell = GateCell(d);
    fill_uniform(p.query_cell->input_weights, rng, cell_scale);
    fill_uniform(p.query_cell->hidden_weights, rng, cell_scale);
  }
  for (std::size_t l = 0; l < opts.layers; ++l) {
    LayerParams lp(d);
    fill_uniform(lp.message, rng, opts.message_init * glorot(d, d));
    fill_uniform(lp.attention, rng, glorot(d, d));
    fill_uniform(lp.attention_vector, rng, glorot(d, 1));
    p.layers.push_back(std::move(lp));
  }
  p.selection = SelectionParams(d);
  fill_uniform(p.selection.weights, rng, glorot(d, 1));
  p.readout = Matrix(1, d);
  fill_uniform(p.readout, rng, opts.readout_init * glorot(d, 1));
  return p;
}

ModelParams zeros_like(const ModelParams &p) {
  ModelParams z = p;
  for_each_tensor(z, [](const std::string &, const std::string &, Matrix &m) { m.fill(0.0); });
  return z;
}

namespace {

template <class Params, class Fn>
void visit(Params &p, Fn &&fn) {
  fn("E_h", "CpEmbeddings", p.emb.head);
  fn("E_r", "CpEmbeddings", p.emb.relation);
  fn("E_t", "CpEmbeddings", p.emb.tail);
  fn("cell.W", "GateCell", p.cell.input_weights);
  fn("cell.U", "GateCell", p.cell.hidden_weights);
  fn("cell.b", "GateCell", p.cell.bias);
  if (p.query_cell) {
    fn("query_cell.W", "GateCell", p.query_cell->input_weights);
    fn("query_cell.U", "GateCell", p.query_cell->hidden_weights);
    fn("query_cell.b", "GateCell", p.query_cell->bias);
  }
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    const std::string prefix = "layer" + std::to_string(l + 1) + ".";
    fn(prefix + "W", "LayerParams", p.layers[l].message);
    fn(prefix + "W_a", "LayerParams", p.layers[l].attention);
    fn(prefix + "w_a", "LayerParams", p.layers[l].attention_vector);
  }
  fn("W_samp", "SelectionParams", p.selection.weights);
  fn("w", "ScoreParams", p.readout);
}

}  // namespace

void for_each_tensor(ModelParams &p,
                     const std::function<void(const std::string &, const std::string &, Matrix &)> &fn) {
  visit(p, fn);
}

void for_each_tensor(const ModelParams &p,
                     const std::function<void(const std::string &, const std::string &, const Matrix &)> &fn) {
  visit(p, fn);
}

std::vector<ParamEntry> make_registry(ModelParams &values, ModelParams &grads) {
  std::vector<ParamEntry> out;
  for_each_tensor(values, [&](const std::string &name, const std::string &family, Matrix &m) {
    out.push_back({name, family, &m, nullptr});
  });
  std::size_t i = 0;
  for_each_tensor(grads, [&](const std::string &name, const std::string &, Matrix &m) {
    require(i < out.size() && out[i].name == name && out[i].value->same_shape(m), ErrorKind::kInternal,
            "gradient layout does not match parameters at " + name);
    out[i++].grad = &m;
  });
  require(i == out.size(), ErrorKind::kInternal, "gradient layout does not match parameters");
  return out;
}

void zero_grads(ModelParams &grads) {
  for_each_tensor(grads, [](const std::string &, const std::string &, Matrix &m) { m.fill(0.0); });
}

std::size_t parameter_count(const ModelParams &p) {
  std::size_t n = 0;
  for_each_tensor(p, [&](const std::string &, const std::string &, const Matrix &m) { n += m.size(); });
  return n;
}

RandomQueryEncoding make_random_query_encoding(const EmbeddingSizes &sizes, std::size_t dim, std::uint64_t seed,
                                               double scale) {
  std::mt19937_64 rng(hash_combine(seed, 0x72616e645f71));
  RandomQueryEncoding enc{Matrix(sizes.n_entities, dim), Matrix(sizes.n_relations, dim)};
  fill_uniform(enc.entity, rng, scale);
  fill_uniform(enc.relation, rng, scale);
  return enc;
}

}  // namespace kgf
