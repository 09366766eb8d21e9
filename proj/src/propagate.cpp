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
#include "propagate.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace kgf {

Expansion expand(const Graph &graph, std::span<const EntityId> frontier) {
  Expansion out;
  for (EntityId h : frontier) {
    require(h < graph.n_entities(), ErrorKind::kUsage, "frontier entity out of range");
    for (const Edge &e : graph.out_edges(h)) {
      out.edges.push_back({h, e.relation, e.tail});
      out.candidates.push_back(e.tail);
    }
  }
  std::sort(out.candidates.begin(), out.candidates.end());
  out.candidates.erase(std::unique(out.candidates.begin(), out.candidates.end()), out.candidates.end());
  return out;
}

double attention_weight(ConstSpan head_hidden, ConstSpan relation, ConstSpan query_relation,
                        const LayerParams &layer) {
  const std::size_t d = head_hidden.size();
  require(relation.size() == d && query_relation.size() == d && layer.attention.cols == d, ErrorKind::kUsage,
          "attention_weight: dimension mismatch");
  Vec sum(d);
  for (std::size_t j = 0; j < d; ++j) sum[j] = head_hidden[j] + relation[j] + query_relation[j];
  Vec pre(layer.attention.rows);
  matvec(layer.attention, sum, pre);
  double z = 0.0;
  for (std::size_t j = 0; j < pre.size(); ++j) z += layer.attention_vector.data[j] * std::max(pre[j], 0.0);
  return sigmoid(z);
}

Vec aggregate_node(std::span<const Message> messages, const LayerParams &layer) {
  const std::size_t d = layer.message.cols;
  Vec sum(d, 0.0);
  for (const Message &m : messages) {
    require(m.head_hidden.size() == d && m.relation.size() == d, ErrorKind::kUsage,
            "aggregate_node: dimension mismatch");
    for (std::size_t j = 0; j < d; ++j) sum[j] += m.alpha * (m.head_hidden[j] + m.relation[j]);
  }
  Vec out(layer.message.rows);
  matvec(layer.message, sum, out);
  for (double &v : out) v = std::tanh(v);
  return out;
}

double importance(ConstSpan hidden, const SelectionParams &sel) {
  require(hidden.size() == sel.weights.cols, ErrorKind::kUsage, "importance: dimension mismatch");
  return dot(sel.weights.data, hidden);
}

double gumbel_noise(std::uint64_t seed, EntityId entity) {
  // Open interval (0, 1) so both logs stay finite.
  const double u = (static_cast<double>(hash_combine(seed, entity) >> 11) + 0.5) * 0x1.0p-53;
  return -std::log(-std::log(u));
}

Selection select_topk(std::span<const EntityId> nodes, std::span<const double> scores, std::size_t k, Mode mode,
                      double temperature, std::uint64_t seed) {
  require(k >= 1, ErrorKind::kUsage, "top-K needs K >= 1");
  require(nodes.size() == scores.size(), ErrorKind::kUsage, "select_topk: nodes and scores differ in length");
  Selection sel;
  sel.soft_scores.assign(scores.begin(), scores.end());
  sel.mask.assign(nodes.size(), 0);
  if (nodes.size() <= k) {
    std::fill(sel.mask.begin(), sel.mask.end(), 1);
  } else {
    Vec keys(scores.begin(), scores.end());
    if (mode == Mode::kTrain)
      for (std::size_t i = 0; i < keys.size(); ++i) keys[i] += temperature * gumbel_noise(seed, nodes[i]);
    std::vector<std::size_t> order(nodes.size());
    std::iota(order.begin(), order.end(), 0);
    auto better = [&](std::size_t a, std::size_t b) {
      if (keys[a] != keys[b]) return keys[a] > keys[b];
      return nodes[a] < nodes[b];
    };
    std::nth_element(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k - 1), order.end(), better);
    for (std::size_t i = 0; i < k; ++i) sel.mask[order[i]] = 1;
  }
  for (std::size_t i = 0; i < nodes.size(); ++i)
    if (sel.mask[i]) sel.selected.push_back(nodes[i]);
  std::sort(sel.selected.begin(), sel.selected.end());
  return sel;
}

Vec apply_hard_mask(ConstSpan hidden, std::uint8_t hard, double /*soft*/) {
  // (hard - soft + soft) is not exactly `hard` in floating point, so the
  // forward value is formed from `hard` directly.
  Vec out(hidden.begin(), hidden.end());
  if (!hard) std::fill(out.begin(), out.end(), 0.0);
  return out;
}

HardMaskGrad apply_hard_mask_backward(ConstSpan hidden, std::uint8_t hard, ConstSpan upstream) {
  HardMaskGrad g;
  g.hidden.assign(upstream.begin(), upstream.end());
  if (!hard) std::fill(g.hidden.begin(), g.hidden.end(), 0.0);
  g.soft = dot(hidden, upstream);
  return g;
}

// ---------------------------------------------------------------------------

namespace {

// Fixed-size blocks in chunks that never move, so a block pointer stays
// valid while other threads allocate.
class Arena {
 public:
  Arena(std::size_t block, std::size_t max_blocks) : block_(block) { chunks_.reserve(max_blocks / kChunk + 1); }

  std::uint32_t allocate() {
    if (size_ % kChunk == 0) chunks_.push_back(std::make_unique<double[]>(kChunk * block_));
    return static_cast<std::uint32_t>(size_++);
  }
  double *at(std::uint32_t i) const { return chunks_[i / kChunk].get() + (i % kChunk) * block_; }
  std::size_t size() const { return size_; }

 private:
  static constexpr std::size_t kChunk = 512;
  std::size_t block_;
  std::size_t size_ = 0;
  std::vector<std::unique_ptr<double[]>> chunks_;
};

}  // namespace

struct RelationCache::Impl {
  const Graph &graph;
  const ModelParams &params;
  const ModelOptions &opts;
  const bool track;
  const std::size_t dim;
  const std::size_t layers;
  const std::size_t tape_size;

  std::mutex mu;

  std::vector<std::int32_t> chain_index;  // pair * layers + step - 1
  std::vector<std::uint32_t> pair_steps;
  std::vector<std::uint32_t> pair_order;
  Arena chain_tape;
  Arena chain_adj;

  std::vector<std::int32_t> entity_index;
  std::vector<EntityId> entity_order;
  Arena entity_proj;  // U e_h + b
  Arena entity_adj;

  std::vector<std::int32_t> projection_index;  // ((layer-1) * layers + step-1) * pairs + pair
  struct ProjectionMeta {
    std::uint32_t layer;
    std::uint32_t chain_slot;
  };
  std::vector<ProjectionMeta> projection_meta;
  Arena projection;
  Arena projection_adj;

  Impl(const Graph &g, const ModelParams &p, const ModelOptions &o, bool track_gradients)
      : graph(g),
        params(p),
        opts(o),
        track(track_gradients),
        dim(o.dim),
        layers(o.layers),
        tape_size(o.refines() ? kCellTapeBlocks * o.dim : o.dim),
        chain_index(g.n_pairs() * o.layers, -1),
        pair_steps(g.n_pairs(), 0),
        chain_tape(tape_size, g.n_pairs() * o.layers),
        chain_adj(o.dim, track_gradients ? g.n_pairs() * o.layers : 0),
        entity_index(g.n_entities(), -1),
        entity_proj(4 * o.dim, g.n_entities()),
        entity_adj(4 * o.dim, track_gradients ? g.n_entities() : 0),
        projection_index(o.layers * o.layers * g.n_pairs(), -1),
        projection(o.dim, o.layers * o.layers * g.n_pairs()),
        projection_adj(o.dim, track_gradients ? o.layers * o.layers * g.n_pairs() : 0) {}

  std::uint32_t normalize_step(std::uint32_t step) const { return opts.refines() ? step : 1; }

  ConstSpan value(std::uint32_t slot) const {
    const double *block = chain_tape.at(slot);
    return {block + (tape_size - dim), dim};
  }

  std::uint32_t entity_slot(EntityId h) {
    if (entity_index[h] >= 0) return static_cast<std::uint32_t>(entity_index[h]);
    const std::uint32_t slot = entity_proj.allocate();
    if (track) entity_adj.allocate();
    const Vec proj = hidden_projection(params.cell, params.emb.head.row(h));
    std::copy(proj.begin(), proj.end(), entity_proj.at(slot));
    entity_index[h] = static_cast<std::int32_t>(slot);
    entity_order.push_back(h);
    return slot;
  }

  std::uint32_t chain(std::uint32_t pair, std::uint32_t step) {
    require(pair < graph.n_pairs() && step >= 1 && step <= layers, ErrorKind::kInternal, "relation cache: bad slot");
    const std::size_t base = static_cast<std::size_t>(pair) * layers;
    if (chain_index[base + step - 1] >= 0) return static_cast<std::uint32_t>(chain_index[base + step - 1]);
    const RelationPair &rp = graph.pair(pair);
    if (pair_steps[pair] == 0) pair_order.push_back(pair);
    if (!opts.refines()) {
      const std::uint32_t slot = chain_tape.allocate();
      if (track) chain_adj.allocate();
      const auto row = params.emb.relation.row(rp.relation);
      std::copy(row.begin(), row.end(), chain_tape.at(slot));
      chain_index[base] = static_cast<std::int32_t>(slot);
      pair_steps[pair] = 1;
      return slot;
    }
    const std::uint32_t hslot = entity_slot(rp.head);
    const ConstSpan proj(entity_proj.at(hslot), 4 * dim);
    const Vec zeros(dim, 0.0);
    for (std::uint32_t s = pair_steps[pair] + 1; s <= step; ++s) {
      const std::uint32_t slot = chain_tape.allocate();
      if (track) chain_adj.allocate();
      ConstSpan x = params.emb.relation.row(rp.relation);
      ConstSpan c_prev = zeros;
      if (s > 1) {
        const double *prev = chain_tape.at(static_cast<std::uint32_t>(chain_index[base + s - 2]));
        x = {prev + 6 * dim, dim};
        c_prev = {prev + 4 * dim, dim};
      }
      cell_forward_flat(params.cell, x, proj, c_prev, {chain_tape.at(slot), tape_size});
      chain_index[base + s - 1] = static_cast<std::int32_t>(slot);
    }
    pair_steps[pair] = step;
    return static_cast<std::uint32_t>(chain_index[base + step - 1]);
  }
};

RelationCache::RelationCache(const Graph &graph, const ModelParams &params, const ModelOptions &opts,
                             bool track_gradients)
    : graph_(graph), impl_(std::make_unique<Impl>(graph, params, opts, track_gradients)) {
  require(params.layers.size() >= opts.layers, ErrorKind::kUsage, "model has fewer layers than requested");
}

RelationCache::~RelationCache() = default;

std::uint32_t RelationCache::chain_slot(std::uint32_t pair, std::uint32_t step) {
  std::lock_guard lock(impl_->mu);
  return impl_->chain(pair, impl_->normalize_step(step));
}

ConstSpan RelationCache::chain_value(std::uint32_t slot) const { return impl_->value(slot); }

std::uint32_t RelationCache::projection_slot(std::uint32_t layer, std::uint32_t step, std::uint32_t pair) {
  auto &m = *impl_;
  std::lock_guard lock(m.mu);
  step = m.normalize_step(step);
  require(layer >= 1 && layer <= m.layers, ErrorKind::kInternal, "relation cache: bad layer");
  const std::size_t idx = ((layer - 1) * m.layers + (step - 1)) * graph_.n_pairs() + pair;
  if (m.projection_index[idx] >= 0) return static_cast<std::uint32_t>(m.projection_index[idx]);
  const std::uint32_t cslot = m.chain(pair, step);
  const std::uint32_t slot = m.projection.allocate();
  if (m.track) m.projection_adj.allocate();
  matvec(m.params.layers[layer - 1].attention, m.value(cslot), {m.projection.at(slot), m.dim});
  m.projection_meta.push_back({layer, cslot});
  m.projection_index[idx] = static_cast<std::int32_t>(slot);
  return slot;
}

ConstSpan RelationCache::projection_value(std::uint32_t slot) const {
  return {impl_->projection.at(slot), impl_->dim};
}

MutSpan RelationCache::chain_adjoint(std::uint32_t slot) {
  require(impl_->track, ErrorKind::kInternal, "relation cache built without gradient tracking");
  return {impl_->chain_adj.at(slot), impl_->dim};
}

MutSpan RelationCache::projection_adjoint(std::uint32_t slot) {
  require(impl_->track, ErrorKind::kInternal, "relation cache built without gradient tracking");
  return {impl_->projection_adj.at(slot), impl_->dim};
}

std::size_t RelationCache::n_chain_slots() const { return impl_->chain_tape.size(); }
std::size_t RelationCache::n_projection_slots() const { return impl_->projection.size(); }

void RelationCache::backward(ModelParams &grads) {
  auto &m = *impl_;
  require(m.track, ErrorKind::kInternal, "relation cache built without gradient tracking");
  const std::size_t d = m.dim;
  auto nonzero = [d](const double *v) {
    for (std::size_t j = 0; j < d; ++j)
      if (v[j] != 0.0) return true;
    return false;
  };

  for (std::uint32_t s = 0; s < m.projection.size(); ++s) {
    const double *adj = m.projection_adj.at(s);
    if (!nonzero(adj)) continue;
    const auto &meta = m.projection_meta[s];
    const ConstSpan dp(adj, d);
    outer_acc(grads.layers[meta.layer - 1].attention, dp, m.value(meta.chain_slot));
    matvec_t_acc(m.params.layers[meta.layer - 1].attention, dp, chain_adjoint(meta.chain_slot));
  }

  if (!m.opts.refines()) {
    for (std::uint32_t p : m.pair_order) {
      const std::uint32_t slot = static_cast<std::uint32_t>(m.chain_index[static_cast<std::size_t>(p) * m.layers]);
      axpy(1.0, ConstSpan(m.chain_adj.at(slot), d), grads.emb.relation.row(m.graph.pair(p).relation));
    }
    return;
  }

  Vec dh(d), dc(d), dx(d), dc_prev(d), dproj(4 * d);
  const Vec zeros(d, 0.0);
  for (std::uint32_t p : m.pair_order) {
    const std::size_t base = static_cast<std::size_t>(p) * m.layers;
    const std::uint32_t steps = m.pair_steps[p];
    bool any = false;
    for (std::uint32_t s = 1; s <= steps && !any; ++s)
      any = nonzero(m.chain_adj.at(static_cast<std::uint32_t>(m.chain_index[base + s - 1])));
    if (!any) continue;

    const RelationPair &rp = m.graph.pair(p);
    double *entity_adj = m.entity_adj.at(static_cast<std::uint32_t>(m.entity_index[rp.head]));
    std::fill(dh.begin(), dh.end(), 0.0);
    std::fill(dc.begin(), dc.end(), 0.0);
    for (std::uint32_t s = steps; s >= 1; --s) {
      const std::uint32_t slot = static_cast<std::uint32_t>(m.chain_index[base + s - 1]);
      axpy(1.0, ConstSpan(m.chain_adj.at(slot), d), dh);
      ConstSpan x = m.params.emb.relation.row(rp.relation);
      ConstSpan c_prev = zeros;
      if (s > 1) {
        const double *prev = m.chain_tape.at(static_cast<std::uint32_t>(m.chain_index[base + s - 2]));
        x = {prev + 6 * d, d};
        c_prev = {prev + 4 * d, d};
      }
      cell_backward_flat(m.params.cell, x, c_prev, {m.chain_tape.at(slot), m.tape_size}, dh, dc, grads.cell, dx, dproj,
                         dc_prev);
      axpy(1.0, dproj, MutSpan(entity_adj, 4 * d));
      dh = dx;
      dc = dc_prev;
    }
    axpy(1.0, dh, grads.emb.relation.row(rp.relation));
  }

  for (EntityId h : m.entity_order) {
    const ConstSpan adj(m.entity_adj.at(static_cast<std::uint32_t>(m.entity_index[h])), 4 * d);
    hidden_projection_backward(m.params.cell, m.params.emb.head.row(h), adj, grads.cell, grads.emb.head.row(h));
  }
}

// ---------------------------------------------------------------------------

ConstSpan PropagationTrace::final_query_relation() const {
  if (!layers.empty()) return layers.back().query_relation;
  return query_relation_init;
}

PropagationTrace start_trace(const QueryInputs &in, const Query &q) {
  const ModelParams &p = in.params;
  const ModelOptions &o = in.options;
  require(q.entity < p.emb.head.rows, ErrorKind::kUsage, "query entity out of range");
  require(q.relation < p.emb.relation.rows, ErrorKind::kUsage, "query relation out of range");
  PropagationTrace t;
  t.query = q;
  if (o.ablation == Ablation::kRandomQuery) {
    require(in.random_query != nullptr, ErrorKind::kInternal, "random_query ablation without encodings");
    const auto e = in.random_query->entity.row(q.entity);
    const auto r = in.random_query->relation.row(q.relation);
    t.query_entity.assign(e.begin(), e.end());
    t.query_relation_init.assign(r.begin(), r.end());
  } else {
    const auto e = p.emb.head.row(q.entity);
    const auto r = p.emb.relation.row(q.relation);
    t.query_entity.assign(e.begin(), e.end());
    t.query_relation_init.assign(r.begin(), r.end());
  }
  if (o.propagates() && o.refines()) {
    const GateCell &cell = p.query_gate();
    t.query_hidden_projection = hidden_projection(cell, t.query_entity);
    t.query_chain.resize(o.layers);
    Vec c(o.dim, 0.0);
    ConstSpan x = t.query_relation_init;
    for (std::size_t l = 0; l < o.layers; ++l) {
      cell_forward(cell, x, t.query_hidden_projection, c, t.query_chain[l]);
      c = t.query_chain[l].c;
      x = t.query_chain[l].h;
    }
  }
  return t;
}

SelectionProbe SelectionProbe::record(const PropagationTrace &trace) {
  SelectionProbe p;
  for (const PropagationLayer &layer : trace.layers) {
    p.masks.push_back(layer.mask);
    p.frozen_scores.push_back(layer.scores);
  }
  return p;
}

PropagationTrace run_propagation(const QueryInputs &in, RelationCache &cache, const Query &q, Mode mode,
                                 std::uint64_t noise_seed, const SelectionProbe *probe) {
  const ModelParams &p = in.params;
  const ModelOptions &o = in.options;
  require(o.layers >= 1, ErrorKind::kUsage, "need at least one propagation layer");
  PropagationTrace trace = start_trace(in, q);
  if (!o.propagates()) return trace;

  const Graph &graph = cache.graph();
  const std::size_t d = o.dim;
  const std::size_t n = graph.n_entities();
  std::vector<std::uint32_t> visits(n, 0);
  std::vector<std::int32_t> cand_index(n, -1);

  std::vector<EntityId> frontier{q.entity};
  Matrix frontier_hidden(1, d);
  std::copy(trace.query_entity.begin(), trace.query_entity.end(), frontier_hidden.data.begin());

  trace.layers.resize(o.layers);
  for (std::size_t l = 1; l <= o.layers; ++l) {
    PropagationLayer &layer = trace.layers[l - 1];
    const LayerParams &lp = p.layers[l - 1];
    layer.frontier = std::move(frontier);
    layer.frontier_hidden = std::move(frontier_hidden);
    if (o.refines()) layer.query_relation = trace.query_chain[l - 1].h;
    else layer.query_relation = trace.query_relation_init;
    layer.query_projection.assign(d, 0.0);
    matvec(lp.attention, layer.query_relation, layer.query_projection);

    const std::size_t nf = layer.frontier.size();
    layer.frontier_projection = Matrix(nf, d);
    for (std::size_t i = 0; i < nf; ++i) {
      matvec(lp.attention, layer.frontier_hidden.row(i), layer.frontier_projection.row(i));
      ++visits[layer.frontier[i]];
    }

    for (std::size_t i = 0; i < nf; ++i) {
      const EntityId h = layer.frontier[i];
      const std::uint32_t step = visits[h];
      for (std::uint32_t pi = graph.pair_index(h); pi < graph.pair_index(h + 1); ++pi) {
        const RelationPair &rp = graph.pair(pi);
        const std::uint32_t cs = cache.chain_slot(pi, step);
        const std::uint32_t ps = cache.projection_slot(static_cast<std::uint32_t>(l), step, pi);
        for (std::uint32_t ei = rp.edge_begin; ei < rp.edge_end; ++ei) {
          const Edge &e = graph.edge(ei);
          layer.edges.push_back({static_cast<std::uint32_t>(i), e.relation, e.tail, 0, cs, ps});
          if (cand_index[e.tail] < 0) {
            cand_index[e.tail] = 0;
            layer.candidates.push_back(e.tail);
          }
        }
      }
    }
    std::sort(layer.candidates.begin(), layer.candidates.end());
    for (std::size_t c = 0; c < layer.candidates.size(); ++c)
      cand_index[layer.candidates[c]] = static_cast<std::int32_t>(c);

    const std::size_t nc = layer.candidates.size();
    layer.aggregate = Matrix(nc, d);
    layer.alpha.resize(layer.edges.size());
    const double *wa = lp.attention_vector.data.data();
    for (std::size_t ei = 0; ei < layer.edges.size(); ++ei) {
      TraceEdge &e = layer.edges[ei];
      e.candidate_index = static_cast<std::uint32_t>(cand_index[e.tail]);
      const double *hp = layer.frontier_projection.row(e.head_index).data();
      const double *rp = cache.projection_value(e.projection_slot).data();
      const double *qp = layer.query_projection.data();
      double z = 0.0;
      for (std::size_t j = 0; j < d; ++j) {
        const double pre = hp[j] + rp[j] + qp[j];
        if (pre > 0.0) z += wa[j] * pre;
      }
      const double alpha = sigmoid(z);
      layer.alpha[ei] = alpha;
      const double *mh = layer.frontier_hidden.row(e.head_index).data();
      const double *er = cache.chain_value(e.chain_slot).data();
      double *s = layer.aggregate.row(e.candidate_index).data();
      for (std::size_t j = 0; j < d; ++j) s[j] += alpha * (mh[j] + er[j]);
    }

    layer.hidden = Matrix(nc, d);
    layer.scores.resize(nc);
    for (std::size_t c = 0; c < nc; ++c) {
      auto hrow = layer.hidden.row(c);
      matvec(lp.message, layer.aggregate.row(c), hrow);
      for (double &v : hrow) v = std::tanh(v);
      layer.scores[c] = dot(p.selection.weights.data, hrow);
    }
    layer.gate.resize(nc);
    if (probe) {
      require(probe->masks.size() == o.layers && probe->masks[l - 1].size() == nc, ErrorKind::kInternal,
              "selection probe does not match the propagation");
      layer.mask = probe->masks[l - 1];
      frontier.clear();
      for (std::size_t c = 0; c < nc; ++c) {
        if (layer.mask[c]) frontier.push_back(layer.candidates[c]);
        layer.gate[c] = static_cast<double>(layer.mask[c]) - probe->frozen_scores[l - 1][c] + layer.scores[c];
      }
    } else {
      Selection sel = select_topk(layer.candidates, layer.scores, o.top_k, mode, o.temperature,
                                  hash_combine(noise_seed, l));
      layer.mask = std::move(sel.mask);
      frontier = std::move(sel.selected);
      for (std::size_t c = 0; c < nc; ++c) layer.gate[c] = layer.mask[c];
    }

    frontier_hidden = Matrix(frontier.size(), d);
    std::size_t row = 0;
    for (std::size_t c = 0; c < nc; ++c) {
      if (layer.mask[c]) {
        auto dst = frontier_hidden.row(row);
        const auto src = layer.hidden.row(c);
        for (std::size_t j = 0; j < d; ++j) dst[j] = src[j] * layer.gate[c];
        ++row;
      }
      cand_index[layer.candidates[c]] = -1;
    }
  }
  return trace;
}

void backward_propagation(const QueryInputs &in, RelationCache &cache, const PropagationTrace &trace,
                          TraceAdjoint adjoint, ModelParams &grads, bool corrupt_selection_adjoint) {
  const ModelParams &p = in.params;
  const ModelOptions &o = in.options;
  const std::size_t d = o.dim;
  const std::size_t n_layers = trace.layers.size();
  const bool learned_query = o.ablation != Ablation::kRandomQuery;

  Vec dx_e = adjoint.query_entity;
  dx_e.resize(d, 0.0);
  std::vector<Vec> dqr(n_layers + 1, Vec(d, 0.0));
  axpy(1.0, adjoint.final_query_relation, dqr[n_layers]);

  Matrix dm = std::move(adjoint.final_hidden);
  for (std::size_t l = n_layers; l >= 1; --l) {
    const PropagationLayer &layer = trace.layers[l - 1];
    const LayerParams &lp = p.layers[l - 1];
    LayerParams &glp = grads.layers[l - 1];
    const std::size_t nc = layer.candidates.size();
    const std::size_t nf = layer.frontier.size();
    require(dm.rows == nc, ErrorKind::kInternal, "backward: adjoint rows do not match candidates");

    // mask, importance and node update
    Matrix ds_agg(nc, d);
    Vec dh(d), du(d);
    for (std::size_t c = 0; c < nc; ++c) {
      const ConstSpan h = layer.hidden.row(c);
      const ConstSpan g = dm.row(c);
      const double gate = layer.gate[c];
      double ds = dot(h, g);
      for (std::size_t j = 0; j < d; ++j) dh[j] = gate * g[j];
      if (ds != 0.0) {
        axpy(corrupt_selection_adjoint ? 0.5 * ds : ds, h, grads.selection.weights.data);
        axpy(ds, p.selection.weights.data, dh);
      }
      bool any = false;
      for (std::size_t j = 0; j < d; ++j) {
        du[j] = dh[j] * (1.0 - h[j] * h[j]);
        any = any || du[j] != 0.0;
      }
      if (!any) continue;
      outer_acc(glp.message, du, layer.aggregate.row(c));
      matvec_t_acc(lp.message, du, ds_agg.row(c));
    }

    // messages and attention
    Matrix dfh(nf, d);
    Matrix dfp(nf, d);
    Vec dq(d, 0.0);
    const double *wa = lp.attention_vector.data.data();
    double *gwa = glp.attention_vector.data.data();
    for (std::size_t ei = 0; ei < layer.edges.size(); ++ei) {
      const TraceEdge &e = layer.edges[ei];
      const double *gs = ds_agg.row(e.candidate_index).data();
      const double *mh = layer.frontier_hidden.row(e.head_index).data();
      const double *er = cache.chain_value(e.chain_slot).data();
      const double alpha = layer.alpha[ei];
      double dalpha = 0.0;
      bool any = false;
      for (std::size_t j = 0; j < d; ++j) {
        dalpha += gs[j] * (mh[j] + er[j]);
        any = any || gs[j] != 0.0;
      }
      if (!any) continue;
      double *gfh = dfh.row(e.head_index).data();
      double *ger = cache.chain_adjoint(e.chain_slot).data();
      for (std::size_t j = 0; j < d; ++j) {
        gfh[j] += alpha * gs[j];
        ger[j] += alpha * gs[j];
      }
      const double dz = dalpha * alpha * (1.0 - alpha);
      if (dz == 0.0) continue;
      const double *hp = layer.frontier_projection.row(e.head_index).data();
      const double *rp = cache.projection_value(e.projection_slot).data();
      const double *qp = layer.query_projection.data();
      double *gfp = dfp.row(e.head_index).data();
      double *grp = cache.projection_adjoint(e.projection_slot).data();
      for (std::size_t j = 0; j < d; ++j) {
        const double pre = hp[j] + rp[j] + qp[j];
        if (pre <= 0.0) continue;
        gwa[j] += dz * pre;
        const double dpre = dz * wa[j];
        gfp[j] += dpre;
        grp[j] += dpre;
        dq[j] += dpre;
      }
    }

    for (std::size_t i = 0; i < nf; ++i) {
      outer_acc(glp.attention, dfp.row(i), layer.frontier_hidden.row(i));
      matvec_t_acc(lp.attention, dfp.row(i), dfh.row(i));
    }
    outer_acc(glp.attention, dq, layer.query_relation);
    matvec_t_acc(lp.attention, dq, dqr[l]);

    if (l > 1) {
      const PropagationLayer &prev = trace.layers[l - 2];
      dm = Matrix(prev.candidates.size(), d);
      std::size_t i = 0;
      for (std::size_t c = 0; c < prev.candidates.size(); ++c) {
        if (!prev.mask[c]) continue;
        std::copy(dfh.row(i).begin(), dfh.row(i).end(), dm.row(c).begin());
        ++i;
      }
      require(i == nf, ErrorKind::kInternal, "backward: frontier does not match previous selection");
    } else {
      axpy(1.0, dfh.row(0), dx_e);
    }
  }

  Vec dq0(d, 0.0);
  if (o.propagates() && o.refines()) {
    const GateCell &cell = p.query_gate();
    GateCell &gcell = grads.query_gate();
    Vec dh(d, 0.0), dc(d, 0.0), dx(d), dc_prev(d), dproj(4 * d), dproj_sum(4 * d, 0.0);
    for (std::size_t l = n_layers; l >= 1; --l) {
      axpy(1.0, dqr[l], dh);
      cell_backward(cell, trace.query_chain[l - 1], dh, dc, gcell, dx, dproj, dc_prev);
      axpy(1.0, dproj, dproj_sum);
      dh = dx;
      dc = dc_prev;
    }
    dq0 = dh;
    axpy(1.0, dqr[0], dq0);
    hidden_projection_backward(cell, trace.query_entity, dproj_sum, gcell, dx_e);
  } else {
    for (const Vec &v : dqr) axpy(1.0, v, dq0);
  }

  if (learned_query) {
    axpy(1.0, dq0, grads.emb.relation.row(trace.query.relation));
    axpy(1.0, dx_e, grads.emb.head.row(trace.query.entity));
  }
}

}  // namespace kgf
