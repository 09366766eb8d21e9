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
#include "model.hpp"

#include <algorithm>
#include <cmath>

#include "score.hpp"

namespace kgf {

namespace {

void check_options(const ModelOptions &o) {
  require(o.dim >= 1, ErrorKind::kUsage, "embedding dimension must be positive");
  require(o.layers >= 1, ErrorKind::kUsage, "need at least one propagation layer");
  require(o.top_k >= 1, ErrorKind::kUsage, "top-K needs K >= 1");
  require(o.lambda >= 0.0 && o.lambda <= 1.0, ErrorKind::kUsage, "fusion weight must lie in [0, 1]");
  require(o.gamma >= 0.0, ErrorKind::kUsage, "gamma must be non-negative");
  require(o.temperature >= 0.0, ErrorKind::kUsage, "temperature must be non-negative");
}

}  // namespace

Model::Model(const ModelOptions &options, const EmbeddingSizes &sizes, std::uint64_t seed)
    : Model(options, init_params(sizes, options, seed), seed) {}

Model::Model(const ModelOptions &options, ModelParams params, std::uint64_t seed)
    : options_(options), params_(std::move(params)), seed_(seed) {
  check_options(options_);
  require(params_.layers.size() == options_.layers && params_.emb.dim() == options_.dim &&
              params_.query_cell.has_value() == options_.separate_query_cell,
          ErrorKind::kUsage, "parameters do not match model options");
  grads_ = zeros_like(params_);
  if (options_.ablation == Ablation::kRandomQuery)
    random_query_ = make_random_query_encoding({params_.emb.head.rows, params_.emb.relation.rows}, options_.dim, seed_,
                                               options_.init_scale);
}

QueryScores Model::score(RelationCache &cache, const Query &q, Mode mode, std::uint64_t noise_seed,
                         PropagationTrace *trace_out, const SelectionProbe *probe) const {
  const std::size_t n = n_entities();
  const double lambda = options_.effective_lambda();
  PropagationTrace trace = run_propagation(inputs(), cache, q, mode, noise_seed, probe);

  QueryScores out;
  out.structural.assign(n, 0.0);
  out.semantic.assign(n, 0.0);
  out.hybrid.assign(n, 0.0);
  if (lambda < 1.0) {
    Vec v(trace.query_entity);
    const ConstSpan qr = trace.final_query_relation();
    for (std::size_t j = 0; j < v.size(); ++j) v[j] *= qr[j];
    for (std::size_t t = 0; t < n; ++t) out.semantic[t] = dot(v, params_.emb.tail.row(t));
  }
  if (!trace.layers.empty()) {
    const PropagationLayer &last = trace.layers.back();
    out.reached = last.candidates;
    for (std::size_t c = 0; c < last.candidates.size(); ++c)
      if (last.gate[c] != 0.0)
        out.structural[last.candidates[c]] = last.gate[c] * dot(params_.readout.data, last.hidden.row(c));
  }
  for (std::size_t t = 0; t < n; ++t) out.hybrid[t] = lambda * out.structural[t] + (1.0 - lambda) * out.semantic[t];
  if (trace_out) *trace_out = std::move(trace);
  return out;
}

BatchStats Model::forward_backward(const Graph &graph, std::span<const Query> queries, Mode mode,
                                   std::uint64_t noise_seed, bool compute_grads, bool corrupt_selection_adjoint,
                                   std::vector<SelectionProbe> *probes) {
  require(!queries.empty(), ErrorKind::kUsage, "empty batch");
  const std::size_t n = n_entities();
  const std::size_t d = options_.dim;
  const double lambda = options_.effective_lambda();
  const double gamma = options_.gamma;
  const double inv_b = 1.0 / static_cast<double>(queries.size());
  if (compute_grads) zero_grads(grads_);
  const bool use_probes = probes && probes->size() == queries.size();
  if (probes && !use_probes) probes->clear();

  RelationCache cache(graph, params_, options_, compute_grads);
  BatchStats stats;
  Vec dscore(n), dv(d), v(d);
  std::vector<EntityId> norm_set;
  std::vector<double> norm_scores;

  for (std::size_t i = 0; i < queries.size(); ++i) {
    const Query &q = queries[i];
    require(q.answer < n, ErrorKind::kUsage, "query answer out of range");
    PropagationTrace trace;
    const QueryScores sc =
        score(cache, q, mode, hash_combine(noise_seed, i), &trace, use_probes ? &(*probes)[i] : nullptr);
    if (probes && !use_probes) probes->push_back(SelectionProbe::record(trace));

    norm_set.clear();
    if (options_.normalizer == Normalizer::kAll || !options_.propagates()) {
      norm_set.resize(n);
      for (std::size_t t = 0; t < n; ++t) norm_set[t] = static_cast<EntityId>(t);
    } else {
      norm_set = sc.reached;
      if (!std::binary_search(norm_set.begin(), norm_set.end(), q.answer))
        norm_set.insert(std::lower_bound(norm_set.begin(), norm_set.end(), q.answer), q.answer);
    }
    norm_scores.resize(norm_set.size());
    for (std::size_t k = 0; k < norm_set.size(); ++k) norm_scores[k] = sc.hybrid[norm_set[k]];
    const double lse = logsumexp(norm_scores);
    const double ll = log_loss(sc.hybrid[q.answer], norm_scores);
    const ConstSpan qr = trace.final_query_relation();
    const ConstSpan ea = params_.emb.tail.row(q.answer);
    const double reg = n3_penalty(trace.query_entity, qr, ea);
    require(std::isfinite(ll) && std::isfinite(reg), ErrorKind::kNumeric, "non-finite loss");
    stats.log_loss += ll * inv_b;
    stats.reg += reg * inv_b;
    if (!compute_grads) continue;

    // d(mean loss)/d(score): softmax over the normalizer minus the target.
    std::fill(dscore.begin(), dscore.end(), 0.0);
    for (std::size_t k = 0; k < norm_set.size(); ++k) dscore[norm_set[k]] = std::exp(norm_scores[k] - lse) * inv_b;
    dscore[q.answer] -= inv_b;

    TraceAdjoint adj;
    adj.query_entity.assign(d, 0.0);
    adj.final_query_relation.assign(d, 0.0);
    if (lambda < 1.0) {
      for (std::size_t j = 0; j < d; ++j) v[j] = trace.query_entity[j] * qr[j];
      std::fill(dv.begin(), dv.end(), 0.0);
      for (std::size_t t = 0; t < n; ++t) {
        const double g = (1.0 - lambda) * dscore[t];
        if (g == 0.0) continue;
        axpy(g, v, grads_.emb.tail.row(t));
        axpy(g, params_.emb.tail.row(t), dv);
      }
      for (std::size_t j = 0; j < d; ++j) {
        adj.query_entity[j] += dv[j] * qr[j];
        adj.final_query_relation[j] += dv[j] * trace.query_entity[j];
      }
    }
    const double rs = gamma * inv_b;
    if (rs != 0.0) {
      n3_grad_acc(trace.query_entity, rs, adj.query_entity);
      n3_grad_acc(qr, rs, adj.final_query_relation);
      n3_grad_acc(ea, rs, grads_.emb.tail.row(q.answer));
    }
    if (!trace.layers.empty()) {
      const PropagationLayer &last = trace.layers.back();
      adj.final_hidden = Matrix(last.candidates.size(), d);
      for (std::size_t c = 0; c < last.candidates.size(); ++c) {
        const double g = lambda * dscore[last.candidates[c]];
        if (g == 0.0) continue;
        const ConstSpan h = last.hidden.row(c);
        axpy(g * last.gate[c], h, grads_.readout.data);
        axpy(g, params_.readout.data, adj.final_hidden.row(c));
      }
    }
    backward_propagation(inputs(), cache, trace, std::move(adj), grads_, corrupt_selection_adjoint);
  }
  if (compute_grads) cache.backward(grads_);
  stats.queries = queries.size();
  stats.loss = stats.log_loss + gamma * stats.reg;
  require(std::isfinite(stats.loss), ErrorKind::kNumeric, "non-finite loss");
  return stats;
}

}  // namespace kgf
