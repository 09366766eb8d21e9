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
#include <algorithm>
#include <cmath>
#include <numeric>
#include <queue>
#include <random>
#include <set>

#include "doctest.h"
#include "model.hpp"
#include "propagate.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace kgf;
using kgf::testing::random_vec;
using kgf::testing::bfs_layers;
using kgf::testing::store_from;

namespace {

LayerParams random_layer(std::mt19937_64 &rng, std::size_t d) {
  LayerParams lp(d);
  fill_uniform(lp.message, rng, 1.0);
  fill_uniform(lp.attention, rng, 1.0);
  fill_uniform(lp.attention_vector, rng, 1.0);
  return lp;
}

ModelOptions small_options(std::size_t layers, std::size_t k) {
  ModelOptions o;
  o.dim = 4;
  o.layers = layers;
  o.top_k = k;
  return o;
}

}  // namespace

TEST_SUITE("propagate") {

TEST_CASE("expansion includes the self loop") {
  TripleStore s = store_from(3, 1, {{0, 0, 1}, {1, 0, 2}});
  const std::vector<EntityId> f{0};
  const Expansion ex = expand(s.graph(GraphView::kInference), f);
  CHECK(std::find(ex.edges.begin(), ex.edges.end(), Triple{0, s.scheme().identity(), 0}) != ex.edges.end());
  CHECK(ex.candidates == std::vector<EntityId>{0, 1});
}

TEST_CASE("expansion equals the union of neighbor sets") {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t n = 3 + rng() % 20;
    TripleStore s = store_from(n, 3, kgf::testing::random_facts(rng, n, 3, rng() % 50));
    std::vector<EntityId> frontier;
    for (EntityId e = 0; e < n; ++e)
      if (rng() % 3 == 0) frontier.push_back(e);
    if (frontier.empty()) frontier.push_back(0);
    const Graph &g = s.graph(GraphView::kInference);
    const Expansion ex = expand(g, frontier);
    std::set<EntityId> want;
    std::size_t n_edges = 0;
    for (EntityId h : frontier) {
      for (const Edge &e : g.out_edges(h)) want.insert(e.tail);
      n_edges += g.out_edges(h).size();
    }
    CHECK(std::vector<EntityId>(want.begin(), want.end()) == ex.candidates);
    CHECK(ex.edges.size() == n_edges);
  }
}

TEST_CASE("attention weight") {
  const LayerParams zero(4);
  std::mt19937_64 rng(22);
  CHECK(attention_weight(random_vec(rng, 4), random_vec(rng, 4), random_vec(rng, 4), zero) == 0.5);

  // W_a = -I with a positive input leaves every ReLU unit dead.
  LayerParams dead(4);
  for (int i = 0; i < 4; ++i) dead.attention(i, i) = -1.0;
  dead.attention_vector.fill(3.0);
  CHECK(attention_weight(Vec(4, 0.3), Vec(4, 0.2), Vec(4, 0.1), dead) == 0.5);

  for (int trial = 0; trial < 20; ++trial) {
    const LayerParams lp = random_layer(rng, 4);
    const Vec h = random_vec(rng, 4), r = random_vec(rng, 4), q = random_vec(rng, 4);
    double z = 0.0;
    for (int i = 0; i < 4; ++i) {
      double pre = 0.0;
      for (int j = 0; j < 4; ++j) pre += lp.attention(i, j) * (h[j] + r[j] + q[j]);
      z += lp.attention_vector(0, i) * (pre > 0 ? pre : 0.0);
    }
    const double a = attention_weight(h, r, q, lp);
    CHECK(std::abs(a - 1.0 / (1.0 + std::exp(-z))) < 1e-12);
    CHECK(a > 0.0);
    CHECK(a < 1.0);
  }
}

TEST_CASE("node aggregation") {
  std::mt19937_64 rng(23);
  const LayerParams lp = random_layer(rng, 4);
  CHECK(aggregate_node({}, lp) == Vec(4, 0.0));

  LayerParams eye(3);
  for (int i = 0; i < 3; ++i) eye.message(i, i) = 1.0;
  const Vec h{0.1, -0.5, 2.0}, r{0.3, 0.3, -1.0};
  const std::vector<Message> one{{1.0, h, r}};
  const Vec out = aggregate_node(one, eye);
  for (int j = 0; j < 3; ++j) CHECK(out[j] == std::tanh(h[j] + r[j]));

  std::vector<Vec> hs, rs;
  std::vector<Message> three;
  for (int m = 0; m < 3; ++m) {
    hs.push_back(random_vec(rng, 4));
    rs.push_back(random_vec(rng, 4));
  }
  const double alphas[3] = {0.2, 0.7, 0.9};
  for (int m = 0; m < 3; ++m) three.push_back({alphas[m], hs[m], rs[m]});
  const Vec got = aggregate_node(three, lp);
  for (int i = 0; i < 4; ++i) {
    double pre = 0.0;
    for (int j = 0; j < 4; ++j) {
      double s = 0.0;
      for (int m = 0; m < 3; ++m) s += alphas[m] * (hs[m][j] + rs[m][j]);
      pre += lp.message(i, j) * s;
    }
    CHECK(std::abs(got[i] - std::tanh(pre)) < 1e-12);
  }
}

TEST_CASE("importance score") {
  SelectionParams sel(3);
  CHECK(importance(Vec(3, 0.0), sel) == 0.0);
  sel.weights(0, 0) = 1.0;
  CHECK(importance(Vec{0.7, 2, 3}, sel) == 0.7);
  std::mt19937_64 rng(24);
  fill_uniform(sel.weights, rng, 1.0);
  const Vec h = random_vec(rng, 3);
  CHECK(std::abs(importance(h, sel) - (sel.weights(0, 0) * h[0] + sel.weights(0, 1) * h[1] +
                                       sel.weights(0, 2) * h[2])) < 1e-15);
}

TEST_CASE("deterministic top-K") {
  const std::vector<EntityId> nodes{10, 11, 12};
  const Selection s = select_topk(nodes, Vec{3, 1, 2}, 2, Mode::kInfer, 1.0, 0);
  CHECK(s.selected == std::vector<EntityId>{10, 12});
  CHECK(s.mask == std::vector<std::uint8_t>{1, 0, 1});
  CHECK(s.soft_scores == Vec{3, 1, 2});

  const Selection all = select_topk(nodes, Vec{3, 1, 2}, 10, Mode::kInfer, 1.0, 0);
  CHECK(all.mask == std::vector<std::uint8_t>{1, 1, 1});

  const Selection tie = select_topk(std::vector<EntityId>{5, 3, 4}, Vec{1, 1, 1}, 2, Mode::kInfer, 1.0, 0);
  CHECK(tie.selected == std::vector<EntityId>{3, 4});
  CHECK_THROWS_AS(select_topk(nodes, Vec{3, 1, 2}, 0, Mode::kInfer, 1.0, 0), Error);
}

TEST_CASE("Gumbel noise has the standard moments") {
  const int n = 200000;
  double sum = 0.0, sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double g = gumbel_noise(17, static_cast<EntityId>(i));
    CHECK(std::isfinite(g));
    sum += g;
    sq += g * g;
  }
  const double mean = sum / n, var = sq / n - mean * mean;
  CHECK(std::abs(mean - 0.5772156649) < 0.01);
  CHECK(std::abs(var - M_PI * M_PI / 6.0) < 0.03);
}

TEST_CASE("near-zero temperature recovers the true top-K") {
  const std::vector<EntityId> nodes{0, 1, 2, 3, 4, 5};
  const Vec scores{0.3, 1.2, -0.4, 0.9, 0.05, 1.1};
  const Selection truth = select_topk(nodes, scores, 3, Mode::kInfer, 0.0, 0);
  int hits = 0;
  for (std::uint64_t seed = 0; seed < 10000; ++seed)
    hits += select_topk(nodes, scores, 3, Mode::kTrain, 1e-9, seed).selected == truth.selected;
  CHECK(hits == 10000);
}

TEST_CASE("Gumbel top-1 frequencies follow the softmax") {
  const std::vector<EntityId> nodes{0, 1, 2, 3};
  const Vec scores{0.5, -0.2, 1.0, 0.1};
  const double temperature = 0.8;
  double z = 0.0;
  for (double s : scores) z += std::exp(s / temperature);
  std::vector<int> counts(4, 0);
  const int trials = 40000;
  for (int seed = 0; seed < trials; ++seed)
    ++counts[select_topk(nodes, scores, 1, Mode::kTrain, temperature, static_cast<std::uint64_t>(seed)).selected[0]];
  for (int i = 0; i < 4; ++i) {
    const double p = std::exp(scores[i] / temperature) / z;
    const double sd = std::sqrt(p * (1 - p) / trials);
    CHECK(std::abs(counts[i] / static_cast<double>(trials) - p) < 5 * sd);
  }
}

TEST_CASE("straight-through mask") {
  CHECK(apply_hard_mask(Vec{1, 2}, 1, 0.7) == Vec{1, 2});
  CHECK(apply_hard_mask(Vec{1, 2}, 0, 0.7) == Vec{0, 0});
  std::mt19937_64 rng(25);
  for (int trial = 0; trial < 20; ++trial) {
    const Vec h = random_vec(rng, 5), g = random_vec(rng, 5);
    const std::uint8_t hard = trial % 2;
    const double s0 = uniform_symmetric(rng, 2.0);
    CHECK(apply_hard_mask(h, hard, s0) == apply_hard_mask(h, hard, -s0));
    const HardMaskGrad grad = apply_hard_mask_backward(h, hard, g);
    // Probe form h * (hard - s0 + s) at s = s0.
    auto probe = [&](double s) {
      double out = 0.0;
      for (int j = 0; j < 5; ++j) out += h[j] * (hard - s0 + s) * g[j];
      return out;
    };
    const double eps = 1e-5;
    const double fd = (probe(s0 + eps) - probe(s0 - eps)) / (2 * eps);
    CHECK(kgf::testing::rel_error(fd, grad.soft) < 1e-6);
    for (int j = 0; j < 5; ++j) CHECK(grad.hidden[j] == (hard ? g[j] : 0.0));
  }
}

TEST_CASE("single entity graph keeps only the query node") {
  TripleStore s = store_from(1, 1, {{0, 0, 0}});
  const ModelOptions o = small_options(1, 4);
  const ModelParams p = init_params({s.n_entities(), s.n_relations_augmented()}, o, 1);
  RelationCache cache(s.graph(GraphView::kInference), p, o, false);
  const PropagationTrace t = run_propagation({p, o}, cache, {0, 0, 0}, Mode::kInfer, 0);
  REQUIRE(t.layers.size() == 1);
  CHECK(t.layers[0].candidates == std::vector<EntityId>{0});
  bool has_identity = false;
  for (const TraceEdge &e : t.layers[0].edges) has_identity |= e.relation == s.scheme().identity();
  CHECK(has_identity);
}

TEST_CASE("chain graph matches breadth-first search") {
  std::vector<Triple> chain;
  for (EntityId i = 0; i + 1 < 6; ++i) chain.push_back({i, 0, i + 1});
  TripleStore s = store_from(6, 1, chain);
  const ModelOptions o = small_options(3, 100);
  const ModelParams p = init_params({6, s.n_relations_augmented()}, o, 2);
  RelationCache cache(s.graph(GraphView::kInference), p, o, false);
  const PropagationTrace t = run_propagation({p, o}, cache, {0, 0, 1}, Mode::kInfer, 0);
  const auto want = bfs_layers(s.graph(GraphView::kInference), 0, 3);
  for (std::size_t l = 0; l < 3; ++l) {
    std::set<EntityId> sel;
    for (std::size_t c = 0; c < t.layers[l].candidates.size(); ++c)
      if (t.layers[l].mask[c]) sel.insert(t.layers[l].candidates[c]);
    CHECK(sel == want[l]);
  }
  CHECK(want[2] == std::set<EntityId>{0, 1, 2, 3});
}

TEST_CASE("trace invariants on random graphs") {
  std::mt19937_64 rng(26);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 5 + rng() % 25;
    TripleStore s = store_from(n, 3, kgf::testing::random_facts(rng, n, 3, 2 * n));
    ModelOptions o = small_options(1 + rng() % 4, 1 + rng() % 6);
    o.ablation = trial % 3 == 0 ? Ablation::kNoCrr : Ablation::kFull;
    const ModelParams p = init_params({n, s.n_relations_augmented()}, o, trial);
    RelationCache cache(s.graph(GraphView::kInference), p, o, false);
    const Mode mode = trial % 2 ? Mode::kTrain : Mode::kInfer;
    const Query q{static_cast<EntityId>(rng() % n), 0, 0};
    const PropagationTrace t = run_propagation({p, o}, cache, q, mode, rng());
    CHECK(t.layers.front().frontier == std::vector<EntityId>{q.entity});
    for (std::size_t l = 0; l < t.layers.size(); ++l) {
      const PropagationLayer &layer = t.layers[l];
      std::size_t kept = 0;
      for (std::uint8_t m : layer.mask) kept += m;
      CHECK(kept <= o.top_k);
      CHECK(kept == std::min(o.top_k, layer.candidates.size()));
      for (double a : layer.alpha) {
        CHECK(a > 0.0);
        CHECK(a < 1.0);
      }
      for (double v : layer.hidden.data) CHECK(std::abs(v) <= 1.0);
      for (const TraceEdge &e : layer.edges) CHECK(e.head_index < layer.frontier.size());
      // Masked frontier states are exactly the selected hidden rows.
      if (l + 1 < t.layers.size()) {
        const PropagationLayer &next = t.layers[l + 1];
        std::size_t row = 0;
        for (std::size_t c = 0; c < layer.candidates.size(); ++c) {
          if (!layer.mask[c]) continue;
          CHECK(next.frontier[row] == layer.candidates[c]);
          for (std::size_t j = 0; j < o.dim; ++j) CHECK(next.frontier_hidden(row, j) == layer.hidden(c, j));
          ++row;
        }
      }
    }
  }
}

TEST_CASE("selected sets equal BFS layers when K is large") {
  std::mt19937_64 rng(27);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t n = 2 + rng() % 40;
    TripleStore s = store_from(n, 2, kgf::testing::random_facts(rng, n, 2, rng() % (n + 1)));
    const ModelOptions o = small_options(1 + rng() % 4, 1000);
    const ModelParams p = init_params({n, s.n_relations_augmented()}, o, trial);
    RelationCache cache(s.graph(GraphView::kInference), p, o, false);
    const EntityId q = static_cast<EntityId>(rng() % n);
    const PropagationTrace t = run_propagation({p, o}, cache, {q, 0, 0}, Mode::kInfer, 0);
    const auto want = bfs_layers(s.graph(GraphView::kInference), q, o.layers);
    for (std::size_t l = 0; l < o.layers; ++l)
      CHECK(std::set<EntityId>(t.layers[l].candidates.begin(), t.layers[l].candidates.end()) == want[l]);
  }
}

TEST_CASE("no_crr keeps relation embeddings fixed across layers") {
  TripleStore s = store_from(4, 2, {{0, 0, 1}, {1, 1, 2}, {2, 0, 3}});
  ModelOptions o = small_options(3, 10);
  o.ablation = Ablation::kNoCrr;
  const ModelParams p = init_params({4, s.n_relations_augmented()}, o, 3);
  RelationCache cache(s.graph(GraphView::kInference), p, o, false);
  const PropagationTrace t = run_propagation({p, o}, cache, {0, 1, 0}, Mode::kInfer, 0);
  for (const PropagationLayer &layer : t.layers) {
    const auto qr = p.emb.relation.row(1);
    CHECK(layer.query_relation == Vec(qr.begin(), qr.end()));
    for (const TraceEdge &e : layer.edges) {
      const auto base = p.emb.relation.row(e.relation);
      const auto got = cache.chain_value(e.chain_slot);
      CHECK(std::equal(base.begin(), base.end(), got.begin(), got.end()));
    }
  }
}

TEST_CASE("selection weights receive gradient through the straight-through path") {
  std::mt19937_64 rng(28);
  TripleStore s = store_from(12, 2, kgf::testing::random_facts(rng, 12, 2, 30));
  ModelOptions o = small_options(2, 3);
  Model m(o, EmbeddingSizes{12, s.n_relations_augmented()}, 4);
  std::vector<Query> qs{{0, 0, 5}, {3, 1, 7}, {8, 0, 2}};
  m.forward_backward(s.graph(GraphView::kInference), qs, Mode::kTrain, 9, true);
  double norm = 0.0;
  for (double g : m.grads().selection.weights.data) norm += g * g;
  CHECK(norm > 0.0);
  CHECK(std::isfinite(norm));
}

}  // TEST_SUITE
