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
#include <cmath>
#include <fstream>
#include <random>
#include <set>

#include "doctest.h"
#include "oracles.hpp"
#include "support.hpp"
#include "train.hpp"

using namespace kgf;
using kgf::testing::sorted_rank;
using kgf::testing::store_from;

namespace {

TripleStore small_dataset(std::uint64_t seed, std::size_t n_entities = 30, std::size_t n_facts = 120) {
  TripleStore s = generate_synthetic(n_entities, 3, n_facts, seed, {0.5, 0.15, 0.15});
  s.augment();
  return s;
}

TrainConfig tiny_config() {
  TrainConfig c;
  c.model.dim = 4;
  c.model.layers = 2;
  c.model.top_k = 8;
  c.batch_size = 8;
  c.max_epochs = 3;
  return c;
}

// Every (h, r, t) that appears in a split, in either direction, scanned from
// the raw split lists rather than the store's index.
std::set<std::tuple<EntityId, RelationId, EntityId>> scan_known(const TripleStore &s) {
  std::set<std::tuple<EntityId, RelationId, EntityId>> out;
  for (Split sp : kAllSplits)
    for (const Triple &t : s.split(sp)) {
      out.insert({t.head, t.relation, t.tail});
      out.insert({t.tail, s.scheme().reverse(t.relation), t.head});
    }
  return out;
}

}  // namespace

TEST_SUITE("train") {

TEST_CASE("rank examples") {
  const std::vector<std::uint8_t> none(3, 0);
  CHECK(filtered_rank(Vec{0.1, 0.9, 0.3}, 1, none) == 1);
  CHECK(filtered_rank(Vec{0.9, 0.9, 0.3}, 1, none) == 2);
  CHECK(filtered_rank(Vec{0.9, 0.5, 0.3}, 1, std::vector<std::uint8_t>{1, 0, 0}) == 1);
  CHECK_THROWS_AS(filtered_rank(Vec{0.9, 0.5, 0.3}, 1, std::vector<std::uint8_t>{0, 1, 0}), Error);
}

TEST_CASE("rank matches a sort-based oracle") {
  std::mt19937_64 rng(41);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t n = 1 + rng() % 20;
    std::vector<double> scores(n);
    for (double &s : scores) s = static_cast<double>(rng() % 6);
    const std::size_t answer = rng() % n;
    std::set<std::size_t> removed;
    std::vector<std::uint8_t> mask(n, 0);
    for (int k = 0; k < 5; ++k) {
      const std::size_t t = rng() % n;
      if (t == answer) continue;
      removed.insert(t);
      mask[t] = 1;
    }
    CHECK(filtered_rank(scores, static_cast<EntityId>(answer), mask) == sorted_rank(scores, answer, removed));
  }
}

TEST_CASE("rank is invariant under increasing transforms") {
  std::mt19937_64 rng(42);
  for (int trial = 0; trial < 100; ++trial) {
    Vec s(15);
    for (double &v : s) v = static_cast<double>(rng() % 7) - 3.0;
    const std::vector<std::uint8_t> none(15, 0);
    Vec t = s;
    for (double &v : t) v = std::exp(0.5 * v) + 4.0;
    const EntityId a = static_cast<EntityId>(rng() % 15);
    CHECK(filtered_rank(s, a, none) == filtered_rank(t, a, none));
  }
}

TEST_CASE("metrics from ranks") {
  const EvalReport r = report_from_ranks({1, 2, 4});
  CHECK(r.mrr == doctest::Approx(0.5833333333333334).epsilon(1e-15));
  CHECK(r.hit1 == doctest::Approx(1.0 / 3.0));
  CHECK(r.hit10 == 1.0);
}

TEST_CASE("one entity graph ranks perfectly") {
  TripleStore s = store_from(1, 1, {{0, 0, 0}});
  Model m = make_model(tiny_config(), s);
  const std::vector<Query> qs{{0, 0, 0}};
  CHECK(evaluate(m, s, qs).mrr == 1.0);
}

TEST_CASE("evaluation agrees with brute-force filtering") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    TripleStore s = small_dataset(seed, 20, 60);
    TrainConfig c = tiny_config();
    c.seed = seed;
    const Model m = make_model(c, s);
    const auto known = scan_known(s);
    const auto queries = make_queries(s, s.split(Split::kTest), true);
    const EvalReport r = evaluate(m, s, queries, 2);
    RelationCache cache(s.graph(GraphView::kInference), m.params(), m.options(), false);
    for (std::size_t i = 0; i < queries.size(); ++i) {
      const Query &q = queries[i];
      const QueryScores sc = m.score(cache, q, Mode::kInfer, 0);
      std::set<std::size_t> removed;
      for (EntityId t = 0; t < s.n_entities(); ++t)
        if (t != q.answer && known.count({q.entity, q.relation, t})) removed.insert(t);
      CHECK(r.ranks[i] == sorted_rank(sc.hybrid, q.answer, removed));
    }
    // Internal consistency of the summary.
    const EvalReport again = report_from_ranks(r.ranks);
    CHECK(again.mrr == r.mrr);
    CHECK(again.hit1 == r.hit1);
    CHECK(again.hit10 == r.hit10);
  }
}

TEST_CASE("evaluation is independent of the thread count") {
  TripleStore s = small_dataset(3);
  const Model m = make_model(tiny_config(), s);
  const auto q = make_queries(s, s.split(Split::kValid), true);
  CHECK(evaluate(m, s, q, 1).ranks == evaluate(m, s, q, 4).ranks);
}

TEST_CASE("ablation wiring") {
  TripleStore s = small_dataset(5);
  const auto queries = make_queries(s, s.split(Split::kValid), true);
  for (Ablation a : {Ablation::kNoPhi, Ablation::kNoGsp}) {
    TrainConfig c = tiny_config();
    c.model.ablation = a;
    const Model m = make_model(c, s);
    RelationCache cache(s.graph(GraphView::kInference), m.params(), m.options(), false);
    for (const Query &q : queries) {
      const QueryScores sc = m.score(cache, q, Mode::kInfer, 0);
      for (EntityId t = 0; t < s.n_entities(); ++t) {
        if (a == Ablation::kNoPhi) {
          CHECK(sc.hybrid[t] == sc.structural[t]);
        } else {
          const auto &e = m.params().emb;
          CHECK(std::abs(sc.hybrid[t] - phi(e.head.row(q.entity), e.relation.row(q.relation), e.tail.row(t))) <
                1e-12);
          CHECK(sc.reached.empty());
        }
      }
    }
  }
}

TEST_CASE("pure CP evaluation does not touch propagation") {
  TripleStore s = small_dataset(6);
  TrainConfig c = tiny_config();
  c.model.ablation = Ablation::kNoGsp;
  const Model a = make_model(c, s);
  // Different propagation shapes, same CP tables.
  TrainConfig c2 = c;
  c2.model.layers = 5;
  c2.model.top_k = 1;
  const Model b = make_model(c2, s);
  REQUIRE(a.params().emb.head.data == b.params().emb.head.data);
  CHECK(evaluate(a, s, Split::kTest).ranks == evaluate(b, s, Split::kTest).ranks);
}

TEST_CASE("config keys") {
  TrainConfig c;
  set_config_value(c, "lambda", "0.4");
  set_config_value(c, "ablation", "no_crr");
  set_config_value(c, "separate_query_cell", "on");
  CHECK(c.model.lambda == 0.4);
  CHECK(c.model.ablation == Ablation::kNoCrr);
  CHECK(c.model.separate_query_cell);
  CHECK_THROWS_AS(set_config_value(c, "lamda", "0.4"), Error);
  CHECK_THROWS_AS(set_config_value(c, "lambda", "1.4"), Error);
  CHECK_THROWS_AS(set_config_value(c, "K", "ten"), Error);
  CHECK_THROWS_AS(set_config_value(c, "ablation", "none"), Error);
  CHECK(c.model.lambda == 0.4);

  TrainConfig back;
  for (const auto &[k, v] : config_items(c)) set_config_value(back, k, v);
  CHECK(config_to_text(back) == config_to_text(c));
}

TEST_CASE("config file errors name the line") {
  auto dir = kgf::testing::scratch_dir("cfg");
  {
    std::ofstream out(dir / "c.txt");
    out << "# comment\nlr=0.001\n\nbogus line\n";
  }
  TrainConfig c;
  try {
    apply_config_file(c, dir / "c.txt");
    FAIL("expected an error");
  } catch (const Error &e) {
    CHECK(std::string(e.what()).find(":4:") != std::string::npos);
  }
  CHECK(c.lr == 0.001);
}

TEST_CASE("range warnings") {
  TrainConfig c;
  CHECK(config_warnings(c).empty());
  c.lr = 0.5;
  c.model.layers = 2;
  CHECK(config_warnings(c).size() == 2);
}

TEST_CASE("sweep grids") {
  CHECK(sweep_grid("lambda") == std::vector<std::string>{"0.3", "0.4", "0.5", "0.6", "0.7", "0.8"});
  CHECK(sweep_grid("L").size() == 5);
  CHECK_THROWS_AS(sweep_grid("seed"), Error);
}

TEST_CASE("zero learning rate keeps the loss fixed") {
  TripleStore s = small_dataset(7);
  TrainConfig c = tiny_config();
  c.lr = 0.0;
  c.model.temperature = 0.0;
  const TrainResult r = train(c, s);
  REQUIRE(r.history.size() == 3);
  CHECK(r.history[1].train_loss == r.history[0].train_loss);
  CHECK(r.history[2].train_loss == r.history[0].train_loss);
}

TEST_CASE("training is repeatable") {
  TripleStore s = small_dataset(8);
  const TrainConfig c = tiny_config();
  const TrainResult a = train(c, s), b = train(c, s);
  REQUIRE(a.history.size() == b.history.size());
  for (std::size_t i = 0; i < a.history.size(); ++i) {
    CHECK(a.history[i].train_loss == b.history[i].train_loss);
    CHECK(a.history[i].valid_mrr == b.history[i].valid_mrr);
  }
  CHECK(a.best.params().emb.head.data == b.best.params().emb.head.data);
  CHECK(a.best.params().layers[1].message.data == b.best.params().layers[1].message.data);
}

TEST_CASE("loss decreases on a synthetic graph") {
  // No background share: the training graph is the train split itself.
  TripleStore s = generate_synthetic(50, 5, 500, 1, {0.0, 0.1, 0.1});
  s.augment();
  TrainConfig c;
  c.max_epochs = 5;
  const TrainResult r = train(c, s);
  REQUIRE(r.history.size() == 5);
  for (std::size_t i = 1; i < 5; ++i) CHECK(r.history[i].train_loss < r.history[i - 1].train_loss);
}

TEST_CASE("CP pre-training only moves the factor tables") {
  TripleStore s = small_dataset(9);
  TrainConfig c = tiny_config();
  c.pretrain_epochs = 2;
  c.max_epochs = 0;
  const Model fresh = make_model(c, s);
  const TrainResult r = train(c, s);
  CHECK(r.best.params().emb.head.data != fresh.params().emb.head.data);
  CHECK(r.best.params().emb.tail.data != fresh.params().emb.tail.data);
  CHECK(r.best.params().layers[0].message.data == fresh.params().layers[0].message.data);
  CHECK(r.best.params().cell.input_weights.data == fresh.params().cell.input_weights.data);
  CHECK(r.best.params().readout.data == fresh.params().readout.data);
}

TEST_CASE("sweep emits one row per value") {
  TripleStore s = small_dataset(10);
  TrainConfig c = tiny_config();
  c.max_epochs = 1;
  const std::vector<std::string> values{"0.3", "0.5", "0.8"};
  const auto rows = sweep(c, s, "lambda", values);
  REQUIRE(rows.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(rows[i].value == values[i]);
    CHECK(rows[i].valid_mrr > 0.0);
  }
}

}  // TEST_SUITE
