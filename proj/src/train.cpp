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
#include "train.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <thread>

#include "optim.hpp"

namespace kgf {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

double parse_double(std::string_view key, std::string_view v) {
  double out = 0.0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  require(ec == std::errc() && p == v.data() + v.size() && std::isfinite(out), ErrorKind::kUsage,
          "config key '" + std::string(key) + "': '" + std::string(v) + "' is not a number");
  return out;
}

std::uint64_t parse_unsigned(std::string_view key, std::string_view v) {
  std::uint64_t out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  require(ec == std::errc() && p == v.data() + v.size(), ErrorKind::kUsage,
          "config key '" + std::string(key) + "': '" + std::string(v) + "' is not a non-negative integer");
  return out;
}

bool parse_flag(std::string_view key, std::string_view v) {
  if (v == "1" || v == "true" || v == "on" || v == "yes") return true;
  if (v == "0" || v == "false" || v == "off" || v == "no") return false;
  fail(ErrorKind::kUsage, "config key '" + std::string(key) + "': expected on/off, got '" + std::string(v) + "'");
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

void set_config_value(TrainConfig &config, std::string_view key, std::string_view raw) {
  // Work on a copy so a rejected value leaves the config untouched.
  TrainConfig c = config;
  const std::string v = trim(raw);
  ModelOptions &m = c.model;
  if (key == "lr") {
    c.lr = parse_double(key, v);
    require(c.lr >= 0.0, ErrorKind::kUsage, "lr must be non-negative");
  } else if (key == "batch_size") {
    c.batch_size = parse_unsigned(key, v);
    require(c.batch_size >= 1, ErrorKind::kUsage, "batch_size must be at least 1");
  } else if (key == "D") {
    m.dim = parse_unsigned(key, v);
    require(m.dim >= 1, ErrorKind::kUsage, "D must be at least 1");
  } else if (key == "K") {
    m.top_k = parse_unsigned(key, v);
    require(m.top_k >= 1, ErrorKind::kUsage, "K must be at least 1");
  } else if (key == "lambda") {
    m.lambda = parse_double(key, v);
    require(m.lambda >= 0.0 && m.lambda <= 1.0, ErrorKind::kUsage, "lambda must lie in [0, 1]");
  } else if (key == "gamma") {
    m.gamma = parse_double(key, v);
    require(m.gamma >= 0.0, ErrorKind::kUsage, "gamma must be non-negative");
  } else if (key == "L") {
    m.layers = parse_unsigned(key, v);
    require(m.layers >= 1, ErrorKind::kUsage, "L must be at least 1");
  } else if (key == "temperature") {
    m.temperature = parse_double(key, v);
    require(m.temperature >= 0.0, ErrorKind::kUsage, "temperature must be non-negative");
  } else if (key == "init_scale") {
    m.init_scale = parse_double(key, v);
    require(m.init_scale > 0.0, ErrorKind::kUsage, "init_scale must be positive");
  } else if (key == "relation_init") {
    m.relation_init = parse_double(key, v);
    require(m.relation_init > 0.0, ErrorKind::kUsage, "relation_init must be positive");
  } else if (key == "message_init") {
    m.message_init = parse_double(key, v);
    require(m.message_init > 0.0, ErrorKind::kUsage, "message_init must be positive");
  } else if (key == "readout_init") {
    m.readout_init = parse_double(key, v);
    require(m.readout_init >= 0.0, ErrorKind::kUsage, "readout_init must be non-negative");
  } else if (key == "pretrain_epochs") {
    c.pretrain_epochs = parse_unsigned(key, v);
  } else if (key == "max_epochs") {
    c.max_epochs = parse_unsigned(key, v);
  } else if (key == "seed") {
    c.seed = parse_unsigned(key, v);
  } else if (key == "ablation") {
    m.ablation = parse_ablation(v);
  } else if (key == "normalizer") {
    m.normalizer = parse_normalizer(v);
  } else if (key == "separate_query_cell") {
    m.separate_query_cell = parse_flag(key, v);
  } else if (key == "reverse_queries") {
    c.reverse_queries = parse_flag(key, v);
  } else {
    fail(ErrorKind::kUsage, "unknown config key '" + std::string(key) + "'");
  }
  config = std::move(c);
}

std::vector<std::pair<std::string, std::string>> config_items(const TrainConfig &c) {
  const ModelOptions &m = c.model;
  return {
      {"lr", fmt(c.lr)},
      {"batch_size", std::to_string(c.batch_size)},
      {"D", std::to_string(m.dim)},
      {"K", std::to_string(m.top_k)},
      {"lambda", fmt(m.lambda)},
      {"gamma", fmt(m.gamma)},
      {"L", std::to_string(m.layers)},
      {"temperature", fmt(m.temperature)},
      {"init_scale", fmt(m.init_scale)},
      {"relation_init", fmt(m.relation_init)},
      {"message_init", fmt(m.message_init)},
      {"readout_init", fmt(m.readout_init)},
      {"pretrain_epochs", std::to_string(c.pretrain_epochs)},
      {"max_epochs", std::to_string(c.max_epochs)},
      {"seed", std::to_string(c.seed)},
      {"ablation", std::string(ablation_name(m.ablation))},
      {"normalizer", std::string(normalizer_name(m.normalizer))},
      {"separate_query_cell", m.separate_query_cell ? "on" : "off"},
      {"reverse_queries", c.reverse_queries ? "on" : "off"},
  };
}

std::string config_to_text(const TrainConfig &c) {
  std::string out;
  for (const auto &[k, v] : config_items(c)) out += k + "=" + v + "\n";
  return out;
}

void apply_config_file(TrainConfig &c, const std::filesystem::path &path) {
  std::ifstream in(path);
  require(in.good(), ErrorKind::kData, "cannot open config file " + path.string());
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    require(eq != std::string::npos, ErrorKind::kUsage,
            path.string() + ":" + std::to_string(lineno) + ": expected key=value");
    try {
      set_config_value(c, trim(std::string_view(t).substr(0, eq)), std::string_view(t).substr(eq + 1));
    } catch (const Error &e) {
      fail(e.kind(), path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
}

std::vector<std::string> config_warnings(const TrainConfig &c) {
  std::vector<std::string> out;
  auto check = [&](const char *key, double v, double lo, double hi) {
    if (v < lo || v > hi)
      out.push_back(std::string(key) + "=" + fmt(v) + " is outside the tuned range [" + fmt(lo) + ", " + fmt(hi) +
                    "]");
  };
  check("lr", c.lr, 1e-4, 1e-2);
  check("batch_size", static_cast<double>(c.batch_size), 4, 32);
  check("D", static_cast<double>(c.model.dim), 16, 96);
  check("K", static_cast<double>(c.model.top_k), 100, 1000);
  check("lambda", c.model.lambda, 0.3, 0.8);
  check("gamma", c.model.gamma, 0.0, 0.1);
  check("L", static_cast<double>(c.model.layers), 4, 8);
  return out;
}

std::vector<std::string> sweep_grid(std::string_view key) {
  if (key == "lr") return {"0.0001", "0.0005", "0.001", "0.005", "0.01"};
  if (key == "batch_size") return {"4", "8", "16", "32"};
  if (key == "D") return {"16", "32", "48", "64", "96"};
  if (key == "K") return {"100", "300", "500", "800", "1000"};
  if (key == "lambda") return {"0.3", "0.4", "0.5", "0.6", "0.7", "0.8"};
  if (key == "gamma") return {"0", "0.001", "0.01", "0.1"};
  if (key == "L") return {"4", "5", "6", "7", "8"};
  fail(ErrorKind::kUsage, "no sweep grid for '" + std::string(key) +
                              "' (expected lr, batch_size, D, K, lambda, gamma or L)");
}

// ---------------------------------------------------------------------------

std::size_t filtered_rank(std::span<const double> scores, EntityId answer, std::span<const std::uint8_t> filtered) {
  require(answer < scores.size() && filtered.size() == scores.size(), ErrorKind::kInternal,
          "filtered_rank: shape mismatch");
  require(!filtered[answer], ErrorKind::kInternal, "filtered_rank: the target was filtered out");
  const double s = scores[answer];
  require(!std::isnan(s), ErrorKind::kNumeric, "filtered_rank: target score is NaN");
  std::size_t greater = 0;
  std::size_t ties = 0;
  for (std::size_t t = 0; t < scores.size(); ++t) {
    if (t == answer || filtered[t]) continue;
    if (scores[t] > s) ++greater;
    else if (scores[t] == s) ++ties;
  }
  return 1 + greater + (ties + 1) / 2;
}

std::size_t filtered_rank(const TripleStore &store, const Query &q, std::span<const double> scores) {
  std::vector<std::uint8_t> filtered(scores.size(), 0);
  for (std::size_t t = 0; t < scores.size(); ++t)
    if (t != q.answer && store.is_known(q.entity, q.relation, static_cast<EntityId>(t))) filtered[t] = 1;
  return filtered_rank(scores, q.answer, filtered);
}

EvalReport report_from_ranks(std::vector<std::size_t> ranks) {
  EvalReport r;
  r.ranks = std::move(ranks);
  if (r.ranks.empty()) return r;
  for (std::size_t k : r.ranks) {
    r.mrr += 1.0 / static_cast<double>(k);
    r.hit1 += k <= 1 ? 1.0 : 0.0;
    r.hit10 += k <= 10 ? 1.0 : 0.0;
  }
  const double n = static_cast<double>(r.ranks.size());
  r.mrr /= n;
  r.hit1 /= n;
  r.hit10 /= n;
  return r;
}

std::vector<Query> make_queries(const TripleStore &store, std::span<const Triple> triples, bool reverse) {
  std::vector<Query> out;
  out.reserve(triples.size() * (reverse ? 2 : 1));
  const auto &scheme = store.scheme();
  for (const Triple &t : triples) {
    out.push_back({t.head, t.relation, t.tail});
    if (reverse) out.push_back({t.tail, scheme.reverse(t.relation), t.head});
  }
  return out;
}

EvalReport evaluate(const Model &model, const TripleStore &store, std::span<const Query> queries,
                    std::size_t threads) {
  require(!queries.empty(), ErrorKind::kData, "cannot evaluate an empty split");
  const auto start = std::chrono::steady_clock::now();
  const Graph &graph = store.graph(GraphView::kInference);
  RelationCache cache(graph, model.params(), model.options(), false);
  std::vector<std::size_t> ranks(queries.size(), 0);
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mu;
  auto worker = [&] {
    try {
      for (std::size_t i = next++; i < queries.size(); i = next++) {
        const QueryScores sc = model.score(cache, queries[i], Mode::kInfer, 0);
        ranks[i] = filtered_rank(store, queries[i], sc.hybrid);
      }
    } catch (...) {
      std::lock_guard lock(error_mu);
      if (!error) error = std::current_exception();
      next = queries.size();
    }
  };
  threads = std::max<std::size_t>(1, std::min(threads, queries.size()));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto &th : pool) th.join();
  }
  if (error) std::rethrow_exception(error);
  EvalReport r = report_from_ranks(std::move(ranks));
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

EvalReport evaluate(const Model &model, const TripleStore &store, Split split, const EvalOptions &options) {
  const auto queries = make_queries(store, store.split(split), options.reverse_queries);
  require(!queries.empty(), ErrorKind::kData, "cannot evaluate an empty split (" + std::string(split_name(split)) + ")");
  return evaluate(model, store, queries, options.threads);
}

std::string epoch_record_json(const EpochRecord &r) {
  char buf[256];
  std::snprintf(buf, sizeof buf,
                "{\"epoch\":%zu,\"train_loss\":%.10g,\"valid_mrr\":%.6f,\"valid_hit1\":%.6f,\"valid_hit10\":%.6f,"
                "\"seconds\":%.3f}",
                r.epoch, r.train_loss, r.valid_mrr, r.valid_hit1, r.valid_hit10, r.seconds);
  return buf;
}

Model make_model(const TrainConfig &config, const TripleStore &store) {
  require(store.augmented(), ErrorKind::kInternal, "store must be augmented before building a model");
  return Model(config.model, {store.n_entities(), store.n_relations_augmented()}, config.seed);
}

namespace {

// One shuffled pass over `queries`; returns the query-weighted mean loss.
double run_epoch(Model &model, AdamState &adam, const Graph &graph, std::vector<Query> &queries,
                 const TrainConfig &config, std::uint64_t epoch_seed, std::size_t epoch) {
  std::mt19937_64 rng(epoch_seed);
  portable_shuffle(queries, rng);
  double loss_sum = 0.0;
  std::size_t batch_index = 0;
  for (std::size_t b = 0; b < queries.size(); b += config.batch_size, ++batch_index) {
    const std::size_t n = std::min(config.batch_size, queries.size() - b);
    const std::span<const Query> batch(queries.data() + b, n);
    BatchStats stats;
    try {
      stats = model.forward_backward(graph, batch, Mode::kTrain, hash_combine(epoch_seed, batch_index), true);
    } catch (const Error &e) {
      if (e.kind() != ErrorKind::kNumeric) throw;
      fail(ErrorKind::kNumeric, "training diverged at epoch " + std::to_string(epoch) + ", batch " +
                                    std::to_string(batch_index + 1) + ": " + e.what());
    }
    loss_sum += stats.loss * static_cast<double>(n);
    adam.step(model.params(), model.grads());
  }
  return loss_sum / static_cast<double>(queries.size());
}

}  // namespace

TrainResult train(const TrainConfig &config, const TripleStore &store, const TrainHooks &hooks) {
  require(!store.split(Split::kTrain).empty(), ErrorKind::kData, "training split is empty");
  require(!store.split(Split::kValid).empty(), ErrorKind::kData, "validation split is empty");
  Model model = make_model(config, store);
  const Graph &graph = store.graph(GraphView::kTraining);
  std::vector<Query> queries = make_queries(store, store.split(Split::kTrain), config.reverse_queries);
  const auto valid = make_queries(store, store.split(Split::kValid), config.reverse_queries);

  if (config.pretrain_epochs > 0 && model.options().ablation != Ablation::kNoGsp) {
    // Fit the CP factors alone first; the other tensors get zero gradients
    // and Adam leaves them untouched.
    ModelOptions cp_only = model.options();
    cp_only.ablation = Ablation::kNoGsp;
    Model cp(cp_only, model.params(), config.seed);
    AdamState cp_adam(cp.params(), AdamHyper{config.lr});
    for (std::size_t epoch = 1; epoch <= config.pretrain_epochs; ++epoch)
      run_epoch(cp, cp_adam, graph, queries, config, hash_combine(config.seed, 0x7072650000000000ULL + epoch),
                epoch);
    model = Model(model.options(), cp.params(), config.seed);
  }

  AdamState adam(model.params(), AdamHyper{config.lr});
  TrainResult result{model, -1.0, 0, 0, {}};
  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    const double loss = run_epoch(model, adam, graph, queries, config, hash_combine(config.seed, epoch), epoch);
    const EvalReport vr = evaluate(model, store, valid, hooks.eval_threads);
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss;
    rec.valid_mrr = vr.mrr;
    rec.valid_hit1 = vr.hit1;
    rec.valid_hit10 = vr.hit10;
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    result.history.push_back(rec);
    result.epochs_run = epoch;
    if (vr.mrr > result.best_valid_mrr) {
      result.best_valid_mrr = vr.mrr;
      result.best_epoch = epoch;
      result.best = model;
    }
    if (hooks.on_epoch) hooks.on_epoch(rec);
  }
  if (result.best_valid_mrr < 0.0) result.best_valid_mrr = 0.0;
  return result;
}

std::vector<SweepRow> sweep(const TrainConfig &base, const TripleStore &store, std::string_view key,
                            std::span<const std::string> values, const TrainHooks &hooks,
                            const std::function<void(const SweepRow &)> &on_row) {
  require(!values.empty(), ErrorKind::kUsage, "sweep needs at least one value");
  std::vector<SweepRow> rows;
  for (const std::string &v : values) {
    TrainConfig c = base;
    set_config_value(c, key, v);
    TrainResult r = train(c, store, hooks);
    SweepRow row;
    row.value = v;
    row.valid_mrr = r.best_valid_mrr;
    row.best_epoch = r.best_epoch;
    if (!r.history.empty()) {
      const EpochRecord &best = r.history[r.best_epoch - 1];
      row.valid_hit1 = best.valid_hit1;
      row.valid_hit10 = best.valid_hit10;
    }
    if (!store.split(Split::kTest).empty())
      row.test_mrr =
          evaluate(r.best, store, Split::kTest, {c.reverse_queries, hooks.eval_threads}).mrr;
    rows.push_back(row);
    if (on_row) on_row(row);
  }
  return rows;
}

}  // namespace kgf
