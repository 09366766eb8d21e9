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
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <new>
#include <string>

#include "checkpoint.hpp"
#include "explain.hpp"
#include "json.hpp"
#include "kgf/kgf.h"
#include "optim.hpp"
#include "store.hpp"
#include "train.hpp"

using nlohmann::json;

struct kgf_config {
  kgf::TrainConfig config;
};

struct kgf_dataset {
  kgf::TripleStore store;
};

struct kgf_model {
  kgf::Checkpoint ckpt;
  kgf::Model model;
};

namespace {

thread_local std::string g_last_error;

kgf_status to_status(kgf::ErrorKind kind) {
  switch (kind) {
    case kgf::ErrorKind::kUsage: return KGF_ERR_USAGE;
    case kgf::ErrorKind::kData: return KGF_ERR_DATA;
    case kgf::ErrorKind::kNumeric: return KGF_ERR_NUMERIC;
    case kgf::ErrorKind::kInternal: return KGF_ERR_INTERNAL;
  }
  return KGF_ERR_INTERNAL;
}

template <class Fn>
kgf_status guarded(Fn &&fn) {
  try {
    g_last_error.clear();
    fn();
    return KGF_OK;
  } catch (const kgf::Error &e) {
    g_last_error = e.what();
    return to_status(e.kind());
  } catch (const std::bad_alloc &) {
    g_last_error = "out of memory";
    return KGF_ERR_INTERNAL;
  } catch (const std::exception &e) {
    g_last_error = e.what();
    return KGF_ERR_INTERNAL;
  }
}

void need(const void *p, const char *what) {
  kgf::require(p != nullptr, kgf::ErrorKind::kUsage, std::string(what) + " must not be NULL");
}

char *dup_string(const std::string &s) {
  char *out = static_cast<char *>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void put(char **out, const std::string &s) {
  if (out) *out = dup_string(s);
}

std::string nearest_labels(const std::vector<std::string> &labels, const std::string &query) {
  // Labels sharing the longest prefix with the query.
  std::size_t best = 0;
  std::vector<std::string> hits;
  for (const auto &l : labels) {
    std::size_t k = 0;
    while (k < l.size() && k < query.size() && l[k] == query[k]) ++k;
    if (k > best) {
      best = k;
      hits.clear();
    }
    if (k == best && k > 0) hits.push_back(l);
  }
  if (hits.empty()) return "";
  std::sort(hits.begin(), hits.end());
  if (hits.size() > 8) hits.resize(8);
  std::string out = " (nearest: ";
  for (std::size_t i = 0; i < hits.size(); ++i) out += (i ? ", " : "") + hits[i];
  return out + ")";
}

kgf::EntityId find_entity(const kgf::TripleStore &store, const char *label) {
  need(label, "entity label");
  const auto id = store.entities().find(label);
  kgf::require(id.has_value(), kgf::ErrorKind::kUsage,
               std::string("unknown entity '") + label + "'" + nearest_labels(store.entities().labels(), label));
  return *id;
}

kgf::RelationId find_relation(const kgf::TripleStore &store, const char *label) {
  need(label, "relation label");
  const std::string s(label);
  if (auto id = store.relations().find(s)) return *id;
  const std::string suffix = "_inv";
  if (s.size() > suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0)
    if (auto id = store.relations().find(s.substr(0, s.size() - suffix.size())))
      return store.scheme().reverse(*id);
  if (s == "identity") return store.scheme().identity();
  fail(kgf::ErrorKind::kUsage, "unknown relation '" + s + "'" + nearest_labels(store.relations().labels(), s));
}

void check_compatible(const kgf_model *m, const kgf_dataset *d) {
  kgf::require(d->store.entities().labels() == m->ckpt.entities &&
                   d->store.relations().labels() == m->ckpt.relations,
               kgf::ErrorKind::kData,
               "dataset vocabularies do not match the model; load it with kgf_dataset_load_for_model");
}

json report_json(const kgf::EvalReport &r) {
  return {{"mrr", r.mrr}, {"hit1", r.hit1}, {"hit10", r.hit10}, {"queries", r.ranks.size()},
          {"ranks", r.ranks}, {"seconds", r.seconds}};
}

}  // namespace

extern "C" {

const char *kgf_version(void) { return "1.0.0"; }

const char *kgf_last_error(void) { return g_last_error.c_str(); }

void kgf_string_free(char *s) { std::free(s); }

kgf_status kgf_config_new(kgf_config **out) {
  return guarded([&] {
    need(out, "out");
    *out = new kgf_config();
  });
}

void kgf_config_free(kgf_config *config) { delete config; }

kgf_status kgf_config_set(kgf_config *config, const char *key, const char *value) {
  return guarded([&] {
    need(config, "config");
    need(key, "key");
    need(value, "value");
    kgf::set_config_value(config->config, key, value);
  });
}

kgf_status kgf_config_load(kgf_config *config, const char *path) {
  return guarded([&] {
    need(config, "config");
    need(path, "path");
    kgf::apply_config_file(config->config, path);
  });
}

kgf_status kgf_config_text(const kgf_config *config, char **out) {
  return guarded([&] {
    need(config, "config");
    put(out, kgf::config_to_text(config->config));
  });
}

kgf_status kgf_config_warnings(const kgf_config *config, char **out) {
  return guarded([&] {
    need(config, "config");
    std::string text;
    for (const auto &w : kgf::config_warnings(config->config)) text += w + "\n";
    put(out, text);
  });
}

kgf_status kgf_dataset_load(const char *dir, kgf_dataset **out) {
  return guarded([&] {
    need(dir, "dir");
    need(out, "out");
    *out = new kgf_dataset{kgf::load_dataset(dir)};
  });
}

kgf_status kgf_dataset_load_for_model(const kgf_model *model, const char *dir, kgf_dataset **out) {
  return guarded([&] {
    need(model, "model");
    need(dir, "dir");
    need(out, "out");
    *out = new kgf_dataset{kgf::load_dataset_for(model->ckpt, dir)};
  });
}

void kgf_dataset_free(kgf_dataset *dataset) { delete dataset; }

kgf_status kgf_dataset_summary(const kgf_dataset *dataset, char **json_out) {
  return guarded([&] {
    need(dataset, "dataset");
    const auto &s = dataset->store;
    json j = {{"entities", s.n_entities()},
              {"relations", s.n_relations()},
              {"relations_augmented", s.n_relations_augmented()}};
    for (kgf::Split sp : kgf::kAllSplits) j[std::string(kgf::split_name(sp))] = s.split(sp).size();
    put(json_out, j.dump());
  });
}

kgf_status kgf_model_init(const kgf_dataset *dataset, const kgf_config *config, kgf_model **out) {
  return guarded([&] {
    need(dataset, "dataset");
    need(config, "config");
    need(out, "out");
    kgf::Model model = kgf::make_model(config->config, dataset->store);
    auto ckpt = kgf::make_checkpoint(config->config, dataset->store, model, 0, 0.0, 0);
    *out = new kgf_model{std::move(ckpt), std::move(model)};
  });
}

kgf_status kgf_train(const kgf_dataset *dataset, const kgf_config *config, size_t eval_threads,
                     kgf_epoch_callback on_epoch, void *user, kgf_model **out) {
  return guarded([&] {
    need(dataset, "dataset");
    need(config, "config");
    need(out, "out");
    kgf::TrainHooks hooks;
    hooks.eval_threads = std::max<size_t>(1, eval_threads);
    if (on_epoch)
      hooks.on_epoch = [&](const kgf::EpochRecord &r) { on_epoch(kgf::epoch_record_json(r).c_str(), user); };
    kgf::TrainResult r = kgf::train(config->config, dataset->store, hooks);
    auto ckpt = kgf::make_checkpoint(config->config, dataset->store, r.best, r.epochs_run, r.best_valid_mrr,
                                     r.best_epoch);
    *out = new kgf_model{std::move(ckpt), std::move(r.best)};
  });
}

void kgf_model_free(kgf_model *model) { delete model; }

kgf_status kgf_model_save(const kgf_model *model, const char *path) {
  return guarded([&] {
    need(model, "model");
    need(path, "path");
    kgf::save_checkpoint(model->ckpt, path);
  });
}

kgf_status kgf_model_load(const char *path, kgf_model **out) {
  return guarded([&] {
    need(path, "path");
    need(out, "out");
    kgf::Checkpoint ckpt = kgf::load_checkpoint(path);
    kgf::Model model = kgf::model_from_checkpoint(ckpt);
    *out = new kgf_model{std::move(ckpt), std::move(model)};
  });
}

kgf_status kgf_model_info(const kgf_model *model, char **json_out) {
  return guarded([&] {
    need(model, "model");
    json cfg = json::object();
    for (const auto &[k, v] : kgf::config_items(model->ckpt.config)) cfg[k] = v;
    json j = {{"version", model->ckpt.version},
              {"config", cfg},
              {"entities", model->ckpt.entities.size()},
              {"relations", model->ckpt.relations.size()},
              {"parameters", kgf::parameter_count(model->model.params())},
              {"epochs_completed", model->ckpt.epochs_completed},
              {"best_valid_mrr", model->ckpt.best_valid_mrr},
              {"best_epoch", model->ckpt.best_epoch}};
    put(json_out, j.dump());
  });
}

kgf_status kgf_evaluate(const kgf_model *model, const kgf_dataset *dataset, const char *split, int reverse_queries,
                        size_t threads, char **json_out) {
  return guarded([&] {
    need(model, "model");
    need(dataset, "dataset");
    need(split, "split");
    check_compatible(model, dataset);
    const auto sp = kgf::parse_split(split);
    kgf::require(sp.has_value(), kgf::ErrorKind::kUsage,
                 std::string("unknown split '") + split + "' (expected background, train, valid or test)");
    kgf::EvalOptions opts;
    opts.reverse_queries = reverse_queries < 0 ? model->ckpt.config.reverse_queries : reverse_queries != 0;
    opts.threads = std::max<size_t>(1, threads);
    put(json_out, report_json(kgf::evaluate(model->model, dataset->store, *sp, opts)).dump());
  });
}

kgf_status kgf_predict(const kgf_model *model, const kgf_dataset *dataset, const char *head, const char *relation,
                       size_t top_n, int filter, char **json_out) {
  return guarded([&] {
    need(model, "model");
    need(dataset, "dataset");
    check_compatible(model, dataset);
    const auto &store = dataset->store;
    const kgf::EntityId h = find_entity(store, head);
    const kgf::RelationId r = find_relation(store, relation);
    kgf::RelationCache cache(store.graph(kgf::GraphView::kInference), model->model.params(),
                             model->model.options(), false);
    const auto sc = model->model.score(cache, {h, r, 0}, kgf::Mode::kInfer, 0);
    std::vector<kgf::EntityId> order;
    for (kgf::EntityId t = 0; t < sc.hybrid.size(); ++t)
      if (!filter || !store.is_known(h, r, t)) order.push_back(t);
    std::stable_sort(order.begin(), order.end(),
                     [&](kgf::EntityId a, kgf::EntityId b) { return sc.hybrid[a] > sc.hybrid[b]; });
    if (order.size() > top_n) order.resize(top_n);
    json rows = json::array();
    for (std::size_t i = 0; i < order.size(); ++i)
      rows.push_back({{"rank", i + 1}, {"entity", store.entities().label(order[i])}, {"score", sc.hybrid[order[i]]}});
    put(json_out, rows.dump());
  });
}

kgf_status kgf_explain(const kgf_model *model, const kgf_dataset *dataset, const char *head, const char *relation,
                       const char *target, size_t beam, char **text_out, char **dot_out) {
  return guarded([&] {
    need(model, "model");
    need(dataset, "dataset");
    check_compatible(model, dataset);
    const auto &store = dataset->store;
    const kgf::EntityId h = find_entity(store, head);
    const kgf::RelationId r = find_relation(store, relation);
    const kgf::EntityId t = find_entity(store, target);
    kgf::RelationCache cache(store.graph(kgf::GraphView::kInference), model->model.params(),
                             model->model.options(), false);
    kgf::PropagationTrace trace;
    const auto sc = model->model.score(cache, {h, r, t}, kgf::Mode::kInfer, 0, &trace);
    kgf::Explanation ex = kgf::explain_paths(trace, t, beam);
    ex.terminal_score = sc.hybrid[t];
    put(text_out, kgf::explanation_table(ex, store));
    put(dot_out, kgf::explanation_dot(ex, store));
  });
}

kgf_status kgf_gradcheck(const kgf_config *config, double tolerance, int corrupt_selection, char **json_out) {
  kgf::GradCheckReport report;
  const kgf_status st = guarded([&] {
    kgf::GradCheckConfig gc;
    if (config) {
      const auto &m = config->config.model;
      gc.options.ablation = m.ablation;
      gc.options.normalizer = m.normalizer;
      gc.options.lambda = m.lambda;
      gc.options.temperature = m.temperature;
      gc.options.separate_query_cell = m.separate_query_cell;
      gc.seed = config->config.seed;
    }
    gc.tolerance = tolerance;
    gc.corrupt_selection_adjoint = corrupt_selection != 0;
    report = kgf::grad_check(gc);
    json groups = json::array();
    for (const auto &g : report.groups)
      groups.push_back({{"group", g.family},
                        {"max_rel_error", g.max_rel_error},
                        {"worst_tensor", g.worst_tensor},
                        {"entries", g.entries},
                        {"pass", g.pass}});
    put(json_out, json{{"pass", report.pass}, {"tolerance", tolerance}, {"groups", groups}}.dump());
  });
  if (st != KGF_OK) return st;
  if (!report.pass) {
    g_last_error = "gradient check failed for " + report.failures();
    return KGF_ERR_NUMERIC;
  }
  return KGF_OK;
}

kgf_status kgf_sweep(const kgf_dataset *dataset, const kgf_config *config, const char *key, const char *values,
                     size_t eval_threads, kgf_epoch_callback on_epoch, void *user, char **json_out) {
  return guarded([&] {
    need(dataset, "dataset");
    need(config, "config");
    need(key, "key");
    std::vector<std::string> grid;
    if (values) {
      std::string s(values), item;
      for (std::size_t i = 0; i <= s.size(); ++i) {
        if (i == s.size() || s[i] == ',') {
          if (!item.empty()) grid.push_back(item);
          item.clear();
        } else if (s[i] != ' ') {
          item += s[i];
        }
      }
    } else {
      grid = kgf::sweep_grid(key);
    }
    kgf::TrainHooks hooks;
    hooks.eval_threads = std::max<size_t>(1, eval_threads);
    if (on_epoch)
      hooks.on_epoch = [&](const kgf::EpochRecord &r) { on_epoch(kgf::epoch_record_json(r).c_str(), user); };
    const auto rows = kgf::sweep(config->config, dataset->store, key, grid, hooks);
    json out = json::array();
    for (const auto &r : rows)
      out.push_back({{"value", r.value},
                     {"valid_mrr", r.valid_mrr},
                     {"valid_hit1", r.valid_hit1},
                     {"valid_hit10", r.valid_hit10},
                     {"test_mrr", r.test_mrr},
                     {"best_epoch", r.best_epoch}});
    put(json_out, out.dump());
  });
}

kgf_status kgf_generate_synthetic(size_t n_entities, size_t n_relations, size_t n_facts, uint64_t seed,
                                  double background, double valid, double test, const char *out_dir) {
  return guarded([&] {
    need(out_dir, "out_dir");
    kgf::TripleStore store =
        kgf::generate_synthetic(n_entities, n_relations, n_facts, seed, {background, valid, test});
    kgf::write_dataset(store, out_dir);
  });
}

kgf_status kgf_kfold(const char *input_path, size_t k, uint64_t seed, const char *out_dir) {
  return guarded([&] {
    need(input_path, "input_path");
    need(out_dir, "out_dir");
    kgf::TripleStore store;
    store.load_triples(input_path, kgf::Split::kTrain);
    const auto folds = kgf::kfold_split(store.split(kgf::Split::kTrain), k, seed);
    std::filesystem::create_directories(out_dir);
    for (std::size_t i = 0; i < folds.size(); ++i) {
      const auto path = std::filesystem::path(out_dir) / ("fold_" + std::to_string(i + 1) + ".txt");
      std::ofstream out(path);
      kgf::require(out.good(), kgf::ErrorKind::kData, "cannot write " + path.string());
      for (const auto &t : folds[i])
        out << store.entities().label(t.head) << '\t' << store.relations().label(t.relation) << '\t'
            << store.entities().label(t.tail) << '\n';
    }
  });
}

}  // extern "C"
