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
// kgf command-line front end. Talks to the library only through kgf/kgf.h.
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "kgf/kgf.h"

namespace {

using nlohmann::json;

// Thrown with a status once the message has been printed.
struct Exit {
  int code;
};

void check(kgf_status st) {
  if (st == KGF_OK) return;
  std::fprintf(stderr, "kgf: %s\n", kgf_last_error());
  throw Exit{st == KGF_ERR_INTERNAL ? 2 : static_cast<int>(st)};
}

void usage_error(const std::string &msg) {
  std::fprintf(stderr, "kgf: %s\n", msg.c_str());
  throw Exit{1};
}

std::string take(char *s) {
  std::string out = s ? s : "";
  kgf_string_free(s);
  return out;
}

struct ConfigDeleter {
  void operator()(kgf_config *c) const { kgf_config_free(c); }
};
struct DatasetDeleter {
  void operator()(kgf_dataset *d) const { kgf_dataset_free(d); }
};
struct ModelDeleter {
  void operator()(kgf_model *m) const { kgf_model_free(m); }
};
using ConfigPtr = std::unique_ptr<kgf_config, ConfigDeleter>;
using DatasetPtr = std::unique_ptr<kgf_dataset, DatasetDeleter>;
using ModelPtr = std::unique_ptr<kgf_model, ModelDeleter>;

// --data falls back to $KGF_DATA_DIR; relative names that do not exist are
// looked up under it.
std::string resolve_data(const std::string &arg) {
  const char *root = std::getenv("KGF_DATA_DIR");
  if (arg.empty()) {
    if (!root || !*root) usage_error("no dataset given (use --data or set KGF_DATA_DIR)");
    return root;
  }
  if (std::filesystem::exists(arg) || !root || std::filesystem::path(arg).is_absolute()) return arg;
  const auto candidate = std::filesystem::path(root) / arg;
  return std::filesystem::exists(candidate) ? candidate.string() : arg;
}

struct ConfigArgs {
  std::string file;
  std::vector<std::string> sets;

  void attach(CLI::App *app) {
    app->add_option("-c,--config", file, "key=value configuration file");
    app->add_option("-s,--set", sets, "override a config key (key=value), repeatable");
  }

  ConfigPtr build(bool print_warnings = true) const {
    kgf_config *raw = nullptr;
    check(kgf_config_new(&raw));
    ConfigPtr cfg(raw);
    if (!file.empty()) check(kgf_config_load(cfg.get(), file.c_str()));
    for (const auto &kv : sets) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) usage_error("--set expects key=value, got '" + kv + "'");
      check(kgf_config_set(cfg.get(), kv.substr(0, eq).c_str(), kv.substr(eq + 1).c_str()));
    }
    if (print_warnings) {
      char *w = nullptr;
      check(kgf_config_warnings(cfg.get(), &w));
      const std::string text = take(w);
      if (!text.empty()) std::fprintf(stderr, "warning: %s", text.c_str());
    }
    return cfg;
  }
};

DatasetPtr load_dataset(const std::string &dir) {
  kgf_dataset *raw = nullptr;
  check(kgf_dataset_load(dir.c_str(), &raw));
  return DatasetPtr(raw);
}

ModelPtr load_model(const std::string &path) {
  kgf_model *raw = nullptr;
  check(kgf_model_load(path.c_str(), &raw));
  return ModelPtr(raw);
}

DatasetPtr load_dataset_for(const kgf_model *model, const std::string &dir) {
  kgf_dataset *raw = nullptr;
  check(kgf_dataset_load_for_model(model, dir.c_str(), &raw));
  return DatasetPtr(raw);
}

struct HistorySink {
  std::ofstream file;
  bool quiet = false;
};

void on_epoch(const char *line, void *user) {
  auto *sink = static_cast<HistorySink *>(user);
  if (sink->file.is_open()) sink->file << line << '\n' << std::flush;
  if (!sink->quiet) std::fprintf(stderr, "%s\n", line);
}

void print_report(const std::string &split, const std::string &text, bool as_json) {
  if (as_json) {
    std::printf("%s\n", text.c_str());
    return;
  }
  const json r = json::parse(text);
  std::printf("split %s  queries %zu\n", split.c_str(), r["queries"].get<std::size_t>());
  std::printf("MRR     %.4f\nHit@1   %.4f\nHit@10  %.4f\nseconds %.2f\n", r["mrr"].get<double>(),
              r["hit1"].get<double>(), r["hit10"].get<double>(), r["seconds"].get<double>());
}

}  // namespace

int main(int argc, char **argv) {
  CLI::App app{"kgf: knowledge-graph completion with CP embeddings and attentive subgraph propagation"};
  app.require_subcommand(1);
  std::size_t threads = 1;
  bool deterministic = false;
  app.add_option("--threads", threads, "worker threads for evaluation")->check(CLI::PositiveNumber);
  app.add_flag("--deterministic", deterministic, "single-threaded, reproducible execution");

  // train
  auto *train = app.add_subcommand("train", "train a model and save the best checkpoint");
  std::string data, out, history;
  bool quiet = false;
  ConfigArgs train_cfg;
  train->add_option("-d,--data", data, "dataset directory (default $KGF_DATA_DIR)");
  train->add_option("-o,--out", out, "checkpoint path")->required();
  train->add_option("--history", history, "write per-epoch JSON lines here");
  train->add_flag("-q,--quiet", quiet, "no per-epoch output on stderr");
  train_cfg.attach(train);

  // eval
  auto *eval = app.add_subcommand("eval", "filtered MRR / Hit@k of a checkpoint");
  std::string ckpt, split = "test";
  bool as_json = false, no_reverse = false;
  eval->add_option("-m,--model", ckpt, "checkpoint path");
  eval->add_option("-d,--data", data, "dataset directory (default $KGF_DATA_DIR)");
  eval->add_option("--split", split, "background, train, valid or test");
  eval->add_flag("--json", as_json, "print the full JSON report");
  eval->add_flag("--no-reverse", no_reverse, "only (head, relation, ?) queries");
  ConfigArgs eval_cfg;
  eval_cfg.attach(eval);

  // predict
  auto *predict = app.add_subcommand("predict", "rank tail entities for (head, relation, ?)");
  std::string head, relation, target;
  std::size_t top_n = 10;
  bool filter = false;
  predict->add_option("-m,--model", ckpt, "checkpoint path")->required();
  predict->add_option("-d,--data", data, "dataset directory (default $KGF_DATA_DIR)");
  predict->add_option("--head", head, "query entity label")->required();
  predict->add_option("--relation", relation, "query relation label (suffix _inv for reverse)")->required();
  predict->add_option("-n,--top-n", top_n, "rows to print")->check(CLI::PositiveNumber);
  predict->add_flag("--filter", filter, "leave out known facts");
  predict->add_flag("--json", as_json, "print JSON");

  // explain
  auto *explain = app.add_subcommand("explain", "attention paths from the query entity to a target");
  std::size_t beam = 3;
  std::string dot;
  explain->add_option("-m,--model", ckpt, "checkpoint path")->required();
  explain->add_option("-d,--data", data, "dataset directory (default $KGF_DATA_DIR)");
  explain->add_option("--head", head, "query entity label")->required();
  explain->add_option("--relation", relation, "query relation label")->required();
  explain->add_option("--target", target, "target entity label")->required();
  explain->add_option("--beam", beam, "number of paths")->check(CLI::PositiveNumber);
  explain->add_option("--dot", dot, "write the path graph in DOT format here");

  // gradcheck
  auto *gradcheck = app.add_subcommand("gradcheck", "finite-difference check of every parameter group");
  double tolerance = 1e-4;
  bool corrupt = false;
  gradcheck->add_option("--tolerance", tolerance, "max relative error per group");
  gradcheck->add_flag("--corrupt-selection", corrupt, "halve the W_samp adjoint (self-test of the checker)");
  ConfigArgs gc_cfg;
  gc_cfg.attach(gradcheck);

  // sweep
  auto *sweep = app.add_subcommand("sweep", "train once per value of one hyperparameter");
  std::string param, values, table;
  sweep->add_option("-d,--data", data, "dataset directory (default $KGF_DATA_DIR)");
  sweep->add_option("-p,--param", param, "lr, batch_size, D, K, lambda, gamma or L")->required();
  sweep->add_option("--values", values, "comma-separated values (default: the tuning grid)");
  sweep->add_option("--table", table, "also write the table here");
  sweep->add_option("--history", history, "write per-epoch JSON lines here");
  sweep->add_flag("-q,--quiet", quiet, "no per-epoch output on stderr");
  ConfigArgs sweep_cfg;
  sweep_cfg.attach(sweep);

  // gen-synth
  auto *gen = app.add_subcommand("gen-synth", "write a synthetic dataset");
  std::size_t n_entities = 50, n_relations = 4, n_facts = 500;
  std::uint64_t seed = 1;
  double background = 0.5, valid = 0.1, test = 0.1;
  gen->add_option("--entities", n_entities, "entity count");
  gen->add_option("--relations", n_relations, "relation count");
  gen->add_option("--facts", n_facts, "distinct facts");
  gen->add_option("--seed", seed, "random seed");
  gen->add_option("--background", background, "share of facts in background.txt");
  gen->add_option("--valid", valid, "share of facts in valid.txt");
  gen->add_option("--test", test, "share of facts in test.txt");
  gen->add_option("-o,--out", out, "output directory")->required();

  // kfold
  auto *kfold = app.add_subcommand("kfold", "split a triple file into k folds");
  std::string input;
  std::size_t k = 10;
  kfold->add_option("-i,--input", input, "triple file")->required();
  kfold->add_option("-k", k, "number of folds");
  kfold->add_option("--seed", seed, "random seed");
  kfold->add_option("-o,--out", out, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }
  if (deterministic) threads = 1;

  try {
    if (*train) {
      const ConfigPtr cfg = train_cfg.build();
      const DatasetPtr ds = load_dataset(resolve_data(data));
      HistorySink sink;
      sink.quiet = quiet;
      if (!history.empty()) {
        sink.file.open(history, std::ios::trunc);
        if (!sink.file) usage_error("cannot write " + history);
      }
      kgf_model *raw = nullptr;
      check(kgf_train(ds.get(), cfg.get(), threads, on_epoch, &sink, &raw));
      const ModelPtr model(raw);
      check(kgf_model_save(model.get(), out.c_str()));
      char *info = nullptr;
      check(kgf_model_info(model.get(), &info));
      const json j = json::parse(take(info));
      std::printf("best valid MRR %.4f at epoch %llu, saved %s\n", j["best_valid_mrr"].get<double>(),
                  static_cast<unsigned long long>(j["best_epoch"].get<std::uint64_t>()), out.c_str());
    } else if (*eval) {
      ModelPtr model;
      DatasetPtr ds;
      if (!ckpt.empty()) {
        model = load_model(ckpt);
        ds = load_dataset_for(model.get(), resolve_data(data));
      } else {
        // Untrained model from the configuration.
        const ConfigPtr cfg = eval_cfg.build();
        ds = load_dataset(resolve_data(data));
        kgf_model *raw = nullptr;
        check(kgf_model_init(ds.get(), cfg.get(), &raw));
        model.reset(raw);
      }
      char *report = nullptr;
      check(kgf_evaluate(model.get(), ds.get(), split.c_str(), no_reverse ? 0 : -1, threads, &report));
      print_report(split, take(report), as_json);
    } else if (*predict) {
      const ModelPtr model = load_model(ckpt);
      const DatasetPtr ds = load_dataset_for(model.get(), resolve_data(data));
      char *rows = nullptr;
      check(kgf_predict(model.get(), ds.get(), head.c_str(), relation.c_str(), top_n, filter ? 1 : 0, &rows));
      const std::string text = take(rows);
      if (as_json) {
        std::printf("%s\n", text.c_str());
      } else {
        std::printf("%-5s %-40s %s\n", "rank", "entity", "score");
        for (const auto &r : json::parse(text))
          std::printf("%-5zu %-40s %.6f\n", r["rank"].get<std::size_t>(), r["entity"].get<std::string>().c_str(),
                      r["score"].get<double>());
      }
    } else if (*explain) {
      const ModelPtr model = load_model(ckpt);
      const DatasetPtr ds = load_dataset_for(model.get(), resolve_data(data));
      char *text = nullptr, *graph = nullptr;
      check(kgf_explain(model.get(), ds.get(), head.c_str(), relation.c_str(), target.c_str(), beam, &text, &graph));
      std::printf("%s", take(text).c_str());
      const std::string g = take(graph);
      if (!dot.empty()) {
        std::ofstream f(dot);
        if (!f) usage_error("cannot write " + dot);
        f << g;
      }
    } else if (*gradcheck) {
      const ConfigPtr cfg = gc_cfg.build(false);
      char *report = nullptr;
      const kgf_status st = kgf_gradcheck(cfg.get(), tolerance, corrupt ? 1 : 0, &report);
      if (st != KGF_OK && st != KGF_ERR_NUMERIC) check(st);
      const json r = json::parse(take(report));
      for (const auto &g : r["groups"])
        std::printf("%-16s %-4s max rel. error %.3e (%s)\n", g["group"].get<std::string>().c_str(),
                    g["pass"].get<bool>() ? "PASS" : "FAIL", g["max_rel_error"].get<double>(),
                    g["worst_tensor"].get<std::string>().c_str());
      if (st != KGF_OK) check(st);
    } else if (*sweep) {
      const ConfigPtr cfg = sweep_cfg.build();
      const DatasetPtr ds = load_dataset(resolve_data(data));
      HistorySink sink;
      sink.quiet = quiet;
      if (!history.empty()) sink.file.open(history, std::ios::trunc);
      char *rows = nullptr;
      check(kgf_sweep(ds.get(), cfg.get(), param.c_str(), values.empty() ? nullptr : values.c_str(), threads,
                      on_epoch, &sink, &rows));
      std::string out_table = param + "\tvalid_mrr\tvalid_hit1\tvalid_hit10\ttest_mrr\tbest_epoch\n";
      for (const auto &r : json::parse(take(rows))) {
        char line[256];
        std::snprintf(line, sizeof line, "%s\t%.4f\t%.4f\t%.4f\t%.4f\t%zu\n", r["value"].get<std::string>().c_str(),
                      r["valid_mrr"].get<double>(), r["valid_hit1"].get<double>(), r["valid_hit10"].get<double>(),
                      r["test_mrr"].get<double>(), r["best_epoch"].get<std::size_t>());
        out_table += line;
      }
      std::printf("%s", out_table.c_str());
      if (!table.empty()) {
        std::ofstream f(table);
        if (!f) usage_error("cannot write " + table);
        f << out_table;
      }
    } else if (*gen) {
      check(kgf_generate_synthetic(n_entities, n_relations, n_facts, seed, background, valid, test, out.c_str()));
      std::printf("wrote %s\n", out.c_str());
    } else if (*kfold) {
      check(kgf_kfold(input.c_str(), k, seed, out.c_str()));
      std::printf("wrote %zu folds to %s\n", k, out.c_str());
    }
  } catch (const Exit &e) {
    return e.code;
  } catch (const std::exception &e) {
    std::fprintf(stderr, "kgf: %s\n", e.what());
    return 2;
  }
  return 0;
}
