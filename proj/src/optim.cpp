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
#include "optim.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "store.hpp"

namespace kgf {

AdamState::AdamState(const ModelParams &shape, const AdamHyper &hyper) : hyper_(hyper) {
  for_each_tensor(shape, [&](const std::string &, const std::string &, const Matrix &m) {
    m_.emplace_back(m.size(), 0.0);
    v_.emplace_back(m.size(), 0.0);
  });
}

void AdamState::step(ModelParams &values, const ModelParams &grads) {
  ++t_;
  const double c1 = 1.0 - std::pow(hyper_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(hyper_.beta2, static_cast<double>(t_));
  std::vector<const Matrix *> g;
  for_each_tensor(grads, [&](const std::string &, const std::string &, const Matrix &m) { g.push_back(&m); });
  std::size_t k = 0;
  for_each_tensor(values, [&](const std::string &name, const std::string &, Matrix &w) {
    require(k < g.size() && g[k]->same_shape(w) && m_[k].size() == w.size(), ErrorKind::kInternal,
            "optimizer state does not match parameter " + name);
    Vec &m = m_[k];
    Vec &v = v_[k];
    const std::vector<double> &gd = g[k]->data;
    for (std::size_t i = 0; i < w.data.size(); ++i) {
      m[i] = hyper_.beta1 * m[i] + (1.0 - hyper_.beta1) * gd[i];
      v[i] = hyper_.beta2 * v[i] + (1.0 - hyper_.beta2) * gd[i] * gd[i];
      w.data[i] -= hyper_.lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + hyper_.eps);
    }
    ++k;
  });
}

double ScalarAdam::step(double theta, double grad) {
  ++t;
  m = hyper.beta1 * m + (1.0 - hyper.beta1) * grad;
  v = hyper.beta2 * v + (1.0 - hyper.beta2) * grad * grad;
  const double mh = m / (1.0 - std::pow(hyper.beta1, static_cast<double>(t)));
  const double vh = v / (1.0 - std::pow(hyper.beta2, static_cast<double>(t)));
  return theta - hyper.lr * mh / (std::sqrt(vh) + hyper.eps);
}

std::string GradCheckReport::failures() const {
  std::string out;
  for (const auto &g : groups) {
    if (g.pass) continue;
    if (!out.empty()) out += ", ";
    out += g.family;
  }
  return out;
}

GradCheckReport grad_check(Model &model, const Graph &graph, std::span<const Query> queries, Mode mode,
                           std::uint64_t noise_seed, double step, double tolerance, bool corrupt_selection_adjoint) {
  std::vector<SelectionProbe> probes;
  model.forward_backward(graph, queries, mode, noise_seed, false, false, &probes);
  model.forward_backward(graph, queries, mode, noise_seed, true, corrupt_selection_adjoint, &probes);
  const ModelParams analytic = model.grads();

  std::vector<std::string> order;
  std::map<std::string, GroupReport> groups;
  std::vector<std::pair<std::string, const Matrix *>> grads;
  for_each_tensor(analytic, [&](const std::string &name, const std::string &, const Matrix &m) {
    grads.emplace_back(name, &m);
  });
  std::size_t k = 0;
  for_each_tensor(model.params(), [&](const std::string &name, const std::string &family, Matrix &w) {
    const Matrix &g = *grads[k++].second;
    if (!groups.count(family)) {
      order.push_back(family);
      groups[family].family = family;
    }
    GroupReport &rep = groups[family];
    for (std::size_t i = 0; i < w.data.size(); ++i) {
      const double saved = w.data[i];
      w.data[i] = saved + step;
      const double up = model.forward_backward(graph, queries, mode, noise_seed, false, false, &probes).loss;
      w.data[i] = saved - step;
      const double down = model.forward_backward(graph, queries, mode, noise_seed, false, false, &probes).loss;
      w.data[i] = saved;
      const double numeric = (up - down) / (2.0 * step);
      const double a = g.data[i];
      const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-6});
      ++rep.entries;
      if (rel > rep.max_rel_error || rep.worst_tensor.empty()) {
        rep.max_rel_error = std::max(rel, rep.max_rel_error);
        rep.worst_tensor = name;
      }
    }
  });

  GradCheckReport report;
  for (const auto &family : order) {
    GroupReport rep = groups[family];
    rep.pass = !(rep.max_rel_error > tolerance);
    report.pass = report.pass && rep.pass;
    report.groups.push_back(rep);
  }
  return report;
}

GradCheckReport grad_check(const GradCheckConfig &config) {
  TripleStore store = generate_synthetic(config.n_entities, config.n_relations, config.n_facts, config.seed);
  store.augment();
  const Graph &graph = store.graph(GraphView::kTraining);
  const EmbeddingSizes sizes{store.n_entities(), store.n_relations_augmented()};
  Model model(config.options, sizes, config.seed);
  // Larger than default init so every path carries a visible gradient.
  for_each_tensor(model.params(), [&](const std::string &, const std::string &family, Matrix &m) {
    if (family == "CpEmbeddings")
      for (double &x : m.data) x *= 5.0;
  });
  std::vector<Query> queries;
  const auto &train = store.split(Split::kTrain);
  for (std::size_t i = 0; i < std::min<std::size_t>(train.size(), 6); ++i)
    queries.push_back({train[i].head, train[i].relation, train[i].tail});
  return grad_check(model, graph, queries, config.mode, hash_combine(config.seed, 0x6763), config.step,
                    config.tolerance, config.corrupt_selection_adjoint);
}

}  // namespace kgf
