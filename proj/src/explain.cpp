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
#include "explain.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <set>
#include <tuple>

namespace kgf {

namespace {

using EdgeKey = std::tuple<EntityId, RelationId, EntityId>;

bool better(const ExplanationPath &a, const ExplanationPath &b) {
  if (a.weight != b.weight) return a.weight > b.weight;
  auto key = [](const ExplanationPath &p) {
    std::vector<EdgeKey> k;
    for (const auto &e : p.edges) k.emplace_back(e.head, e.relation, e.tail);
    return k;
  };
  return key(a) < key(b);
}

std::string fmt(double v, const char *spec = "%.6f") {
  char buf[32];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

std::string quote(const std::string &s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  return out + "\"";
}

}  // namespace

Explanation explain_paths(const PropagationTrace &trace, EntityId target, std::size_t beam) {
  require(beam >= 1, ErrorKind::kUsage, "beam width must be at least 1");
  Explanation ex;
  const std::size_t n_layers = trace.layers.size();
  if (n_layers == 0) {
    ex.message = "not reached within 0 layers (propagation disabled)";
    return ex;
  }
  const auto &last = trace.layers.back().candidates;
  if (!std::binary_search(last.begin(), last.end(), target)) {
    ex.message = "not reached within " + std::to_string(n_layers) + " layers";
    return ex;
  }

  // Best `beam` partial paths ending at each node, layer by layer. A path
  // may only continue from a node the next layer kept in its frontier.
  std::map<EntityId, std::vector<ExplanationPath>> at;
  at[trace.query.entity].push_back({});
  for (std::size_t l = 1; l <= n_layers; ++l) {
    const PropagationLayer &layer = trace.layers[l - 1];
    std::map<EntityId, std::vector<ExplanationPath>> next;
    for (std::size_t ei = 0; ei < layer.edges.size(); ++ei) {
      const TraceEdge &e = layer.edges[ei];
      const EntityId head = layer.frontier[e.head_index];
      auto it = at.find(head);
      if (it == at.end()) continue;
      for (const ExplanationPath &p : it->second) {
        ExplanationPath q = p;
        q.edges.push_back({head, e.relation, e.tail, l, layer.alpha[ei]});
        q.weight *= layer.alpha[ei];
        next[e.tail].push_back(std::move(q));
      }
    }
    for (auto &[node, paths] : next) {
      std::sort(paths.begin(), paths.end(), better);
      if (paths.size() > beam) paths.resize(beam);
    }
    if (l < n_layers) {
      const auto &keep = trace.layers[l].frontier;
      for (auto it = next.begin(); it != next.end();) {
        if (std::binary_search(keep.begin(), keep.end(), it->first)) ++it;
        else it = next.erase(it);
      }
    }
    at = std::move(next);
  }
  ex.reached = true;
  ex.paths = at[target];
  return ex;
}

std::string explanation_table(const Explanation &ex, const TripleStore &store) {
  if (!ex.reached) return ex.message + "\n";
  std::string out;
  for (std::size_t i = 0; i < ex.paths.size(); ++i) {
    const auto &p = ex.paths[i];
    out += "path " + std::to_string(i + 1) + "  weight " + fmt(p.weight, "%.6g") + "\n";
    out += "  layer  head\trelation\ttail\talpha\n";
    for (const auto &e : p.edges)
      out += "  " + std::to_string(e.layer) + "      " + store.entities().label(e.head) + "\t" +
             store.relation_label(e.relation) + "\t" + store.entities().label(e.tail) + "\t" + fmt(e.alpha) + "\n";
  }
  out += "terminal score " + fmt(ex.terminal_score, "%.6g") + "\n";
  return out;
}

std::string explanation_dot(const Explanation &ex, const TripleStore &store) {
  std::string out = "digraph explanation {\n  rankdir=LR;\n";
  std::set<EntityId> nodes;
  std::map<std::tuple<std::size_t, EntityId, RelationId, EntityId>, double> edges;
  for (const auto &p : ex.paths)
    for (const auto &e : p.edges) {
      nodes.insert(e.head);
      nodes.insert(e.tail);
      edges[{e.layer, e.head, e.relation, e.tail}] = e.alpha;
    }
  for (EntityId n : nodes)
    out += "  n" + std::to_string(n) + " [label=" + quote(store.entities().label(n)) + "];\n";
  for (const auto &[k, alpha] : edges) {
    const auto &[layer, h, r, t] = k;
    out += "  n" + std::to_string(h) + " -> n" + std::to_string(t) + " [label=" +
           quote(store.relation_label(r) + " (l" + std::to_string(layer) + ", " + fmt(alpha, "%.3f") + ")") +
           ", weight=" + fmt(alpha, "%.6f") + ", penwidth=" + fmt(0.5 + 4.0 * alpha, "%.3f") + "];\n";
  }
  out += "}\n";
  return out;
}

}  // namespace kgf
