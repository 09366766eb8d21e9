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
#ifndef KGF_TESTS_ORACLES_HPP_
#define KGF_TESTS_ORACLES_HPP_

#include <algorithm>
#include <set>
#include <utility>
#include <vector>

#include "store.hpp"

namespace kgf::testing {

// Rank by sorting. Candidates in `removed` (other than the answer) are
// dropped, the rest sorted by descending score; a tie block occupying
// positions [first, last] gives every member the rounded-up mean position.
inline std::size_t sorted_rank(const std::vector<double> &scores, std::size_t answer,
                               const std::set<std::size_t> &removed) {
  std::vector<std::pair<double, std::size_t>> kept;
  for (std::size_t t = 0; t < scores.size(); ++t)
    if (t == answer || !removed.count(t)) kept.push_back({scores[t], t});
  std::stable_sort(kept.begin(), kept.end(), [](auto &a, auto &b) { return a.first > b.first; });
  std::size_t first = 0;
  while (kept[first].first != scores[answer]) ++first;
  std::size_t last = first;
  while (last + 1 < kept.size() && kept[last + 1].first == scores[answer]) ++last;
  const std::size_t sum = (first + 1) + (last + 1);
  return (sum + 1) / 2;
}

// Entities at hop 1..depth from `start`, one set per hop.
inline std::vector<std::set<EntityId>> bfs_layers(const Graph &g, EntityId start, std::size_t depth) {
  std::vector<std::set<EntityId>> out;
  std::set<EntityId> cur{start};
  for (std::size_t l = 0; l < depth; ++l) {
    std::set<EntityId> next;
    for (EntityId h : cur)
      for (const Edge &e : g.out_edges(h)) next.insert(e.tail);
    out.push_back(next);
    cur = next;
  }
  return out;
}

}  // namespace kgf::testing

#endif  // KGF_TESTS_ORACLES_HPP_
