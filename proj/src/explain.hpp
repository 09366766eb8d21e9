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
#ifndef KGF_EXPLAIN_HPP_
#define KGF_EXPLAIN_HPP_

#include <string>
#include <vector>

#include "propagate.hpp"
#include "store.hpp"

namespace kgf {

struct PathEdge {
  EntityId head = 0;
  RelationId relation = 0;
  EntityId tail = 0;
  std::size_t layer = 0;  // 1-based
  double alpha = 0.0;
};

struct ExplanationPath {
  std::vector<PathEdge> edges;
  double weight = 1.0;  // product of the alphas
};

struct Explanation {
  bool reached = false;
  std::string message;
  std::vector<ExplanationPath> paths;  // best first
  double terminal_score = 0.0;
};

// Up to `beam` paths q_e -> target of exactly L edges through the recorded
// frontiers, ranked by the product of attention weights. Ties are broken
// by the lexicographic edge sequence.
Explanation explain_paths(const PropagationTrace &trace, EntityId target, std::size_t beam);

std::string explanation_table(const Explanation &ex, const TripleStore &store);
std::string explanation_dot(const Explanation &ex, const TripleStore &store);

}  // namespace kgf

#endif  // KGF_EXPLAIN_HPP_
