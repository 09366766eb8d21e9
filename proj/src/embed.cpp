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
#include "embed.hpp"

#include <cmath>
#include <random>
#include <string>

#include "common.hpp"

namespace kgf {

double phi(ConstSpan head, ConstSpan relation, ConstSpan tail) {
  require(head.size() == relation.size() && relation.size() == tail.size(), ErrorKind::kUsage,
          "phi: dimension mismatch (" + std::to_string(head.size()) + ", " + std::to_string(relation.size()) + ", " +
              std::to_string(tail.size()) + ")");
  double s = 0.0;
  for (std::size_t d = 0; d < head.size(); ++d) s += head[d] * relation[d] * tail[d];
  return s;
}

void phi_all_tails(ConstSpan head, ConstSpan relation, const Matrix &tails, MutSpan out) {
  require(head.size() == relation.size() && head.size() == tails.cols, ErrorKind::kUsage,
          "phi_all_tails: dimension mismatch");
  require(out.size() == tails.rows, ErrorKind::kUsage, "phi_all_tails: output length mismatch");
  Vec hr(head.size());
  for (std::size_t d = 0; d < head.size(); ++d) hr[d] = head[d] * relation[d];
  for (std::size_t v = 0; v < tails.rows; ++v) out[v] = dot(hr, tails.row(v));
}

Vec phi_all_tails(ConstSpan head, ConstSpan relation, const Matrix &tails) {
  Vec out(tails.rows);
  phi_all_tails(head, relation, tails, out);
  return out;
}

double n3_penalty(ConstSpan a, ConstSpan b, ConstSpan c) {
  double s = 0.0;
  for (ConstSpan x : {a, b, c})
    for (double v : x) s += std::abs(v) * v * v;
  return s;
}

void n3_grad_acc(ConstSpan x, double scale, MutSpan grad) {
  for (std::size_t i = 0; i < x.size(); ++i) grad[i] += scale * 3.0 * x[i] * std::abs(x[i]);
}

CpEmbeddings init_embeddings(const EmbeddingSizes &sizes, std::size_t dim, std::uint64_t seed, double scale) {
  require(dim >= 1, ErrorKind::kUsage, "embedding dimension must be >= 1");
  require(scale >= 0.0, ErrorKind::kUsage, "init scale must be non-negative");
  std::mt19937_64 rng(seed);
  CpEmbeddings e{Matrix(sizes.n_entities, dim), Matrix(sizes.n_relations, dim), Matrix(sizes.n_entities, dim)};
  fill_uniform(e.head, rng, scale);
  fill_uniform(e.relation, rng, scale);
  fill_uniform(e.tail, rng, scale);
  return e;
}

}  // namespace kgf
