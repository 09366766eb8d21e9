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
#ifndef KGF_EMBED_HPP_
#define KGF_EMBED_HPP_

#include <cstdint>

#include "linalg.hpp"

namespace kgf {

// CP factor matrices. `head` doubles as the initial hidden state of a node
// during propagation; `tail` only appears in the trilinear score.
struct CpEmbeddings {
  Matrix head;
  Matrix relation;
  Matrix tail;

  std::size_t dim() const { return head.cols; }
};

struct EmbeddingSizes {
  std::size_t n_entities = 0;
  std::size_t n_relations = 0;  // augmented count
};

// sum_d a[d] * b[d] * c[d]
double phi(ConstSpan head, ConstSpan relation, ConstSpan tail);

// out[v] = phi(head, relation, tails.row(v)) for every row.
void phi_all_tails(ConstSpan head, ConstSpan relation, const Matrix &tails, MutSpan out);
Vec phi_all_tails(ConstSpan head, ConstSpan relation, const Matrix &tails);

// sum |a|^3 + sum |b|^3 + sum |c|^3
double n3_penalty(ConstSpan a, ConstSpan b, ConstSpan c);
// d/dx of sum |x|^3, scaled by `scale`, added into `grad`.
void n3_grad_acc(ConstSpan x, double scale, MutSpan grad);

// Entries uniform in [-scale, scale], drawn head, relation, tail in row
// order from one mt19937_64 stream.
CpEmbeddings init_embeddings(const EmbeddingSizes &sizes, std::size_t dim, std::uint64_t seed, double scale = 0.1);

}  // namespace kgf

#endif  // KGF_EMBED_HPP_
