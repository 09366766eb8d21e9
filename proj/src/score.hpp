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
#ifndef KGF_SCORE_HPP_
#define KGF_SCORE_HPP_

#include <span>

#include "common.hpp"
#include "embed.hpp"
#include "linalg.hpp"

namespace kgf {

// f = w . h; callers pass the zero vector for entities never reached.
double structural_score(ConstSpan hidden, ConstSpan readout);

// sum_d E_h[q_e][d] * e_qr[d] * E_t[q_a][d]
double semantic_score(EntityId query_entity, ConstSpan query_relation, EntityId answer, const CpEmbeddings &emb);

// lambda * f + (1 - lambda) * phi, lambda in [0, 1].
double hybrid_score(double f, double phi, double lambda);

// -target + logsumexp(scores), shifted by the max.
double log_loss(double target, std::span<const double> scores);
double logsumexp(std::span<const double> scores);

// mean(log_losses) + gamma * mean(regs)
double total_loss(std::span<const double> log_losses, std::span<const double> regs, double gamma);

}  // namespace kgf

#endif  // KGF_SCORE_HPP_
