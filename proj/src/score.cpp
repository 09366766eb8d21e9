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
#include "score.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace kgf {

double structural_score(ConstSpan hidden, ConstSpan readout) {
  require(hidden.size() == readout.size(), ErrorKind::kUsage, "structural_score: dimension mismatch");
  return dot(hidden, readout);
}

double semantic_score(EntityId query_entity, ConstSpan query_relation, EntityId answer, const CpEmbeddings &emb) {
  require(query_entity < emb.head.rows, ErrorKind::kUsage,
          "semantic_score: entity id " + std::to_string(query_entity) + " out of range");
  require(answer < emb.tail.rows, ErrorKind::kUsage,
          "semantic_score: entity id " + std::to_string(answer) + " out of range");
  return phi(emb.head.row(query_entity), query_relation, emb.tail.row(answer));
}

double hybrid_score(double f, double phi, double lambda) {
  require(lambda >= 0.0 && lambda <= 1.0, ErrorKind::kUsage, "fusion weight must lie in [0, 1]");
  return lambda * f + (1.0 - lambda) * phi;
}

double logsumexp(std::span<const double> scores) {
  require(!scores.empty(), ErrorKind::kUsage, "log-loss over an empty candidate set");
  const double m = *std::max_element(scores.begin(), scores.end());
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double x : scores) s += std::exp(x - m);
  return m + std::log(s);
}

double log_loss(double target, std::span<const double> scores) {
  require(!scores.empty(), ErrorKind::kUsage, "log-loss over an empty candidate set");
  const double m = *std::max_element(scores.begin(), scores.end());
  // Shift target and normalizer together so a constant offset cancels exactly.
  double s = 0.0;
  for (double x : scores) s += std::exp(x - m);
  return std::max(0.0, std::log(s) - (target - m));
}

double total_loss(std::span<const double> log_losses, std::span<const double> regs, double gamma) {
  require(gamma >= 0.0, ErrorKind::kUsage, "gamma must be non-negative");
  double loss = 0.0;
  for (double v : log_losses) loss += v;
  if (!log_losses.empty()) loss /= static_cast<double>(log_losses.size());
  double reg = 0.0;
  for (double v : regs) reg += v;
  if (!regs.empty()) reg /= static_cast<double>(regs.size());
  return loss + gamma * reg;
}

}  // namespace kgf
