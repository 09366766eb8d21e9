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
#ifndef KGF_OPTIM_HPP_
#define KGF_OPTIM_HPP_

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "linalg.hpp"
#include "model.hpp"
#include "params.hpp"

namespace kgf {

struct AdamHyper {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class AdamState {
 public:
  AdamState() = default;
  AdamState(const ModelParams &shape, const AdamHyper &hyper);

  // theta -= lr * m_hat / (sqrt(v_hat) + eps), tensor by tensor.
  void step(ModelParams &values, const ModelParams &grads);

  const AdamHyper &hyper() const { return hyper_; }
  std::uint64_t steps() const { return t_; }

 private:
  AdamHyper hyper_;
  std::uint64_t t_ = 0;
  std::vector<Vec> m_;
  std::vector<Vec> v_;
};

// Scalar Adam, used by the convergence tests.
struct ScalarAdam {
  AdamHyper hyper;
  double m = 0.0;
  double v = 0.0;
  std::uint64_t t = 0;
  double step(double theta, double grad);
};

struct GradCheckConfig {
  std::size_t n_entities = 10;
  std::size_t n_relations = 3;
  std::size_t n_facts = 25;
  std::uint64_t seed = 11;
  ModelOptions options = [] {
    ModelOptions o;
    o.dim = 4;
    o.layers = 2;
    o.top_k = 4;
    o.gamma = 0.01;
    return o;
  }();
  Mode mode = Mode::kTrain;
  double step = 1e-5;
  double tolerance = 1e-4;
  bool corrupt_selection_adjoint = false;
};

struct GroupReport {
  std::string family;
  std::string worst_tensor;
  double max_rel_error = 0.0;
  std::size_t entries = 0;
  bool pass = true;
};

struct GradCheckReport {
  std::vector<GroupReport> groups;
  bool pass = true;
  std::string failures() const;  // comma-separated failing families
};

// Entry-wise |a - n| / max(|a|, |n|, 1e-6) against central differences,
// maxed per parameter family.
GradCheckReport grad_check(const GradCheckConfig &config);

// The same check on a caller-supplied model and batch.
GradCheckReport grad_check(Model &model, const Graph &graph, std::span<const Query> queries, Mode mode,
                           std::uint64_t noise_seed, double step, double tolerance,
                           bool corrupt_selection_adjoint = false);

}  // namespace kgf

#endif  // KGF_OPTIM_HPP_
