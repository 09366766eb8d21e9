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
#ifndef KGF_TESTS_SUPPORT_HPP_
#define KGF_TESTS_SUPPORT_HPP_

#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "linalg.hpp"
#include "store.hpp"

namespace kgf::testing {

// Store over entities e0..e{n-1} and relations r0..r{m-1}; every triple goes
// to `split`, then the store is augmented.
inline TripleStore store_from(std::size_t n_entities, std::size_t n_relations, const std::vector<Triple> &facts,
                              Split split = Split::kTrain) {
  TripleStore s;
  for (std::size_t e = 0; e < n_entities; ++e) s.add_entity("e" + std::to_string(e));
  for (std::size_t r = 0; r < n_relations; ++r) s.add_relation("r" + std::to_string(r));
  for (const Triple &t : facts)
    s.add_triple("e" + std::to_string(t.head), "r" + std::to_string(t.relation), "e" + std::to_string(t.tail), split);
  s.augment();
  return s;
}

inline std::vector<Triple> random_facts(std::mt19937_64 &rng, std::size_t n_entities, std::size_t n_relations,
                                        std::size_t n_facts) {
  std::vector<Triple> out;
  for (std::size_t i = 0; i < n_facts; ++i)
    out.push_back({static_cast<EntityId>(rng() % n_entities), static_cast<RelationId>(rng() % n_relations),
                   static_cast<EntityId>(rng() % n_entities)});
  return out;
}

inline Vec random_vec(std::mt19937_64 &rng, std::size_t n, double scale = 1.0) {
  Vec v(n);
  for (double &x : v) x = uniform_symmetric(rng, scale);
  return v;
}

inline Matrix random_matrix(std::mt19937_64 &rng, std::size_t rows, std::size_t cols, double scale = 1.0) {
  Matrix m(rows, cols);
  fill_uniform(m, rng, scale);
  return m;
}

// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string &name) {
  auto p = std::filesystem::temp_directory_path() / ("kgf_test_" + name + "_" + std::to_string(::getpid()));
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

inline double rel_error(double a, double b) {
  const double denom = std::max({std::abs(a), std::abs(b), 1e-12});
  return std::abs(a - b) / denom;
}

}  // namespace kgf::testing

#endif  // KGF_TESTS_SUPPORT_HPP_
