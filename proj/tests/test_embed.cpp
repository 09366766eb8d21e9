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
#include <cmath>
#include <random>

#include "doctest.h"
#include "embed.hpp"
#include "support.hpp"

using namespace kgf;
using kgf::testing::random_vec;

TEST_SUITE("embed") {

TEST_CASE("phi on unit vectors") {
  CHECK(phi(Vec{1, 0}, Vec{1, 0}, Vec{1, 0}) == 1.0);
  CHECK(phi(Vec{1, 0}, Vec{1, 0}, Vec{0, 1}) == 0.0);
  CHECK_THROWS_AS(phi(Vec{1, 0}, Vec{1}, Vec{1, 0}), Error);
}

TEST_CASE("phi matches a scalar loop") {
  std::mt19937_64 rng(1);
  for (int i = 0; i < 50; ++i) {
    const Vec a = random_vec(rng, 8), b = random_vec(rng, 8), c = random_vec(rng, 8);
    long double s = 0;
    for (int d = 0; d < 8; ++d) s += static_cast<long double>(a[d]) * b[d] * c[d];
    CHECK(std::abs(phi(a, b, c) - static_cast<double>(s)) < 1e-12);
  }
}

TEST_CASE("phi over all tails is phi row by row") {
  std::mt19937_64 rng(2);
  const Vec h = random_vec(rng, 6), r = random_vec(rng, 6);
  const Matrix tails = kgf::testing::random_matrix(rng, 9, 6);
  const Vec all = phi_all_tails(h, r, tails);
  REQUIRE(all.size() == 9);
  for (std::size_t v = 0; v < 9; ++v) CHECK(all[v] == phi(h, r, tails.row(v)));

  Matrix eye(3, 3);
  for (int i = 0; i < 3; ++i) eye(i, i) = 1.0;
  CHECK(phi_all_tails(Vec{1, 0, 0}, Vec{1, 1, 1}, eye) == Vec{1, 0, 0});
  CHECK(phi_all_tails(h, Vec(6, 0.0), tails) == Vec(9, 0.0));
  CHECK_THROWS_AS(phi_all_tails(h, r, Matrix(2, 5)), Error);
}

TEST_CASE("n3 penalty") {
  CHECK(n3_penalty(Vec(4, 1.0), Vec(4, 1.0), Vec(4, 1.0)) == 12.0);
  CHECK(n3_penalty(Vec(4, 0.0), Vec(4, 0.0), Vec(4, 0.0)) == 0.0);
  CHECK(n3_penalty(Vec{-2}, Vec{0}, Vec{0}) == 8.0);
  std::mt19937_64 rng(3);
  for (int i = 0; i < 20; ++i) CHECK(n3_penalty(random_vec(rng, 5), random_vec(rng, 5), random_vec(rng, 5)) > 0.0);
}

TEST_CASE("phi is linear in each argument") {
  std::mt19937_64 rng(4);
  const Vec h = random_vec(rng, 8), r = random_vec(rng, 8), t = random_vec(rng, 8);
  for (double a : {-3.0, 0.5, 2.0}) {
    Vec ah = h;
    for (double &x : ah) x *= a;
    CHECK(std::abs(phi(ah, r, t) - a * phi(h, r, t)) < 1e-12);
  }
}

TEST_CASE("phi gradient is the product of the other two") {
  std::mt19937_64 rng(5);
  const Vec h = random_vec(rng, 6), r = random_vec(rng, 6), t = random_vec(rng, 6);
  const double eps = 1e-6;
  for (std::size_t d = 0; d < 6; ++d) {
    Vec hp = h, hm = h;
    hp[d] += eps;
    hm[d] -= eps;
    const double fd = (phi(hp, r, t) - phi(hm, r, t)) / (2 * eps);
    CHECK(kgf::testing::rel_error(fd, r[d] * t[d]) < 1e-6);
  }
}

TEST_CASE("n3 gradient") {
  std::mt19937_64 rng(6);
  const Vec x = random_vec(rng, 5);
  Vec g(5, 0.0);
  n3_grad_acc(x, 2.0, g);
  for (std::size_t d = 0; d < 5; ++d) CHECK(std::abs(g[d] - 2.0 * 3.0 * x[d] * std::abs(x[d])) < 1e-12);
}

TEST_CASE("initialization") {
  const EmbeddingSizes sizes{7, 5};
  const CpEmbeddings a = init_embeddings(sizes, 32, 9, 0.1);
  const CpEmbeddings b = init_embeddings(sizes, 32, 9, 0.1);
  CHECK(a.head.data == b.head.data);
  CHECK(a.relation.data == b.relation.data);
  CHECK(a.tail.data == b.tail.data);
  CHECK(a.dim() == 32);
  for (double v : a.head.data) CHECK(std::abs(v) <= 0.1);
  const CpEmbeddings z = init_embeddings(sizes, 4, 9, 0.0);
  for (double v : z.relation.data) CHECK(v == 0.0);
  CHECK_THROWS_AS(init_embeddings(sizes, 0, 9, 0.1), Error);
}

}  // TEST_SUITE
