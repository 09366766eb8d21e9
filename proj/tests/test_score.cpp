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
#include "score.hpp"
#include "support.hpp"

using namespace kgf;
using kgf::testing::random_vec;

TEST_SUITE("score") {

TEST_CASE("structural readout") {
  CHECK(structural_score(Vec(4, 0.0), Vec{1, 2, 3, 4}) == 0.0);
  CHECK(structural_score(Vec{0.5, -2, 7, 1}, Vec{0, 0, 1, 0}) == 7.0);
  std::mt19937_64 rng(31);
  const Vec h = random_vec(rng, 6), w = random_vec(rng, 6);
  double s = 0.0;
  for (int i = 0; i < 6; ++i) s += h[i] * w[i];
  CHECK(std::abs(structural_score(h, w) - s) < 1e-15);
}

TEST_CASE("semantic score") {
  std::mt19937_64 rng(32);
  CpEmbeddings emb{kgf::testing::random_matrix(rng, 5, 4), kgf::testing::random_matrix(rng, 3, 4),
                   kgf::testing::random_matrix(rng, 5, 4)};
  CHECK(semantic_score(1, Vec(4, 0.0), 2, emb) == 0.0);
  const Vec qr = random_vec(rng, 4);
  for (EntityId t = 0; t < 5; ++t) {
    double s = 0.0;
    for (int d = 0; d < 4; ++d) s += emb.head(1, d) * qr[d] * emb.tail(t, d);
    CHECK(std::abs(semantic_score(1, qr, t, emb) - s) < 1e-12);
  }
  // The unrefined relation reduces to the plain CP score.
  CHECK(semantic_score(1, emb.relation.row(2), 3, emb) == phi(emb.head.row(1), emb.relation.row(2), emb.tail.row(3)));
  CHECK_THROWS_AS(semantic_score(9, qr, 0, emb), Error);
  CHECK_THROWS_AS(semantic_score(0, Vec(3), 0, emb), Error);
}

TEST_CASE("hybrid score") {
  CHECK(hybrid_score(2.5, -1.0, 1.0) == 2.5);
  CHECK(hybrid_score(2.5, -1.0, 0.0) == -1.0);
  CHECK(hybrid_score(2.0, 1.0, 0.7) == doctest::Approx(1.7));
  CHECK_THROWS_AS(hybrid_score(1, 1, 1.5), Error);
  CHECK_THROWS_AS(hybrid_score(1, 1, -0.1), Error);
  // Affine in lambda.
  const double f = 0.37, p = -1.3;
  for (double l : {0.1, 0.45, 0.9}) CHECK(std::abs(hybrid_score(f, p, l) - (p + l * (f - p))) < 1e-15);
}

TEST_CASE("log loss") {
  CHECK(log_loss(3.0, Vec{3.0}) == 0.0);
  CHECK(log_loss(1.0, Vec{1.0, 1.0}) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  CHECK_THROWS_AS(log_loss(0.0, Vec{}), Error);
  CHECK(log_loss(5.0, Vec{5.0, -1e308}) >= 0.0);

  std::mt19937_64 rng(33);
  for (int trial = 0; trial < 50; ++trial) {
    const Vec s = random_vec(rng, 10, 20.0);
    long double sum = 0;
    for (double v : s) sum += std::exp(static_cast<long double>(v));
    CHECK(std::abs(logsumexp(s) - static_cast<double>(std::log(sum))) < 1e-10);
    const double target = s[trial % 10];
    CHECK(log_loss(target, s) >= 0.0);

    // Shifting every score by a constant leaves the loss unchanged.
    const double c = uniform_symmetric(rng, 50.0);
    Vec shifted = s;
    for (double &v : shifted) v += c;
    CHECK(std::abs(log_loss(target + c, shifted) - log_loss(target, s)) < 1e-12);
  }
  CHECK(std::isfinite(logsumexp(Vec{1000.0, 999.0})));
}

TEST_CASE("total loss") {
  const Vec ll{1.0, 2.0}, regs{12.0, 12.0};
  CHECK(total_loss(ll, regs, 0.0) == 1.5);
  CHECK(total_loss(ll, Vec{0.0, 0.0}, 0.5) == 1.5);
  CHECK(total_loss(ll, regs, 0.1) == doctest::Approx(1.5 + 1.2));
  CHECK(n3_penalty(Vec(4, 1.0), Vec(4, 1.0), Vec(4, 1.0)) * 0.1 == doctest::Approx(1.2));
}

}  // TEST_SUITE
