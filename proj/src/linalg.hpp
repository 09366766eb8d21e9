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
#ifndef KGF_LINALG_HPP_
#define KGF_LINALG_HPP_

// Small dense kernels over row-major storage. Everything here is double
// precision; D is small (tens) so plain loops are what the compiler wants.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace kgf {

using Vec = std::vector<double>;
using ConstSpan = std::span<const double>;
using MutSpan = std::span<double>;

struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

  MutSpan row(std::size_t i) { return {data.data() + i * cols, cols}; }
  ConstSpan row(std::size_t i) const { return {data.data() + i * cols, cols}; }
  double &operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }
  std::size_t size() const { return data.size(); }
  void fill(double v) { std::fill(data.begin(), data.end(), v); }
  bool same_shape(const Matrix &o) const { return rows == o.rows && cols == o.cols; }
};

inline double dot(ConstSpan a, ConstSpan b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// y += alpha * x
inline void axpy(double alpha, ConstSpan x, MutSpan y) {
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

// y = M x, M is rows x cols, x has cols entries.
inline void matvec(const Matrix &m, ConstSpan x, MutSpan y) {
  for (std::size_t i = 0; i < m.rows; ++i) {
    const double *r = m.data.data() + i * m.cols;
    double s = 0.0;
    for (std::size_t j = 0; j < m.cols; ++j) s += r[j] * x[j];
    y[i] = s;
  }
}

// y += M^T g
inline void matvec_t_acc(const Matrix &m, ConstSpan g, MutSpan y) {
  for (std::size_t i = 0; i < m.rows; ++i) {
    const double gi = g[i];
    if (gi == 0.0) continue;
    const double *r = m.data.data() + i * m.cols;
    for (std::size_t j = 0; j < m.cols; ++j) y[j] += gi * r[j];
  }
}

// G += u v^T
inline void outer_acc(Matrix &g, ConstSpan u, ConstSpan v) {
  for (std::size_t i = 0; i < g.rows; ++i) {
    const double ui = u[i];
    if (ui == 0.0) continue;
    double *r = g.data.data() + i * g.cols;
    for (std::size_t j = 0; j < g.cols; ++j) r[j] += ui * v[j];
  }
}

inline double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// 53-bit uniform in [0, 1) from a 64-bit draw. Spelled out so streams are
// identical across standard libraries.
inline double unit_uniform(std::uint64_t bits) { return static_cast<double>(bits >> 11) * 0x1.0p-53; }

inline double uniform_symmetric(std::mt19937_64 &rng, double scale) {
  return (2.0 * unit_uniform(rng()) - 1.0) * scale;
}

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t hash_combine(std::uint64_t seed, std::uint64_t v) { return splitmix64(seed ^ splitmix64(v)); }

// Fisher-Yates with an explicit index draw; std::shuffle's algorithm is
// unspecified and differs between standard libraries.
template <class T>
void portable_shuffle(std::vector<T> &v, std::mt19937_64 &rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % i);
    std::swap(v[i - 1], v[j]);
  }
}

inline void fill_uniform(Matrix &m, std::mt19937_64 &rng, double scale) {
  for (double &v : m.data) v = uniform_symmetric(rng, scale);
}

}  // namespace kgf

#endif  // KGF_LINALG_HPP_
