// Copyright 2026 The RTD Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Brute-force reference used only by tests. Shares no code with the library:
// it scans raw float keys, sorts every distance, and evaluates the softmax
// in long double without any shift.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <vector>

namespace rtd::testing {

struct OracleNeighbor {
  double distance;
  std::size_t entry;
};

inline std::vector<OracleNeighbor> oracle_sorted_neighbors(const std::vector<float>& keys, std::size_t dim,
                                                           const std::vector<double>& query) {
  const std::size_t n = keys.size() / dim;
  std::vector<OracleNeighbor> all(n);
  for (std::size_t i = 0; i < n; ++i) {
    long double s = 0.0L;
    for (std::size_t j = 0; j < dim; ++j) {
      const long double d = static_cast<long double>(keys[i * dim + j]) - query[j];
      s += d * d;
    }
    all[i] = {static_cast<double>(std::sqrt(s)), i};
  }
  std::stable_sort(all.begin(), all.end(),
                   [](const OracleNeighbor& a, const OracleNeighbor& b) { return a.distance < b.distance; });
  return all;
}

inline std::vector<double> oracle_reference(const std::vector<float>& keys, std::size_t dim,
                                            const std::vector<std::uint32_t>& values, std::size_t n_labels,
                                            const std::vector<double>& query, std::size_t k, double temperature) {
  auto sorted = oracle_sorted_neighbors(keys, dim, query);
  sorted.resize(std::min(k, sorted.size()));
  long double z = 0.0L;
  for (const auto& n : sorted) z += std::exp(-static_cast<long double>(n.distance) / temperature);
  std::vector<double> r(n_labels, 0.0);
  for (const auto& n : sorted) {
    r[values[n.entry]] += static_cast<double>(std::exp(-static_cast<long double>(n.distance) / temperature) / z);
  }
  return r;
}

struct RandomInstance {
  std::size_t dim;
  std::size_t size;
  std::size_t n_labels;
  std::vector<float> keys;
  std::vector<std::uint32_t> values;
  std::vector<double> query;
};

inline RandomInstance random_instance(std::mt19937_64& rng, std::size_t max_dim, std::size_t max_size) {
  std::uniform_int_distribution<std::size_t> dim_dist(1, max_dim);
  std::uniform_int_distribution<std::size_t> size_dist(1, max_size);
  std::uniform_int_distribution<std::size_t> label_dist(1, 8);
  std::uniform_real_distribution<float> value(-1.0f, 1.0f);
  RandomInstance inst;
  inst.dim = dim_dist(rng);
  inst.size = size_dist(rng);
  inst.n_labels = label_dist(rng);
  inst.keys.resize(inst.dim * inst.size);
  for (auto& x : inst.keys) x = value(rng);
  std::uniform_int_distribution<std::uint32_t> pick(0, static_cast<std::uint32_t>(inst.n_labels - 1));
  inst.values.resize(inst.size);
  for (auto& v : inst.values) v = pick(rng);
  inst.query.resize(inst.dim);
  for (auto& q : inst.query) q = value(rng);
  return inst;
}

}  // namespace rtd::testing
