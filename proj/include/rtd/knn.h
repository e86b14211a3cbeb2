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

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "rtd/datastore.h"

namespace rtd {

struct Neighbor {
  double distance;          // true L2 distance, not squared
  std::uint32_t entry;      // row in the searched table
  std::uint32_t value;      // label index of that row

  friend bool operator==(const Neighbor&, const Neighbor&) = default;
};

/// Top-K result, ascending by (distance, entry).
struct NeighborSet {
  std::vector<Neighbor> items;
  /// Set when fewer than the requested K neighbors were available.
  bool clamped = false;

  std::size_t size() const noexcept { return items.size(); }
  bool empty() const noexcept { return items.empty(); }
};

/// Brute-force search over every row. Returns min(k, size) neighbors.
NeighborSet exact_topk(std::span<const double> query, const KeyTable& table, std::size_t k);
NeighborSet exact_topk(std::span<const double> query, const ReferenceDatastore& store, std::size_t k);

/// Inverted-file index: k-means centroids plus one posting list per centroid.
struct IvfIndex {
  std::size_t dim = 0;
  std::vector<float> centroids;  // n_lists x dim, row-major
  std::vector<std::vector<std::uint32_t>> postings;
  std::uint64_t trained_on = 0;

  std::size_t n_lists() const noexcept { return postings.size(); }

  friend bool operator==(const IvfIndex&, const IvfIndex&) = default;
};

inline constexpr int kIvfTrainingIterations = 25;

IvfIndex build_ivf(const KeyTable& table, std::size_t n_lists, std::uint64_t seed);
IvfIndex build_ivf(const ReferenceDatastore& store, std::size_t n_lists, std::uint64_t seed);

/// Exact distances restricted to the n_probe posting lists whose centroids
/// are nearest the query.
NeighborSet approx_topk(const IvfIndex& index, const KeyTable& table, std::span<const double> query, std::size_t k,
                        std::size_t n_probe);
NeighborSet approx_topk(const IvfIndex& index, const ReferenceDatastore& store, std::span<const double> query,
                        std::size_t k, std::size_t n_probe);

void save_ivf(const IvfIndex& index, const std::filesystem::path& path);
IvfIndex load_ivf(const std::filesystem::path& path);
std::vector<std::uint8_t> encode_ivf(const IvfIndex& index);
IvfIndex decode_ivf(std::span<const std::uint8_t> bytes);

}  // namespace rtd
