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

#include "rtd/knn.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <string>

#include "binary_io.h"

namespace rtd {
namespace {

bool neighbor_less(const Neighbor& a, const Neighbor& b) {
  return a.distance < b.distance || (a.distance == b.distance && a.entry < b.entry);
}

void check_query(std::span<const double> query, std::size_t width) {
  if (query.size() != width) {
    throw Error(ErrorCode::kDimensionMismatch,
                "query length " + std::to_string(query.size()) + " does not match key width " + std::to_string(width));
  }
  check_finite(query, "query");
}

NeighborSet select_topk(std::vector<Neighbor> candidates, std::size_t k) {
  if (k < 1) throw Error(ErrorCode::kInvalidConfig, "k must be at least 1");
  NeighborSet out;
  out.clamped = candidates.size() < k;
  const std::size_t keep = std::min(k, candidates.size());
  if (keep < candidates.size()) {
    std::nth_element(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(keep), candidates.end(),
                     neighbor_less);
    candidates.resize(keep);
  }
  std::sort(candidates.begin(), candidates.end(), neighbor_less);
  out.items = std::move(candidates);
  return out;
}

Neighbor make_neighbor(const KeyTable& table, std::size_t row, std::span<const double> query) {
  return {std::sqrt(table.keys->squared_distance(row, query)), static_cast<std::uint32_t>(row), table.values[row]};
}

// Squared distances from `point` to each centroid; nearest wins, lowest index on ties.
std::size_t nearest_centroid(std::span<const double> point, const std::vector<double>& centroids, std::size_t dim,
                             double* best_distance) {
  const std::size_t n_lists = centroids.size() / dim;
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < n_lists; ++c) {
    const double* centroid = centroids.data() + c * dim;
    double d = 0.0;
    for (std::size_t j = 0; j < dim; ++j) {
      const double diff = point[j] - centroid[j];
      d += diff * diff;
    }
    if (d < best_d) {
      best_d = d;
      best = c;
    }
  }
  if (best_distance) *best_distance = best_d;
  return best;
}

// faiss-style cap on the training sample.
constexpr std::size_t kMaxPointsPerCentroid = 256;

}  // namespace

NeighborSet exact_topk(std::span<const double> query, const KeyTable& table, std::size_t k) {
  check_query(query, table.width());
  if (k < 1) throw Error(ErrorCode::kInvalidConfig, "k must be at least 1");
  std::vector<Neighbor> all;
  all.reserve(table.size());
  for (std::size_t row = 0; row < table.size(); ++row) all.push_back(make_neighbor(table, row, query));
  return select_topk(std::move(all), k);
}

NeighborSet exact_topk(std::span<const double> query, const ReferenceDatastore& store, std::size_t k) {
  return exact_topk(query, store.table(), k);
}

IvfIndex build_ivf(const KeyTable& table, std::size_t n_lists, std::uint64_t seed) {
  const std::size_t n = table.size();
  const std::size_t dim = table.width();
  if (n_lists < 1) throw Error(ErrorCode::kInvalidConfig, "n_lists must be at least 1");
  if (n_lists > n) {
    throw Error(ErrorCode::kTooManyLists,
                "n_lists " + std::to_string(n_lists) + " exceeds datastore size " + std::to_string(n));
  }

  std::mt19937_64 rng(seed);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  // Partial Fisher-Yates: the first `sample` slots become a uniform sample.
  const std::size_t sample = std::min(n, n_lists * kMaxPointsPerCentroid);
  for (std::size_t i = 0; i < sample; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, n - 1);
    std::swap(order[i], order[pick(rng)]);
  }
  std::vector<std::size_t> train(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(sample));

  std::vector<double> points(sample * dim);
  for (std::size_t i = 0; i < sample; ++i) {
    table.keys->read_row(train[i], std::span<double>(points.data() + i * dim, dim));
  }

  // Initial centroids: the first n_lists sampled points.
  std::vector<double> centroids(points.begin(), points.begin() + static_cast<std::ptrdiff_t>(n_lists * dim));
  std::vector<std::size_t> assign(sample);
  std::vector<double> dist(sample);
  for (int iter = 0; iter < kIvfTrainingIterations; ++iter) {
    for (std::size_t i = 0; i < sample; ++i) {
      assign[i] = nearest_centroid(std::span<const double>(points.data() + i * dim, dim), centroids, dim, &dist[i]);
    }
    std::vector<double> sums(n_lists * dim, 0.0);
    std::vector<std::size_t> counts(n_lists, 0);
    for (std::size_t i = 0; i < sample; ++i) {
      ++counts[assign[i]];
      for (std::size_t j = 0; j < dim; ++j) sums[assign[i] * dim + j] += points[i * dim + j];
    }
    for (std::size_t c = 0; c < n_lists; ++c) {
      if (counts[c] > 0) {
        for (std::size_t j = 0; j < dim; ++j) {
          centroids[c * dim + j] = sums[c * dim + j] / static_cast<double>(counts[c]);
        }
        continue;
      }
      // Empty cluster: re-seed at the point farthest from its centroid.
      const std::size_t far = argmax_index(dist);
      std::copy_n(points.begin() + static_cast<std::ptrdiff_t>(far * dim), dim,
                  centroids.begin() + static_cast<std::ptrdiff_t>(c * dim));
      dist[far] = 0.0;
    }
  }

  IvfIndex index;
  index.dim = dim;
  index.trained_on = table.content_hash;
  index.centroids.assign(centroids.begin(), centroids.end());
  // Assign with the stored f32 centroids so a reloaded index behaves identically.
  std::vector<double> stored(index.centroids.begin(), index.centroids.end());
  index.postings.assign(n_lists, {});
  std::vector<double> row(dim);
  for (std::size_t r = 0; r < n; ++r) {
    table.keys->read_row(r, row);
    index.postings[nearest_centroid(row, stored, dim, nullptr)].push_back(static_cast<std::uint32_t>(r));
  }
  return index;
}

IvfIndex build_ivf(const ReferenceDatastore& store, std::size_t n_lists, std::uint64_t seed) {
  return build_ivf(store.table(), n_lists, seed);
}

NeighborSet approx_topk(const IvfIndex& index, const KeyTable& table, std::span<const double> query, std::size_t k,
                        std::size_t n_probe) {
  if (index.trained_on != table.content_hash || index.dim != table.width()) {
    throw Error(ErrorCode::kIndexStoreMismatch, "index was trained on a different datastore");
  }
  check_query(query, table.width());
  if (n_probe < 1 || n_probe > index.n_lists()) {
    throw Error(ErrorCode::kInvalidConfig,
                "n_probe must lie in [1, " + std::to_string(index.n_lists()) + "], got " + std::to_string(n_probe));
  }

  std::vector<Neighbor> cells;
  cells.reserve(index.n_lists());
  for (std::size_t c = 0; c < index.n_lists(); ++c) {
    const float* centroid = index.centroids.data() + c * index.dim;
    double d = 0.0;
    for (std::size_t j = 0; j < index.dim; ++j) {
      const double diff = query[j] - static_cast<double>(centroid[j]);
      d += diff * diff;
    }
    cells.push_back({d, static_cast<std::uint32_t>(c), 0});
  }
  std::partial_sort(cells.begin(), cells.begin() + static_cast<std::ptrdiff_t>(n_probe), cells.end(), neighbor_less);

  std::vector<Neighbor> candidates;
  for (std::size_t p = 0; p < n_probe; ++p) {
    for (std::uint32_t row : index.postings[cells[p].entry]) candidates.push_back(make_neighbor(table, row, query));
  }
  if (candidates.empty()) {
    return NeighborSet{{}, true};
  }
  return select_topk(std::move(candidates), k);
}

NeighborSet approx_topk(const IvfIndex& index, const ReferenceDatastore& store, std::span<const double> query,
                        std::size_t k, std::size_t n_probe) {
  return approx_topk(index, store.table(), query, k, n_probe);
}

// RTIX: "RTIX", version, dtype (0 = f32 centroids), 2 reserved bytes,
// u32 dim, u32 n_lists, u64 datastore hash, centroids, then per list a u32
// count followed by that many u32 entry indices.
std::vector<std::uint8_t> encode_ivf(const IvfIndex& index) {
  detail::ByteWriter w;
  w.bytes("RTIX", 4);
  w.u8(1);
  w.u8(0);
  w.u8(0);
  w.u8(0);
  w.u32(static_cast<std::uint32_t>(index.dim));
  w.u32(static_cast<std::uint32_t>(index.n_lists()));
  w.u64(index.trained_on);
  for (float f : index.centroids) w.f32(f);
  for (const auto& list : index.postings) {
    w.u32(static_cast<std::uint32_t>(list.size()));
    for (std::uint32_t e : list) w.u32(e);
  }
  return w.take();
}

IvfIndex decode_ivf(std::span<const std::uint8_t> bytes) {
  detail::ByteReader r(bytes);
  auto magic = r.bytes(4, "magic");
  if (std::string_view(reinterpret_cast<const char*>(magic.data()), 4) != "RTIX") {
    throw Error(ErrorCode::kFormatError, "bad magic, not an RTIX file", 0);
  }
  if (std::uint8_t version = r.u8("version"); version != 1) {
    throw Error(ErrorCode::kFormatError, "unsupported RTIX version " + std::to_string(version), 4);
  }
  if (r.u8("dtype") != 0) throw Error(ErrorCode::kFormatError, "RTIX centroids must be f32", 5);
  if (r.u8("reserved") != 0 || r.u8("reserved") != 0) {
    throw Error(ErrorCode::kFormatError, "reserved header bytes are not zero", 6);
  }
  IvfIndex index;
  index.dim = r.u32("dim");
  const std::uint32_t n_lists = r.u32("n_lists");
  index.trained_on = r.u64("datastore hash");
  if (index.dim == 0 || n_lists == 0) throw Error(ErrorCode::kFormatError, "zero dim or list count", 8);
  const std::uint64_t centroid_values = static_cast<std::uint64_t>(n_lists) * index.dim;
  r.require(centroid_values * 4, "centroids");
  index.centroids.resize(centroid_values);
  for (auto& f : index.centroids) f = r.f32("centroids");
  index.postings.resize(n_lists);
  for (auto& list : index.postings) {
    const std::uint32_t count = r.u32("posting count");
    r.require(static_cast<std::uint64_t>(count) * 4, "posting list");
    list.resize(count);
    for (auto& e : list) e = r.u32("posting entry");
  }
  if (r.remaining() != 0) throw Error(ErrorCode::kFormatError, "trailing bytes after posting lists", r.offset());
  return index;
}

void save_ivf(const IvfIndex& index, const std::filesystem::path& path) { detail::write_file(path, encode_ivf(index)); }

IvfIndex load_ivf(const std::filesystem::path& path) { return decode_ivf(detail::read_file(path)); }

}  // namespace rtd
