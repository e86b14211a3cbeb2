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

#include <algorithm>
#include <chrono>
#include <functional>

#include "rtd/eval.h"

namespace rtd {
namespace {

double median_query_seconds(std::span<const std::vector<double>> queries, const BenchOptions& options,
                            const std::function<void(std::span<const double>)>& query) {
  for (std::size_t i = 0; i < options.warmup; ++i) query(queries[i % queries.size()]);
  std::vector<double> times;
  times.reserve(options.repetitions);
  for (std::size_t i = 0; i < options.repetitions; ++i) {
    const auto& q = queries[i % queries.size()];
    const auto start = std::chrono::steady_clock::now();
    query(q);
    const auto stop = std::chrono::steady_clock::now();
    times.push_back(std::chrono::duration<double>(stop - start).count());
  }
  const auto mid = times.begin() + static_cast<std::ptrdiff_t>(times.size() / 2);
  std::nth_element(times.begin(), mid, times.end());
  if (times.size() % 2 == 1) return *mid;
  const double upper = *mid;
  const double lower = *std::max_element(times.begin(), mid);
  return 0.5 * (lower + upper);
}

}  // namespace

std::vector<BenchRow> bench(const ReferenceDatastore& store, std::span<const std::vector<double>> queries,
                            const BenchOptions& options) {
  if (queries.empty()) throw Error(ErrorCode::kEmptyInput, "bench needs at least one query");
  if (options.repetitions < 30) throw Error(ErrorCode::kInvalidConfig, "bench needs at least 30 repetitions");
  for (std::size_t s : options.sizes) {
    if (s == 0 || s > store.size()) {
      throw Error(ErrorCode::kInvalidConfig,
                  "bench size " + std::to_string(s) + " outside [1, " + std::to_string(store.size()) + "]");
    }
  }
  QueryConfig cfg;
  cfg.k = options.k;
  cfg.temperature = options.temperature;
  cfg.validate();

  std::vector<BenchRow> rows;
  for (std::size_t size : options.sizes) {
    const ReferenceDatastore sub = size == store.size() ? store : store.prefix(size);
    const std::uint64_t key_bytes = memory_footprint(sub).key_bytes;

    const double exact = median_query_seconds(queries, options, [&](std::span<const double> q) {
      (void)rtd_query(q, sub, cfg);
    });
    rows.push_back({size, "exact", exact, options.repetitions, key_bytes});

    if (options.include_ivf) {
      const IvfIndex index = build_ivf(sub, std::min(options.n_lists, size), options.seed);
      const Searcher searcher = IvfSearch{&index, std::min(options.n_probe, index.n_lists())};
      const double approx = median_query_seconds(queries, options, [&](std::span<const double> q) {
        (void)rtd_query(q, sub, cfg, searcher);
      });
      rows.push_back({size, "ivf", approx, options.repetitions, key_bytes});
    }

    if (!options.head_keep_fractions.empty()) {
      const MultiHeadDatastore mh = split_heads(sub);
      for (double fraction : options.head_keep_fractions) {
        QueryConfig head_cfg = cfg;
        head_cfg.head_keep = heads_for_fraction(fraction, mh.n_sub_stores());
        const double t = median_query_seconds(queries, options, [&](std::span<const double> q) {
          (void)mh_rtd_query(q, mh, head_cfg);
        });
        const std::size_t kept = head_cfg.head_keep->size();
        rows.push_back({size, "mh-keep-" + std::to_string(kept), t, options.repetitions,
                        key_storage_bytes(kept * sub.layout().head_dim, sub.dtype(), size)});
      }
    }
  }
  return rows;
}

}  // namespace rtd
