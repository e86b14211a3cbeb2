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
#include <map>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "rtd/core.h"
#include "rtd/datastore.h"
#include "rtd/knn.h"

namespace rtd {

/// Vocabulary projection W (vocab_size x model_dim, row-major) of the LM head.
class LmHeadWeights {
 public:
  LmHeadWeights(std::vector<double> matrix, std::size_t vocab_size, std::size_t model_dim);
  LmHeadWeights(std::vector<double> matrix, LabelSpace vocab, std::size_t model_dim);

  std::size_t vocab_size() const noexcept { return vocab_.size(); }
  std::size_t model_dim() const noexcept { return model_dim_; }
  const LabelSpace& vocab() const noexcept { return vocab_; }
  std::span<const double> row(std::size_t token) const {
    return std::span<const double>(matrix_).subspan(token * model_dim_, model_dim_);
  }

 private:
  std::vector<double> matrix_;
  LabelSpace vocab_;
  std::size_t model_dim_;
};

/// softmax(W h) over the vocabulary.
Distribution lm_head(std::span<const double> hidden, const LmHeadWeights& weights);

/// Softmax of -distance / T over the neighbors.
std::vector<double> normalize(const NeighborSet& neighbors, double temperature);

/// Sums neighbor weights per label.
Distribution aggregate(std::span<const double> weights, const NeighborSet& neighbors, const LabelSpace& space);

struct ExactSearch {};
struct IvfSearch {
  const IvfIndex* index = nullptr;
  std::size_t n_probe = 1;
};
using Searcher = std::variant<ExactSearch, IvfSearch>;

/// One index per sub-store, in sub-store order.
struct MultiIvfSearch {
  std::span<const IvfIndex> indexes;
  std::size_t n_probe = 1;
};
using MultiHeadSearcher = std::variant<ExactSearch, MultiIvfSearch>;

NeighborSet fetch(std::span<const double> query, const KeyTable& table, std::size_t k, const Searcher& searcher);

/// Reference distribution r for one hidden state: fetch, normalize, aggregate.
Distribution rtd_query(std::span<const double> hidden, const ReferenceDatastore& store, const QueryConfig& cfg,
                       const Searcher& searcher = ExactSearch{});

/// Mean of per-head reference distributions over the retained sub-stores
/// (cfg.head_keep, or all of them).
Distribution mh_rtd_query(std::span<const double> hidden, const MultiHeadDatastore& mh, const QueryConfig& cfg,
                          const MultiHeadSearcher& searcher = ExactSearch{});

/// lambda * r + (1 - lambda) * p over one shared label space.
Distribution fuse(const Distribution& r, const Distribution& p, double lambda);

struct ProjectedBaseline {
  Distribution distribution;
  bool confused = false;
};

/// Restricts a vocabulary distribution to each label's answer token and
/// renormalizes. Labels without a mapped token get zero mass. All-zero mass
/// yields the uniform distribution with `confused` set.
ProjectedBaseline project_baseline(const Distribution& p_vocab, const LabelSpace& labels,
                                   const std::map<std::string, std::size_t>& answer_tokens);

/// Batched rtd_query, evaluated in parallel; results match the serial map.
std::vector<Distribution> rtd_query_batch(std::span<const std::vector<double>> hidden,
                                          const ReferenceDatastore& store, const QueryConfig& cfg,
                                          const Searcher& searcher = ExactSearch{});

}  // namespace rtd
