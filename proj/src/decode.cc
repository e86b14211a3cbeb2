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

#include "rtd/decode.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

#include "rtd/parallel.h"

namespace rtd {

LmHeadWeights::LmHeadWeights(std::vector<double> matrix, std::size_t vocab_size, std::size_t model_dim)
    : LmHeadWeights(std::move(matrix), LabelSpace::token_ids(vocab_size), model_dim) {}

LmHeadWeights::LmHeadWeights(std::vector<double> matrix, LabelSpace vocab, std::size_t model_dim)
    : matrix_(std::move(matrix)), vocab_(std::move(vocab)), model_dim_(model_dim) {
  if (model_dim_ == 0 || matrix_.size() != vocab_.size() * model_dim_) {
    throw Error(ErrorCode::kDimensionMismatch, "LM head matrix is not vocab_size x model_dim");
  }
  check_finite(matrix_, "LM head matrix");
}

Distribution lm_head(std::span<const double> hidden, const LmHeadWeights& weights) {
  if (hidden.size() != weights.model_dim()) {
    throw Error(ErrorCode::kDimensionMismatch, "hidden state length " + std::to_string(hidden.size()) +
                                                   " does not match LM head width " +
                                                   std::to_string(weights.model_dim()));
  }
  check_finite(hidden, "hidden state");
  std::vector<double> logits(weights.vocab_size());
  for (std::size_t t = 0; t < logits.size(); ++t) {
    const auto w = weights.row(t);
    double acc = 0.0;
    for (std::size_t j = 0; j < w.size(); ++j) acc += w[j] * hidden[j];
    logits[t] = acc;
  }
  const double max_logit = *std::max_element(logits.begin(), logits.end());
  double total = 0.0;
  for (double& l : logits) {
    l = std::exp(l - max_logit);
    total += l;
  }
  for (double& l : logits) l /= total;
  return Distribution(weights.vocab(), std::move(logits));
}

std::vector<double> normalize(const NeighborSet& neighbors, double temperature) {
  if (!(temperature > 0.0) || !std::isfinite(temperature)) {
    throw Error(ErrorCode::kNonPositiveTemperature, "temperature must be positive");
  }
  if (neighbors.empty()) throw Error(ErrorCode::kEmptyNeighborSet, "cannot normalize an empty neighbor set");
  // Shift by the largest scaled logit, -min(d)/T.
  double shift = -std::numeric_limits<double>::infinity();
  for (const auto& n : neighbors.items) shift = std::max(shift, -n.distance / temperature);
  std::vector<double> weights;
  weights.reserve(neighbors.size());
  double total = 0.0;
  for (const auto& n : neighbors.items) {
    weights.push_back(std::exp(-n.distance / temperature - shift));
    total += weights.back();
  }
  for (double& w : weights) w /= total;
  return weights;
}

Distribution aggregate(std::span<const double> weights, const NeighborSet& neighbors, const LabelSpace& space) {
  if (weights.size() != neighbors.size()) {
    throw Error(ErrorCode::kLengthMismatch, std::to_string(weights.size()) + " weights for " +
                                                std::to_string(neighbors.size()) + " neighbors");
  }
  std::vector<double> probs(space.size(), 0.0);
  for (std::size_t j = 0; j < weights.size(); ++j) {
    const std::uint32_t v = neighbors.items[j].value;
    if (v >= space.size()) throw Error(ErrorCode::kUnknownLabel, "neighbor value outside the label space");
    probs[v] += weights[j];
  }
  return Distribution(space, std::move(probs));
}

NeighborSet fetch(std::span<const double> query, const KeyTable& table, std::size_t k, const Searcher& searcher) {
  if (const auto* ivf = std::get_if<IvfSearch>(&searcher)) {
    if (ivf->index == nullptr) throw Error(ErrorCode::kInvalidConfig, "IVF searcher without an index");
    return approx_topk(*ivf->index, table, query, k, ivf->n_probe);
  }
  return exact_topk(query, table, k);
}

namespace {

Distribution reference_distribution(std::span<const double> query, const KeyTable& table, const LabelSpace& space,
                                    const QueryConfig& cfg, const Searcher& searcher) {
  const NeighborSet neighbors = fetch(query, table, cfg.k, searcher);
  return aggregate(normalize(neighbors, cfg.temperature), neighbors, space);
}

}  // namespace

Distribution rtd_query(std::span<const double> hidden, const ReferenceDatastore& store, const QueryConfig& cfg,
                       const Searcher& searcher) {
  cfg.validate();
  if (hidden.size() != store.model_dim()) {
    throw Error(ErrorCode::kDimensionMismatch, "hidden state length " + std::to_string(hidden.size()) +
                                                   " does not match model_dim " + std::to_string(store.model_dim()));
  }
  return reference_distribution(hidden, store.table(), store.label_space(), cfg, searcher);
}

Distribution mh_rtd_query(std::span<const double> hidden, const MultiHeadDatastore& mh, const QueryConfig& cfg,
                          const MultiHeadSearcher& searcher) {
  cfg.validate(mh.n_sub_stores());
  const auto* ivf = std::get_if<MultiIvfSearch>(&searcher);
  if (ivf && ivf->indexes.size() != mh.n_sub_stores()) {
    throw Error(ErrorCode::kIndexStoreMismatch, "need one index per sub-store");
  }

  std::vector<std::size_t> heads;
  if (cfg.head_keep) {
    heads = *cfg.head_keep;
  } else {
    heads.resize(mh.n_sub_stores());
    for (std::size_t i = 0; i < heads.size(); ++i) heads[i] = i;
  }

  std::vector<double> mean(mh.label_space().size(), 0.0);
  for (std::size_t h : heads) {
    const std::vector<double> slice = mh.slice_query(h, hidden);
    Searcher head_searcher = ExactSearch{};
    if (ivf) head_searcher = IvfSearch{&ivf->indexes[h], ivf->n_probe};
    const Distribution r = reference_distribution(slice, mh.table(h), mh.label_space(), cfg, head_searcher);
    for (std::size_t i = 0; i < mean.size(); ++i) mean[i] += r[i];
  }
  const double count = static_cast<double>(heads.size());
  for (double& m : mean) m /= count;
  return Distribution(mh.label_space(), std::move(mean));
}

Distribution fuse(const Distribution& r, const Distribution& p, double lambda) {
  if (!(r.space() == p.space())) {
    throw Error(ErrorCode::kSpaceMismatch, "fusion needs both distributions over the same label space");
  }
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw Error(ErrorCode::kInvalidConfig, "lambda must lie in [0, 1]");
  std::vector<double> out(r.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = lambda * r[i] + (1.0 - lambda) * p[i];
  return Distribution(r.space(), std::move(out));
}

ProjectedBaseline project_baseline(const Distribution& p_vocab, const LabelSpace& labels,
                                   const std::map<std::string, std::size_t>& answer_tokens) {
  std::vector<double> mass(labels.size(), 0.0);
  std::vector<bool> token_used(p_vocab.size(), false);
  for (const auto& [label, token] : answer_tokens) {
    const std::size_t li = labels.index(label);
    if (token >= p_vocab.size()) {
      throw Error(ErrorCode::kUnknownToken, "answer token " + std::to_string(token) + " for label '" + label +
                                                "' outside vocabulary of " + std::to_string(p_vocab.size()));
    }
    if (token_used[token]) {
      throw Error(ErrorCode::kInvalidConfig, "answer token " + std::to_string(token) + " mapped to two labels");
    }
    token_used[token] = true;
    mass[li] = p_vocab[token];
  }
  double total = 0.0;
  for (double m : mass) total += m;
  if (total <= 0.0) return {Distribution::uniform(labels), true};
  for (double& m : mass) m /= total;
  return {Distribution(labels, std::move(mass)), false};
}

std::vector<Distribution> rtd_query_batch(std::span<const std::vector<double>> hidden,
                                          const ReferenceDatastore& store, const QueryConfig& cfg,
                                          const Searcher& searcher) {
  std::vector<std::optional<Distribution>> slots(hidden.size());
  parallel_for(hidden.size(), [&](std::size_t i) { slots[i] = rtd_query(hidden[i], store, cfg, searcher); });
  std::vector<Distribution> out;
  out.reserve(slots.size());
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

}  // namespace rtd
