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

#include "rtd/core.h"

#include <cmath>
#include <numeric>

namespace rtd {

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kDuplicateLabel: return "DuplicateLabel";
    case ErrorCode::kEmptyLabelSpace: return "EmptyLabelSpace";
    case ErrorCode::kInvalidDistribution: return "InvalidDistribution";
    case ErrorCode::kInvalidConfig: return "InvalidConfig";
    case ErrorCode::kNonFinite: return "NonFinite";
    case ErrorCode::kDimensionMismatch: return "DimensionMismatch";
    case ErrorCode::kUnknownLabel: return "UnknownLabel";
    case ErrorCode::kEmptyInput: return "EmptyInput";
    case ErrorCode::kInvalidLayout: return "InvalidLayout";
    case ErrorCode::kInvalidPlan: return "InvalidPlan";
    case ErrorCode::kEmptyKeepSet: return "EmptyKeepSet";
    case ErrorCode::kUnknownHead: return "UnknownHead";
    case ErrorCode::kIoError: return "IoError";
    case ErrorCode::kFormatError: return "FormatError";
    case ErrorCode::kTooManyLists: return "TooManyLists";
    case ErrorCode::kIndexStoreMismatch: return "IndexStoreMismatch";
    case ErrorCode::kNonPositiveTemperature: return "NonPositiveTemperature";
    case ErrorCode::kEmptyNeighborSet: return "EmptyNeighborSet";
    case ErrorCode::kLengthMismatch: return "LengthMismatch";
    case ErrorCode::kSpaceMismatch: return "SpaceMismatch";
    case ErrorCode::kUnknownToken: return "UnknownToken";
    case ErrorCode::kMissingBaseline: return "MissingBaseline";
    case ErrorCode::kLabelSpaceMismatch: return "LabelSpaceMismatch";
    case ErrorCode::kInvalidSpec: return "InvalidSpec";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message,
             std::optional<std::uint64_t> location)
    : std::runtime_error(std::string(error_code_name(code)) + ": " + message),
      code_(code),
      location_(location) {}

LabelSpace LabelSpace::make(std::vector<std::string> labels) {
  if (labels.empty()) {
    throw Error(ErrorCode::kEmptyLabelSpace, "label list is empty");
  }
  auto table = std::make_shared<Table>();
  table->positions.reserve(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (!table->positions.emplace(labels[i], i).second) {
      throw Error(ErrorCode::kDuplicateLabel, "duplicate label '" + labels[i] + "'");
    }
  }
  table->labels = std::move(labels);
  return LabelSpace(std::move(table));
}

LabelSpace LabelSpace::token_ids(std::size_t vocab_size) {
  std::vector<std::string> labels;
  labels.reserve(vocab_size);
  for (std::size_t i = 0; i < vocab_size; ++i) labels.push_back(std::to_string(i));
  return make(std::move(labels));
}

std::optional<std::size_t> LabelSpace::find(std::string_view label) const {
  auto it = table_->positions.find(std::string(label));
  if (it == table_->positions.end()) return std::nullopt;
  return it->second;
}

std::size_t LabelSpace::index(std::string_view label) const {
  auto pos = find(label);
  if (!pos) {
    throw Error(ErrorCode::kUnknownLabel, "label '" + std::string(label) + "' not in label space");
  }
  return *pos;
}

bool operator==(const LabelSpace& a, const LabelSpace& b) {
  return a.table_ == b.table_ || a.table_->labels == b.table_->labels;
}

Distribution::Distribution(LabelSpace space, std::vector<double> probs)
    : space_(std::move(space)), probs_(std::move(probs)) {
  if (probs_.size() != space_.size()) {
    throw Error(ErrorCode::kInvalidDistribution,
                "distribution has " + std::to_string(probs_.size()) + " entries for a label space of " +
                    std::to_string(space_.size()));
  }
  double sum = 0.0;
  for (double p : probs_) {
    if (!std::isfinite(p) || p < 0.0) {
      throw Error(ErrorCode::kInvalidDistribution, "negative or non-finite probability");
    }
    sum += p;
  }
  if (std::abs(sum - 1.0) > kDistributionTolerance) {
    throw Error(ErrorCode::kInvalidDistribution, "probabilities sum to " + std::to_string(sum));
  }
}

Distribution Distribution::uniform(const LabelSpace& space) {
  return Distribution(space, std::vector<double>(space.size(), 1.0 / static_cast<double>(space.size())));
}

Distribution Distribution::point_mass(const LabelSpace& space, std::size_t index) {
  std::vector<double> probs(space.size(), 0.0);
  probs.at(index) = 1.0;
  return Distribution(space, std::move(probs));
}

std::size_t argmax_index(std::span<const double> values) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

ArgmaxResult distribution_argmax(const Distribution& d) {
  std::size_t best = argmax_index(d.probs());
  return {best, d.space().label(best), d[best]};
}

void QueryConfig::validate(std::optional<std::size_t> n_heads) const {
  if (k < 1) throw Error(ErrorCode::kInvalidConfig, "k must be at least 1");
  if (!(temperature > 0.0) || !std::isfinite(temperature)) {
    throw Error(ErrorCode::kNonPositiveTemperature, "temperature must be a positive finite number");
  }
  if (!(lambda >= 0.0 && lambda <= 1.0)) {
    throw Error(ErrorCode::kInvalidConfig, "lambda must lie in [0, 1]");
  }
  if (head_keep) {
    if (head_keep->empty()) throw Error(ErrorCode::kEmptyKeepSet, "head keep set is empty");
    std::vector<bool> seen(n_heads.value_or(0), false);
    for (std::size_t h : *head_keep) {
      if (n_heads && h >= *n_heads) {
        throw Error(ErrorCode::kUnknownHead, "head " + std::to_string(h) + " out of range");
      }
      if (n_heads) {
        if (seen[h]) throw Error(ErrorCode::kInvalidConfig, "head " + std::to_string(h) + " listed twice");
        seen[h] = true;
      }
    }
  }
}

void check_finite(std::span<const double> values, std::string_view what) {
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) {
      throw Error(ErrorCode::kNonFinite, std::string(what) + " has a non-finite entry at " + std::to_string(i));
    }
  }
}

}  // namespace rtd
