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
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "rtd/error.h"

namespace rtd {

/// Ordered set of distinct answer labels. Cheap to copy: copies share one
/// immutable table.
class LabelSpace {
 public:
  static LabelSpace make(std::vector<std::string> labels);

  /// Labels "0", "1", ..., "vocab_size-1" for generation mode where every
  /// token id is a label.
  static LabelSpace token_ids(std::size_t vocab_size);

  std::size_t size() const noexcept { return table_->labels.size(); }
  const std::string& label(std::size_t index) const { return table_->labels.at(index); }
  const std::vector<std::string>& labels() const noexcept { return table_->labels; }

  std::optional<std::size_t> find(std::string_view label) const;
  /// Throws UnknownLabel.
  std::size_t index(std::string_view label) const;
  bool contains(std::string_view label) const { return find(label).has_value(); }

  friend bool operator==(const LabelSpace& a, const LabelSpace& b);

 private:
  struct Table {
    std::vector<std::string> labels;
    std::unordered_map<std::string, std::size_t> positions;
  };
  explicit LabelSpace(std::shared_ptr<const Table> table) : table_(std::move(table)) {}

  std::shared_ptr<const Table> table_;
};

inline constexpr double kDistributionTolerance = 1e-6;

/// Dense probability vector over a LabelSpace. Constructors verify that
/// entries are nonnegative and sum to one within kDistributionTolerance.
class Distribution {
 public:
  Distribution(LabelSpace space, std::vector<double> probs);

  static Distribution uniform(const LabelSpace& space);
  static Distribution point_mass(const LabelSpace& space, std::size_t index);

  const LabelSpace& space() const noexcept { return space_; }
  const std::vector<double>& probs() const noexcept { return probs_; }
  std::size_t size() const noexcept { return probs_.size(); }
  double operator[](std::size_t i) const { return probs_[i]; }
  double prob(std::string_view label) const { return probs_[space_.index(label)]; }

 private:
  LabelSpace space_;
  std::vector<double> probs_;
};

struct ArgmaxResult {
  std::size_t index;
  std::string label;
  double probability;
};

/// Highest-probability label; ties go to the lowest label index.
ArgmaxResult distribution_argmax(const Distribution& d);

/// Index of the largest entry of `values`, lowest index on ties.
std::size_t argmax_index(std::span<const double> values);

struct QueryConfig {
  std::size_t k = 1024;
  double temperature = 750.0;
  double lambda = 1.0;
  std::optional<std::vector<std::size_t>> head_keep;

  /// Throws InvalidConfig / NonPositiveTemperature / EmptyKeepSet /
  /// UnknownHead. `n_heads` bounds head_keep when given.
  void validate(std::optional<std::size_t> n_heads = std::nullopt) const;
};

/// Throws NonFinite if any entry is NaN or infinite.
void check_finite(std::span<const double> values, std::string_view what);

}  // namespace rtd
