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
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "rtd/core.h"

namespace rtd {

enum class Dtype : std::uint8_t { kF32 = 0, kF16 = 1 };

std::size_t bytes_per_value(Dtype dtype);
std::string_view dtype_name(Dtype dtype);
/// Accepts "f32" / "f16"; throws InvalidConfig otherwise.
Dtype parse_dtype(std::string_view name);

struct HeadLayout {
  std::size_t model_dim = 0;
  std::size_t n_heads = 0;
  std::size_t head_dim = 0;

  /// Throws InvalidLayout unless model_dim is a positive multiple of n_heads.
  static HeadLayout make(std::size_t model_dim, std::size_t n_heads);

  friend bool operator==(const HeadLayout&, const HeadLayout&) = default;
};

/// Row-major rows x cols key storage in f32 or f16. Values are widened on
/// read; all arithmetic downstream happens in double.
class KeyMatrix {
 public:
  KeyMatrix() = default;
  KeyMatrix(std::size_t rows, std::size_t cols, Dtype dtype);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  Dtype dtype() const noexcept { return dtype_; }
  std::uint64_t key_bytes() const noexcept {
    return static_cast<std::uint64_t>(rows_) * cols_ * bytes_per_value(dtype_);
  }

  float at(std::size_t row, std::size_t col) const;
  /// Widens one row into `out` (length cols()).
  void read_row(std::size_t row, std::span<double> out) const;
  std::vector<double> row(std::size_t row) const;

  /// Squared L2 distance between row `row` and `query`, accumulated in double.
  double squared_distance(std::size_t row, std::span<const double> query) const;

  /// Stores `value`, rounding to binary16 for f16 matrices.
  void set(std::size_t row, std::size_t col, float value);

  /// Copies columns [first, first + count) of `src` into columns starting at
  /// `dest_col` of this matrix (same row count and dtype).
  void copy_columns_from(const KeyMatrix& src, std::size_t first, std::size_t count, std::size_t dest_col);

  /// Copies the first `n_rows` rows.
  KeyMatrix prefix(std::size_t n_rows) const;

  std::span<const float> f32_data() const noexcept { return f32_; }
  std::span<const std::uint16_t> f16_data() const noexcept { return f16_; }
  std::span<float> mutable_f32() noexcept { return f32_; }
  std::span<std::uint16_t> mutable_f16() noexcept { return f16_; }

  friend bool operator==(const KeyMatrix&, const KeyMatrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  Dtype dtype_ = Dtype::kF32;
  std::vector<float> f32_;
  std::vector<std::uint16_t> f16_;
};

/// Searchable view: keys plus the label index of each row.
struct KeyTable {
  const KeyMatrix* keys = nullptr;
  std::span<const std::uint32_t> values;
  std::uint64_t content_hash = 0;

  std::size_t size() const noexcept { return values.size(); }
  std::size_t width() const noexcept { return keys->cols(); }
};

/// FNV-1a over dims, dtype, key bytes and values. Identifies the exact
/// contents an index was trained on.
std::uint64_t hash_contents(const KeyMatrix& keys, std::span<const std::uint32_t> values);

struct LabeledKey {
  std::vector<double> key;
  std::string label;
};

struct MemoryFootprint {
  std::uint64_t key_bytes = 0;       // retained_dims * b * s_L
  std::uint64_t overhead_bytes = 0;  // value indices and label table, counted once
};

/// Key bytes for s_L entries of `dims` retained dimensions at dtype `dtype`.
std::uint64_t key_storage_bytes(std::uint64_t dims, Dtype dtype, std::uint64_t size);

class ReferenceDatastore {
 public:
  ReferenceDatastore(KeyMatrix keys, std::vector<std::uint32_t> values, LabelSpace label_space, HeadLayout layout);

  std::size_t size() const noexcept { return values_->size(); }
  std::size_t model_dim() const noexcept { return layout_.model_dim; }
  const HeadLayout& layout() const noexcept { return layout_; }
  Dtype dtype() const noexcept { return keys_.dtype(); }
  const LabelSpace& label_space() const noexcept { return label_space_; }
  const KeyMatrix& keys() const noexcept { return keys_; }
  std::span<const std::uint32_t> values() const noexcept { return *values_; }
  const std::shared_ptr<const std::vector<std::uint32_t>>& shared_values() const noexcept { return values_; }
  std::uint64_t content_hash() const noexcept { return hash_; }

  KeyTable table() const noexcept { return {&keys_, *values_, hash_}; }

  /// First `n` entries in build order.
  ReferenceDatastore prefix(std::size_t n) const;

 private:
  KeyMatrix keys_;
  std::shared_ptr<const std::vector<std::uint32_t>> values_;
  LabelSpace label_space_;
  HeadLayout layout_;
  std::uint64_t hash_ = 0;
};

/// One searchable slice of a multi-head store: the concatenation of the
/// listed original heads, in order.
struct SubStore {
  std::vector<std::size_t> heads;
  KeyMatrix keys;
  std::uint64_t content_hash = 0;
};

class MultiHeadDatastore {
 public:
  MultiHeadDatastore(std::vector<SubStore> subs, std::shared_ptr<const std::vector<std::uint32_t>> values,
                     LabelSpace label_space, HeadLayout layout);

  std::size_t n_sub_stores() const noexcept { return subs_.size(); }
  const SubStore& sub_store(std::size_t i) const { return subs_.at(i); }
  const std::vector<SubStore>& sub_stores() const noexcept { return subs_; }
  std::size_t size() const noexcept { return values_->size(); }
  const HeadLayout& layout() const noexcept { return layout_; }
  const LabelSpace& label_space() const noexcept { return label_space_; }
  std::span<const std::uint32_t> values() const noexcept { return *values_; }
  const std::shared_ptr<const std::vector<std::uint32_t>>& shared_values() const noexcept { return values_; }
  Dtype dtype() const noexcept;

  KeyTable table(std::size_t i) const { return {&subs_.at(i).keys, *values_, subs_.at(i).content_hash}; }

  /// Gathers the query dimensions that sub-store `i` covers.
  std::vector<double> slice_query(std::size_t i, std::span<const double> query) const;

 private:
  std::vector<SubStore> subs_;
  std::shared_ptr<const std::vector<std::uint32_t>> values_;
  LabelSpace label_space_;
  HeadLayout layout_;
};

struct HeadMergePlan {
  std::vector<std::vector<std::size_t>> groups;

  /// Average group size p.
  double merge_factor() const;
};

ReferenceDatastore build_datastore(const std::vector<LabeledKey>& pairs, const LabelSpace& label_space,
                                   const HeadLayout& layout, Dtype dtype);

/// Bulk variant: `keys` is row-major size x model_dim, `values` label indices.
ReferenceDatastore build_datastore(std::span<const float> keys, std::span<const std::uint32_t> values,
                                   const LabelSpace& label_space, const HeadLayout& layout, Dtype dtype);

MultiHeadDatastore split_heads(const ReferenceDatastore& store);
MultiHeadDatastore merge_heads(const MultiHeadDatastore& mh, const HeadMergePlan& plan);
/// `keep` indexes the current sub-stores.
MultiHeadDatastore evict_heads(const MultiHeadDatastore& mh, std::span<const std::size_t> keep);

MemoryFootprint memory_footprint(const ReferenceDatastore& store);
MemoryFootprint memory_footprint(const MultiHeadDatastore& mh);

void save_datastore(const ReferenceDatastore& store, const std::filesystem::path& path);
ReferenceDatastore load_datastore(const std::filesystem::path& path);

/// In-memory RTDS encoding, shared by the file functions.
std::vector<std::uint8_t> encode_datastore(const ReferenceDatastore& store);
ReferenceDatastore decode_datastore(std::span<const std::uint8_t> bytes);

}  // namespace rtd
