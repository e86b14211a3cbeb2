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

#include "rtd/datastore.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "binary_io.h"
#include "rtd/half.h"

namespace rtd {

std::size_t bytes_per_value(Dtype dtype) { return dtype == Dtype::kF16 ? 2 : 4; }

std::string_view dtype_name(Dtype dtype) { return dtype == Dtype::kF16 ? "f16" : "f32"; }

Dtype parse_dtype(std::string_view name) {
  if (name == "f32") return Dtype::kF32;
  if (name == "f16") return Dtype::kF16;
  throw Error(ErrorCode::kInvalidConfig, "unsupported dtype '" + std::string(name) + "' (expected f32 or f16)");
}

HeadLayout HeadLayout::make(std::size_t model_dim, std::size_t n_heads) {
  if (model_dim == 0 || n_heads == 0) {
    throw Error(ErrorCode::kInvalidLayout, "model_dim and n_heads must be positive");
  }
  if (model_dim % n_heads != 0) {
    throw Error(ErrorCode::kInvalidLayout, "n_heads " + std::to_string(n_heads) +
                                               " does not divide model_dim " + std::to_string(model_dim));
  }
  return {model_dim, n_heads, model_dim / n_heads};
}

// ---------------------------------------------------------------------------
// KeyMatrix

KeyMatrix::KeyMatrix(std::size_t rows, std::size_t cols, Dtype dtype) : rows_(rows), cols_(cols), dtype_(dtype) {
  if (dtype == Dtype::kF16) {
    f16_.assign(rows * cols, 0);
  } else {
    f32_.assign(rows * cols, 0.0f);
  }
}

float KeyMatrix::at(std::size_t row, std::size_t col) const {
  const std::size_t i = row * cols_ + col;
  return dtype_ == Dtype::kF16 ? half_to_float(f16_[i]) : f32_[i];
}

void KeyMatrix::read_row(std::size_t row, std::span<double> out) const {
  const std::size_t base = row * cols_;
  if (dtype_ == Dtype::kF16) {
    for (std::size_t c = 0; c < cols_; ++c) out[c] = half_to_float(f16_[base + c]);
  } else {
    for (std::size_t c = 0; c < cols_; ++c) out[c] = f32_[base + c];
  }
}

std::vector<double> KeyMatrix::row(std::size_t row) const {
  std::vector<double> out(cols_);
  read_row(row, out);
  return out;
}

namespace {

template <typename Widen, typename T>
double squared_distance_impl(const T* key, const double* q, std::size_t n, Widen widen) {
  // Four independent accumulators keep the FP dependency chain short.
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  std::size_t c = 0;
  for (; c + 4 <= n; c += 4) {
    const double d0 = widen(key[c]) - q[c];
    const double d1 = widen(key[c + 1]) - q[c + 1];
    const double d2 = widen(key[c + 2]) - q[c + 2];
    const double d3 = widen(key[c + 3]) - q[c + 3];
    s0 += d0 * d0;
    s1 += d1 * d1;
    s2 += d2 * d2;
    s3 += d3 * d3;
  }
  for (; c < n; ++c) {
    const double d = widen(key[c]) - q[c];
    s0 += d * d;
  }
  return (s0 + s1) + (s2 + s3);
}

}  // namespace

double KeyMatrix::squared_distance(std::size_t row, std::span<const double> query) const {
  const std::size_t base = row * cols_;
  if (dtype_ == Dtype::kF16) {
    return squared_distance_impl(f16_.data() + base, query.data(), cols_,
                                 [](std::uint16_t h) { return static_cast<double>(half_to_float(h)); });
  }
  return squared_distance_impl(f32_.data() + base, query.data(), cols_,
                               [](float f) { return static_cast<double>(f); });
}

void KeyMatrix::set(std::size_t row, std::size_t col, float value) {
  const std::size_t i = row * cols_ + col;
  if (dtype_ == Dtype::kF16) {
    f16_[i] = float_to_half(value);
  } else {
    f32_[i] = value;
  }
}

void KeyMatrix::copy_columns_from(const KeyMatrix& src, std::size_t first, std::size_t count, std::size_t dest_col) {
  for (std::size_t r = 0; r < rows_; ++r) {
    const std::size_t s = r * src.cols_ + first;
    const std::size_t d = r * cols_ + dest_col;
    if (dtype_ == Dtype::kF16) {
      std::copy_n(src.f16_.begin() + s, count, f16_.begin() + d);
    } else {
      std::copy_n(src.f32_.begin() + s, count, f32_.begin() + d);
    }
  }
}

KeyMatrix KeyMatrix::prefix(std::size_t n_rows) const {
  KeyMatrix out(n_rows, cols_, dtype_);
  if (dtype_ == Dtype::kF16) {
    std::copy_n(f16_.begin(), n_rows * cols_, out.f16_.begin());
  } else {
    std::copy_n(f32_.begin(), n_rows * cols_, out.f32_.begin());
  }
  return out;
}

std::uint64_t hash_contents(const KeyMatrix& keys, std::span<const std::uint32_t> values) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  auto mix = [&h](const void* data, std::size_t n) {
    const auto* p = static_cast<const std::uint8_t*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= p[i];
      h *= 0x100000001b3ull;
    }
  };
  const std::uint64_t header[3] = {keys.rows(), keys.cols(), static_cast<std::uint64_t>(keys.dtype())};
  mix(header, sizeof(header));
  if (keys.dtype() == Dtype::kF16) {
    mix(keys.f16_data().data(), keys.f16_data().size_bytes());
  } else {
    mix(keys.f32_data().data(), keys.f32_data().size_bytes());
  }
  mix(values.data(), values.size_bytes());
  return h;
}

std::uint64_t key_storage_bytes(std::uint64_t dims, Dtype dtype, std::uint64_t size) {
  return dims * bytes_per_value(dtype) * size;
}

// ---------------------------------------------------------------------------
// ReferenceDatastore

ReferenceDatastore::ReferenceDatastore(KeyMatrix keys, std::vector<std::uint32_t> values, LabelSpace label_space,
                                       HeadLayout layout)
    : keys_(std::move(keys)),
      values_(std::make_shared<const std::vector<std::uint32_t>>(std::move(values))),
      label_space_(std::move(label_space)),
      layout_(layout) {
  if (values_->empty()) throw Error(ErrorCode::kEmptyInput, "datastore needs at least one entry");
  if (keys_.rows() != values_->size()) {
    throw Error(ErrorCode::kLengthMismatch, "key rows and value count differ");
  }
  if (keys_.cols() != layout_.model_dim || layout_.n_heads * layout_.head_dim != layout_.model_dim) {
    throw Error(ErrorCode::kDimensionMismatch, "key width does not match the head layout");
  }
  for (std::uint32_t v : *values_) {
    if (v >= label_space_.size()) throw Error(ErrorCode::kUnknownLabel, "value index out of label range");
  }
  hash_ = hash_contents(keys_, *values_);
}

ReferenceDatastore ReferenceDatastore::prefix(std::size_t n) const {
  if (n == 0 || n > size()) {
    throw Error(ErrorCode::kInvalidConfig, "prefix " + std::to_string(n) + " outside [1, " + std::to_string(size()) + "]");
  }
  std::vector<std::uint32_t> values(values_->begin(), values_->begin() + static_cast<std::ptrdiff_t>(n));
  return ReferenceDatastore(keys_.prefix(n), std::move(values), label_space_, layout_);
}

ReferenceDatastore build_datastore(std::span<const float> keys, std::span<const std::uint32_t> values,
                                   const LabelSpace& label_space, const HeadLayout& layout, Dtype dtype) {
  if (values.empty()) throw Error(ErrorCode::kEmptyInput, "no key/value pairs given");
  if (keys.size() != values.size() * layout.model_dim) {
    throw Error(ErrorCode::kDimensionMismatch, "key buffer is not size x model_dim");
  }
  KeyMatrix matrix(values.size(), layout.model_dim, dtype);
  for (std::size_t i = 0; i < keys.size(); ++i) {
    if (!std::isfinite(keys[i])) {
      throw Error(ErrorCode::kNonFinite, "key " + std::to_string(i / layout.model_dim) + " has a non-finite entry");
    }
  }
  if (dtype == Dtype::kF32) {
    std::copy(keys.begin(), keys.end(), matrix.mutable_f32().begin());
  } else {
    auto out = matrix.mutable_f16();
    for (std::size_t i = 0; i < keys.size(); ++i) out[i] = float_to_half(keys[i]);
  }
  return ReferenceDatastore(std::move(matrix), std::vector<std::uint32_t>(values.begin(), values.end()), label_space,
                            layout);
}

ReferenceDatastore build_datastore(const std::vector<LabeledKey>& pairs, const LabelSpace& label_space,
                                   const HeadLayout& layout, Dtype dtype) {
  if (pairs.empty()) throw Error(ErrorCode::kEmptyInput, "no key/value pairs given");
  std::vector<float> keys;
  keys.reserve(pairs.size() * layout.model_dim);
  std::vector<std::uint32_t> values;
  values.reserve(pairs.size());
  for (std::size_t j = 0; j < pairs.size(); ++j) {
    const auto& p = pairs[j];
    if (p.key.size() != layout.model_dim) {
      throw Error(ErrorCode::kDimensionMismatch, "pair " + std::to_string(j) + " has key length " +
                                                     std::to_string(p.key.size()) + ", expected " +
                                                     std::to_string(layout.model_dim));
    }
    check_finite(p.key, "pair " + std::to_string(j) + " key");
    for (double x : p.key) keys.push_back(static_cast<float>(x));
    values.push_back(static_cast<std::uint32_t>(label_space.index(p.label)));
  }
  return build_datastore(keys, values, label_space, layout, dtype);
}

// ---------------------------------------------------------------------------
// Multi-head

MultiHeadDatastore::MultiHeadDatastore(std::vector<SubStore> subs,
                                       std::shared_ptr<const std::vector<std::uint32_t>> values,
                                       LabelSpace label_space, HeadLayout layout)
    : subs_(std::move(subs)), values_(std::move(values)), label_space_(std::move(label_space)), layout_(layout) {
  if (subs_.empty()) throw Error(ErrorCode::kEmptyKeepSet, "multi-head store has no sub-stores");
}

Dtype MultiHeadDatastore::dtype() const noexcept { return subs_.front().keys.dtype(); }

std::vector<double> MultiHeadDatastore::slice_query(std::size_t i, std::span<const double> query) const {
  if (query.size() != layout_.model_dim) {
    throw Error(ErrorCode::kDimensionMismatch, "query length " + std::to_string(query.size()) +
                                                   " does not match model_dim " + std::to_string(layout_.model_dim));
  }
  const auto& sub = subs_.at(i);
  std::vector<double> out;
  out.reserve(sub.keys.cols());
  for (std::size_t h : sub.heads) {
    auto first = query.begin() + static_cast<std::ptrdiff_t>(h * layout_.head_dim);
    out.insert(out.end(), first, first + static_cast<std::ptrdiff_t>(layout_.head_dim));
  }
  return out;
}

double HeadMergePlan::merge_factor() const {
  if (groups.empty()) return 0.0;
  std::size_t total = 0;
  for (const auto& g : groups) total += g.size();
  return static_cast<double>(total) / static_cast<double>(groups.size());
}

MultiHeadDatastore split_heads(const ReferenceDatastore& store) {
  const auto& layout = store.layout();
  std::vector<SubStore> subs;
  subs.reserve(layout.n_heads);
  for (std::size_t h = 0; h < layout.n_heads; ++h) {
    SubStore sub{{h}, KeyMatrix(store.size(), layout.head_dim, store.dtype()), 0};
    sub.keys.copy_columns_from(store.keys(), h * layout.head_dim, layout.head_dim, 0);
    sub.content_hash = hash_contents(sub.keys, store.values());
    subs.push_back(std::move(sub));
  }
  return MultiHeadDatastore(std::move(subs), store.shared_values(), store.label_space(), layout);
}

MultiHeadDatastore merge_heads(const MultiHeadDatastore& mh, const HeadMergePlan& plan) {
  if (plan.groups.empty()) throw Error(ErrorCode::kInvalidPlan, "merge plan has no groups");
  std::vector<bool> used(mh.n_sub_stores(), false);
  for (const auto& group : plan.groups) {
    if (group.empty()) throw Error(ErrorCode::kInvalidPlan, "merge plan contains an empty group");
    for (std::size_t s : group) {
      if (s >= mh.n_sub_stores()) {
        throw Error(ErrorCode::kInvalidPlan, "head " + std::to_string(s) + " out of range");
      }
      if (used[s]) throw Error(ErrorCode::kInvalidPlan, "head " + std::to_string(s) + " appears in two groups");
      used[s] = true;
    }
  }

  std::vector<SubStore> subs;
  subs.reserve(plan.groups.size());
  for (const auto& group : plan.groups) {
    std::size_t width = 0;
    for (std::size_t s : group) width += mh.sub_store(s).keys.cols();
    SubStore merged{{}, KeyMatrix(mh.size(), width, mh.dtype()), 0};
    std::size_t col = 0;
    for (std::size_t s : group) {
      const auto& src = mh.sub_store(s);
      merged.keys.copy_columns_from(src.keys, 0, src.keys.cols(), col);
      col += src.keys.cols();
      merged.heads.insert(merged.heads.end(), src.heads.begin(), src.heads.end());
    }
    merged.content_hash = hash_contents(merged.keys, mh.values());
    subs.push_back(std::move(merged));
  }
  return MultiHeadDatastore(std::move(subs), mh.shared_values(), mh.label_space(), mh.layout());
}

MultiHeadDatastore evict_heads(const MultiHeadDatastore& mh, std::span<const std::size_t> keep) {
  if (keep.empty()) throw Error(ErrorCode::kEmptyKeepSet, "keep set is empty");
  std::vector<bool> seen(mh.n_sub_stores(), false);
  std::vector<SubStore> subs;
  subs.reserve(keep.size());
  for (std::size_t s : keep) {
    if (s >= mh.n_sub_stores()) throw Error(ErrorCode::kUnknownHead, "head " + std::to_string(s) + " not available");
    if (seen[s]) throw Error(ErrorCode::kInvalidPlan, "head " + std::to_string(s) + " listed twice");
    seen[s] = true;
    subs.push_back(mh.sub_store(s));
  }
  return MultiHeadDatastore(std::move(subs), mh.shared_values(), mh.label_space(), mh.layout());
}

namespace {

std::uint64_t overhead_bytes(std::size_t size, const LabelSpace& space) {
  std::uint64_t bytes = static_cast<std::uint64_t>(size) * sizeof(std::uint32_t);
  for (const auto& l : space.labels()) bytes += l.size();
  return bytes;
}

}  // namespace

MemoryFootprint memory_footprint(const ReferenceDatastore& store) {
  return {key_storage_bytes(store.model_dim(), store.dtype(), store.size()),
          overhead_bytes(store.size(), store.label_space())};
}

MemoryFootprint memory_footprint(const MultiHeadDatastore& mh) {
  std::uint64_t dims = 0;
  for (const auto& sub : mh.sub_stores()) dims += sub.keys.cols();
  return {key_storage_bytes(dims, mh.dtype(), mh.size()), overhead_bytes(mh.size(), mh.label_space())};
}

// ---------------------------------------------------------------------------
// RTDS codec

namespace {

constexpr std::uint8_t kRtdsVersion = 1;

}  // namespace

std::vector<std::uint8_t> encode_datastore(const ReferenceDatastore& store) {
  detail::ByteWriter w;
  w.reserve(32 + memory_footprint(store).key_bytes + store.size() * 4);
  w.bytes("RTDS", 4);
  w.u8(kRtdsVersion);
  w.u8(static_cast<std::uint8_t>(store.dtype()));
  w.u8(0);
  w.u8(0);
  w.u32(static_cast<std::uint32_t>(store.model_dim()));
  w.u32(static_cast<std::uint32_t>(store.layout().n_heads));
  w.u64(store.size());
  w.u32(static_cast<std::uint32_t>(store.label_space().size()));
  for (const auto& label : store.label_space().labels()) {
    if (label.size() > 0xffff) throw Error(ErrorCode::kFormatError, "label longer than 65535 bytes");
    w.u16(static_cast<std::uint16_t>(label.size()));
    w.bytes(label.data(), label.size());
  }
  if (store.dtype() == Dtype::kF16) {
    for (std::uint16_t h : store.keys().f16_data()) w.u16(h);
  } else {
    for (float f : store.keys().f32_data()) w.f32(f);
  }
  for (std::uint32_t v : store.values()) w.u32(v);
  return w.take();
}

ReferenceDatastore decode_datastore(std::span<const std::uint8_t> bytes) {
  detail::ByteReader r(bytes);
  auto magic = r.bytes(4, "magic");
  if (std::string_view(reinterpret_cast<const char*>(magic.data()), 4) != "RTDS") {
    throw Error(ErrorCode::kFormatError, "bad magic, not an RTDS file", 0);
  }
  if (std::uint8_t version = r.u8("version"); version != kRtdsVersion) {
    throw Error(ErrorCode::kFormatError, "unsupported RTDS version " + std::to_string(version), 4);
  }
  const std::uint8_t dtype_byte = r.u8("dtype");
  if (dtype_byte > 1) throw Error(ErrorCode::kFormatError, "unknown dtype code " + std::to_string(dtype_byte), 5);
  const auto dtype = static_cast<Dtype>(dtype_byte);
  if (r.u8("reserved") != 0 || r.u8("reserved") != 0) {
    throw Error(ErrorCode::kFormatError, "reserved header bytes are not zero", 6);
  }
  const std::uint64_t dims_offset = r.offset();
  const std::uint32_t model_dim = r.u32("model_dim");
  const std::uint32_t n_heads = r.u32("n_heads");
  const std::uint64_t size = r.u64("size");
  const std::uint32_t label_count = r.u32("label_count");
  HeadLayout layout;
  try {
    layout = HeadLayout::make(model_dim, n_heads);
  } catch (const Error& e) {
    throw Error(ErrorCode::kFormatError, e.what(), dims_offset);
  }
  if (size == 0) throw Error(ErrorCode::kFormatError, "datastore declares zero entries", dims_offset + 8);
  if (label_count == 0) throw Error(ErrorCode::kFormatError, "datastore declares zero labels", dims_offset + 16);

  std::vector<std::string> labels;
  labels.reserve(label_count);
  for (std::uint32_t i = 0; i < label_count; ++i) {
    const std::uint16_t len = r.u16("label length");
    auto raw = r.bytes(len, "label bytes");
    labels.emplace_back(reinterpret_cast<const char*>(raw.data()), raw.size());
  }
  const std::uint64_t label_offset = r.offset();
  LabelSpace space = [&] {
    try {
      return LabelSpace::make(std::move(labels));
    } catch (const Error& e) {
      throw Error(ErrorCode::kFormatError, e.what(), label_offset);
    }
  }();

  // Declared sizes must agree with the file length exactly.
  const std::uint64_t key_bytes = key_storage_bytes(model_dim, dtype, size);
  const std::uint64_t expected = key_bytes + size * 4;
  if (size > r.remaining() || key_bytes / size != static_cast<std::uint64_t>(model_dim) * bytes_per_value(dtype) ||
      expected != r.remaining()) {
    throw Error(ErrorCode::kFormatError,
                "declared sizes need " + std::to_string(expected) + " payload bytes but file has " +
                    std::to_string(r.remaining()),
                r.offset());
  }

  KeyMatrix keys(size, model_dim, dtype);
  if (dtype == Dtype::kF16) {
    for (auto& h : keys.mutable_f16()) h = r.u16("keys");
  } else {
    for (auto& f : keys.mutable_f32()) f = r.f32("keys");
  }
  std::vector<std::uint32_t> values(size);
  for (auto& v : values) {
    const std::uint64_t at = r.offset();
    v = r.u32("values");
    if (v >= label_count) throw Error(ErrorCode::kFormatError, "value index out of label range", at);
  }
  return ReferenceDatastore(std::move(keys), std::move(values), std::move(space), layout);
}

namespace detail {

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path.string());
  in.seekg(0, std::ios::end);
  const auto size = static_cast<std::size_t>(in.tellg());
  in.seekg(0);
  std::vector<std::uint8_t> data(size);
  if (size > 0 && !in.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(size))) {
    throw Error(ErrorCode::kIoError, "failed reading " + path.string());
  }
  return data;
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIoError, "cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::kIoError, "failed writing " + path.string());
}

}  // namespace detail

void save_datastore(const ReferenceDatastore& store, const std::filesystem::path& path) {
  detail::write_file(path, encode_datastore(store));
}

ReferenceDatastore load_datastore(const std::filesystem::path& path) {
  return decode_datastore(detail::read_file(path));
}

}  // namespace rtd
