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

// Little-endian byte buffer helpers shared by the RTDS and RTIX codecs.

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rtd/error.h"

namespace rtd::detail {

class ByteWriter {
 public:
  void bytes(const void* data, std::size_t n) {
    const auto* p = static_cast<const std::uint8_t*>(data);
    buf_.insert(buf_.end(), p, p + n);
  }
  void u8(std::uint8_t v) { buf_.push_back(v); }
  void u16(std::uint16_t v) { put_le(v, 2); }
  void u32(std::uint32_t v) { put_le(v, 4); }
  void u64(std::uint64_t v) { put_le(v, 8); }
  void f32(float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    u32(bits);
  }
  std::vector<std::uint8_t> take() { return std::move(buf_); }
  void reserve(std::size_t n) { buf_.reserve(n); }

 private:
  void put_le(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  std::vector<std::uint8_t> buf_;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> data) : data_(data) {}

  std::uint64_t offset() const noexcept { return pos_; }
  std::uint64_t remaining() const noexcept { return data_.size() - pos_; }

  void require(std::uint64_t n, std::string_view what) const {
    if (remaining() < n) {
      throw Error(ErrorCode::kFormatError, "truncated while reading " + std::string(what), pos_);
    }
  }
  std::uint8_t u8(std::string_view what) {
    require(1, what);
    return data_[pos_++];
  }
  std::uint16_t u16(std::string_view what) { return static_cast<std::uint16_t>(get_le(2, what)); }
  std::uint32_t u32(std::string_view what) { return static_cast<std::uint32_t>(get_le(4, what)); }
  std::uint64_t u64(std::string_view what) { return get_le(8, what); }
  float f32(std::string_view what) {
    std::uint32_t bits = u32(what);
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
  }
  std::span<const std::uint8_t> bytes(std::uint64_t n, std::string_view what) {
    require(n, what);
    auto out = data_.subspan(pos_, n);
    pos_ += n;
    return out;
  }

 private:
  std::uint64_t get_le(int n, std::string_view what) {
    require(static_cast<std::uint64_t>(n), what);
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(data_[pos_ + i]) << (8 * i);
    pos_ += n;
    return v;
  }

  std::span<const std::uint8_t> data_;
  std::uint64_t pos_ = 0;
};

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace rtd::detail
