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

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace rtd {

enum class ErrorCode {
  kDuplicateLabel,
  kEmptyLabelSpace,
  kInvalidDistribution,
  kInvalidConfig,
  kNonFinite,
  kDimensionMismatch,
  kUnknownLabel,
  kEmptyInput,
  kInvalidLayout,
  kInvalidPlan,
  kEmptyKeepSet,
  kUnknownHead,
  kIoError,
  kFormatError,
  kTooManyLists,
  kIndexStoreMismatch,
  kNonPositiveTemperature,
  kEmptyNeighborSet,
  kLengthMismatch,
  kSpaceMismatch,
  kUnknownToken,
  kMissingBaseline,
  kLabelSpaceMismatch,
  kInvalidSpec,
};

std::string_view error_code_name(ErrorCode code);

// All library failures are reported through this exception. Format errors
// carry the byte offset (binary files) or 1-based line number (JSONL) where
// parsing stopped.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message,
        std::optional<std::uint64_t> location = std::nullopt);

  ErrorCode code() const noexcept { return code_; }
  std::optional<std::uint64_t> location() const noexcept { return location_; }

 private:
  ErrorCode code_;
  std::optional<std::uint64_t> location_;
};

}  // namespace rtd
