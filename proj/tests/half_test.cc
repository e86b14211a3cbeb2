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

#include <gtest/gtest.h>

#include <Eigen/Core>
#include <cmath>
#include <cstring>
#include <limits>
#include <random>

#include "rtd/half.h"

namespace rtd {
namespace {

std::uint16_t eigen_bits(float f) { return Eigen::numext::bit_cast<std::uint16_t>(Eigen::half(f)); }

TEST(HalfTest, MatchesEigenOnRandomFloats) {
  std::mt19937 rng(11);
  std::uniform_int_distribution<std::uint32_t> bits;
  for (int i = 0; i < 200000; ++i) {
    std::uint32_t b = bits(rng);
    float f;
    std::memcpy(&f, &b, sizeof f);
    if (std::isnan(f)) continue;
    ASSERT_EQ(float_to_half(f), eigen_bits(f)) << "input bits 0x" << std::hex << b;
  }
}

TEST(HalfTest, MatchesEigenNearBoundaries) {
  for (float f : {0.0f, -0.0f, 1.0f, 65504.0f, 65519.0f, 65520.0f, 1e-8f, 5.96e-8f, 2.98e-8f, 6.1e-5f,
                  std::numeric_limits<float>::infinity(), -std::numeric_limits<float>::infinity()}) {
    EXPECT_EQ(float_to_half(f), eigen_bits(f)) << f;
  }
}

TEST(HalfTest, EveryHalfWidensExactly) {
  for (std::uint32_t b = 0; b < 0x10000; ++b) {
    const auto h = static_cast<std::uint16_t>(b);
    const float ours = half_to_float(h);
    const float ref = static_cast<float>(Eigen::numext::bit_cast<Eigen::half>(h));
    if (std::isnan(ref)) {
      EXPECT_TRUE(std::isnan(ours));
      continue;
    }
    ASSERT_EQ(std::memcmp(&ours, &ref, sizeof ours), 0) << b;
    ASSERT_EQ(float_to_half(ours), h) << b;
  }
}

TEST(HalfTest, QuantizeIsIdempotent) {
  for (float f : {0.1f, -3.14159f, 1234.5678f}) EXPECT_EQ(quantize_half(quantize_half(f)), quantize_half(f));
}

}  // namespace
}  // namespace rtd
