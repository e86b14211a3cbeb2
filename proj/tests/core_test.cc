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

#include "rtd/core.h"

namespace rtd {
namespace {

TEST(LabelSpaceTest, PreservesOrder) {
  const auto space = LabelSpace::make({"A", "B", "C", "D"});
  EXPECT_EQ(space.size(), 4u);
  EXPECT_EQ(space.label(2), "C");
  EXPECT_EQ(space.index("D"), 3u);
  EXPECT_FALSE(space.contains("E"));
}

TEST(LabelSpaceTest, RejectsDuplicatesAndEmpty) {
  try {
    LabelSpace::make({"A", "A"});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDuplicateLabel);
  }
  try {
    LabelSpace::make({});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kEmptyLabelSpace);
  }
}

TEST(LabelSpaceTest, VocabularyScale) {
  const auto space = LabelSpace::token_ids(32000);
  EXPECT_EQ(space.size(), 32000u);
  for (std::size_t i : {0u, 1u, 31999u}) EXPECT_EQ(space.index(space.label(i)), i);
}

TEST(DistributionTest, ValidatesEntries) {
  const auto space = LabelSpace::make({"A", "B"});
  EXPECT_NO_THROW(Distribution(space, {0.25, 0.75}));
  EXPECT_THROW(Distribution(space, {0.5, 0.6}), Error);
  EXPECT_THROW(Distribution(space, {1.5, -0.5}), Error);
  EXPECT_THROW(Distribution(space, {1.0}), Error);
}

TEST(DistributionTest, Argmax) {
  const auto abc = LabelSpace::make({"A", "B", "C"});
  auto r = distribution_argmax(Distribution(abc, {0.1, 0.7, 0.2}));
  EXPECT_EQ(r.label, "B");
  EXPECT_DOUBLE_EQ(r.probability, 0.7);

  r = distribution_argmax(Distribution(LabelSpace::make({"A", "B"}), {0.5, 0.5}));
  EXPECT_EQ(r.label, "A");
  EXPECT_DOUBLE_EQ(r.probability, 0.5);

  r = distribution_argmax(Distribution(LabelSpace::make({"A"}), {1.0}));
  EXPECT_EQ(r.label, "A");
  EXPECT_DOUBLE_EQ(r.probability, 1.0);
}

TEST(DistributionTest, ArgmaxInvariantUnderRescaling) {
  const auto space = LabelSpace::make({"A", "B", "C", "D"});
  const std::vector<double> raw = {0.3, 0.9, 0.9, 0.1};
  for (double scale : {0.5, 3.0, 1e6}) {
    std::vector<double> p;
    double total = 0.0;
    for (double x : raw) total += x * scale;
    for (double x : raw) p.push_back(x * scale / total);
    EXPECT_EQ(distribution_argmax(Distribution(space, p)).label, "B");
  }
}

TEST(QueryConfigTest, DefaultsAndValidation) {
  QueryConfig cfg;
  EXPECT_EQ(cfg.k, 1024u);
  EXPECT_EQ(cfg.temperature, 750.0);
  EXPECT_EQ(cfg.lambda, 1.0);
  EXPECT_NO_THROW(cfg.validate());

  auto expect_code = [](QueryConfig c, ErrorCode code, std::optional<std::size_t> heads = std::nullopt) {
    try {
      c.validate(heads);
      ADD_FAILURE() << "expected " << error_code_name(code);
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), code);
    }
  };
  QueryConfig bad = cfg;
  bad.temperature = 0.0;
  expect_code(bad, ErrorCode::kNonPositiveTemperature);
  bad = cfg;
  bad.lambda = 1.5;
  expect_code(bad, ErrorCode::kInvalidConfig);
  bad = cfg;
  bad.k = 0;
  expect_code(bad, ErrorCode::kInvalidConfig);
  bad = cfg;
  bad.head_keep = std::vector<std::size_t>{};
  expect_code(bad, ErrorCode::kEmptyKeepSet);
  bad.head_keep = std::vector<std::size_t>{4};
  expect_code(bad, ErrorCode::kUnknownHead, 4);
}

}  // namespace
}  // namespace rtd
