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

#include <algorithm>
#include <random>
#include <set>

#include "oracle.h"
#include "rtd/knn.h"

namespace rtd {
namespace {

ReferenceDatastore store_from(const testing::RandomInstance& inst) {
  std::vector<std::string> labels;
  for (std::size_t i = 0; i < inst.n_labels; ++i) labels.push_back("L" + std::to_string(i));
  return build_datastore(inst.keys, inst.values, LabelSpace::make(labels), HeadLayout::make(inst.dim, 1),
                         Dtype::kF32);
}

ReferenceDatastore gaussian_store(std::size_t size, std::size_t dim, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> g;
  std::vector<float> keys(size * dim);
  for (auto& x : keys) x = g(rng);
  std::vector<std::uint32_t> values(size, 0);
  return build_datastore(keys, values, LabelSpace::make({"A"}), HeadLayout::make(dim, 1), Dtype::kF32);
}

TEST(ExactTopkTest, PythagoreanExample) {
  const std::vector<float> keys = {0, 0, 3, 4, 6, 8};
  const std::vector<std::uint32_t> values = {0, 0, 0};
  const auto store = build_datastore(keys, values, LabelSpace::make({"A"}), HeadLayout::make(2, 1), Dtype::kF32);
  const auto out = exact_topk(std::vector<double>{0, 0}, store, 2);
  ASSERT_EQ(out.size(), 2u);
  EXPECT_EQ(out.items[0].distance, 0.0);
  EXPECT_EQ(out.items[0].entry, 0u);
  EXPECT_EQ(out.items[1].distance, 5.0);
  EXPECT_EQ(out.items[1].entry, 1u);
  EXPECT_FALSE(out.clamped);

  const auto all = exact_topk(std::vector<double>{0, 0}, store, 5);
  EXPECT_EQ(all.size(), 3u);
  EXPECT_TRUE(all.clamped);
  EXPECT_EQ(all.items[2].distance, 10.0);
}

TEST(ExactTopkTest, TiesPreferLowerEntry) {
  const std::vector<float> keys = {1, 0, -1, 0, 0, 1, 0, -1};
  const std::vector<std::uint32_t> values = {0, 1, 0, 1};
  const auto store =
      build_datastore(keys, values, LabelSpace::make({"A", "B"}), HeadLayout::make(2, 1), Dtype::kF32);
  const auto out = exact_topk(std::vector<double>{0, 0}, store, 3);
  ASSERT_EQ(out.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(out.items[i].entry, i);
}

TEST(ExactTopkTest, DimensionMismatch) {
  const auto store = gaussian_store(4, 3, 1);
  try {
    exact_topk(std::vector<double>{0, 0}, store, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDimensionMismatch);
  }
}

TEST(ExactTopkTest, MatchesBruteForceSortedPrefix) {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 60; ++trial) {
    const auto inst = testing::random_instance(rng, 32, 500);
    const auto store = store_from(inst);
    const auto sorted = testing::oracle_sorted_neighbors(inst.keys, inst.dim, inst.query);
    for (std::size_t k : {std::size_t{1}, std::size_t{7}, std::size_t{64}}) {
      const auto out = exact_topk(inst.query, store, k);
      ASSERT_EQ(out.size(), std::min(k, inst.size));
      for (std::size_t i = 0; i < out.size(); ++i) {
        EXPECT_NEAR(out.items[i].distance, sorted[i].distance, 1e-9);
        if (i > 0) EXPECT_LE(out.items[i - 1].distance, out.items[i].distance);
        EXPECT_EQ(out.items[i].value, inst.values[out.items[i].entry]);
      }
    }
  }
}

TEST(ExactTopkTest, DistanceMultisetIgnoresStoreOrder) {
  std::mt19937_64 rng(77);
  auto inst = testing::random_instance(rng, 16, 300);
  const auto before = exact_topk(inst.query, store_from(inst), 20);
  std::vector<std::size_t> perm(inst.size);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  auto shuffled = inst;
  for (std::size_t i = 0; i < inst.size; ++i) {
    std::copy_n(inst.keys.begin() + static_cast<std::ptrdiff_t>(perm[i] * inst.dim), inst.dim,
                shuffled.keys.begin() + static_cast<std::ptrdiff_t>(i * inst.dim));
    shuffled.values[i] = inst.values[perm[i]];
  }
  const auto after = exact_topk(inst.query, store_from(shuffled), 20);
  ASSERT_EQ(before.size(), after.size());
  for (std::size_t i = 0; i < before.size(); ++i) EXPECT_EQ(before.items[i].distance, after.items[i].distance);
}

TEST(IvfTest, SingleListIsExact) {
  const auto store = gaussian_store(300, 8, 3);
  const auto index = build_ivf(store, 1, 0);
  ASSERT_EQ(index.n_lists(), 1u);
  EXPECT_EQ(index.postings[0].size(), 300u);
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g;
  for (int q = 0; q < 10; ++q) {
    std::vector<double> query(8);
    for (auto& x : query) x = g(rng);
    EXPECT_EQ(approx_topk(index, store, query, 10, 1).items, exact_topk(query, store, 10).items);
  }
}

TEST(IvfTest, OneListPerDistinctKey) {
  const auto store = gaussian_store(40, 4, 4);
  const auto index = build_ivf(store, 40, 1);
  std::set<std::uint32_t> seen;
  for (const auto& list : index.postings) {
    ASSERT_EQ(list.size(), 1u);
    seen.insert(list[0]);
  }
  EXPECT_EQ(seen.size(), 40u);
}

TEST(IvfTest, DeterministicPerSeed) {
  const auto store = gaussian_store(500, 8, 6);
  EXPECT_EQ(build_ivf(store, 16, 42), build_ivf(store, 16, 42));
  EXPECT_NE(build_ivf(store, 16, 42).centroids, build_ivf(store, 16, 43).centroids);
}

TEST(IvfTest, FullProbeIsExact) {
  const auto store = gaussian_store(800, 16, 7);
  const auto index = build_ivf(store, 12, 9);
  std::mt19937_64 rng(8);
  std::normal_distribution<double> g;
  for (int q = 0; q < 10; ++q) {
    std::vector<double> query(16);
    for (auto& x : query) x = g(rng);
    EXPECT_EQ(approx_topk(index, store, query, 25, 12).items, exact_topk(query, store, 25).items);
  }
}

TEST(IvfTest, ApproxNeverBeatsExactAtAnyRank) {
  const auto store = gaussian_store(2000, 16, 10);
  const auto index = build_ivf(store, 32, 2);
  std::mt19937_64 rng(11);
  std::normal_distribution<double> g;
  for (int q = 0; q < 20; ++q) {
    std::vector<double> query(16);
    for (auto& x : query) x = g(rng);
    const auto approx = approx_topk(index, store, query, 16, 2);
    const auto exact = exact_topk(query, store, 16);
    for (std::size_t i = 0; i < approx.size(); ++i) EXPECT_GE(approx.items[i].distance, exact.items[i].distance);
  }
}

TEST(IvfTest, Errors) {
  const auto store = gaussian_store(10, 4, 12);
  auto code = [](const std::function<void()>& fn) {
    try {
      fn();
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::kEmptyInput;
  };
  EXPECT_EQ(code([&] { build_ivf(store, 11, 0); }), ErrorCode::kTooManyLists);
  EXPECT_EQ(code([&] { build_ivf(store, 0, 0); }), ErrorCode::kInvalidConfig);
  const auto index = build_ivf(store, 2, 0);
  const auto other = gaussian_store(10, 4, 13);
  const std::vector<double> q(4, 0.0);
  EXPECT_EQ(code([&] { approx_topk(index, other, q, 1, 1); }), ErrorCode::kIndexStoreMismatch);
  EXPECT_EQ(code([&] { approx_topk(index, store, q, 1, 3); }), ErrorCode::kInvalidConfig);
}

TEST(IvfTest, RtixRoundTrip) {
  const auto store = gaussian_store(200, 8, 14);
  const auto index = build_ivf(store, 8, 3);
  const auto bytes = encode_ivf(index);
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "RTIX");
  EXPECT_EQ(decode_ivf(bytes), index);
  auto bad = bytes;
  bad[1] = 'Q';
  EXPECT_THROW(decode_ivf(bad), Error);
  std::vector<std::uint8_t> cut(bytes.begin(), bytes.end() - 2);
  EXPECT_THROW(decode_ivf(cut), Error);
}

}  // namespace
}  // namespace rtd
