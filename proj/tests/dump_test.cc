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

#include <filesystem>
#include <fstream>
#include <sstream>

#include "rtd/dump.h"

namespace rtd {
namespace {

class DumpTest : public ::testing::Test {
 protected:
  std::filesystem::path dir_ = std::filesystem::temp_directory_path() / "rtd_dump_test";
  void SetUp() override { std::filesystem::create_directories(dir_); }
  void TearDown() override { std::filesystem::remove_all(dir_); }

  void write_text(const std::filesystem::path& p, const std::string& text) { std::ofstream(p) << text; }
};

EvalDump sample_dump() {
  EvalDump dump;
  dump.manifest = {4, 2, {"A", "B", "C"}, 2};
  dump.records.push_back({"q0", {0.5, -1.25, 3.0, 1e-7}, "B", {"A", "B"}, std::nullopt});
  Baseline base;
  base.space = Baseline::Space::kVocab;
  base.probs = {0.1, 0.2, 0.3, 0.4};
  base.answer_tokens = {{"A", 0}, {"B", 1}, {"C", 3}};
  dump.records.push_back({"q1", {1, 2, 3, 4}, "C", {"A", "B", "C"}, base});
  return dump;
}

TEST_F(DumpTest, ManifestPath) {
  EXPECT_EQ(manifest_path_for("data/x.jsonl"), std::filesystem::path("data/x.manifest.json"));
}

TEST_F(DumpTest, RoundTripIsExact) {
  const auto dump = sample_dump();
  write_dump(dump, dir_ / "d.jsonl");
  EXPECT_TRUE(std::filesystem::exists(dir_ / "d.manifest.json"));
  const auto back = read_dump(dir_ / "d.jsonl");
  EXPECT_EQ(back.manifest.model_dim, 4u);
  EXPECT_EQ(back.manifest.n_heads, 2u);
  EXPECT_EQ(back.manifest.labels, dump.manifest.labels);
  ASSERT_EQ(back.records.size(), 2u);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(back.records[i].id, dump.records[i].id);
    EXPECT_EQ(back.records[i].hidden_state, dump.records[i].hidden_state);
    EXPECT_EQ(back.records[i].gold, dump.records[i].gold);
    EXPECT_EQ(back.records[i].candidates, dump.records[i].candidates);
  }
  ASSERT_TRUE(back.records[1].baseline);
  EXPECT_EQ(back.records[1].baseline->probs, dump.records[1].baseline->probs);
  EXPECT_EQ(back.records[1].baseline->answer_tokens, dump.records[1].baseline->answer_tokens);
}

TEST_F(DumpTest, InfersManifestWhenAbsent) {
  write_text(dir_ / "n.jsonl",
             "{\"id\":\"a\",\"hidden_state\":[1,2],\"gold\":\"Y\",\"candidates\":[\"Y\",\"X\"]}\n"
             "\n"
             "{\"id\":\"b\",\"hidden_state\":[3,4],\"gold\":\"X\",\"candidates\":[\"X\"]}\n");
  const auto dump = read_dump(dir_ / "n.jsonl");
  EXPECT_EQ(dump.manifest.model_dim, 2u);
  EXPECT_EQ(dump.manifest.n_heads, 1u);
  EXPECT_EQ(dump.manifest.labels, (std::vector<std::string>{"Y", "X"}));
  EXPECT_EQ(dump.manifest.record_count, 2u);
}

std::size_t error_line(const std::string& text, std::optional<DumpManifest> manifest = std::nullopt) {
  std::istringstream in(text);
  try {
    read_dump(in, manifest);
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kFormatError) << e.what();
    return static_cast<std::size_t>(e.location().value_or(0));
  }
  ADD_FAILURE() << "accepted: " << text;
  return 0;
}

TEST_F(DumpTest, ErrorsCarryLineNumbers) {
  const std::string good = "{\"id\":\"a\",\"hidden_state\":[1,2],\"gold\":\"A\",\"candidates\":[\"A\",\"B\"]}\n";
  EXPECT_EQ(error_line(good + "{\"id\":\"b\",\"hidden_st"), 2u);
  EXPECT_EQ(error_line(good + good + "{\"id\":\"c\",\"hidden_state\":[1],\"gold\":\"A\",\"candidates\":[\"A\"]}\n"),
            3u);
  EXPECT_EQ(error_line("{\"id\":\"a\",\"hidden_state\":[1,2],\"gold\":\"C\",\"candidates\":[\"A\",\"B\"]}\n"), 1u);
  EXPECT_EQ(error_line("{\"id\":\"a\",\"hidden_state\":[1,2],\"gold\":\"A\",\"candidates\":[\"A\",\"A\"]}\n"), 1u);
  EXPECT_EQ(error_line("{\"id\":\"a\",\"gold\":\"A\",\"candidates\":[\"A\"]}\n"), 1u);

  const DumpManifest m{2, 1, {"A", "B"}, 1};
  EXPECT_EQ(error_line("{\"id\":\"a\",\"hidden_state\":[1,2],\"gold\":\"Z\",\"candidates\":[\"Z\"]}\n", m), 1u);
  EXPECT_EQ(error_line(good + good, m), 2u);  // more records than the manifest declares
  EXPECT_EQ(error_line("{\"id\":\"a\",\"hidden_state\":[1,2],\"gold\":\"A\",\"candidates\":[\"A\"],"
                       "\"baseline\":{\"space\":\"labels\",\"probs\":[1]}}\n",
                       m),
            1u);
}

TEST_F(DumpTest, ManifestMismatchRejected) {
  write_dump(sample_dump(), dir_ / "m.jsonl");
  DumpManifest wrong = sample_dump().manifest;
  wrong.model_dim = 5;
  write_manifest(wrong, dir_ / "m.manifest.json");
  EXPECT_THROW(read_dump(dir_ / "m.jsonl"), Error);

  wrong = sample_dump().manifest;
  wrong.n_heads = 3;
  write_manifest(wrong, dir_ / "m.manifest.json");
  EXPECT_THROW(read_dump(dir_ / "m.jsonl"), Error);
}

TEST_F(DumpTest, DatastorePairs) {
  const auto pairs = datastore_pairs(sample_dump());
  ASSERT_EQ(pairs.size(), 2u);
  EXPECT_EQ(pairs[1].label, "C");
  EXPECT_EQ(pairs[1].key, (std::vector<double>{1, 2, 3, 4}));
}

TEST_F(DumpTest, MissingFileIsIoError) {
  try {
    read_dump(dir_ / "nope.jsonl");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kIoError);
  }
}

}  // namespace
}  // namespace rtd
