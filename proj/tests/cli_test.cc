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
#include <json.hpp>
#include <sstream>

#include "cli.h"
#include "rtd/dump.h"

namespace rtd {
namespace {

namespace fs = std::filesystem;

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args) {
  args.insert(args.begin(), "rtd");
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

class CliTest : public ::testing::Test {
 protected:
  fs::path dir_ = fs::temp_directory_path() / "rtd_cli_test";
  void SetUp() override {
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  std::string at(const std::string& name) const { return (dir_ / name).string(); }
  void write(const std::string& name, const std::string& text) const { std::ofstream(dir_ / name) << text; }

  void toy_store() {
    write("toy.jsonl",
          "{\"id\":\"0\",\"hidden_state\":[0],\"gold\":\"A\",\"candidates\":[\"A\",\"B\"]}\n"
          "{\"id\":\"1\",\"hidden_state\":[1],\"gold\":\"B\",\"candidates\":[\"A\",\"B\"]}\n");
    ASSERT_EQ(run({"build", "--input", at("toy.jsonl"), "--output", at("toy.rtds")}).code, 0);
    write("zero.json", "[0]");
  }
};

TEST_F(CliTest, BuildHappyPathAndErrors) {
  ASSERT_EQ(run({"synth", "--classes", "4", "--dim", "4", "--per-class", "25", "--queries-per-class", "1",
                 "--output-prefix", at("s")})
                .code,
            0);
  auto r = run({"build", "--input", at("s.store.jsonl"), "--output", at("s.rtds")});
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("size=100"), std::string::npos) << r.out;

  r = run({"build", "--input", at("s.store.jsonl"), "--output", at("s3.rtds"), "--heads", "3"});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("divide"), std::string::npos) << r.err;

  write("cut.jsonl",
        "{\"id\":\"0\",\"hidden_state\":[0],\"gold\":\"A\",\"candidates\":[\"A\"]}\n{\"id\":\"1\",\"hidden_");
  r = run({"build", "--input", at("cut.jsonl"), "--output", at("cut.rtds")});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("line 2"), std::string::npos) << r.err;

  EXPECT_EQ(run({"build", "--input", at("missing.jsonl"), "--output", at("x.rtds")}).code, 2);
  EXPECT_EQ(run({"build"}).code, 1);
  EXPECT_EQ(run({"frobnicate"}).code, 1);
}

TEST_F(CliTest, QueryToyStore) {
  toy_store();
  const auto r = run({"query", "--store", at("toy.rtds"), "--vector", at("zero.json"), "--k", "2", "--temp", "1"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = nlohmann::ordered_json::parse(r.out);
  ASSERT_EQ(j.size(), 2u);
  EXPECT_EQ(j.begin().key(), "A");
  EXPECT_NEAR(j["A"].get<double>(), 0.7311, 5e-5);
  EXPECT_NEAR(j["B"].get<double>(), 0.2689, 5e-5);
}

TEST_F(CliTest, LambdaZeroReturnsBaseline) {
  toy_store();
  write("base.json", "{\"space\":\"labels\",\"probs\":[0.3,0.7]}");
  const auto r = run({"query", "--store", at("toy.rtds"), "--vector", at("zero.json"), "--k", "2", "--temp", "1",
                      "--lambda", "0", "--baseline", at("base.json")});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = nlohmann::json::parse(r.out);
  EXPECT_EQ(j["fused"]["A"].get<double>(), 0.3);
  EXPECT_EQ(j["fused"]["B"].get<double>(), 0.7);
  EXPECT_EQ(j["fused"], j["baseline"]);
}

TEST_F(CliTest, QueryErrors) {
  toy_store();
  EXPECT_EQ(run({"query", "--store", at("toy.rtds"), "--vector", at("zero.json"), "--heads-keep", ""}).code, 1);
  EXPECT_EQ(run({"query", "--store", at("toy.rtds"), "--vector", at("zero.json"), "--temp", "0"}).code, 1);
  write("two.json", "[0, 1]");
  EXPECT_EQ(run({"query", "--store", at("toy.rtds"), "--vector", at("two.json")}).code, 2);

  std::string bytes = slurp(at("toy.rtds"));
  bytes[0] = 'X';
  std::ofstream(dir_ / "bad.rtds", std::ios::binary) << bytes;
  EXPECT_EQ(run({"query", "--store", at("bad.rtds"), "--vector", at("zero.json")}).code, 2);
  std::ofstream(dir_ / "short.rtds", std::ios::binary) << slurp(at("toy.rtds")).substr(0, 20);
  EXPECT_EQ(run({"query", "--store", at("short.rtds"), "--vector", at("zero.json")}).code, 2);
}

TEST_F(CliTest, SynthIsDeterministic) {
  for (const char* p : {"a", "b"}) {
    ASSERT_EQ(run({"synth", "--classes", "4", "--dim", "128", "--per-class", "64", "--seed", "7", "--output-prefix",
                   at(p)})
                  .code,
              0);
  }
  EXPECT_EQ(slurp(at("a.store.jsonl")), slurp(at("b.store.jsonl")));
  EXPECT_EQ(slurp(at("a.eval.jsonl")), slurp(at("b.eval.jsonl")));
  EXPECT_EQ(slurp(at("a.eval.manifest.json")), slurp(at("b.eval.manifest.json")));
}

TEST_F(CliTest, EvalAndSweepOnZeroNoise) {
  ASSERT_EQ(run({"synth", "--noise", "0", "--per-class", "32", "--queries-per-class", "10", "--output-prefix",
                 at("z")})
                .code,
            0);
  ASSERT_EQ(run({"build", "--input", at("z.store.jsonl"), "--output", at("z.rtds")}).code, 0);
  auto r = run({"eval", "--store", at("z.rtds"), "--dump", at("z.eval.jsonl"), "--k", "16", "--json"});
  ASSERT_EQ(r.code, 0) << r.err;
  auto j = nlohmann::json::parse(r.out);
  EXPECT_EQ(j["accuracy"].get<double>(), 1.0);
  EXPECT_EQ(j["n"].get<int>(), 40);

  r = run({"sweep", "--store", at("z.rtds"), "--dump", at("z.eval.jsonl"), "--grid-k", "1,16,256", "--json"});
  ASSERT_EQ(r.code, 0) << r.err;
  j = nlohmann::json::parse(r.out);
  EXPECT_EQ(j.size(), 3u);
  r = run({"sweep", "--store", at("z.rtds"), "--dump", at("z.eval.jsonl"), "--grid-k", "1,16,256"});
  ASSERT_EQ(r.code, 0);
  EXPECT_EQ(std::count(r.out.begin(), r.out.end(), '\n'), 4);  // header + 3 rows

  EXPECT_EQ(run({"eval", "--store", at("z.rtds"), "--dump", at("z.eval.jsonl"), "--mode", "baseline"}).code, 2);
}

TEST_F(CliTest, IndexedQueryMatchesLibraryPath) {
  ASSERT_EQ(run({"synth", "--dim", "8", "--per-class", "50", "--queries-per-class", "2", "--output-prefix", at("i")})
                .code,
            0);
  ASSERT_EQ(run({"build", "--input", at("i.store.jsonl"), "--output", at("i.rtds")}).code, 0);
  ASSERT_EQ(run({"index", "--store", at("i.rtds"), "--output", at("i.rtix"), "--lists", "4"}).code, 0);
  write("q.json", "[0,0,0,0,0,0,0,0]");
  const auto exact = run({"query", "--store", at("i.rtds"), "--vector", at("q.json"), "--k", "8"});
  const auto approx = run({"query", "--store", at("i.rtds"), "--vector", at("q.json"), "--k", "8", "--index",
                           at("i.rtix"), "--nprobe", "4"});
  ASSERT_EQ(approx.code, 0) << approx.err;
  EXPECT_EQ(exact.out, approx.out);
}

}  // namespace
}  // namespace rtd
