// Copyright 2026 The fairrank Authors
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

#include "fairrank/util.h"

#include <gtest/gtest.h>

#include <atomic>
#include <cmath>
#include <filesystem>
#include <limits>
#include <set>

#include "fairrank/error.h"

namespace fairrank {
namespace {

TEST(FormatDoubleTest, RoundTripsShortest) {
  EXPECT_EQ(FormatDouble(0.1), "0.1");
  EXPECT_EQ(FormatDouble(1.0), "1");
  EXPECT_EQ(FormatDouble(-2.5e-12), "-2.5e-12");
  EXPECT_EQ(FormatDouble(std::numeric_limits<double>::infinity()), "inf");
  EXPECT_EQ(FormatDouble(-std::numeric_limits<double>::infinity()), "-inf");
  Rng rng(7);
  for (int t = 0; t < 1000; ++t) {
    const double x = (UniformUnit(rng) - 0.5) * std::pow(10.0, t % 40 - 20);
    EXPECT_EQ(ParseDouble(FormatDouble(x), "x"), x);
  }
}

TEST(ParseTest, RejectsGarbage) {
  EXPECT_THROW(ParseDouble("1.5x", "v"), Error);
  EXPECT_THROW(ParseDouble("", "v"), Error);
  EXPECT_THROW(ParseInt("3.0", "v"), Error);
  EXPECT_EQ(ParseInt("-42", "v"), -42);
  EXPECT_TRUE(std::isinf(ParseDouble("inf", "v")));
}

TEST(SplitFieldsTest, TabAndBlankRuns) {
  auto tab = SplitFields("a\tb\t\tc", '\t');
  ASSERT_EQ(tab.size(), 4u);
  EXPECT_EQ(tab[2], "");
  auto space = SplitFields("  a  b\t c ", ' ');
  ASSERT_EQ(space.size(), 3u);
  EXPECT_EQ(space[0], "a");
  EXPECT_EQ(space[2], "c");
}

TEST(CompensatedSumTest, RecoversCancellation) {
  CompensatedSum s;
  s.Add(1e16);
  s.Add(1.0);
  s.Add(-1e16);
  EXPECT_EQ(s.Value(), 1.0);
}

TEST(RngTest, UniformIndexCoversRange) {
  Rng rng(3);
  std::set<uint64_t> seen;
  for (int t = 0; t < 2000; ++t) {
    const uint64_t v = UniformIndex(rng, 7);
    ASSERT_LT(v, 7u);
    seen.insert(v);
  }
  EXPECT_EQ(seen.size(), 7u);
}

TEST(RngTest, ShuffleIsPermutationAndSeeded) {
  std::vector<int> a(50), b;
  for (int i = 0; i < 50; ++i) a[i] = i;
  b = a;
  Rng r1(11), r2(11);
  Shuffle(a, r1);
  Shuffle(b, r2);
  EXPECT_EQ(a, b);
  std::set<int> s(a.begin(), a.end());
  EXPECT_EQ(s.size(), 50u);
}

TEST(ParallelForTest, VisitsEveryIndexOnce) {
  for (int threads : {1, 3, 16}) {
    std::vector<std::atomic<int>> hits(101);
    ParallelFor(hits.size(), threads, [&](size_t i) { hits[i]++; });
    for (auto& h : hits) EXPECT_EQ(h.load(), 1);
  }
}

TEST(DigestTest, StableAndSensitive) {
  EXPECT_EQ(Digest("abc"), Digest("abc"));
  EXPECT_NE(Digest("abc"), Digest("abd"));
  EXPECT_EQ(Digest("").size(), 16u);
}

TEST(FileTest, AtomicWriteThenRead) {
  const auto dir = std::filesystem::temp_directory_path() / "fairrank_util_test";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  WriteFileAtomic(dir / "a.txt", "hello\n");
  WriteFileAtomic(dir / "a.txt", "world\n");
  EXPECT_EQ(ReadFile(dir / "a.txt"), "world\n");
  EXPECT_THROW(ReadFile(dir / "missing.txt"), Error);
  std::filesystem::remove_all(dir);
}

TEST(ErrorTest, ExitCodes) {
  EXPECT_EQ(ExitCodeFor(ErrorCode::kConfig), 2);
  EXPECT_EQ(ExitCodeFor(ErrorCode::kParse), 3);
  EXPECT_EQ(ExitCodeFor(ErrorCode::kInfeasibleEpsilon), 4);
  EXPECT_EQ(ExitCodeFor(ErrorCode::kInternal), 5);
}

}  // namespace
}  // namespace fairrank
