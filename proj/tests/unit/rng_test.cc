// Copyright 2026 The CropRL Authors
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


#include <set>

#include <gtest/gtest.h>

#include "croprl/rng.h"

namespace croprl {
namespace {

TEST(RngTest, Fnv1aReferenceValues) {
  EXPECT_EQ(Fnv1a64(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(Fnv1a64("a"), 0xaf63dc4c8601ec8cULL);
}

TEST(RngTest, DerivedSeedsAreStableAndDistinct) {
  EXPECT_EQ(DeriveSeed(42, "policy.init"), DeriveSeed(42, "policy.init"));
  std::set<std::uint64_t> seen;
  for (std::uint64_t root : {42ULL, 123ULL}) {
    for (const char* name : {"policy.init", "rnd.target", "noise.temperature"}) {
      for (std::uint64_t i = 0; i < 50; ++i) seen.insert(DeriveSeed(root, name, i));
    }
  }
  EXPECT_EQ(seen.size(), 2u * 3u * 50u);
}

TEST(RngTest, StreamsMatchFreeFunctionAndLogFirstRequestOnly) {
  RngStreams streams(7);
  EXPECT_EQ(streams.DeriveSeed("env", 0), DeriveSeed(7, "env", 0));
  Rng a = streams.Stream("env", 3);
  Rng b(DeriveSeed(7, "env", 3));
  EXPECT_EQ(a(), b());
  streams.DeriveSeed("other");
  ASSERT_EQ(streams.audit_log().size(), 2u);
  EXPECT_EQ(streams.audit_log()[0].first, "env");
  EXPECT_EQ(streams.audit_log()[1].first, "other");
}

TEST(RngTest, Mix64IsBijectiveOnSample) {
  std::set<std::uint64_t> out;
  for (std::uint64_t x = 0; x < 10000; ++x) out.insert(Mix64(x));
  EXPECT_EQ(out.size(), 10000u);
  EXPECT_NE(Mix64(1), 1u);
}

}  // namespace
}  // namespace croprl
