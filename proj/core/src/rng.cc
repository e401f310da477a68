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

#include "croprl/rng.h"

#include <algorithm>

namespace croprl {

std::uint64_t Fnv1a64(std::string_view text) {
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    hash ^= c;
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

std::uint64_t Mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t DeriveSeed(std::uint64_t root, std::string_view name,
                         std::uint64_t index) {
  return Mix64(Mix64(root) ^ Fnv1a64(name) ^ Mix64(index + 0x5851f42d4c957f2dULL));
}

std::uint64_t RngStreams::DeriveSeed(std::string_view name,
                                     std::uint64_t index) {
  const std::uint64_t seed = croprl::DeriveSeed(root_, name, index);
  const bool seen = std::any_of(audit_.begin(), audit_.end(), [&](const auto& e) {
    return e.first == name;
  });
  if (!seen) audit_.emplace_back(std::string(name), seed);
  return seed;
}

}  // namespace croprl
