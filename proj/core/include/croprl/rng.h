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

#ifndef CROPRL_RNG_H_
#define CROPRL_RNG_H_

#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace croprl {

using Rng = std::mt19937_64;

// 64-bit FNV-1a over the bytes of `text`.
std::uint64_t Fnv1a64(std::string_view text);

// splitmix64 finalizer; a bijective mixer on 64-bit words.
std::uint64_t Mix64(std::uint64_t x);

// Derives independent, named child streams from one root seed. Requesting the
// same (name, index) twice yields the same stream, so toggling one consumer
// never shifts the draws of another.
class RngStreams {
 public:
  explicit RngStreams(std::uint64_t root_seed) : root_(root_seed) {}

  std::uint64_t root_seed() const { return root_; }

  std::uint64_t DeriveSeed(std::string_view name, std::uint64_t index = 0);
  Rng Stream(std::string_view name, std::uint64_t index = 0) {
    return Rng(DeriveSeed(name, index));
  }

  // Every (name, index, seed) handed out, in request order. Only the first
  // request of each name is logged to keep per-episode streams compact.
  const std::vector<std::pair<std::string, std::uint64_t>>& audit_log() const {
    return audit_;
  }

 private:
  std::uint64_t root_;
  std::vector<std::pair<std::string, std::uint64_t>> audit_;
};

// Stateless variant for call sites that do not own an audit log.
std::uint64_t DeriveSeed(std::uint64_t root, std::string_view name,
                         std::uint64_t index = 0);

}  // namespace croprl

#endif  // CROPRL_RNG_H_
