// Copyright 2026 The vflchain Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef VFLCHAIN_RNG_H_
#define VFLCHAIN_RNG_H_

#include <cstdint>
#include <initializer_list>
#include <random>

namespace vflchain {

// Tags separating the independent random streams drawn from one experiment
// seed. Values are part of the reproducibility contract; do not renumber.
enum class StreamPurpose : std::uint64_t {
  kModelInit = 1,
  kPbmTrain = 2,
  kPbmEval = 3,
  kMinibatch = 4,
  kLabelPartition = 5,
  kSplit = 6,
};

// SplitMix64 finalizer; used to fold stream coordinates into a seed.
std::uint64_t mix64(std::uint64_t x);

// Deterministic 64-bit stream backed by std::mt19937_64. Every helper below is
// defined on top of raw 64-bit draws so results do not depend on the standard
// library's distribution implementations.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed) : engine_(seed) {}

  // Stream for (seed, purpose, path...), e.g. (seed, kPbmTrain, client, round).
  static RandomStream Derive(std::uint64_t seed, StreamPurpose purpose,
                             std::initializer_list<std::uint64_t> path = {});

  std::uint64_t NextU64() { return engine_(); }

  // Uniform in [0, 1) with 53 bits of resolution.
  double Uniform();
  double Uniform(double lo, double hi) { return lo + (hi - lo) * Uniform(); }

  // Uniform integer in [0, n); n must be positive.
  std::uint64_t Below(std::uint64_t n);

  bool Bernoulli(double p) { return Uniform() < p; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace vflchain

#endif  // VFLCHAIN_RNG_H_
