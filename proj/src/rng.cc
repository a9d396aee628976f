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

#include "vflchain/rng.h"

#include <stdexcept>

namespace vflchain {

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

RandomStream RandomStream::Derive(std::uint64_t seed, StreamPurpose purpose,
                                  std::initializer_list<std::uint64_t> path) {
  std::uint64_t state = mix64(seed);
  state = mix64(state ^ static_cast<std::uint64_t>(purpose));
  for (std::uint64_t p : path) state = mix64(state ^ mix64(p));
  return RandomStream(state);
}

double RandomStream::Uniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

std::uint64_t RandomStream::Below(std::uint64_t n) {
  if (n == 0) throw std::invalid_argument("RandomStream::Below: n must be > 0");
  // Rejection keeps the draw unbiased for every n.
  const std::uint64_t limit = -n % n;  // == 2^64 mod n
  std::uint64_t r;
  do {
    r = engine_();
  } while (r < limit);
  return r % n;
}

}  // namespace vflchain
