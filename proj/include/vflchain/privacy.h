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

// Renyi-DP accounting for the training loop. One iteration releases a noisy
// P-dimensional embedding per sample and costs C0 * P * b * beta^2 * alpha;
// clients hold disjoint features so the per-iteration cost does not grow with
// the number of clients. Each sample is used at rate B/N per iteration, giving
// a total of C0 * T * B * P * b * beta^2 * alpha / N after T iterations.

#ifndef VFLCHAIN_PRIVACY_H_
#define VFLCHAIN_PRIVACY_H_

#include <cstdint>

namespace vflchain {

struct RdpQuery {
  double alpha = 2.0;            // Renyi order, > 1
  std::int64_t iterations = 0;   // T, minibatch rounds (not epochs)
  std::int64_t batch_size = 10;  // B
  std::int64_t embedding_dim = 16;  // P
  std::int64_t num_samples = 1;  // N, training samples
  std::int64_t b = 16;
  double beta = 0.1;
  double c0 = 1.0;  // universal constant of the bound

  void Validate() const;
};

struct RdpBudget {
  double alpha = 0.0;
  double epsilon = 0.0;
  double epsilon_over_c0 = 0.0;
  double per_round_epsilon = 0.0;
  double sampling_rate = 0.0;  // B / N
  std::int64_t iterations = 0;
};

double PerRoundEpsilon(const RdpQuery& query);

// epsilon == PerRoundEpsilon(query) * T * B / N, evaluated in that order.
RdpBudget TotalEpsilon(const RdpQuery& query);

// Standard conversion: epsilon_rdp + log(1/delta) / (alpha - 1).
double RdpToDp(double alpha, double epsilon_rdp, double delta);

// T = epochs * ceil(n_train / batch_size).
std::int64_t IterationsForEpochs(std::int64_t epochs, std::int64_t n_train,
                                 std::int64_t batch_size);

}  // namespace vflchain

#endif  // VFLCHAIN_PRIVACY_H_
