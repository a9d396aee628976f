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

#include "vflchain/privacy.h"

#include <cmath>
#include <string>

#include "vflchain/errors.h"

namespace vflchain {
namespace {

void RequirePositive(std::int64_t v, const char* name) {
  if (v < 1) {
    throw ValidationError(std::string("privacy query: ") + name +
                          " must be >= 1, got " + std::to_string(v));
  }
}

}  // namespace

void RdpQuery::Validate() const {
  if (!(alpha > 1.0) || !std::isfinite(alpha)) {
    throw ValidationError("privacy query: alpha must be a finite value > 1, got " +
                          std::to_string(alpha));
  }
  if (iterations < 0) {
    throw ValidationError("privacy query: iterations must be >= 0");
  }
  RequirePositive(batch_size, "batch size B");
  RequirePositive(embedding_dim, "embedding dimension P");
  RequirePositive(num_samples, "sample count N");
  RequirePositive(b, "PBM b");
  if (batch_size > num_samples) {
    throw ValidationError("privacy query: batch size B exceeds sample count N");
  }
  if (!(beta > 0.0 && beta <= 0.25)) {
    throw ValidationError("privacy query: beta must lie in (0, 1/4], got " +
                          std::to_string(beta));
  }
  if (!(c0 > 0.0) || !std::isfinite(c0)) {
    throw ValidationError("privacy query: C0 must be positive");
  }
}

double PerRoundEpsilon(const RdpQuery& query) {
  query.Validate();
  return query.c0 * static_cast<double>(query.embedding_dim) *
         static_cast<double>(query.b) * query.beta * query.beta * query.alpha;
}

RdpBudget TotalEpsilon(const RdpQuery& query) {
  RdpBudget budget;
  budget.alpha = query.alpha;
  budget.per_round_epsilon = PerRoundEpsilon(query);
  budget.iterations = query.iterations;
  budget.sampling_rate = static_cast<double>(query.batch_size) /
                         static_cast<double>(query.num_samples);
  budget.epsilon = budget.per_round_epsilon *
                   static_cast<double>(query.iterations) *
                   static_cast<double>(query.batch_size) /
                   static_cast<double>(query.num_samples);
  budget.epsilon_over_c0 = budget.epsilon / query.c0;
  return budget;
}

double RdpToDp(double alpha, double epsilon_rdp, double delta) {
  if (!(alpha > 1.0) || !std::isfinite(alpha)) {
    throw ValidationError("RdpToDp: alpha must be > 1");
  }
  if (!(delta > 0.0 && delta < 1.0)) {
    throw ValidationError("RdpToDp: delta must lie in (0, 1), got " +
                          std::to_string(delta));
  }
  if (!(epsilon_rdp >= 0.0)) throw ValidationError("RdpToDp: epsilon must be >= 0");
  return epsilon_rdp + std::log(1.0 / delta) / (alpha - 1.0);
}

std::int64_t IterationsForEpochs(std::int64_t epochs, std::int64_t n_train,
                                 std::int64_t batch_size) {
  if (epochs < 0) throw ValidationError("epochs must be >= 0");
  RequirePositive(n_train, "training sample count");
  RequirePositive(batch_size, "batch size");
  return epochs * ((n_train + batch_size - 1) / batch_size);
}

}  // namespace vflchain
